/** JSON shapes exchanged with the session service. */

/** [x, y] pixel coordinate, origin at the top-left corner. */
export type Pixel = [number, number];

export interface SessionConfig {
  superpixels?: string;
  sigma?: string;
  texture?: boolean;
  seed?: number;
  tol?: number;
  max_iters?: number;
}

export interface CreateSessionRequest {
  /** Base64-encoded PNG payloads, one per image. */
  images: string[];
  config?: SessionConfig;
  /** Optional base64 single-channel label PNGs, one per image. */
  superpixel_maps?: string[];
}

export interface MaskPayload {
  /** [rows, cols] of the boolean mask. */
  shape: [number, number];
  mask_png_base64: string;
  /** Alternating run lengths, background run first. */
  mask_rle: number[];
}

export interface ClusterInfo {
  support: number[];
  payoff: number;
  kkt: number;
}

export interface AnnotationResponse extends MaskPayload {
  image_index: number;
  mode: string;
  constraints: number[];
  selected_regions: number[];
  discarded_clusters: number[];
  all_discarded: boolean;
  clusters: ClusterInfo[];
}

export interface HistoryEntry {
  index: number;
  kind: 'annotation' | 'coseg';
  request?: unknown;
  image_index?: number;
  mode?: string;
  selected_regions?: number[];
}

export interface SessionView {
  id: string;
  image_count: number;
  /** [rows, cols] per image. */
  image_shapes: Array<[number, number]>;
  config: Record<string, unknown>;
  coseg_capable: boolean;
  history: HistoryEntry[];
  masks_available: number[];
}

export interface CosegScribble {
  image: number;
  fg: Pixel[];
  bg: Pixel[];
}

export interface CosegResponse {
  mode: 'coseg-unsupervised' | 'coseg-interactive';
  empty: boolean;
  foreground_regions: number[][];
  masks: MaskPayload[];
}
