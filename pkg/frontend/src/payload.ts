/**
 * Annotation payload construction.
 *
 * Pure: the same strokes, box, and slider value always produce the same
 * body, because rasterization is deterministic and key layout is fixed
 * here. The client never sends anything mask-like; only pixel lists and
 * box corners.
 */

import type { Box, Stroke } from './raster.js';
import { rasterizeStrokes } from './raster.js';
import type { Pixel } from './types.js';

export interface AnnotationDraft {
  imageIndex: number;
  fgStrokes: Stroke[];
  bgStrokes: Stroke[];
  box: Box | null;
  looseness: number;
  /** Image size in pixels; strokes are clipped to it. */
  width: number;
  height: number;
}

export interface AnnotationPayload {
  image_index: number;
  mode: 'scribble' | 'scribble-et' | 'bbox';
  fg?: Pixel[];
  bg?: Pixel[];
  box?: [number, number, number, number];
  looseness?: number;
}

/**
 * A box outranks strokes (the tools are exclusive in the UI); foreground
 * strokes alone post scribble mode, foreground plus background strokes post
 * the error-tolerant variant.
 */
export function buildAnnotationPayload(draft: AnnotationDraft): AnnotationPayload {
  if (draft.box) {
    const b = draft.box;
    const payload: AnnotationPayload = {
      image_index: draft.imageIndex,
      mode: 'bbox',
      box: [b.x0, b.y0, b.x1, b.y1],
    };
    if (draft.looseness > 0) payload.looseness = draft.looseness;
    return payload;
  }
  const fg = rasterizeStrokes(draft.fgStrokes, draft.width, draft.height);
  if (fg.length === 0) throw new Error('draw a foreground stroke or a box first');
  const bg = rasterizeStrokes(draft.bgStrokes, draft.width, draft.height);
  if (bg.length > 0) {
    return { image_index: draft.imageIndex, mode: 'scribble-et', fg, bg };
  }
  return { image_index: draft.imageIndex, mode: 'scribble', fg };
}
