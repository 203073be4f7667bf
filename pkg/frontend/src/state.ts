/**
 * Client-side session state: per-image annotation drafts, the append-only
 * history timeline, and the mask store.
 *
 * Masks are only ever copied out of service responses; nothing in this
 * module (or anywhere else in the client) computes one.
 */

import type { Box, Stroke } from './raster.js';
import type { AnnotationResponse, CosegResponse, HistoryEntry } from './types.js';

export interface StoredMask {
  /** Image the mask belongs to. */
  image: number;
  shape: [number, number];
  runs: number[];
}

export interface Draft {
  fgStrokes: Stroke[];
  bgStrokes: Stroke[];
  box: Box | null;
}

function emptyDraft(): Draft {
  return { fgStrokes: [], bgStrokes: [], box: null };
}

export class SessionState {
  sessionId = '';
  /** [rows, cols] per image, from the session view. */
  imageShapes: Array<[number, number]> = [];
  activeImage = 0;
  looseness = 0;

  /** Local mirror of the service's append-only history. */
  history: HistoryEntry[] = [];
  /** Masks per history entry (one for annotations, one per image for coseg). */
  private masksByHistory = new Map<number, StoredMask[]>();
  /** null renders the latest state; a number browses a past entry. */
  selectedHistory: number | null = null;

  private drafts = new Map<number, Draft>();

  beginSession(id: string, shapes: Array<[number, number]>): void {
    this.sessionId = id;
    this.imageShapes = shapes;
    this.activeImage = 0;
    this.looseness = 0;
    this.history = [];
    this.masksByHistory.clear();
    this.selectedHistory = null;
    this.drafts.clear();
  }

  get imageCount(): number {
    return this.imageShapes.length;
  }

  /** Width of one image (columns). */
  widthOf(image: number): number {
    return this.imageShapes[image]?.[1] ?? 0;
  }

  /** Height of one image (rows). */
  heightOf(image: number): number {
    return this.imageShapes[image]?.[0] ?? 0;
  }

  draft(image: number = this.activeImage): Draft {
    let d = this.drafts.get(image);
    if (!d) {
      d = emptyDraft();
      this.drafts.set(image, d);
    }
    return d;
  }

  clearDraft(image: number = this.activeImage): void {
    this.drafts.set(image, emptyDraft());
  }

  /** Images that currently carry at least one stroke of either class. */
  scribbledImages(): number[] {
    const out: number[] = [];
    for (const [image, d] of this.drafts) {
      if (d.fgStrokes.length > 0 || d.bgStrokes.length > 0) out.push(image);
    }
    return out.sort((a, b) => a - b);
  }

  recordAnnotation(request: unknown, response: AnnotationResponse): HistoryEntry {
    const entry: HistoryEntry = {
      index: this.history.length,
      kind: 'annotation',
      request,
      image_index: response.image_index,
      mode: response.mode,
      selected_regions: response.selected_regions,
    };
    this.history.push(entry);
    this.masksByHistory.set(entry.index, [
      { image: response.image_index, shape: response.shape, runs: response.mask_rle },
    ]);
    this.selectedHistory = null;
    return entry;
  }

  recordCoseg(response: CosegResponse): HistoryEntry {
    const entry: HistoryEntry = {
      index: this.history.length,
      kind: 'coseg',
      mode: response.mode,
    };
    this.history.push(entry);
    this.masksByHistory.set(
      entry.index,
      response.masks.map((m, image) => ({ image, shape: m.shape, runs: m.mask_rle })),
    );
    this.selectedHistory = null;
    return entry;
  }

  /**
   * Stored masks for one history entry. Selection is purely local: browsing
   * the timeline re-renders saved responses and never re-solves.
   */
  selectHistory(index: number): StoredMask[] {
    if (!this.masksByHistory.has(index)) throw new Error(`no history entry ${index}`);
    this.selectedHistory = index;
    return this.masksByHistory.get(index)!;
  }

  /** Back to the live view: masks of the newest entry, if any. */
  selectLatest(): StoredMask[] {
    this.selectedHistory = null;
    if (this.history.length === 0) return [];
    return this.masksByHistory.get(this.history.length - 1) ?? [];
  }
}
