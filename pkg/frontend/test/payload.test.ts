/** Annotation payload construction tests. */

import { describe, expect, it } from 'vitest';
import { buildAnnotationPayload } from '../src/payload.js';
import type { AnnotationDraft } from '../src/payload.js';
import { rasterizeStrokes } from '../src/raster.js';
import type { Stroke } from '../src/raster.js';

function draft(overrides: Partial<AnnotationDraft>): AnnotationDraft {
  return {
    imageIndex: 0,
    fgStrokes: [],
    bgStrokes: [],
    box: null,
    looseness: 0,
    width: 48,
    height: 48,
    ...overrides,
  };
}

const FG: Stroke[] = [{ points: [[10, 10], [20, 12]], radius: 2 }];
const BG: Stroke[] = [{ points: [[40, 40]], radius: 1 }];

describe('buildAnnotationPayload', () => {
  it('posts scribble mode for foreground-only strokes', () => {
    const payload = buildAnnotationPayload(draft({ fgStrokes: FG }));
    expect(payload.mode).toBe('scribble');
    expect(payload.image_index).toBe(0);
    expect(payload.fg).toEqual(rasterizeStrokes(FG, 48, 48));
    expect(payload.bg).toBeUndefined();
    expect(payload.box).toBeUndefined();
    expect(payload.looseness).toBeUndefined();
  });

  it('posts the error-tolerant mode when background strokes exist', () => {
    const payload = buildAnnotationPayload(draft({ fgStrokes: FG, bgStrokes: BG }));
    expect(payload.mode).toBe('scribble-et');
    expect(payload.fg).toEqual(rasterizeStrokes(FG, 48, 48));
    expect(payload.bg).toEqual(rasterizeStrokes(BG, 48, 48));
  });

  it('a box outranks strokes and carries looseness only when positive', () => {
    const withBox = draft({
      fgStrokes: FG,
      box: { x0: 5, y0: 6, x1: 20, y1: 22 },
      looseness: 120,
    });
    const payload = buildAnnotationPayload(withBox);
    expect(payload.mode).toBe('bbox');
    expect(payload.box).toEqual([5, 6, 20, 22]);
    expect(payload.looseness).toBe(120);
    expect(payload.fg).toBeUndefined();

    const tight = buildAnnotationPayload(draft({ box: { x0: 5, y0: 6, x1: 20, y1: 22 } }));
    expect(tight.looseness).toBeUndefined();
  });

  it('is a pure function of the draft', () => {
    const d = draft({ fgStrokes: FG, bgStrokes: BG });
    const a = buildAnnotationPayload(d);
    const b = buildAnnotationPayload(d);
    expect(b).toEqual(a);
    expect(JSON.stringify(b)).toBe(JSON.stringify(a));
  });

  it('refuses an empty draft', () => {
    expect(() => buildAnnotationPayload(draft({}))).toThrow(
      'draw a foreground stroke or a box first',
    );
  });

  it('refuses background-only strokes', () => {
    expect(() => buildAnnotationPayload(draft({ bgStrokes: BG }))).toThrow(
      'draw a foreground stroke or a box first',
    );
  });
});
