/** Mask run-length decoding and overlay pixel buffers. */

/**
 * Decode alternating run lengths (background run first) into a flat 0/1
 * row-major mask. A mask whose first pixel is set arrives with a leading
 * zero-length background run.
 */
export function decodeRle(runs: number[], shape: [number, number]): Uint8Array {
  const [rows, cols] = shape;
  const total = rows * cols;
  let sum = 0;
  for (const run of runs) sum += run;
  if (sum !== total) throw new Error('run-length data does not match mask shape');
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (value) out.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  return out;
}

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

/** Plain RGBA buffer; the DOM layer wraps it in ImageData for the canvas. */
export interface OverlayBuffer {
  width: number;
  height: number;
  data: Uint8ClampedArray<ArrayBuffer>;
}

/** RGBA overlay: `opacity` alpha on mask pixels, fully transparent elsewhere. */
export function maskOverlay(
  mask: Uint8Array,
  shape: [number, number],
  color: Rgb,
  opacity: number,
): OverlayBuffer {
  const [rows, cols] = shape;
  const data = new Uint8ClampedArray(rows * cols * 4);
  const alpha = Math.round(opacity * 255);
  for (let i = 0; i < mask.length; i++) {
    if (!mask[i]) continue;
    data[i * 4] = color.r;
    data[i * 4 + 1] = color.g;
    data[i * 4 + 2] = color.b;
    data[i * 4 + 3] = alpha;
  }
  return { width: cols, height: rows, data };
}

/** Count of set pixels, for status readouts. */
export function maskArea(mask: Uint8Array): number {
  let n = 0;
  for (let i = 0; i < mask.length; i++) n += mask[i];
  return n;
}
