/**
 * Deterministic brush rasterization and the box-dilation preview.
 *
 * A stroke is a polyline plus a brush radius; its pixels are the union of
 * filled disks stamped at integer centers along every segment. The service
 * receives these pixel lists verbatim, so the walk order and deduplication
 * rules in this file define the posted payload exactly.
 */

import type { Pixel } from './types.js';

export interface Stroke {
  /** Polyline vertices in image pixel units (may be fractional). */
  points: Array<[number, number]>;
  /** Brush radius in pixels, >= 1. */
  radius: number;
}

export interface Box {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Offsets (dx, dy) of the filled disk dx^2 + dy^2 <= radius^2, row-major. */
export function diskOffsets(radius: number): Pixel[] {
  const reach = Math.ceil(radius);
  const out: Pixel[] = [];
  for (let dy = -reach; dy <= reach; dy++) {
    for (let dx = -reach; dx <= reach; dx++) {
      if (dx * dx + dy * dy <= radius * radius) out.push([dx, dy]);
    }
  }
  return out;
}

/**
 * Pixels covered by one stroke, clipped to the image, deduplicated in
 * first-visit order. Disk centers walk each segment between the rounded
 * vertices with max(|dx|, |dy|) evenly spaced steps, so consecutive centers
 * are always neighbors and the sweep has no gaps.
 */
export function rasterizeStroke(stroke: Stroke, width: number, height: number): Pixel[] {
  if (stroke.radius < 1) throw new Error('brush radius must be >= 1');
  if (stroke.points.length === 0) return [];
  const offsets = diskOffsets(stroke.radius);
  const seen = new Set<number>();
  const out: Pixel[] = [];
  const stamp = (cx: number, cy: number) => {
    for (const [dx, dy] of offsets) {
      const x = cx + dx;
      const y = cy + dy;
      if (x < 0 || y < 0 || x >= width || y >= height) continue;
      const key = y * width + x;
      if (!seen.has(key)) {
        seen.add(key);
        out.push([x, y]);
      }
    }
  };
  let px = Math.round(stroke.points[0][0]);
  let py = Math.round(stroke.points[0][1]);
  stamp(px, py);
  for (let i = 1; i < stroke.points.length; i++) {
    const qx = Math.round(stroke.points[i][0]);
    const qy = Math.round(stroke.points[i][1]);
    const steps = Math.max(Math.abs(qx - px), Math.abs(qy - py));
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stamp(Math.round(px + t * (qx - px)), Math.round(py + t * (qy - py)));
    }
    px = qx;
    py = qy;
  }
  return out;
}

/** Union of several strokes, deduplicated across strokes in first-visit order. */
export function rasterizeStrokes(strokes: Stroke[], width: number, height: number): Pixel[] {
  const seen = new Set<number>();
  const out: Pixel[] = [];
  for (const stroke of strokes) {
    for (const [x, y] of rasterizeStroke(stroke, width, height)) {
      const key = y * width + x;
      if (!seen.has(key)) {
        seen.add(key);
        out.push([x, y]);
      }
    }
  }
  return out;
}

// round half away from zero; growth is nonnegative here
function roundHalfUp(v: number): number {
  return Math.floor(v + 0.5);
}

/**
 * Preview of the service's box dilation: area scales by (1 + looseness/100),
 * each axis grows by round(side * (sqrt(1 + L/100) - 1) / 2) per side, and
 * the result clips to the image. Kept bit-identical to the server arithmetic
 * so the preview never lies; the server remains authoritative.
 */
export function dilateBbox(box: Box, looseness: number, width: number, height: number): Box {
  if (looseness < 0) throw new Error('looseness must be >= 0');
  const factor = Math.sqrt(1 + looseness / 100) - 1;
  const growX = roundHalfUp(((box.x1 - box.x0 + 1) * factor) / 2);
  const growY = roundHalfUp(((box.y1 - box.y0 + 1) * factor) / 2);
  const x0 = Math.max(box.x0 - growX, 0);
  const y0 = Math.max(box.y0 - growY, 0);
  const x1 = Math.min(box.x1 + growX, width - 1);
  const y1 = Math.min(box.y1 + growY, height - 1);
  if (x1 < x0 || y1 < y0) throw new Error('box lies entirely outside the image');
  return { x0, y0, x1, y1 };
}

/** Normalize a drag gesture (any corner pair) into a box with x0<=x1, y0<=y1. */
export function dragToBox(ax: number, ay: number, bx: number, by: number): Box {
  return {
    x0: Math.min(Math.round(ax), Math.round(bx)),
    y0: Math.min(Math.round(ay), Math.round(by)),
    x1: Math.max(Math.round(ax), Math.round(bx)),
    y1: Math.max(Math.round(ay), Math.round(by)),
  };
}
