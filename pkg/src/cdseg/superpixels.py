"""Superpixel maps: ingestion of precomputed label images and a grid fallback.

Region ids are always dense in [0, region_count); adjacency is the set of
region pairs sharing a 4-neighbour pixel border.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import PipelineError
from .images import load_label_png


@dataclass(frozen=True)
class SuperpixelMap:
    labels: np.ndarray  # (H, W) int32, dense region ids
    region_count: int
    adjacency: tuple[tuple[int, int], ...]  # sorted (lo, hi) pairs

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def region_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.region_count)

    def regions_hit(self, pixels) -> tuple[int, ...]:
        """Region ids under (x, y) pixel coordinates, sorted and unique."""
        pts = np.atleast_2d(np.asarray(pixels, dtype=np.int64))
        if pts.size == 0:
            return ()
        if pts.shape[1] != 2:
            raise PipelineError("pixel list must be (N, 2) of x, y coordinates")
        x, y = pts[:, 0], pts[:, 1]
        if (x < 0).any() or (y < 0).any() or (x >= self.width).any() or (y >= self.height).any():
            raise PipelineError("pixel coordinates fall outside the image")
        return tuple(sorted(set(int(v) for v in self.labels[y, x])))

    def mask_of(self, regions) -> np.ndarray:
        """Boolean mask of the pixels belonging to any of `regions`."""
        wanted = np.zeros(self.region_count, dtype=bool)
        idx = np.asarray(sorted(set(int(r) for r in regions)), dtype=np.int64)
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.region_count:
                raise PipelineError("region id out of range")
            wanted[idx] = True
        return wanted[self.labels]


def _adjacency_from_labels(labels: np.ndarray) -> tuple[tuple[int, int], ...]:
    pairs = set()
    h_a, h_b = labels[:, :-1].ravel(), labels[:, 1:].ravel()
    v_a, v_b = labels[:-1, :].ravel(), labels[1:, :].ravel()
    for a, b in ((h_a, h_b), (v_a, v_b)):
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.update(zip(lo.tolist(), hi.tolist()))
    return tuple(sorted(pairs))


def validate_label_map(labels) -> SuperpixelMap:
    """Build a SuperpixelMap from an arbitrary integer label image.

    Ids are relabeled densely preserving first-appearance order. A region
    split into several connected components is accepted with a warning.
    """
    a = np.asarray(labels)
    if a.ndim != 2 or a.size == 0:
        raise PipelineError(f"label image must be 2-D and non-empty, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.integer):
        raise PipelineError("label image must be integer-typed")
    _, dense = np.unique(a, return_inverse=True)
    dense = dense.reshape(a.shape).astype(np.int32)
    count = int(dense.max()) + 1
    split = 0
    for rid in range(count):
        _, parts = ndimage.label(dense == rid)
        if parts > 1:
            split += 1
    if split:
        warnings.warn(f"{split} region(s) are not contiguous; accepted as-is", RuntimeWarning)
    return SuperpixelMap(dense, count, _adjacency_from_labels(dense))


def ingest_superpixels(path) -> SuperpixelMap:
    return validate_label_map(load_label_png(path))


def _grid_shape(height: int, width: int, target: int) -> tuple[int, int]:
    # choose rows x cols with count within +-30% of target and tiles as
    # square as possible; ties toward the count closest to target
    best = None
    for rows in range(1, min(height, target) + 1):
        for cols in {max(1, target // rows), max(1, round(target / rows)), target // rows + 1}:
            if cols < 1 or cols > width:
                continue
            count = rows * cols
            if not (0.7 * target <= count <= 1.3 * target or count == target):
                continue
            aspect = (width / cols) / (height / rows)
            score = (abs(np.log(aspect)), abs(count - target), rows)
            if best is None or score < best[0]:
                best = (score, rows, cols)
    if best is None:
        raise PipelineError(
            f"no {height}x{width} grid tiling lands within 30% of {target} regions"
        )
    return best[1], best[2]


def grid_superpixels(image_or_shape, target_count: int) -> SuperpixelMap:
    """Deterministic near-square tiling with about `target_count` regions."""
    if isinstance(image_or_shape, tuple):
        height, width = image_or_shape
    else:
        arr = np.asarray(image_or_shape)
        height, width = arr.shape[:2]
    if target_count < 1:
        raise PipelineError("target_count must be >= 1")
    if target_count > height * width:
        raise PipelineError("target_count exceeds the pixel count")
    rows, cols = _grid_shape(height, width, target_count)
    ys = (np.arange(height, dtype=np.int64) * rows) // height
    xs = (np.arange(width, dtype=np.int64) * cols) // width
    labels = (ys[:, None] * cols + xs[None, :]).astype(np.int32)
    return SuperpixelMap(labels, rows * cols, _adjacency_from_labels(labels))
