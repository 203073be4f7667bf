"""Interactive single-image segmentation pipelines.

Annotations come in three shapes: foreground scribbles (optionally with
background scribbles for the error-tolerant variant), tight bounding boxes,
and loose boxes that are dilated before use. Scribbles constrain the
foreground side; box perimeters are assumed to lie on background, so box
modes extract the background and return its complement.

Pixel coordinates are (x, y) pairs; boxes are inclusive corner coordinates
(x0, y0, x1, y1).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import PipelineError
from .features import compute_region_features, minmax_normalize
from .graph import BestSigma, SigmaStrategy, build_gaussian_affinity
from .solver import ExtractionResult, ReplicatorConfig, extract_constrained_dominant_sets
from .superpixels import SuperpixelMap


@dataclass(frozen=True)
class Scribble:
    fg_pixels: np.ndarray  # (N, 2) int, (x, y)
    bg_pixels: np.ndarray | None = None

    def __post_init__(self):
        fg = np.atleast_2d(np.asarray(self.fg_pixels, dtype=np.int64))
        if fg.size == 0 or fg.shape[1] != 2:
            raise PipelineError("scribble needs a non-empty (N, 2) foreground pixel list")
        object.__setattr__(self, "fg_pixels", fg)
        if self.bg_pixels is not None:
            bg = np.atleast_2d(np.asarray(self.bg_pixels, dtype=np.int64))
            if bg.size == 0 or bg.shape[1] != 2:
                raise PipelineError("background pixel list must be a non-empty (N, 2) array")
            object.__setattr__(self, "bg_pixels", bg)


@dataclass(frozen=True)
class BoundingBox:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise PipelineError(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)

    def clipped(self, width: int, height: int) -> "BoundingBox":
        x0 = max(self.x0, 0)
        y0 = max(self.y0, 0)
        x1 = min(self.x1, width - 1)
        y1 = min(self.y1, height - 1)
        if x1 < x0 or y1 < y0:
            raise PipelineError("box lies entirely outside the image")
        return BoundingBox(x0, y0, x1, y1)


@dataclass(frozen=True)
class LooseBox:
    box: BoundingBox
    looseness: float  # percent area increase

    def __post_init__(self):
        if self.looseness < 0:
            raise PipelineError("looseness must be >= 0")


Annotation = Scribble | BoundingBox | LooseBox


def _round_half_up(v: float) -> int:
    # round half away from zero; growth is nonnegative here
    return int(np.floor(v + 0.5))


def dilate_bbox(box: BoundingBox, looseness: float, width: int, height: int) -> BoundingBox:
    """Grow a box symmetrically so its area scales by (1 + looseness/100).

    Per-side pixel growth is round(side * (sqrt(1 + L/100) - 1) / 2) on each
    axis; the result is clipped to the image.
    """
    if looseness < 0:
        raise PipelineError("looseness must be >= 0")
    factor = np.sqrt(1.0 + looseness / 100.0) - 1.0
    grow_x = _round_half_up((box.x1 - box.x0 + 1) * factor / 2.0)
    grow_y = _round_half_up((box.y1 - box.y0 + 1) * factor / 2.0)
    grown = BoundingBox(box.x0 - grow_x, box.y0 - grow_y, box.x1 + grow_x, box.y1 + grow_y)
    return grown.clipped(width, height)


def box_perimeter_pixels(box: BoundingBox, width: int, height: int) -> np.ndarray:
    """(N, 2) array of the (x, y) pixels on the clipped box's 1-pixel ring."""
    b = box.clipped(width, height)
    xs = np.arange(b.x0, b.x1 + 1)
    ys = np.arange(b.y0, b.y1 + 1)
    top = np.stack([xs, np.full_like(xs, b.y0)], axis=1)
    bottom = np.stack([xs, np.full_like(xs, b.y1)], axis=1)
    left = np.stack([np.full_like(ys, b.x0), ys], axis=1)
    right = np.stack([np.full_like(ys, b.x1), ys], axis=1)
    ring = np.concatenate([top, bottom, left, right])
    return np.unique(ring, axis=0)


def constraint_set_from_annotation(
    sp: SuperpixelMap, ann: Annotation
) -> tuple[tuple[int, ...], str]:
    """Constraint regions plus the pipeline mode they imply.

    Scribbles constrain the foreground; the regions under a (dilated) box
    perimeter constrain the background.
    """
    if isinstance(ann, Scribble):
        return sp.regions_hit(ann.fg_pixels), "foreground"
    if isinstance(ann, LooseBox):
        box = dilate_bbox(ann.box, ann.looseness, sp.width, sp.height)
    elif isinstance(ann, BoundingBox):
        box = ann
    else:
        raise PipelineError(f"unsupported annotation type {type(ann).__name__}")
    ring = box_perimeter_pixels(box, sp.width, sp.height)
    return sp.regions_hit(ring), "background"


@dataclass(frozen=True)
class SegmentationResult:
    mask: np.ndarray  # (H, W) bool
    mode: str  # "foreground" | "background"
    constraints: tuple[int, ...]
    extraction: ExtractionResult
    discarded: tuple[int, ...] = ()  # cluster indexes dropped by the error-tolerant rule
    all_discarded: bool = False
    selected_regions: tuple[int, ...] = field(default=())


def region_affinity(features, strategy: SigmaStrategy) -> np.ndarray:
    """Gaussian affinity over min-max normalized region features."""
    if isinstance(strategy, BestSigma):
        raise PipelineError(
            "BestSigma needs an outcome signal; use sweep_sigma with a ground-truth mask"
        )
    return build_gaussian_affinity(minmax_normalize(features), strategy)


def segment(
    image,
    sp: SuperpixelMap,
    ann: Annotation,
    strategy: SigmaStrategy,
    config: ReplicatorConfig | None = None,
    features: np.ndarray | None = None,
    margin: float | None = None,
    alpha: float | None = None,
    include_texture: bool = True,
) -> SegmentationResult:
    """Segment one image from one annotation.

    Foreground mode returns the pixels of the extracted clusters; background
    (box) mode returns their complement.
    """
    if features is None:
        features = compute_region_features(image, sp, include_texture=include_texture)
    constraints, mode = constraint_set_from_annotation(sp, ann)
    affinity = region_affinity(features, strategy)
    extraction = extract_constrained_dominant_sets(
        affinity, constraints, config=config, alpha=alpha, margin=margin
    )
    union = set(extraction.union_support())
    if mode == "foreground":
        selected = tuple(sorted(union))
    else:
        selected = tuple(r for r in range(sp.region_count) if r not in union)
    mask = sp.mask_of(selected)
    return SegmentationResult(mask, mode, constraints, extraction, selected_regions=selected)


def segment_error_tolerant(
    image,
    sp: SuperpixelMap,
    fg_pixels,
    bg_pixels,
    strategy: SigmaStrategy,
    config: ReplicatorConfig | None = None,
    features: np.ndarray | None = None,
    margin: float | None = None,
    alpha: float | None = None,
    include_texture: bool = True,
) -> SegmentationResult:
    """Scribble segmentation that survives mislabeled foreground scribbles.

    Runs the foreground-constrained extraction, then discards every cluster
    whose support touches a background-scribbled region; the mask is the
    union of the survivors.
    """
    scribble = Scribble(fg_pixels, bg_pixels)
    if scribble.bg_pixels is None:
        raise PipelineError("error-tolerant mode needs background scribbles")
    if features is None:
        features = compute_region_features(image, sp, include_texture=include_texture)
    fg_regions = sp.regions_hit(scribble.fg_pixels)
    bg_regions = set(sp.regions_hit(scribble.bg_pixels))
    affinity = region_affinity(features, strategy)
    extraction = extract_constrained_dominant_sets(
        affinity, fg_regions, config=config, alpha=alpha, margin=margin
    )
    kept: set[int] = set()
    discarded = []
    for idx, cluster in enumerate(extraction.clusters):
        if bg_regions & set(cluster.support):
            discarded.append(idx)
        else:
            kept.update(cluster.support)
    all_discarded = not kept
    if all_discarded:
        warnings.warn(
            "every extracted cluster touched a background scribble; empty mask",
            RuntimeWarning,
        )
    selected = tuple(sorted(kept))
    mask = sp.mask_of(selected)
    return SegmentationResult(
        mask,
        "foreground",
        fg_regions,
        extraction,
        discarded=tuple(discarded),
        all_discarded=all_discarded,
        selected_regions=selected,
    )


def sweep_sigma(
    image,
    sp: SuperpixelMap,
    ann: Annotation,
    gt_mask: np.ndarray,
    grid=None,
    config: ReplicatorConfig | None = None,
    features: np.ndarray | None = None,
    margin: float | None = None,
    include_texture: bool = True,
) -> tuple[float, SegmentationResult]:
    """Pick the bandwidth from a grid by Jaccard against a reference mask."""
    from .graph import DEFAULT_SIGMA_GRID, SingleSigma
    from .metrics import jaccard

    if grid is None:
        grid = DEFAULT_SIGMA_GRID
    if features is None:
        features = compute_region_features(image, sp, include_texture=include_texture)
    best: tuple[float, float, SegmentationResult] | None = None
    for sigma in grid:
        result = segment(
            image, sp, ann, SingleSigma(float(sigma)),
            config=config, features=features, margin=margin,
        )
        score = jaccard(result.mask, gt_mask)
        if best is None or score > best[0]:
            best = (score, float(sigma), result)
    assert best is not None
    return best[1], best[2]


def generate_synthetic_scribbles(
    gt_mask,
    error_count: int,
    rng_seed: int,
    samples_per_class: int = 50,
    zone_fraction: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample scribbles from a ground-truth mask, with optional planted errors.

    Draws `samples_per_class` uniform pixels from the foreground and from the
    background outside the error zone, then appends `error_count` pixels from
    the error zone (background closer than 5% of the image diagonal to the
    foreground) to the foreground scribble. Returns ((x, y) arrays fg, bg).
    """
    gt = np.asarray(gt_mask, dtype=bool)
    if gt.ndim != 2:
        raise PipelineError("ground truth mask must be 2-D")
    if not gt.any() or gt.all():
        raise PipelineError("ground truth must contain both classes")
    if error_count < 0:
        raise PipelineError("error_count must be >= 0")
    h, w = gt.shape
    dist = ndimage.distance_transform_edt(~gt)
    zone_radius = zone_fraction * float(np.hypot(h, w))
    error_zone = (~gt) & (dist <= zone_radius)
    bg_clean = (~gt) & ~error_zone
    if error_count > 0 and not error_zone.any():
        raise PipelineError("error zone is empty; cannot plant erroneous scribbles")
    if not bg_clean.any():
        raise PipelineError("no background pixels outside the error zone")
    rng = np.random.default_rng(rng_seed)

    def sample(mask: np.ndarray, count: int) -> np.ndarray:
        ys, xs = np.nonzero(mask)
        pool = np.stack([xs, ys], axis=1)
        if len(pool) < count:
            warnings.warn(
                f"only {len(pool)} candidate pixels for {count} samples; "
                "sampling with replacement",
                RuntimeWarning,
            )
            idx = rng.integers(0, len(pool), size=count)
        else:
            idx = rng.choice(len(pool), size=count, replace=False)
        return pool[idx]

    fg = sample(gt, samples_per_class)
    bg = sample(bg_clean, samples_per_class)
    if error_count:
        fg = np.concatenate([fg, sample(error_zone, error_count)])
    return fg, bg
