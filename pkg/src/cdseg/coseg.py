"""Co-segmentation of image sets: joint foreground extraction across images.

A block affinity over all regions of all images combines four channels:
an objectness score affinity A_m (weight 1/2) plus color, descriptor, and
orientation-histogram similarities (weight 1/6 each). Cross-image blocks
come from distance transforms max(D) - D + min(D); intra-image blocks are
geodesic accumulations gated to adjacent region pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial.distance import cdist
from skimage import color as skcolor

from .errors import PipelineError
from .features import mean_color_features
from .images import as_float_rgb
from .solver import ReplicatorConfig, extract_constrained_dominant_sets
from .superpixels import SuperpixelMap

HIST_BINS = 16
_EPS = 1e-12


# ------------------------------------------------------------ block helpers


def _minmax_block(block: np.ndarray, context: str) -> np.ndarray:
    lo = float(block.min())
    hi = float(block.max())
    if hi - lo <= _EPS:
        warnings.warn(f"{context}: constant similarity block; treated as uninformative", RuntimeWarning)
        return np.zeros_like(block)
    return (block - lo) / (hi - lo)


def transform_distances(d: np.ndarray, context: str = "block") -> np.ndarray:
    """Similarity from distances: max(D) - D + min(D), then min-max to [0, 1]."""
    d = np.asarray(d, dtype=np.float64)
    sim = d.max() - d + d.min()
    return _minmax_block(sim, context)


def color_cross_similarity(features_i: np.ndarray, features_j: np.ndarray) -> np.ndarray:
    """Cross-image color block from Euclidean distances of region color vectors."""
    d = cdist(np.asarray(features_i, dtype=np.float64), np.asarray(features_j, dtype=np.float64))
    return transform_distances(d, "color cross block")


def intra_image_geodesic_similarity(
    sp: SuperpixelMap, node_features: np.ndarray, edge_distance=None
) -> np.ndarray:
    """Adjacency-gated geodesic similarity within one image.

    Adjacent regions are linked by the distance of their feature vectors
    (Euclidean by default); geodesic distances accumulate those weights
    along shortest paths. Similarities max(D) - D + min(D) are computed per
    connected component and kept only on adjacent pairs; everything else,
    including cross-component pairs, is 0.
    """
    n = sp.region_count
    feats = np.asarray(node_features, dtype=np.float64)
    if feats.shape[0] != n:
        raise PipelineError("feature row count does not match region count")
    if edge_distance is None:
        edge_distance = lambda a, b: float(np.linalg.norm(feats[a] - feats[b]))
    rows, cols, weights = [], [], []
    for a, b in sp.adjacency:
        w = edge_distance(a, b)
        rows += [a, b]
        cols += [b, a]
        weights += [w, w]
    out = np.zeros((n, n))
    if not rows:
        return out
    graph = csr_matrix((weights, (rows, cols)), shape=(n, n))
    dist = shortest_path(graph, method="D", directed=False)
    n_comp, comp = connected_components(graph, directed=False)
    for c in range(n_comp):
        members = np.flatnonzero(comp == c)
        if len(members) < 2:
            continue
        sub = dist[np.ix_(members, members)]
        off = sub[~np.eye(len(members), dtype=bool)]
        hi, lo = off.max(), off.min()
        local = hi - sub + lo
        for i, gi in enumerate(members):
            for j, gj in enumerate(members):
                out[gi, gj] = local[i, j]
    # adjacency gate: only touching regions keep a similarity
    gate = np.zeros((n, n), dtype=bool)
    for a, b in sp.adjacency:
        gate[a, b] = gate[b, a] = True
    out[~gate] = 0.0
    if out.max() > 0:
        out = out / out.max()
    np.fill_diagonal(out, 0.0)
    return out


def chi_squared_distances(h_i: np.ndarray, h_j: np.ndarray) -> np.ndarray:
    """Pairwise chi-squared distances between histogram rows."""
    a = np.asarray(h_i, dtype=np.float64)[:, None, :]
    b = np.asarray(h_j, dtype=np.float64)[None, :, :]
    return 0.5 * np.sum((a - b) ** 2 / (a + b + _EPS), axis=2)


def orientation_histograms(image, sp: SuperpixelMap, bins: int = HIST_BINS) -> np.ndarray:
    """Rotation-invariant gradient-orientation histograms per region.

    Gradient orientations are binned over [0, 2pi) weighted by magnitude,
    then each histogram is circularly rolled so its dominant bin comes
    first, which cancels global rotations.
    """
    rgb = as_float_rgb(image)
    if rgb.shape[:2] != (sp.height, sp.width):
        raise PipelineError("image does not match superpixel map")
    gray = skcolor.rgb2gray(rgb)
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy).ravel()
    ang = np.mod(np.arctan2(gy, gx).ravel(), 2.0 * np.pi)
    bin_idx = np.minimum((ang / (2.0 * np.pi) * bins).astype(np.int64), bins - 1)
    labels = sp.labels.ravel()
    hist = np.zeros((sp.region_count, bins))
    np.add.at(hist, (labels, bin_idx), mag)
    flat = hist.sum(axis=1) <= _EPS
    if flat.any():
        warnings.warn(
            f"{int(flat.sum())} region(s) have no gradient energy; zero descriptors",
            RuntimeWarning,
        )
    for r in np.flatnonzero(~flat):
        hist[r] = np.roll(hist[r], -int(np.argmax(hist[r])))
    return hist


def descriptor_similarity(desc_a, desc_b=None, adjacency=None) -> np.ndarray:
    """Clamped dot-product similarity block between unit descriptor rows.

    With one argument the block is intra-image: diagonal zeroed and, when
    `adjacency` is given, non-adjacent pairs forced to 0. With two arguments
    it is the dense cross-image block.
    """
    a = np.asarray(desc_a, dtype=np.float64)
    intra = desc_b is None
    b = a if intra else np.asarray(desc_b, dtype=np.float64)
    dead = int((np.linalg.norm(a, axis=1) <= _EPS).sum())
    if not intra:
        dead += int((np.linalg.norm(b, axis=1) <= _EPS).sum())
    if dead:
        warnings.warn(f"{dead} zero-norm descriptor row(s); their similarities are 0", RuntimeWarning)
    out = np.clip(a @ b.T, 0.0, None)
    if intra:
        np.fill_diagonal(out, 0.0)
        if adjacency is not None:
            gate = np.zeros(out.shape, dtype=bool)
            for p, q in adjacency:
                gate[p, q] = gate[q, p] = True
            out[~gate] = 0.0
    return out


def hog_similarity(hist_a, hist_b) -> np.ndarray:
    """Cross-image histogram block: chi-squared distances, then max-D+min."""
    d = chi_squared_distances(np.asarray(hist_a, dtype=np.float64),
                              np.asarray(hist_b, dtype=np.float64))
    return transform_distances(d, "histogram cross block")


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64).copy()
    norms = np.linalg.norm(m, axis=1)
    ok = norms > _EPS
    m[ok] /= norms[ok, None]
    m[~ok] = 0.0
    return m


def l1_rows(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64).copy()
    sums = m.sum(axis=1)
    ok = sums > _EPS
    m[ok] /= sums[ok, None]
    m[~ok] = 0.0
    return m


# ---------------------------------------------------------------- objectness


def objectness_scores(sp: SuperpixelMap) -> tuple[np.ndarray, np.ndarray]:
    """Default backgroundness provider: border contact over sqrt(area).

    Returns (P_b, P_f) with P_b min-max normalized across the image's
    regions and P_f = 1 - P_b. Regions touching no image border get P_b = 0.
    """
    labels = sp.labels
    border = np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    contact = np.bincount(border, minlength=sp.region_count).astype(np.float64)
    area = sp.region_sizes().astype(np.float64)
    raw = contact / np.sqrt(area)
    hi = raw.max()
    p_b = raw / hi if hi > 0 else raw
    return p_b, 1.0 - p_b


def validate_scores(p_b) -> tuple[np.ndarray, np.ndarray]:
    """Ingest externally computed backgroundness scores."""
    p_b = np.asarray(p_b, dtype=np.float64)
    if p_b.ndim != 1 or not np.isfinite(p_b).all() or p_b.min() < 0 or p_b.max() > 1:
        raise PipelineError("backgroundness scores must be finite values in [0, 1]")
    return p_b, 1.0 - p_b


def objectness_affinity(p_f: np.ndarray) -> np.ndarray:
    a = np.outer(p_f, p_f)
    np.fill_diagonal(a, 0.0)
    return a


def combine(a_m: np.ndarray, a_c: np.ndarray, a_s: np.ndarray, a_h: np.ndarray) -> np.ndarray:
    """A = 1/2 A_m + 1/6 (A_c + A_s + A_h)."""
    mats = (a_m, a_c, a_s, a_h)
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise PipelineError("channel matrices must share one shape")
    out = 0.5 * a_m + (a_c + a_s + a_h) / 6.0
    np.fill_diagonal(out, 0.0)
    return out


# ------------------------------------------------------------- graph builds


@dataclass(frozen=True)
class MultiImageGraph:
    images: tuple  # float RGB arrays
    maps: tuple  # SuperpixelMap per image
    offsets: tuple[int, ...]  # global index of each image's first region
    total: int
    color: np.ndarray
    descriptor: np.ndarray
    hog: np.ndarray
    objectness: np.ndarray
    p_f: np.ndarray
    combined: np.ndarray

    def global_ids(self, image_index: int, regions=None) -> tuple[int, ...]:
        base = self.offsets[image_index]
        count = self.maps[image_index].region_count
        if regions is None:
            return tuple(range(base, base + count))
        out = []
        for r in regions:
            if not 0 <= int(r) < count:
                raise PipelineError(f"region {r} out of range for image {image_index}")
            out.append(base + int(r))
        return tuple(sorted(set(out)))

    def local_regions(self, image_index: int, global_ids) -> tuple[int, ...]:
        base = self.offsets[image_index]
        count = self.maps[image_index].region_count
        return tuple(sorted(g - base for g in global_ids if base <= g < base + count))


def _check_channel(a: np.ndarray, name: str) -> np.ndarray:
    if not np.array_equal(a, a.T):
        a = 0.5 * (a + a.T)
    if a.min() < -_EPS or a.max() > 1.0 + 1e-9:
        raise PipelineError(f"channel {name} escaped [0, 1]")
    np.fill_diagonal(a, 0.0)
    return np.clip(a, 0.0, 1.0)


def build_multi_image_graph(
    images,
    maps,
    descriptors=None,
    backgroundness=None,
) -> MultiImageGraph:
    """Assemble the block channel matrices and their combination.

    `descriptors`: optional per-image region descriptor matrices (external
    SIFT-style vectors); the built-in orientation histogram is used when
    absent, for both the dot-product and histogram channels.
    `backgroundness`: optional per-image P_b arrays replacing the default
    border-contact provider.
    """
    images = tuple(as_float_rgb(im) for im in images)
    maps = tuple(maps)
    if len(images) != len(maps) or not images:
        raise PipelineError("need one superpixel map per image")
    counts = [sp.region_count for sp in maps]
    offsets = tuple(int(v) for v in np.concatenate([[0], np.cumsum(counts)[:-1]]))
    total = int(sum(counts))

    color_feats = [mean_color_features(im, sp) for im, sp in zip(images, maps)]
    hists = [orientation_histograms(im, sp) for im, sp in zip(images, maps)]
    if descriptors is None:
        desc = [unit_rows(h) for h in hists]
    else:
        desc = [unit_rows(np.asarray(d, dtype=np.float64)) for d in descriptors]
        if any(d.shape[0] != c for d, c in zip(desc, counts)):
            raise PipelineError("descriptor row counts must match region counts")
    hist_l1 = [l1_rows(h) for h in hists]

    a_c = np.zeros((total, total))
    a_s = np.zeros((total, total))
    a_h = np.zeros((total, total))
    n_img = len(images)
    for i in range(n_img):
        si = slice(offsets[i], offsets[i] + counts[i])
        a_c[si, si] = intra_image_geodesic_similarity(maps[i], color_feats[i])
        a_s[si, si] = descriptor_similarity(desc[i], adjacency=maps[i].adjacency)
        a_h[si, si] = intra_image_geodesic_similarity(
            maps[i],
            hist_l1[i],
            edge_distance=lambda a, b, H=hist_l1[i]: float(
                chi_squared_distances(H[a : a + 1], H[b : b + 1])[0, 0]
            ),
        )
        for j in range(i + 1, n_img):
            sj = slice(offsets[j], offsets[j] + counts[j])
            block_c = color_cross_similarity(color_feats[i], color_feats[j])
            block_s = descriptor_similarity(desc[i], desc[j])
            block_h = hog_similarity(hist_l1[i], hist_l1[j])
            a_c[si, sj], a_c[sj, si] = block_c, block_c.T
            a_s[si, sj], a_s[sj, si] = block_s, block_s.T
            a_h[si, sj], a_h[sj, si] = block_h, block_h.T

    if backgroundness is None:
        p_f = np.concatenate([objectness_scores(sp)[1] for sp in maps])
    else:
        if len(backgroundness) != n_img:
            raise PipelineError("need one backgroundness array per image")
        p_f = np.concatenate([validate_scores(pb)[1] for pb in backgroundness])

    a_c = _check_channel(a_c, "color")
    a_s = _check_channel(a_s, "descriptor")
    a_h = _check_channel(a_h, "histogram")
    a_m = _check_channel(objectness_affinity(p_f), "objectness")
    combined = _check_channel(combine(a_m, a_c, a_s, a_h), "combined")
    return MultiImageGraph(
        images, maps, offsets, total, a_c, a_s, a_h, a_m, p_f, combined
    )


# ------------------------------------------------------------------- modes


def _extract_union(
    affinity: np.ndarray,
    constraints,
    config: ReplicatorConfig | None,
    margin: float | None,
) -> set[int]:
    result = extract_constrained_dominant_sets(affinity, constraints, config=config, margin=margin)
    return set(result.union_support())


@dataclass(frozen=True)
class CosegResult:
    masks: tuple  # (H, W) bool per image
    foreground_regions: tuple[tuple[int, ...], ...]  # local region ids per image
    empty: bool


def _masks_from_global(graph: MultiImageGraph, chosen: set[int]) -> CosegResult:
    masks = []
    per_image = []
    for k, sp in enumerate(graph.maps):
        local = graph.local_regions(k, chosen)
        per_image.append(local)
        masks.append(sp.mask_of(local))
    empty = not chosen
    return CosegResult(tuple(masks), tuple(per_image), empty)


def coseg_unsupervised(
    images,
    maps,
    config: ReplicatorConfig | None = None,
    margin: float | None = None,
    graph: MultiImageGraph | None = None,
    descriptors=None,
    backgroundness=None,
) -> CosegResult:
    """Joint foreground extraction for an image pair without any labels.

    Runs the constrained extraction once with each image's full region set
    as constraints; the intersection of the two covered unions is the
    common foreground.
    """
    if graph is None:
        if len(images) != 2:
            raise PipelineError("unsupervised mode takes exactly 2 images")
        graph = build_multi_image_graph(images, maps, descriptors, backgroundness)
    elif len(graph.images) != 2:
        raise PipelineError("unsupervised mode takes exactly 2 images")
    u_first = _extract_union(graph.combined, graph.global_ids(0), config, margin)
    u_second = _extract_union(graph.combined, graph.global_ids(1), config, margin)
    chosen = u_first & u_second
    if not chosen:
        warnings.warn("empty co-segmentation intersection; no common object found", RuntimeWarning)
    return _masks_from_global(graph, chosen)


def apply_labels(affinity: np.ndarray, fgl, bgl) -> np.ndarray:
    """Zero entries joining a foreground-labeled and a background-labeled node."""
    a = np.asarray(affinity, dtype=np.float64).copy()
    fgl = sorted(set(int(v) for v in fgl))
    bgl = sorted(set(int(v) for v in bgl))
    if set(fgl) & set(bgl):
        raise PipelineError("a node cannot carry both labels")
    if fgl and bgl:
        a[np.ix_(fgl, bgl)] = 0.0
        a[np.ix_(bgl, fgl)] = 0.0
    return a


@dataclass(frozen=True)
class ImageScribble:
    image_index: int
    fg_pixels: np.ndarray
    bg_pixels: np.ndarray


def coseg_interactive(
    images,
    maps,
    scribbles,
    config: ReplicatorConfig | None = None,
    margin: float | None = None,
    descriptors=None,
    backgroundness=None,
) -> CosegResult:
    """Scribble-guided co-segmentation over any number of images.

    Stage 1 runs foreground- and background-constrained extractions over the
    scribbled images alone; regions claimed by only one side become the
    refined sets F_s and B_s. Stage 2 rebuilds the affinity over all images
    with cross-label entries zeroed and runs both extractions again; the
    final foreground is what the F_s run claims minus what the B_s run
    claims.
    """
    images = list(images)
    maps = list(maps)
    scribbles = list(scribbles)
    if not scribbles:
        raise PipelineError("interactive mode needs at least one scribbled image")
    scribbled = sorted({s.image_index for s in scribbles})
    if any(i < 0 or i >= len(images) for i in scribbled):
        raise PipelineError("scribble image index out of range")

    def pick(seq, idxs):
        return None if seq is None else [seq[i] for i in idxs]

    # stage 1: scribbled images only
    sub_images = [images[i] for i in scribbled]
    sub_maps = [maps[i] for i in scribbled]
    sub_graph = build_multi_image_graph(
        sub_images, sub_maps, pick(descriptors, scribbled), pick(backgroundness, scribbled)
    )
    fg_global: set[int] = set()
    bg_global: set[int] = set()
    for s in scribbles:
        pos = scribbled.index(s.image_index)
        sp = maps[s.image_index]
        fg_global.update(sub_graph.global_ids(pos, sp.regions_hit(s.fg_pixels)))
        bg_global.update(sub_graph.global_ids(pos, sp.regions_hit(s.bg_pixels)))
    if not fg_global or not bg_global:
        raise PipelineError("interactive mode needs both foreground and background scribbles")
    if fg_global & bg_global:
        raise PipelineError(
            "a region is scribbled as both foreground and background; aborting"
        )
    o_fg = _extract_union(sub_graph.combined, sorted(fg_global), config, margin)
    o_bg = _extract_union(sub_graph.combined, sorted(bg_global), config, margin)
    f_side = o_fg - o_bg
    b_side = o_bg - o_fg
    if not f_side:
        raise PipelineError("refined foreground set is empty; scribbles are contradictory")
    if not b_side:
        raise PipelineError("refined background set is empty; scribbles are contradictory")

    # translate stage-1 ids to (image, region) and then to stage-2 global ids
    full_graph = build_multi_image_graph(images, maps, descriptors, backgroundness)

    def to_full(ids: set[int]) -> list[int]:
        out = []
        for pos, img_idx in enumerate(scribbled):
            local = sub_graph.local_regions(pos, ids)
            out.extend(full_graph.global_ids(img_idx, local))
        return sorted(out)

    f_full = to_full(f_side)
    b_full = to_full(b_side)
    labeled = apply_labels(full_graph.combined, f_full, b_full)
    u_fg = _extract_union(labeled, f_full, config, margin)
    u_bg = _extract_union(labeled, b_full, config, margin)
    chosen = u_fg - u_bg
    if not chosen:
        warnings.warn("foreground claim fully overlapped by background; empty masks", RuntimeWarning)
    return _masks_from_global(full_graph, chosen)
