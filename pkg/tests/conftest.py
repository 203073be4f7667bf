import numpy as np
import pytest

# 8-vertex demonstration graph: a 3-vertex path (0-1-2) plus a 4-clique
# {4,5,6,7} with pendant vertex 3 attached to 4. Its maximal cliques are
# {0,1}, {1,2}, {3,4}, {4,5,6,7}; the reference outcomes below are validated
# against exhaustive clique enumeration in test_oracles.py before anything
# else relies on them.
TOY_EDGES = [(0, 1), (1, 2), (3, 4), (4, 5), (4, 6), (4, 7), (5, 6), (5, 7), (6, 7)]

# (constraints, expected supports, multi-start count). Two-solution cases get
# multi-start so both basins are reachable.
TOY_CASES = [
    ((1,), ({0, 1, 2},), 0),
    ((4,), ({3, 4, 5, 6, 7},), 0),
    ((3, 4), ({3, 4},), 0),
    ((4, 7), ({4, 5, 6, 7},), 0),
    ((0, 3), ({0, 1}, {3, 4}), 4),
    ((1, 4, 7), ({0, 1, 2}, {4, 5, 6, 7}), 4),
]


def toy_affinity() -> np.ndarray:
    a = np.zeros((8, 8))
    for i, j in TOY_EDGES:
        a[i, j] = a[j, i] = 1.0
    return a


@pytest.fixture
def toy() -> np.ndarray:
    return toy_affinity()


def random_weighted_graph(rng, n, p=0.6, lo=0.1, hi=1.0) -> np.ndarray:
    a = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                a[i, j] = a[j, i] = rng.uniform(lo, hi)
    if not a.any():
        a[0, 1] = a[1, 0] = rng.uniform(lo, hi)
    return a


def random_unweighted_graph(rng, n, p=0.45) -> np.ndarray:
    a = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                a[i, j] = a[j, i] = 1.0
    if not a.any():
        a[0, 1] = a[1, 0] = 1.0
    return a


def random_constraints(rng, n, k=None) -> tuple:
    if k is None:
        k = int(rng.integers(1, n))
    return tuple(sorted(int(v) for v in rng.choice(n, size=k, replace=False)))


# ---------------------------------------------------------------- coseg pair


def ring_blob_map(size=60, lo=15, hi=44):
    """80-region map: 2 congruent L-shaped border slabs + 78 blob tiles.

    The two slabs are congruent under a half turn, so border contact and
    area match exactly and the border-contact objectness is uniform across
    the background.  A single background pair keeps constrained extraction
    to one clean peel regardless of where the background is scribbled.
    """
    from cdseg.superpixels import validate_label_map

    labels = np.full((size, size), -1, dtype=np.int32)
    labels[hi + 1 :, :] = 1                  # bottom strip
    labels[lo : hi + 1, hi + 1 :] = 1        # right column
    labels[:lo, :] = 0                       # top strip
    labels[lo : hi + 1, :lo] = 0             # left column
    nxt = 2
    y = lo
    for rh in [5, 5, 5, 5, 5, 5]:
        x = lo
        for cw in [3, 3, 3, 3, 2, 2, 2, 2, 2, 2, 2, 2, 2]:
            labels[y : y + rh, x : x + cw] = nxt
            nxt += 1
            x += cw
        y += rh
    assert (labels >= 0).all() and nxt == 80
    return validate_label_map(labels)


def coseg_pair(seed=1, size=60, lo=15, hi=44):
    """Common textured blob on two maximally different grounds.

    Texture classes: blob = two-orientation hatch (middle), ground one =
    single-orientation stripes (concentrated), ground two = isotropic noise
    (spread), so the two grounds are the most histogram-distant pair.
    """
    sp = ring_blob_map(size, lo, hi)
    gt = np.zeros((size, size), dtype=bool)
    gt[lo : hi + 1, lo : hi + 1] = True

    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    blob_tex = 0.05 * (np.sin(2 * np.pi * yy / 5) + np.sin(2 * np.pi * xx / 5))
    g1_tex = 0.10 * np.sin(2 * np.pi * yy / 5)
    rng = np.random.default_rng(seed)
    g2_tex = 0.08 * rng.standard_normal((size, size))

    blob_color = np.array([0.85, 0.3, 0.2])
    ground_colors = [np.array([0.05, 0.05, 0.6]), np.array([0.6, 0.6, 0.05])]
    images = []
    for k in range(2):
        img = np.where((sp.labels < 2)[..., None], ground_colors[k], blob_color).astype(float)
        gtex = g1_tex if k == 0 else g2_tex
        img[~gt] += gtex[..., None][~gt]
        img[gt] += blob_tex[..., None][gt]
        img += rng.normal(0, 0.002, img.shape)
        images.append(np.clip(img, 0, 1))
    return images, [sp, sp], gt


def coseg_scribbles(gt):
    """Foreground stroke across the blob, background point on each slab."""
    ys, xs = np.nonzero(gt)
    fg = np.stack([xs[::97], ys[::97]], axis=1)
    bg = np.array([[30, 7], [30, 52]])
    return fg, bg
