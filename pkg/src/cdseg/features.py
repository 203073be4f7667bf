"""Per-region appearance features: color medians and texture filter means.

The color block holds per-region channel medians in RGB, HSV, and CIE L*a*b*
(9 values, each scaled to [0, 1]). The texture block holds per-region means
of 48 filter responses: first and second Gaussian derivatives at 6
orientations and 3 scales (36), 8 Laplacian-of-Gaussian filters, and 4
Gaussians, computed on the grayscale image.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve
from skimage import color as skcolor

from .errors import PipelineError
from .images import as_float_rgb
from .superpixels import SuperpixelMap

COLOR_DIM = 9
TEXTURE_DIM = 48
FILTER_SUPPORT = 49

_BASE_SCALES = (np.sqrt(2.0), 2.0, 2.0 * np.sqrt(2.0))
_BLOB_SCALES = (np.sqrt(2.0), 2.0, 2.0 * np.sqrt(2.0), 4.0)
_ORIENTATIONS = 6


def _gauss1d(x: np.ndarray, sigma: float, order: int) -> np.ndarray:
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    if order == 0:
        return g
    if order == 1:
        return -x / sigma**2 * g
    return (x**2 - sigma**2) / sigma**4 * g


def _normalized(f: np.ndarray, zero_mean: bool) -> np.ndarray:
    if zero_mean:
        f = f - f.mean()
    return f / np.abs(f).sum()


def _oriented_filter(sigma: float, theta: float, order: int) -> np.ndarray:
    half = FILTER_SUPPORT // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    x, y = np.meshgrid(ax, ax)
    # elongated envelope along the rotated x-axis, derivative across it
    xr = x * np.cos(theta) + y * np.sin(theta)
    yr = -x * np.sin(theta) + y * np.cos(theta)
    f = _gauss1d(xr, 3.0 * sigma, 0) * _gauss1d(yr, sigma, order)
    return _normalized(f, zero_mean=True)


def _radial_grid() -> tuple[np.ndarray, np.ndarray]:
    half = FILTER_SUPPORT // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    return np.meshgrid(ax, ax)


def _log_filter(sigma: float) -> np.ndarray:
    x, y = _radial_grid()
    r2 = x**2 + y**2
    f = (r2 - 2.0 * sigma**2) / sigma**4 * np.exp(-r2 / (2.0 * sigma**2))
    return _normalized(f, zero_mean=True)


def _gaussian_filter(sigma: float) -> np.ndarray:
    x, y = _radial_grid()
    f = np.exp(-(x**2 + y**2) / (2.0 * sigma**2))
    return f / f.sum()


def texture_filter_bank() -> np.ndarray:
    """The 48 texture filters, shape (48, support, support).

    Layout: 18 first-derivative filters (3 scales x 6 orientations), 18
    second-derivative filters, 8 Laplacian-of-Gaussian (base scales and 3x
    base scales), 4 Gaussians.
    """
    filters = []
    for order in (1, 2):
        for sigma in _BASE_SCALES:
            for k in range(_ORIENTATIONS):
                theta = np.pi * k / _ORIENTATIONS
                filters.append(_oriented_filter(sigma, theta, order))
    for sigma in _BLOB_SCALES:
        filters.append(_log_filter(sigma))
    for sigma in _BLOB_SCALES:
        filters.append(_log_filter(3.0 * sigma))
    for sigma in _BLOB_SCALES:
        filters.append(_gaussian_filter(sigma))
    bank = np.stack(filters)
    assert bank.shape[0] == TEXTURE_DIM
    return bank


_BANK_CACHE: np.ndarray | None = None


def _bank() -> np.ndarray:
    global _BANK_CACHE
    if _BANK_CACHE is None:
        _BANK_CACHE = texture_filter_bank()
    return _BANK_CACHE


def filter_responses(gray: np.ndarray) -> np.ndarray:
    """Apply the texture bank with reflect boundary, shape (48, H, W)."""
    if gray.ndim != 2:
        raise PipelineError("filter_responses expects a 2-D grayscale image")
    half = FILTER_SUPPORT // 2
    pad_y = min(half, max(gray.shape[0] - 1, 1))
    pad_x = min(half, max(gray.shape[1] - 1, 1))
    padded = np.pad(gray, ((pad_y, pad_y), (pad_x, pad_x)), mode="reflect")
    out = np.empty((TEXTURE_DIM,) + gray.shape)
    for k, f in enumerate(_bank()):
        full = fftconvolve(padded, f, mode="same")
        out[k] = full[pad_y : pad_y + gray.shape[0], pad_x : pad_x + gray.shape[1]]
    return out


def _color_planes(rgb: np.ndarray) -> np.ndarray:
    """Stack of 9 color planes, each scaled to [0, 1]."""
    hsv = skcolor.rgb2hsv(rgb)
    lab = skcolor.rgb2lab(rgb)
    lab_scaled = np.empty_like(lab)
    lab_scaled[..., 0] = lab[..., 0] / 100.0
    # a*, b* live in roughly [-128, 127] for sRGB inputs
    lab_scaled[..., 1] = (lab[..., 1] + 128.0) / 255.0
    lab_scaled[..., 2] = (lab[..., 2] + 128.0) / 255.0
    return np.concatenate([rgb, hsv, lab_scaled], axis=-1)


def compute_region_features(
    image, sp: SuperpixelMap, include_texture: bool = True
) -> np.ndarray:
    """Per-region feature matrix: (region_count, 57) or (region_count, 9)."""
    rgb = as_float_rgb(image)
    if rgb.shape[:2] != (sp.height, sp.width):
        raise PipelineError(
            f"image {rgb.shape[:2]} does not match superpixel map {(sp.height, sp.width)}"
        )
    planes = _color_planes(rgb)
    flat_labels = sp.labels.ravel()
    order = np.argsort(flat_labels, kind="stable")
    bounds = np.searchsorted(flat_labels[order], np.arange(sp.region_count + 1))
    dim = COLOR_DIM + (TEXTURE_DIM if include_texture else 0)
    feats = np.empty((sp.region_count, dim))
    flat_planes = planes.reshape(-1, COLOR_DIM)
    for rid in range(sp.region_count):
        members = order[bounds[rid] : bounds[rid + 1]]
        feats[rid, :COLOR_DIM] = np.median(flat_planes[members], axis=0)
    if include_texture:
        gray = skcolor.rgb2gray(rgb)
        responses = filter_responses(gray).reshape(TEXTURE_DIM, -1)
        sums = np.zeros((sp.region_count, TEXTURE_DIM))
        for k in range(TEXTURE_DIM):
            sums[:, k] = np.bincount(flat_labels, weights=responses[k], minlength=sp.region_count)
        counts = np.bincount(flat_labels, minlength=sp.region_count).astype(np.float64)
        feats[:, COLOR_DIM:] = sums / counts[:, None]
    if not np.isfinite(feats).all():
        raise PipelineError("non-finite region features")
    return feats


def minmax_normalize(features) -> np.ndarray:
    """Min-max normalize each feature dimension; constant dimensions go to 0."""
    f = np.asarray(features, dtype=np.float64).copy()
    lo = f.min(axis=0)
    hi = f.max(axis=0)
    span = hi - lo
    flat = span <= 0
    span[flat] = 1.0
    f = (f - lo) / span
    f[:, flat] = 0.0
    return f


def mean_color_features(image, sp: SuperpixelMap) -> np.ndarray:
    """Per-region MEANS of the 9 color planes (RGB, HSV, scaled L*a*b*)."""
    rgb = as_float_rgb(image)
    if rgb.shape[:2] != (sp.height, sp.width):
        raise PipelineError("image does not match superpixel map")
    planes = _color_planes(rgb).reshape(-1, COLOR_DIM)
    labels = sp.labels.ravel()
    counts = np.bincount(labels, minlength=sp.region_count).astype(np.float64)
    out = np.empty((sp.region_count, COLOR_DIM))
    for c in range(COLOR_DIM):
        out[:, c] = np.bincount(labels, weights=planes[:, c], minlength=sp.region_count) / counts
    return out
