"""PNG input/output helpers shared by the pipelines, CLI, and service.

Images travel through the package as float64 RGB arrays in [0, 1] with shape
(height, width, 3); masks as boolean arrays of shape (height, width).
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import PipelineError


def as_float_rgb(image) -> np.ndarray:
    """Coerce an array-like image to float64 RGB in [0, 1]."""
    a = np.asarray(image)
    if a.ndim == 2:
        a = np.stack([a, a, a], axis=-1)
    if a.ndim != 3 or a.shape[2] not in (3, 4):
        raise PipelineError(f"expected (H, W), (H, W, 3) or (H, W, 4) image, got {a.shape}")
    a = a[:, :, :3]
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    a = a.astype(np.float64)
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise PipelineError("float image values must lie in [0, 1]")
    return a


def load_image_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return as_float_rgb(np.asarray(img.convert("RGB")))


def save_image_png(image, path) -> None:
    a = np.clip(np.asarray(as_float_rgb(image)) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(a, mode="RGB").save(path, format="PNG")


def load_mask_png(path) -> np.ndarray:
    with Image.open(path) as img:
        a = np.asarray(img.convert("L"))
    return a >= 128


def save_mask_png(mask, path) -> None:
    a = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(a, mode="L").save(path, format="PNG")


def _labels_from_pil(img) -> np.ndarray:
    if img.mode not in ("L", "I", "I;16", "P"):
        raise PipelineError(f"label image must be single-channel, got mode {img.mode!r}")
    return np.asarray(img.convert("I")).astype(np.int64)


def load_label_png(path) -> np.ndarray:
    """Load a single-channel label image; multi-channel input is an error."""
    with Image.open(path) as img:
        return _labels_from_pil(img)


def save_label_png(labels, path) -> None:
    a = np.asarray(labels)
    if a.max(initial=0) < 256:
        Image.fromarray(a.astype(np.uint8), mode="L").save(path, format="PNG")
    elif a.max(initial=0) < 65536:
        Image.fromarray(a.astype(np.uint16)).save(path, format="PNG")
    else:
        raise PipelineError("label ids above 65535 cannot be stored as PNG")


def mask_to_png_bytes(mask) -> bytes:
    buf = io.BytesIO()
    a = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(a, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_to_base64(mask) -> str:
    return base64.b64encode(mask_to_png_bytes(mask)).decode("ascii")


def image_from_base64(data: str, max_bytes: int | None = None) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
    except Exception as exc:
        raise PipelineError(f"invalid base64 image payload: {exc}") from None
    if max_bytes is not None and len(raw) > max_bytes:
        raise PipelineError(f"image payload exceeds {max_bytes} bytes")
    try:
        with Image.open(io.BytesIO(raw)) as img:
            return as_float_rgb(np.asarray(img.convert("RGB")))
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"could not decode image: {exc}") from None


def labels_from_base64(data: str, max_bytes: int | None = None) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
    except Exception as exc:
        raise PipelineError(f"invalid base64 label payload: {exc}") from None
    if max_bytes is not None and len(raw) > max_bytes:
        raise PipelineError(f"label payload exceeds {max_bytes} bytes")
    try:
        with Image.open(io.BytesIO(raw)) as img:
            return _labels_from_pil(img)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"could not decode label image: {exc}") from None


def mask_to_rle(mask) -> list[int]:
    """Row-major run-length encoding starting with the background run length.

    The encoding alternates run lengths of 0s and 1s, beginning with 0s (a
    leading foreground pixel yields an initial 0-length run). Lossless for
    any boolean mask together with its shape.
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_to_mask(runs, shape) -> np.ndarray:
    total = int(np.prod(shape))
    if sum(runs) != total:
        raise PipelineError("run-length data does not match mask shape")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if run:
            flat[pos : pos + run] = value
        pos += run
        value = not value
    return flat.reshape(shape)
