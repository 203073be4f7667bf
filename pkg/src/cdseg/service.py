"""Session-oriented HTTP API over the segmentation and co-segmentation pipelines.

Sessions hold uploaded images plus precomputed superpixel maps and feature
caches; annotations append to a per-session history and masks are returned
as base64 PNG plus run-length encoding. State lives in memory, with optional
write-through persistence to a directory (one folder per session).
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware

from .errors import CdsError, PipelineError
from .features import compute_region_features
from .images import (
    image_from_base64,
    labels_from_base64,
    load_image_png,
    load_label_png,
    load_mask_png,
    mask_to_base64,
    mask_to_png_bytes,
    mask_to_rle,
    save_image_png,
    save_label_png,
    save_mask_png,
)
from .solver import ReplicatorConfig
from .superpixels import grid_superpixels, validate_label_map

DEFAULT_CONFIG = {
    "superpixels": "grid:200",
    "sigma": "self",
    "texture": True,
    "seed": 0,
}


def _sigma_strategy(token: str):
    from .graph import SelfTuning, SingleSigma

    if token == "self":
        return SelfTuning()
    if isinstance(token, str) and token.startswith("single:"):
        return SingleSigma(float(token.split(":", 1)[1]))
    raise PipelineError(
        f"sigma {token!r} not usable in a session; use self or single:<v>"
    )


def _session_config(raw: dict, custom_maps: bool = False) -> dict:
    config = dict(DEFAULT_CONFIG)
    unknown = set(raw) - {"superpixels", "sigma", "texture", "seed", "tol", "max_iters"}
    if unknown:
        raise PipelineError(f"unknown config keys: {sorted(unknown)}")
    config.update(raw)
    _sigma_strategy(config["sigma"])  # reject unusable strategies up front
    if custom_maps:
        config["superpixels"] = "custom"
    elif not str(config["superpixels"]).startswith("grid:"):
        raise PipelineError("session superpixels must be grid:<N> unless maps are uploaded")
    return config


@dataclass
class Session:
    id: str
    images: list
    maps: list
    config: dict
    history: list = field(default_factory=list)
    latest_masks: dict = field(default_factory=dict)  # image index -> bool mask
    features: dict = field(default_factory=dict)  # (image index, texture) -> matrix
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def replicator_config(self) -> ReplicatorConfig:
        kwargs = {"seed": int(self.config.get("seed", 0))}
        if self.config.get("tol") is not None:
            kwargs["convergence_tol"] = float(self.config["tol"])
        if self.config.get("max_iters") is not None:
            kwargs["max_iters"] = int(self.config["max_iters"])
        return ReplicatorConfig(**kwargs)

    def features_for(self, index: int) -> np.ndarray:
        key = (index, bool(self.config["texture"]))
        if key not in self.features:
            self.features[key] = compute_region_features(
                self.images[index], self.maps[index], include_texture=key[1]
            )
        return self.features[key]

    def view(self) -> dict:
        return {
            "id": self.id,
            "image_count": len(self.images),
            "image_shapes": [list(im.shape[:2]) for im in self.images],
            "config": self.config,
            "coseg_capable": len(self.images) >= 2,
            "history": self.history,
            "masks_available": sorted(self.latest_masks),
        }


class SessionStore:
    """In-memory session registry with optional directory write-through."""

    def __init__(self, store_dir=None):
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        self.store_dir = Path(store_dir) if store_dir else None
        if self.store_dir is not None:
            self.store_dir.mkdir(parents=True, exist_ok=True)
            self._reload()

    def _session_dir(self, sid: str) -> Path:
        return self.store_dir / sid

    def _reload(self) -> None:
        for meta_path in sorted(self.store_dir.glob("*/session.json")):
            meta = json.loads(meta_path.read_text())
            folder = meta_path.parent
            images = [
                load_image_png(folder / f"image_{k}.png")
                for k in range(meta["image_count"])
            ]
            labels = None
            if meta["config"].get("superpixels") == "custom":
                labels = [
                    load_label_png(folder / f"labels_{k}.png")
                    for k in range(meta["image_count"])
                ]
            session = self._build(meta["id"], images, meta["config"], labels)
            session.history = meta["history"]
            for k in meta["masks_available"]:
                session.latest_masks[int(k)] = load_mask_png(folder / f"mask_{k}.png")
            self.sessions[session.id] = session

    def _build(self, sid: str, images: list, config: dict, labels=None) -> Session:
        if labels is not None:
            if len(labels) != len(images):
                raise PipelineError("need one superpixel map per image")
            maps = []
            for im, lab in zip(images, labels):
                if tuple(lab.shape) != im.shape[:2]:
                    raise PipelineError(
                        f"superpixel map shape {lab.shape} does not match image {im.shape[:2]}"
                    )
                maps.append(validate_label_map(lab))
        else:
            target = int(str(config["superpixels"]).split(":", 1)[1])
            maps = [grid_superpixels(im.shape[:2], target) for im in images]
        return Session(id=sid, images=images, maps=maps, config=config)

    def create(self, images: list, config: dict, labels=None) -> Session:
        session = self._build(secrets.token_urlsafe(32), images, config, labels)
        for k in range(len(images)):
            session.features_for(k)  # precompute
        with self.lock:
            self.sessions[session.id] = session
        if self.store_dir is not None:
            folder = self._session_dir(session.id)
            folder.mkdir(parents=True, exist_ok=True)
            for k, im in enumerate(images):
                save_image_png(im, folder / f"image_{k}.png")
            if labels is not None:
                for k, lab in enumerate(labels):
                    save_label_png(lab, folder / f"labels_{k}.png")
            self.persist(session)
        return session

    def get(self, sid: str) -> Session:
        with self.lock:
            session = self.sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session id")
        return session

    def persist(self, session: Session) -> None:
        if self.store_dir is None:
            return
        folder = self._session_dir(session.id)
        folder.mkdir(parents=True, exist_ok=True)
        meta = {
            "id": session.id,
            "image_count": len(session.images),
            "config": session.config,
            "history": session.history,
            "masks_available": sorted(session.latest_masks),
        }
        for k, mask in session.latest_masks.items():
            save_mask_png(mask, folder / f"mask_{k}.png")
        (folder / "session.json").write_text(json.dumps(meta, indent=2))


def _mask_payload(mask: np.ndarray) -> dict:
    return {
        "shape": list(mask.shape),
        "mask_png_base64": mask_to_base64(mask),
        "mask_rle": mask_to_rle(mask),
    }


def _pixel_list(payload, key: str, required: bool) -> np.ndarray | None:
    pts = payload.get(key)
    if pts is None:
        if required:
            raise PipelineError(f"annotation needs a {key!r} pixel list")
        return None
    arr = np.asarray(pts, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise PipelineError(f"{key!r} must be a non-empty list of [x, y] pairs")
    return arr


def _run_annotation(session: Session, payload: dict) -> dict:
    from .segmentation import (
        BoundingBox,
        LooseBox,
        Scribble,
        segment,
        segment_error_tolerant,
    )

    index = int(payload.get("image_index", 0))
    if not 0 <= index < len(session.images):
        raise PipelineError(f"image_index {index} out of range")
    mode = payload.get("mode")
    strategy = _sigma_strategy(session.config["sigma"])
    config = session.replicator_config()
    features = session.features_for(index)
    image = session.images[index]
    sp = session.maps[index]

    if mode == "scribble":
        ann = Scribble(_pixel_list(payload, "fg", required=True))
        result = segment(image, sp, ann, strategy, config=config, features=features)
    elif mode == "scribble-et":
        fg = _pixel_list(payload, "fg", required=True)
        bg = _pixel_list(payload, "bg", required=True)
        result = segment_error_tolerant(
            image, sp, fg, bg, strategy, config=config, features=features
        )
    elif mode == "bbox":
        box = payload.get("box")
        if not isinstance(box, (list, tuple)) or len(box) != 4:
            raise PipelineError("bbox mode needs box: [x0, y0, x1, y1]")
        ann = BoundingBox(*(int(v) for v in box))
        looseness = float(payload.get("looseness", 0.0))
        if looseness > 0:
            ann = LooseBox(ann, looseness)
        result = segment(image, sp, ann, strategy, config=config, features=features)
    else:
        raise PipelineError(f"unknown mode {mode!r}; use scribble, scribble-et, or bbox")

    session.latest_masks[index] = result.mask
    response = {
        "image_index": index,
        "mode": result.mode,
        "constraints": list(result.constraints),
        "selected_regions": list(result.selected_regions),
        "discarded_clusters": list(result.discarded),
        "all_discarded": result.all_discarded,
        "clusters": [
            {"support": list(c.support), "payoff": float(c.payoff), "kkt": float(c.kkt)}
            for c in result.extraction.clusters
        ],
        **_mask_payload(result.mask),
    }
    entry = {
        "index": len(session.history),
        "kind": "annotation",
        "request": payload,
        "image_index": index,
        "mode": result.mode,
        "selected_regions": list(result.selected_regions),
    }
    session.history.append(entry)
    return response


def _run_coseg(session: Session, payload: dict) -> dict:
    from .coseg import ImageScribble, coseg_interactive, coseg_unsupervised

    config = session.replicator_config()
    raw = payload.get("scribbles") or []
    if raw:
        scribbles = []
        for item in raw:
            scribbles.append(
                ImageScribble(
                    int(item.get("image", 0)),
                    _pixel_list(item, "fg", required=True),
                    _pixel_list(item, "bg", required=True),
                )
            )
        result = coseg_interactive(session.images, session.maps, scribbles, config=config)
        mode = "coseg-interactive"
    else:
        result = coseg_unsupervised(session.images, session.maps, config=config)
        mode = "coseg-unsupervised"

    for k, mask in enumerate(result.masks):
        session.latest_masks[k] = mask
    response = {
        "mode": mode,
        "empty": result.empty,
        "foreground_regions": [list(r) for r in result.foreground_regions],
        "masks": [_mask_payload(m) for m in result.masks],
    }
    entry = {
        "index": len(session.history),
        "kind": "coseg",
        "request": payload,
        "mode": mode,
        "foreground_regions": [list(r) for r in result.foreground_regions],
    }
    session.history.append(entry)
    return response


def create_app(store_dir=None, max_upload_mb: float = 32.0) -> FastAPI:
    app = FastAPI(title="cdseg service")
    # the annotation UI is served from its own origin; this is a desk-scale
    # tool with no credentials, so a wildcard is fine
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(store_dir)
    app.state.store = store
    max_bytes = int(max_upload_mb * 1024 * 1024)

    @app.exception_handler(CdsError)
    async def _domain_error(request, exc):  # noqa: ANN001
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)) -> dict:
        raw_images = payload.get("images")
        if not isinstance(raw_images, list) or not raw_images:
            raise PipelineError("need a non-empty 'images' list of base64 PNGs")
        images = []
        for data in raw_images:
            raw_len = len(data) * 3 // 4
            if raw_len > max_bytes:
                raise HTTPException(status_code=413, detail="image exceeds the upload limit")
            images.append(image_from_base64(data, max_bytes=max_bytes))
        raw_maps = payload.get("superpixel_maps")
        labels = None
        if raw_maps is not None:
            if not isinstance(raw_maps, list):
                raise PipelineError("'superpixel_maps' must be a list of base64 label PNGs")
            labels = [labels_from_base64(d, max_bytes=max_bytes) for d in raw_maps]
        config = _session_config(payload.get("config") or {}, custom_maps=labels is not None)
        session = store.create(images, config, labels)
        return {"id": session.id, "image_count": len(images)}

    @app.post("/sessions/{sid}/annotations")
    def submit_annotation(sid: str, payload: dict = Body(...)) -> dict:
        session = store.get(sid)
        with session.lock:
            response = _run_annotation(session, payload)
            store.persist(session)
        return response

    @app.post("/sessions/{sid}/coseg")
    def submit_coseg(sid: str, payload: dict | None = Body(default=None)) -> dict:
        session = store.get(sid)
        with session.lock:
            response = _run_coseg(session, payload or {})
            store.persist(session)
        return response

    @app.get("/sessions/{sid}")
    def get_state(sid: str) -> dict:
        session = store.get(sid)
        with session.lock:
            return session.view()

    @app.get("/sessions/{sid}/mask/{k}")
    def get_mask(sid: str, k: int) -> Response:
        session = store.get(sid)
        with session.lock:
            mask = session.latest_masks.get(k)
            if mask is None:
                raise HTTPException(status_code=404, detail=f"no mask yet for image {k}")
            return Response(content=mask_to_png_bytes(mask), media_type="image/png")

    return app
