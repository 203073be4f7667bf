"""Segmentation quality metrics and the benchmark harness."""

from __future__ import annotations

import csv
import json
import time
import traceback
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import PipelineError


def _pair(output, gt) -> tuple[np.ndarray, np.ndarray]:
    o = np.asarray(output, dtype=bool)
    g = np.asarray(gt, dtype=bool)
    if o.shape != g.shape:
        raise PipelineError(f"mask shapes differ: {o.shape} vs {g.shape}")
    return o, g


def error_rate(output, gt, box) -> float:
    """Fraction of misclassified pixels inside an inclusive (x0, y0, x1, y1) box."""
    o, g = _pair(output, gt)
    x0, y0, x1, y1 = box
    h, w = o.shape
    x0, y0 = max(int(x0), 0), max(int(y0), 0)
    x1, y1 = min(int(x1), w - 1), min(int(y1), h - 1)
    if x1 < x0 or y1 < y0:
        raise PipelineError("evaluation box is empty after clipping")
    window_o = o[y0 : y1 + 1, x0 : x1 + 1]
    window_g = g[y0 : y1 + 1, x0 : x1 + 1]
    return float(np.mean(window_o != window_g))


def jaccard(output, gt) -> float:
    o, g = _pair(output, gt)
    union = np.logical_or(o, g).sum()
    if union == 0:
        warnings.warn("both masks empty; overlap defined as 1", RuntimeWarning)
        return 1.0
    return float(np.logical_and(o, g).sum() / union)


def dsc(output, gt) -> float:
    o, g = _pair(output, gt)
    total = int(o.sum()) + int(g.sum())
    if total == 0:
        warnings.warn("both masks empty; overlap defined as 1", RuntimeWarning)
        return 1.0
    return float(2.0 * np.logical_and(o, g).sum() / total)


def prf(output, gt, gamma_sq: float = 0.3) -> tuple[float, float, float]:
    """Precision, recall, and the weighted F-measure (gamma^2 = 0.3 default)."""
    o, g = _pair(output, gt)
    hit = float(np.logical_and(o, g).sum())
    detected = float(o.sum())
    actual = float(g.sum())
    precision = hit / detected if detected > 0 else 0.0
    recall = hit / actual if actual > 0 else 0.0
    denom = gamma_sq * precision + recall
    f = (1.0 + gamma_sq) * precision * recall / denom if denom > 0 else 0.0
    return precision, recall, f


@dataclass
class CaseResult:
    name: str
    status: str  # "ok" | "failed"
    jaccard: float | None = None
    dsc: float | None = None
    precision: float | None = None
    recall: float | None = None
    f_measure: float | None = None
    error_rate: float | None = None
    sigma: float | None = None
    runtime_s: float | None = None
    message: str = ""


@dataclass
class EvalReport:
    cases: list[CaseResult] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def finalize(self) -> None:
        ok = [c for c in self.cases if c.status == "ok"]
        agg = {"cases": len(self.cases), "ok": len(ok), "failed": len(self.cases) - len(ok)}
        # F-measure is averaged per case, never recomputed from mean P/R
        for key in ("jaccard", "dsc", "precision", "recall", "f_measure", "error_rate", "runtime_s"):
            vals = [getattr(c, key) for c in ok if getattr(c, key) is not None]
            agg[f"mean_{key}"] = float(np.mean(vals)) if vals else None
        self.aggregates = agg

    def to_json(self) -> str:
        return json.dumps(
            {"cases": [asdict(c) for c in self.cases], "aggregates": self.aggregates},
            indent=2,
            sort_keys=True,
        )

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        fields = [
            "name", "status", "jaccard", "dsc", "precision", "recall",
            "f_measure", "error_rate", "sigma", "runtime_s", "message",
        ]
        with open(out / "report.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for case in self.cases:
                writer.writerow(asdict(case))


def _parse_strategy(token: str):
    from .graph import BestSigma, SelfTuning, SingleSigma

    if token == "self":
        return SelfTuning()
    if token == "best":
        return BestSigma()
    if token.startswith("single:"):
        return SingleSigma(float(token.split(":", 1)[1]))
    raise PipelineError(f"unknown sigma strategy {token!r}; use self, best, or single:<v>")


def _load_superpixels(spec_token: str, image: np.ndarray, base_dir: Path):
    from .superpixels import grid_superpixels, ingest_superpixels

    if spec_token.startswith("grid:"):
        return grid_superpixels(image.shape[:2], int(spec_token.split(":", 1)[1]))
    return ingest_superpixels(base_dir / spec_token)


def _run_case(case: dict, base_dir: Path) -> CaseResult:
    from .images import load_image_png, load_mask_png
    from .segmentation import (
        BoundingBox,
        LooseBox,
        Scribble,
        segment,
        segment_error_tolerant,
        sweep_sigma,
    )
    from .solver import ReplicatorConfig
    from .graph import BestSigma

    name = case.get("name", "unnamed")
    result = CaseResult(name=name, status="ok")
    start = time.perf_counter()
    image = load_image_png(base_dir / case["image"])
    gt = load_mask_png(base_dir / case["gt"]) if "gt" in case else None
    sp = _load_superpixels(case["superpixels"], image, base_dir)
    strategy = _parse_strategy(case.get("strategy", "self"))
    config = ReplicatorConfig(seed=int(case.get("seed", 0)))
    mode = case["mode"]
    ann_spec = case["annotation"]
    margin = case.get("margin")
    texture = bool(case.get("texture", True))

    if mode == "scribble":
        ann = Scribble(np.asarray(ann_spec["fg"]))
    elif mode == "scribble-et":
        ann = Scribble(np.asarray(ann_spec["fg"]), np.asarray(ann_spec["bg"]))
    elif mode == "bbox":
        box = BoundingBox(*ann_spec["box"])
        loose = float(case.get("looseness", ann_spec.get("looseness", 0.0)))
        ann = LooseBox(box, loose) if loose > 0 else box
    else:
        raise PipelineError(f"unknown mode {mode!r}")

    if isinstance(strategy, BestSigma):
        if gt is None:
            raise PipelineError("strategy 'best' requires a gt mask in the case record")
        if mode == "scribble-et":
            raise PipelineError("strategy 'best' supports scribble and bbox modes")
        sigma, seg = sweep_sigma(
            image, sp, ann, gt, grid=strategy.grid, config=config, margin=margin,
            include_texture=texture,
        )
        result.sigma = sigma
    elif mode == "scribble-et":
        seg = segment_error_tolerant(
            image, sp, ann.fg_pixels, ann.bg_pixels, strategy, config=config, margin=margin,
            include_texture=texture,
        )
    else:
        seg = segment(image, sp, ann, strategy, config=config, margin=margin,
                      include_texture=texture)

    result.runtime_s = time.perf_counter() - start
    if gt is not None:
        result.jaccard = jaccard(seg.mask, gt)
        result.dsc = dsc(seg.mask, gt)
        p, r, f = prf(seg.mask, gt)
        result.precision, result.recall, result.f_measure = p, r, f
        if mode == "bbox":
            box = ann.box if isinstance(ann, LooseBox) else ann
            result.error_rate = error_rate(seg.mask, gt, box.as_tuple())
    return result


def run_benchmark(manifest_path, out_dir=None) -> EvalReport:
    """Execute every case in a manifest; failures are recorded, not fatal."""
    manifest_path = Path(manifest_path)
    cases = json.loads(manifest_path.read_text())
    if not isinstance(cases, list):
        raise PipelineError("manifest must be a JSON list of case records")
    base_dir = manifest_path.parent
    report = EvalReport()
    for case in cases:
        try:
            report.cases.append(_run_case(case, base_dir))
        except Exception as exc:  # per-case isolation
            report.cases.append(
                CaseResult(
                    name=case.get("name", "unnamed"),
                    status="failed",
                    message=f"{type(exc).__name__}: {exc}",
                )
            )
            traceback.print_exc()
    report.finalize()
    if out_dir is not None:
        report.write(out_dir)
    return report
