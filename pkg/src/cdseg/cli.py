"""Command-line entry points: extract, segment, coseg, bench, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import CdsError


def _load_graph_file(path: str) -> np.ndarray:
    """Dense affinity from .npy, header+matrix text, or `i j w` edge lists."""
    from .graph import load_affinity_edges, load_affinity_text, validate_affinity

    p = Path(path)
    if p.suffix == ".npy":
        return validate_affinity(np.load(p))
    with open(p) as fh:
        first = ""
        for raw in fh:
            first = raw.strip()
            if first:
                break
    if len(first.split()) == 1:
        return load_affinity_text(p)
    return load_affinity_edges(p)


def _parse_constraints(token: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in token.split(",") if v.strip() != "")
    except ValueError:
        raise CdsError(f"constraints must be a comma list of vertex ids, got {token!r}") from None


def _replicator_config(args) -> "ReplicatorConfig":
    from .solver import ReplicatorConfig

    kwargs = {}
    if args.tol is not None:
        kwargs["convergence_tol"] = args.tol
    if args.max_iters is not None:
        kwargs["max_iters"] = args.max_iters
    if getattr(args, "multi_start", None) is not None:
        kwargs["multi_start"] = args.multi_start
    if getattr(args, "seed", None) is not None:
        kwargs["seed"] = args.seed
    return ReplicatorConfig(**kwargs)


def _cmd_extract(args) -> int:
    from .solver import extract_constrained_dominant_sets

    affinity = _load_graph_file(args.graph)
    constraints = _parse_constraints(args.constraints)
    result = extract_constrained_dominant_sets(
        affinity,
        constraints,
        config=_replicator_config(args),
        alpha=args.alpha,
        margin=args.alpha_margin,
    )
    payload = {
        "n": int(affinity.shape[0]),
        "constraints": list(constraints),
        "alphas": [float(a) for a in result.alphas],
        "iterations": int(result.iterations_total),
        "clusters": [
            {
                "support": list(c.support),
                "characteristic": [float(v) for v in c.characteristic],
                "payoff": float(c.payoff),
                "kkt": float(c.kkt),
                "contains_constraints": list(c.contains_constraints),
            }
            for c in result.clusters
        ],
    }
    Path(args.out).write_text(json.dumps(payload, indent=2))
    print(f"{len(result.clusters)} cluster(s) -> {args.out}")
    return 0


def _sigma_strategy(token: str):
    from .graph import BestSigma, SelfTuning, SingleSigma

    if token == "self":
        return SelfTuning()
    if token == "best":
        return BestSigma()
    if token.startswith("single:"):
        return SingleSigma(float(token.split(":", 1)[1]))
    raise CdsError(f"unknown sigma strategy {token!r}; use self, best, or single:<v>")


def _load_superpixels(token: str, image: np.ndarray):
    from .superpixels import grid_superpixels, ingest_superpixels

    if token.startswith("grid:"):
        return grid_superpixels(image.shape[:2], int(token.split(":", 1)[1]))
    return ingest_superpixels(token)


def _cmd_segment(args) -> int:
    from .graph import BestSigma
    from .images import load_image_png, load_mask_png, save_mask_png
    from .metrics import jaccard
    from .segmentation import (
        BoundingBox,
        LooseBox,
        Scribble,
        segment,
        segment_error_tolerant,
        sweep_sigma,
    )

    image = load_image_png(args.image)
    sp = _load_superpixels(args.superpixels, image)
    ann_spec = json.loads(Path(args.ann).read_text())
    strategy = _sigma_strategy(args.sigma)
    gt = load_mask_png(args.gt) if args.gt else None
    config = _replicator_config(args)
    sigma_used = None

    if args.mode == "bbox":
        box = BoundingBox(*ann_spec["box"])
        ann = LooseBox(box, args.looseness) if args.looseness > 0 else box
    elif args.mode == "scribble":
        ann = Scribble(np.asarray(ann_spec["fg"]))
    elif args.mode == "scribble-et":
        if "bg" not in ann_spec:
            raise CdsError("scribble-et needs both 'fg' and 'bg' pixel lists")
        ann = Scribble(np.asarray(ann_spec["fg"]), np.asarray(ann_spec["bg"]))
    else:  # pragma: no cover - argparse choices guard this
        raise CdsError(f"unknown mode {args.mode!r}")

    if isinstance(strategy, BestSigma):
        if gt is None:
            raise CdsError("--sigma best needs --gt to score the sweep")
        if args.mode == "scribble-et":
            raise CdsError("--sigma best supports scribble and bbox modes")
        sigma_used, result = sweep_sigma(
            image, sp, ann, gt, config=config, include_texture=args.texture
        )
    elif args.mode == "scribble-et":
        result = segment_error_tolerant(
            image, sp, ann.fg_pixels, ann.bg_pixels, strategy, config=config,
            include_texture=args.texture,
        )
    else:
        result = segment(image, sp, ann, strategy, config=config, include_texture=args.texture)

    save_mask_png(result.mask, args.out_mask)
    report = {
        "mode": result.mode,
        "constraints": list(result.constraints),
        "selected_regions": list(result.selected_regions),
        "discarded_clusters": list(result.discarded),
        "all_discarded": result.all_discarded,
        "clusters": [
            {"support": list(c.support), "payoff": float(c.payoff), "kkt": float(c.kkt)}
            for c in result.extraction.clusters
        ],
    }
    if sigma_used is not None:
        report["sigma"] = sigma_used
    if gt is not None:
        report["jaccard"] = jaccard(result.mask, gt)
    if args.out_report:
        Path(args.out_report).write_text(json.dumps(report, indent=2))
    score = f" jaccard={report['jaccard']:.4f}" if gt is not None else ""
    print(f"mask -> {args.out_mask}{score}")
    return 0


def _cmd_coseg(args) -> int:
    from .coseg import ImageScribble, build_multi_image_graph, coseg_interactive, coseg_unsupervised
    from .graph import load_features_csv
    from .images import load_image_png, save_mask_png

    paths = [Path(p) for p in args.images.split(",") if p]
    if not paths:
        raise CdsError("--images needs at least one PNG path")
    images = [load_image_png(p) for p in paths]
    maps = [_load_superpixels(args.superpixels, im) for im in images]

    def per_image_csvs(root: str, what: str):
        out = []
        for p in paths:
            csv = Path(root) / f"{p.stem}.csv"
            if not csv.exists():
                raise CdsError(f"{what} file {csv} not found")
            out.append(load_features_csv(csv))
        return out

    descriptors = per_image_csvs(args.descriptors, "descriptor") if args.descriptors else None
    backgroundness = None
    if args.objectness != "builtin":
        backgroundness = [np.ravel(b) for b in per_image_csvs(args.objectness, "objectness")]

    config = _replicator_config(args)
    if args.scribbles:
        spec = json.loads(Path(args.scribbles).read_text())
        scribbles = [
            ImageScribble(
                int(s["image"]),
                np.asarray(s.get("fg", []), dtype=np.int64).reshape(-1, 2),
                np.asarray(s.get("bg", []), dtype=np.int64).reshape(-1, 2),
            )
            for s in spec
        ]
        result = coseg_interactive(
            images, maps, scribbles, config=config,
            descriptors=descriptors, backgroundness=backgroundness,
        )
    else:
        result = coseg_unsupervised(
            images, maps, config=config,
            descriptors=descriptors, backgroundness=backgroundness,
        )

    graph = build_multi_image_graph(images, maps, descriptors, backgroundness)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, (path, sp) in enumerate(zip(paths, maps)):
        stem = f"{k:02d}_{path.stem}"
        save_mask_png(result.masks[k], out_dir / f"{stem}_mask.png")
        base = graph.offsets[k]
        chosen = set(result.foreground_regions[k])
        regions = [
            {
                "id": r,
                "p_f": float(graph.p_f[base + r]),
                "foreground": r in chosen,
            }
            for r in range(sp.region_count)
        ]
        (out_dir / f"{stem}_regions.json").write_text(
            json.dumps({"image": path.name, "regions": regions}, indent=2)
        )
    counts = [len(r) for r in result.foreground_regions]
    print(f"{len(paths)} image(s) -> {out_dir} foreground regions per image: {counts}")
    return 0


def _cmd_bench(args) -> int:
    from .metrics import run_benchmark

    report = run_benchmark(args.manifest, out_dir=args.out)
    agg = report.aggregates
    mean_j = agg.get("mean_jaccard")
    j_part = f" mean_jaccard={mean_j:.4f}" if mean_j is not None else ""
    print(f"{agg['ok']}/{agg['cases']} case(s) ok{j_part} -> {args.out}")
    return 1 if agg["failed"] else 0


def _cmd_serve(args) -> int:  # pragma: no cover - spins an event loop
    import uvicorn

    from .service import create_app

    app = create_app(store_dir=args.store_dir, max_upload_mb=args.max_upload_mb)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cds", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run constrained extraction on a stored graph")
    p.add_argument("--graph", required=True, help=".npy matrix, text matrix, or edge list")
    p.add_argument("--constraints", required=True, help="comma list of 0-based vertex ids")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--alpha", type=float, default=None, help="fixed regularizer weight")
    group.add_argument("--alpha-margin", type=float, default=None,
                       help="margin added to the complement eigenvalue bound")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--multi-start", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("segment", help="segment one image from one annotation")
    p.add_argument("--image", required=True)
    p.add_argument("--superpixels", required=True, help="label PNG path or grid:<N>")
    p.add_argument("--mode", required=True, choices=["scribble", "scribble-et", "bbox"])
    p.add_argument("--ann", required=True, help="annotation JSON path")
    p.add_argument("--looseness", type=float, default=0.0, help="box area growth percent")
    p.add_argument("--sigma", default="self", help="self, single:<v>, or best")
    p.add_argument("--gt", default=None, help="ground-truth mask PNG (required for best)")
    p.add_argument("--no-texture", dest="texture", action="store_false",
                   help="color-only region features")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-report", default=None)
    p.set_defaults(func=_cmd_segment, multi_start=None, texture=True)

    p = sub.add_parser("coseg", help="joint foreground extraction across images")
    p.add_argument("--images", required=True, help="comma list of PNG paths")
    p.add_argument("--scribbles", default=None,
                   help="JSON list of {image, fg, bg}; omit for unsupervised mode")
    p.add_argument("--superpixels", default="grid:80", help="label PNG path or grid:<N>")
    p.add_argument("--descriptors", default=None,
                   help="directory of per-image <stem>.csv region descriptors")
    p.add_argument("--objectness", default="builtin",
                   help="'builtin' or a directory of per-image <stem>.csv P_b columns")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_coseg, multi_start=None)

    p = sub.add_parser("bench", help="run a benchmark manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("CDS_PORT", "8008")))
    p.add_argument("--store-dir", default=os.environ.get("CDS_STORE"))
    p.add_argument("--max-upload-mb", type=float, default=32.0)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CdsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
