"""Constrained dominant-set clustering for interactive image segmentation.

The solver extracts vertex clusters that are forced to overlap a chosen
constraint set; the pipelines wire that solver to superpixel graphs for
scribble/box segmentation of single images and joint foreground extraction
across image collections. Hot replicator kernels run through a compiled
extension when available (`cdseg.kernels.BACKEND` says which one loaded).
"""

from .errors import CdsError, ExtractionError, GraphError, PipelineError, SolverFault
from .graph import (
    BestSigma,
    SelfTuning,
    SingleSigma,
    build_gaussian_affinity,
    choose_alpha,
    complement_top_eigenvalue,
    load_affinity_edges,
    load_affinity_text,
    validate_affinity,
)
from .kernels import BACKEND
from .oracles import is_dominant_set
from .solver import (
    Cluster,
    ExtractionResult,
    ReplicatorConfig,
    extract_constrained_dominant_sets,
)
from .superpixels import SuperpixelMap, grid_superpixels, ingest_superpixels, validate_label_map
from .features import compute_region_features, minmax_normalize
from .segmentation import (
    BoundingBox,
    LooseBox,
    Scribble,
    SegmentationResult,
    dilate_bbox,
    generate_synthetic_scribbles,
    segment,
    segment_error_tolerant,
    sweep_sigma,
)
from .coseg import (
    CosegResult,
    ImageScribble,
    MultiImageGraph,
    build_multi_image_graph,
    coseg_interactive,
    coseg_unsupervised,
)
from .metrics import EvalReport, dsc, error_rate, jaccard, prf, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BestSigma",
    "BoundingBox",
    "Cluster",
    "CosegResult",
    "EvalReport",
    "ExtractionResult",
    "CdsError",
    "ExtractionError",
    "GraphError",
    "ImageScribble",
    "LooseBox",
    "MultiImageGraph",
    "PipelineError",
    "ReplicatorConfig",
    "Scribble",
    "SegmentationResult",
    "SelfTuning",
    "SingleSigma",
    "SolverFault",
    "SuperpixelMap",
    "build_gaussian_affinity",
    "build_multi_image_graph",
    "choose_alpha",
    "complement_top_eigenvalue",
    "compute_region_features",
    "coseg_interactive",
    "coseg_unsupervised",
    "dilate_bbox",
    "dsc",
    "error_rate",
    "extract_constrained_dominant_sets",
    "generate_synthetic_scribbles",
    "grid_superpixels",
    "ingest_superpixels",
    "is_dominant_set",
    "jaccard",
    "load_affinity_edges",
    "load_affinity_text",
    "minmax_normalize",
    "prf",
    "run_benchmark",
    "segment",
    "segment_error_tolerant",
    "sweep_sigma",
    "validate_affinity",
    "validate_label_map",
    "__version__",
]
