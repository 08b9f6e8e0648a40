"""Pyramid-guided CNN filter pruning toolkit."""

from .clustering import Cluster, ClusterSet, assign, cluster, init_representatives
from .costs import (
    CostLine,
    CostReport,
    count,
    format_table,
    retained_counts_from_rates,
    retained_counts_from_report,
)
from .driver import (
    DEFAULT_LOSS_BUDGET,
    DriverState,
    LayerPenalty,
    LayerTrace,
    RoundEvent,
    SubprocessEvaluator,
    SyntheticEvaluator,
    SyntheticSpec,
    binary_search_layer,
    run,
    serve_evaluator,
    synthetic_evaluator,
)
from .errors import (
    DataError,
    EvaluatorError,
    ManifestError,
    ReportError,
    UsageError,
    WeightBlobError,
)
from .estimators import AdaptiveFilterPruner, MedianRootClustering, NearestFilterSearch
from .model_io import (
    FcSpec,
    FilterTensor,
    LayerResult,
    LayerSpec,
    ModelManifest,
    PruneReport,
    alexnet_manifest,
    load_model,
    read_manifest,
    read_report,
    report_from_dict,
    report_to_dict,
    save_model,
    vgg16_manifest,
    write_report,
)
from .pyramid import (
    HybridPyramid,
    PyramidIndex,
    build_index,
    build_layer_pyramids,
    build_pyramid,
    build_pyramids_from_matrix,
    decompose_channels,
    level_factor,
    n_levels,
)
from .search import (
    CandidateSet,
    Rejection,
    SearchResult,
    SearchStats,
    base_distance_sq,
    find_closest,
    level_distance_sq,
    search_window,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveFilterPruner",
    "CandidateSet",
    "Cluster",
    "ClusterSet",
    "CostLine",
    "CostReport",
    "DEFAULT_LOSS_BUDGET",
    "DataError",
    "DriverState",
    "EvaluatorError",
    "FcSpec",
    "FilterTensor",
    "HybridPyramid",
    "LayerPenalty",
    "LayerResult",
    "LayerSpec",
    "LayerTrace",
    "ManifestError",
    "MedianRootClustering",
    "ModelManifest",
    "NearestFilterSearch",
    "PruneReport",
    "PyramidIndex",
    "Rejection",
    "ReportError",
    "RoundEvent",
    "SearchResult",
    "SearchStats",
    "SubprocessEvaluator",
    "SyntheticEvaluator",
    "SyntheticSpec",
    "UsageError",
    "WeightBlobError",
    "alexnet_manifest",
    "assign",
    "base_distance_sq",
    "binary_search_layer",
    "build_index",
    "build_layer_pyramids",
    "build_pyramid",
    "build_pyramids_from_matrix",
    "cluster",
    "count",
    "decompose_channels",
    "find_closest",
    "format_table",
    "init_representatives",
    "level_distance_sq",
    "level_factor",
    "load_model",
    "n_levels",
    "read_manifest",
    "read_report",
    "report_from_dict",
    "report_to_dict",
    "retained_counts_from_rates",
    "retained_counts_from_report",
    "run",
    "save_model",
    "search_window",
    "serve_evaluator",
    "synthetic_evaluator",
    "vgg16_manifest",
    "write_report",
]
