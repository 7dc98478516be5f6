"""Dynamic slacks-based efficiency benchmarking over panel data."""

__version__ = "0.1.0"

from .panel_data import (
    GeneratorSpec,
    PanelDataset,
    Variable,
    VariableRole,
    VariableSpec,
    generate_synthetic,
    load_dataset,
)
from .dea_core import (
    EfficiencyResult,
    SbmConfig,
    SolveStatus,
    Variant,
    build_model,
    evaluate_all,
    evaluate_dmu,
    static_sbm,
)
from .partition_heuristic import (
    HeuristicResult,
    PartitionPlan,
    evaluate_heuristic,
    partition,
)
from .clustering import ClusterModel, grade_clusters, kmeans, select_k, silhouette
from .sensitivity import (
    Delta,
    SensitivityReport,
    compute_deltas,
    sensitivity_report,
    worst_branch,
)

__all__ = [
    "__version__",
    "GeneratorSpec",
    "PanelDataset",
    "Variable",
    "VariableRole",
    "VariableSpec",
    "generate_synthetic",
    "load_dataset",
    "EfficiencyResult",
    "SbmConfig",
    "SolveStatus",
    "Variant",
    "build_model",
    "evaluate_all",
    "evaluate_dmu",
    "static_sbm",
    "HeuristicResult",
    "PartitionPlan",
    "evaluate_heuristic",
    "partition",
    "ClusterModel",
    "grade_clusters",
    "kmeans",
    "select_k",
    "silhouette",
    "Delta",
    "SensitivityReport",
    "compute_deltas",
    "sensitivity_report",
    "worst_branch",
]
