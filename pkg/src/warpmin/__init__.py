"""Area minimization over warped product metrics on S2 x S1.

Builds warped metrics with positive scalar curvature, minimizes discrete
surface area inside glued covering boxes, and assembles the resulting
wrapped minimal surfaces with their diagnostics.
"""

__version__ = "0.1.0"

from .charts import BaseChart, BoxChart, GlueProfile, build_glue_profile
from .config import RunConfig, config_hash, load_config, parse_config
from .diagnostics import (
    CensusResult,
    LaminationReport,
    Transversal,
    curvature_map,
    disk_check,
    lamination_trend,
    sheet_census,
    trace_monotonicity,
)
from .errors import (
    AssemblyError,
    ConfigError,
    DegenerateMeshError,
    DomainError,
    GlueConstructionError,
    InvalidProfileError,
    PerturbationTooLargeError,
    PipelineError,
    WarpminError,
)
from .mesh import (
    AnnulusMesh,
    build_initial_annulus,
    build_slice_mesh,
    load_mesh,
    mesh_topology,
    riemannian_area,
    save_mesh,
)
from .metric import BaseMetric, GluedMetric
from .pipeline import (
    ContinuationSchedule,
    continuation_run,
    reflect_and_assemble,
    run_sequence,
    truncate_to_core,
)
from .solver import SolveConfig, SolveResult, minimize_area, translation_disjointness
from .intersect import mesh_intersections
from .warp import (
    WarpProfile,
    cosine_profile,
    graph_second_variation,
    metric_at,
    product_profile,
    quarter_cosine_profile,
    scalar_curvature,
    slice_area,
    slice_mean_curvature,
    validate_warp,
)

__all__ = [
    "__version__",
    "AnnulusMesh",
    "AssemblyError",
    "BaseChart",
    "BaseMetric",
    "BoxChart",
    "CensusResult",
    "ConfigError",
    "ContinuationSchedule",
    "DegenerateMeshError",
    "DomainError",
    "GlueConstructionError",
    "GlueProfile",
    "InvalidProfileError",
    "LaminationReport",
    "PerturbationTooLargeError",
    "PipelineError",
    "RunConfig",
    "SolveConfig",
    "SolveResult",
    "Transversal",
    "WarpProfile",
    "WarpminError",
    "build_glue_profile",
    "build_initial_annulus",
    "build_slice_mesh",
    "config_hash",
    "continuation_run",
    "cosine_profile",
    "curvature_map",
    "disk_check",
    "graph_second_variation",
    "lamination_trend",
    "load_config",
    "load_mesh",
    "mesh_intersections",
    "mesh_topology",
    "metric_at",
    "minimize_area",
    "parse_config",
    "product_profile",
    "quarter_cosine_profile",
    "reflect_and_assemble",
    "riemannian_area",
    "run_sequence",
    "save_mesh",
    "scalar_curvature",
    "sheet_census",
    "slice_area",
    "slice_mean_curvature",
    "trace_monotonicity",
    "translation_disjointness",
    "truncate_to_core",
    "validate_warp",
]
