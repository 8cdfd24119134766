"""Besov and Triebel-Lizorkin quasi-norms associated with a non-negative
self-adjoint operator on a finite metric measure space.

The package builds spaces and their graph Laplacians, evaluates the norms
through dyadic spectral filters, heat-semigroup square functions and Lusin
area functions, and measures the constants in the kernel estimates that
make these characterisations equivalent.
"""

from .errors import (
    AccuracyError,
    ConfigError,
    ConstructionError,
    DomainError,
    HeatBesovError,
    NumericError,
)
from .filters import (
    SpectralFilter,
    filters_from_tag,
    make_heat_pair,
    make_littlewood_pair,
    make_partition_pair,
    normalize_to_partition,
)
from .norms import (
    NormParams,
    NormResult,
    besov_heat_norm,
    besov_norm,
    triebel_area_norm,
    triebel_heat_norm,
    triebel_norm,
)
from .quadrature import QuadratureGrid
from .space import (
    GeometryProfile,
    MetricMeasureSpace,
    cycle_space,
    fit_geometry,
    grid_space,
    path_space,
    random_geometric_space,
    single_point_space,
    space_from_files,
)
from .spectral import (
    SelfAdjointOperator,
    build_graph_laplacian,
    diagnose_heat,
    heat_kernel,
    operator_from_matrix,
)
from .verify import CheckResult, evaluate_norm

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "ConfigError", "ConstructionError", "DomainError", "HeatBesovError",
    "NumericError", "SpectralFilter", "filters_from_tag", "make_heat_pair",
    "make_littlewood_pair", "make_partition_pair", "normalize_to_partition", "NormParams",
    "NormResult", "besov_heat_norm", "besov_norm", "triebel_area_norm", "triebel_heat_norm",
    "triebel_norm", "QuadratureGrid", "GeometryProfile", "MetricMeasureSpace", "cycle_space",
    "fit_geometry", "grid_space", "path_space", "random_geometric_space", "single_point_space",
    "space_from_files", "SelfAdjointOperator", "build_graph_laplacian", "diagnose_heat",
    "heat_kernel", "operator_from_matrix", "CheckResult", "evaluate_norm", "__version__",
]
