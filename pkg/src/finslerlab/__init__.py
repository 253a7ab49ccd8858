"""Numerical checks of projective flatness for Finsler metrics."""

from .core import (
    BasePoint,
    DomainError,
    EvaluationError,
    FinslerError,
    Jet,
    MeasurementError,
    RegularityError,
    ResidualReport,
    SpecError,
    TangentSample,
    TransformError,
    UsageError,
    euler_identity_check,
    validate_homogeneity,
)
from .flatness import (
    hamel_report,
    hamel_residual,
    indicatrix_translation_check,
    minkowski_check,
    minkowski_criteria,
    param_report,
    param_residual,
    randers_reduction_residual,
    randers_report,
)
from .geodesics import GeodesicTrace, el_acceleration, eul2_acceleration, integrate_geodesic
from .jets import fd_jet, jet_at, jet_batch, jet_deviation
from .metrics import Metric, MetricSpec, build_metric, load_metric, pullback, sample_domain, zoo
from .poly import Polynomial, PolyMap
from .projective import VectorFieldSpec, flow_oracle, killing_residual, spray_gauge
from .regularity import fundamental_tensor, is_finsler_rank, kernel_direction_check, reduced_hessian_rank
from .transforms import CoordinateChange, affine_preservation_test, eval_terms, rectilinear_search

__version__ = "0.1.0"
