"""Numerical laboratory for the timelike minimal-surface (membrane)
equation on flat space-time: evolution in one to three space dimensions,
vector-field decay diagnostics, and the conformal-inversion compactified
picture with two-route cross checks.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config
from .diagnostics import (
    DiagnosticsConfig,
    GammaIndex,
    NormRecord,
    apply_gamma,
    bootstrap_norms,
    box_commutator_check,
    fit_decay_exponent,
    gamma_basis,
    gamma_q_commutation_check,
    pair,
    scaling,
    translation,
)
from .equation import (
    DerivativeBundle,
    Formulation,
    box_operator,
    q00,
    qij,
    residual,
    residual_divergence,
    residual_geometric,
    residual_nullform,
)
from .errors import (
    ConfigError,
    CorruptFieldError,
    DegeneracyError,
    FixtureError,
    InsufficientHistoryError,
    MinkMembraneError,
    NonHyperbolicError,
    OnOrOutsideConeError,
)
from .evolution import (
    Breakdown,
    InitialData,
    ReachedEnd,
    SolverConfig,
    State,
    SupportGuard,
    Trajectory,
    evolve,
    initial_state,
    scale_solution,
    step,
)
from .fields import GridSpec, ScalarField, derivative, norm_l2, norm_sup
from .kelvin import (
    ConePoint,
    ConformalChart,
    HyperboloidParam,
    PipelineReport,
    compactified_rhs,
    compactified_solve_1d,
    kappa,
    load_compactified_constants,
    pipeline_compare,
    pipeline_levels,
    pullback_metric,
    rho_of,
    transform_to_compactified,
    verify_compactified_consistency,
    verify_conformal_suite,
)
from .windows import FieldWindow, bundle_from_window, window_from_state

__all__ = [
    "Breakdown",
    "ConePoint",
    "ConfigError",
    "ConformalChart",
    "CorruptFieldError",
    "DegeneracyError",
    "DerivativeBundle",
    "DiagnosticsConfig",
    "FieldWindow",
    "FixtureError",
    "Formulation",
    "GammaIndex",
    "GridSpec",
    "HyperboloidParam",
    "InitialData",
    "InsufficientHistoryError",
    "MinkMembraneError",
    "NonHyperbolicError",
    "NormRecord",
    "OnOrOutsideConeError",
    "PipelineReport",
    "ReachedEnd",
    "RunConfig",
    "ScalarField",
    "SolverConfig",
    "State",
    "SupportGuard",
    "Trajectory",
    "apply_gamma",
    "bootstrap_norms",
    "box_commutator_check",
    "box_operator",
    "bundle_from_window",
    "compactified_rhs",
    "compactified_solve_1d",
    "derivative",
    "evolve",
    "fit_decay_exponent",
    "gamma_basis",
    "gamma_q_commutation_check",
    "initial_state",
    "kappa",
    "load_compactified_constants",
    "load_config",
    "norm_l2",
    "norm_sup",
    "pair",
    "parse_config",
    "pipeline_compare",
    "pipeline_levels",
    "pullback_metric",
    "q00",
    "qij",
    "residual",
    "residual_divergence",
    "residual_geometric",
    "residual_nullform",
    "rho_of",
    "scale_solution",
    "scaling",
    "step",
    "transform_to_compactified",
    "translation",
    "verify_compactified_consistency",
    "verify_conformal_suite",
    "window_from_state",
]
