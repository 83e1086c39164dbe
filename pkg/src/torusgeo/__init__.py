"""Solver and verification harness for a degenerate fully nonlinear equation.

The equation is u_tt (lap u - b |grad u|^2 + a(x)) - |grad u_t|^2 = f on a
flat torus cross a time interval, with two-point data in time. The package
builds barriers, runs damped-Newton continuation inside the admissibility
cone, sweeps the right-hand side toward the degenerate limit, checks the
discrete a priori bounds, and scans the associated elementary symmetric
function cones for the concavity structure that drives the estimates.
"""

from .config import (
    ConfigError,
    RunConfig,
    build_exact,
    build_problem,
    compile_expression,
    load_config,
)
from .estimates import (
    BoundsReport,
    bounds_report,
    check_c0,
    check_ut_bounds,
    f_dependencies,
    gradient_estimate_probe,
    identity_suite,
    weak_c2_report,
    write_bounds_report,
)
from .mesh import (
    GridSpec,
    ScalarField,
    SpaceField,
    d_t,
    d_tt,
    grad_t,
    gradient,
    inf,
    laplacian,
    read_field_bin,
    read_scalar_csv,
    read_space_csv,
    sample_scalar,
    sample_space,
    sup,
    sup_norm,
    write_field_bin,
    write_field_csv,
)
from .operator import (
    AdmissibilityReport,
    ConeData,
    InvalidProblem,
    LinearSystem,
    ProblemSpec,
    apply_Q,
    assemble_dQ,
    compute_B,
    cone_quantities,
    ellipticity_check,
    first_order_data,
    q_form,
    residual,
    symbol_matrix,
)
from .solver import (
    TRACE_HEADER,
    LostAdmissibility,
    NonConvergence,
    SolveOptions,
    SolveResult,
    SolverError,
    StepCollapse,
    SweepEntry,
    TraceRecord,
    barrier,
    compute_c_star,
    continuation_solve,
    epsilon_sweep,
    newton_solve,
    normalize_shift,
    uniqueness_probe,
)
from .symcone import (
    ComparisonReport,
    ComparisonScanReport,
    ConePoint,
    F_k_eval,
    G_k_eval,
    HermitianConePoint,
    ScanReport,
    ScanViolation,
    comparison_check,
    comparison_scan,
    equalize_value,
    gamma_k_membership,
    log_q_hessian,
    midpoint_concavity_scan,
    newton_transform,
    sigma_k,
    write_counterexamples,
    write_scan_records,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "BoundsReport",
    "ComparisonReport",
    "ComparisonScanReport",
    "ConeData",
    "ConePoint",
    "ConfigError",
    "F_k_eval",
    "G_k_eval",
    "GridSpec",
    "HermitianConePoint",
    "InvalidProblem",
    "LinearSystem",
    "LostAdmissibility",
    "NonConvergence",
    "ProblemSpec",
    "RunConfig",
    "ScalarField",
    "ScanReport",
    "ScanViolation",
    "SolveOptions",
    "SolveResult",
    "SolverError",
    "SpaceField",
    "StepCollapse",
    "SweepEntry",
    "TRACE_HEADER",
    "TraceRecord",
    "apply_Q",
    "assemble_dQ",
    "barrier",
    "bounds_report",
    "build_exact",
    "build_problem",
    "check_c0",
    "check_ut_bounds",
    "comparison_check",
    "comparison_scan",
    "compile_expression",
    "compute_B",
    "compute_c_star",
    "cone_quantities",
    "continuation_solve",
    "d_t",
    "d_tt",
    "ellipticity_check",
    "epsilon_sweep",
    "equalize_value",
    "f_dependencies",
    "first_order_data",
    "gamma_k_membership",
    "grad_t",
    "gradient",
    "gradient_estimate_probe",
    "identity_suite",
    "inf",
    "laplacian",
    "load_config",
    "log_q_hessian",
    "midpoint_concavity_scan",
    "newton_solve",
    "newton_transform",
    "normalize_shift",
    "q_form",
    "read_field_bin",
    "read_scalar_csv",
    "read_space_csv",
    "residual",
    "sample_scalar",
    "sample_space",
    "sigma_k",
    "sup",
    "sup_norm",
    "symbol_matrix",
    "uniqueness_probe",
    "weak_c2_report",
    "write_bounds_report",
    "write_counterexamples",
    "write_field_bin",
    "write_field_csv",
    "write_scan_records",
]
