"""capflow: a 1D finite-volume laboratory for two-phase flow across a rock-type jump."""

from .errors import (
    CapflowError,
    ConfigError,
    DomainError,
    GridMismatchError,
    LevelError,
    RegimeError,
    StabilityError,
    StructuralError,
    VariantError,
)
from .flux_model import (
    FluxSpec,
    Medium,
    MediumPair,
    UnimodalReport,
    canonical_pair,
    capillary_graphs_intersect,
    eval_flux,
    flux_minimizer,
    kirchhoff,
    make_flux,
    make_medium,
    make_pair,
    validate_unimodal,
)

from .grid import Field, Grid, make_field, make_grid
from .connections import (
    CASE_LEFT_MINIMIZER,
    CASE_RIGHT_MINIMIZER,
    VARIANTS,
    ConnectionPair,
    OptimalConnection,
    ReachableLimit,
    SteadyProfile,
    build_kappa_eps,
    connect_level,
    godunov_flux,
    in_attainable_set,
    interface_flux,
    make_connection,
    optimal_connection,
    reachable_limits,
    steady_profile,
    write_optimal_connection_csv,
    write_steady_profile_csv,
)

from .hyperbolic_solver import (
    HyperbolicConfig,
    Trajectory,
    exact_riemann_single_medium,
    hyperbolic_face_fluxes,
    hyperbolic_solve,
    hyperbolic_step,
    interface_traces,
    max_stable_dt,
    riemann_field,
    write_trajectory_csv,
)

from .parabolic_solver import (
    DiagnosticsRecord,
    InterfaceState,
    ParabolicConfig,
    interface_solve,
    parabolic_face_fluxes,
    parabolic_solve,
    parabolic_stable_dt,
    parabolic_step,
    smooth_initial_data,
    write_interface_states_csv,
)

from .entropy_diagnostics import (
    EntropyReport,
    adapted_cell_residuals,
    adapted_entropy_residual,
    build_entropy_report,
    kruzkov_cell_residuals,
    kruzkov_flux,
    l1_comparison,
    mass_conservation_check,
    undercompressive_check,
    write_entropy_report_json,
)

from .cli_harness import (
    ExperimentConfig,
    ExperimentReport,
    RunRecord,
    parse_config,
    run_experiment,
    space_time_l1_distance,
    write_outputs,
)

__version__ = "0.1.0"
