"""Reaction-diffusion with dynamic boundary conditions: solvers and numerical experiments."""

__version__ = "0.1.0"

from .grid import (
    GridDomain,
    StateField,
    build_grid,
    build_interval_grid,
    build_rectangle_grid,
    gradient,
    normal_derivative,
    trace,
    w1p_norm,
    x2_norm_sq,
    x_inner,
    x_norm,
)
from .nonlinear import FluxSpec, Nonlinearity, parse_flux, parse_nonlinearity
from .solver import (
    SolverConfig,
    TrajectoryRecord,
    assemble_bp,
    energy,
    simulate,
    solve_stationary,
    step_implicit,
)
from .hypotheses import (
    check_balance_nb,
    check_h1,
    check_h2,
    check_h3,
    check_weaker_condition,
    classify_regime,
    estimate_poincare_constant,
    estimate_trace_constant,
)
from .diagnostics import (
    detect_absorbing_set,
    detect_blowup,
    fit_dissipative_decay,
    linf_bound,
    norm_ladder,
)
from .attractor import (
    DimensionScenario,
    expected_dimension,
    kaplan_yorke,
    lyapunov_spectrum,
    sweep_nu,
    upper_bound_dim,
)
from .blowup import (
    blowup_experiment,
    check_h_criterion,
    construct_subsolution,
    dirichlet_eigenpair,
    ode_compare,
    verify_comparison,
)
