"""Solver and estimate monitor for the diffusive Hindmarsh-Rose equations."""

from .grid import (
    Domain,
    Field,
    h1_seminorm,
    inner,
    laplacian_neumann,
    make_grid,
    mean,
    norm_lp,
    read_field,
    shift_field,
    write_field,
)
from .model import (
    HRParameters,
    State,
    constant_state,
    phi,
    psi,
    reaction,
    reaction_jacobian_point,
    typical_parameters,
)
from .integrate import (
    MONITOR_COLUMNS,
    BlowUpError,
    SolverConfig,
    SolverError,
    Trajectory,
    estimate_convergence_order,
    run,
    solve_helmholtz_neumann,
    step_imex,
    step_rk4,
)
from .analysis import (
    ConstantsReport,
    MonitorSample,
    absorbing_time,
    compute_constants,
    gronwall_envelope,
    homogeneous_equilibria,
    lyapunov_series,
    spike_train_metrics,
    tail_slope,
    translation_modulus,
    verify_dissipativity,
)
from .config import ICSpec, RunSpec, initial_state, parse_config, serialize_config

__version__ = "0.1.0"
