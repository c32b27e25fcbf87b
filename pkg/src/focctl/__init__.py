"""Optimal control of linear Caputo fractional systems with a fixed terminal
time, via reduction to first-order auxiliary problems.

The reduction maps a position (time plus motion history) to its informational
image, the terminal-time prediction of the uncontrolled continuation; the
image obeys a first-order equation driven by a weighted forcing, so classical
open-loop and positional-feedback machinery applies.  Shifted-horizon
variants keep the auxiliary dynamics bounded, with explicit accuracy budgets.
"""

from .errors import ConfigError, DomainError, FocctlError, SolverError
from .fractional_core import (
    FracOrder,
    SampledFunction,
    TimeGrid,
    caputo_derivative,
    gamma_fn,
    mittag_leffler_matrix,
    rl_integral,
)
from .fundamental_matrix import (
    FundamentalMatrixField,
    ProblemConstants,
    SystemMatrixFunction,
    constants,
    eval_F,
    field_from_series,
    solve_fundamental,
)
from .fde_motion import (
    ControlSet,
    ControlSignal,
    OriginalProblem,
    Position,
    Reduction,
    cost_J,
    solve_motion_direct,
    solve_motion_repr,
)
from .informational_image import (
    InfoImage,
    info_image_explicit,
    info_image_increment,
    info_image_ode,
)
from .auxiliary_problem import (
    AuxiliaryProblem,
    EpsilonBudget,
    budget_for_aux,
    build_auxiliary,
    cost_J_aux,
    epsilon_budget,
    f_star,
    sampled_sigma_modulus,
    solve_aux_motion,
    splice_control,
)
from .open_loop import (
    ValueTable,
    default_z_grid,
    dp_policy_rollout,
    example1_control,
    example1_value,
    example2_control,
    example2_lambda,
    example2_value,
    reachable_radius,
    value_iteration_1d,
)
from .feedback import (
    AuxStrategy,
    ClosedLoopResult,
    NuTable,
    OriginalStrategy,
    Partition,
    example3_psi,
    example3_strategy,
    example4_nu_table,
    example4_strategy,
    extremal_shift,
    lift_strategy,
    run_aux_control_law,
    run_control_law,
    unit_ball_mesh,
)
from . import catalog

__version__ = "0.1.0"
