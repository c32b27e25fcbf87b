"""Informational image of a position: the terminal value of the homogeneous
continuation of a history.

Three mutually checking routes are provided: a homogeneous L1 solve (robust
primary route), the explicit integral representation (independently coded
cross-check), and incremental updates along a controlled motion (the fast
path inside feedback loops).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError
from .fde_motion import L1Stepper, OriginalProblem, Position
from .fractional_core import gamma_fn
from .fundamental_matrix import FundamentalMatrixField
from .singquad import endpoint_panel_weights, history_bracket

if TYPE_CHECKING:  # pragma: no cover
    from .auxiliary_problem import AuxiliaryProblem
    from .fde_motion import ControlSignal

__all__ = ["InfoImage", "info_image_ode", "info_image_explicit", "info_image_increment"]


@dataclass(frozen=True)
class InfoImage:
    """Prediction of the uncontrolled motion at the terminal time."""

    z: np.ndarray
    source_time: float


def info_image_ode(
    pos: Position, problem: OriginalProblem, A_nodes: np.ndarray | None = None
) -> InfoImage:
    """Image via the homogeneous Cauchy problem, advanced by the L1 scheme.

    At pos.t == theta no solve is performed: the image is the history's
    terminal value.  ``A_nodes`` may carry pre-sampled system matrices to
    avoid re-sampling in tight loops.
    """
    pos.check_in_ball(problem.R_x)
    grid = problem.grid
    i0 = grid.index_of(pos.t)
    if i0 == grid.n_steps:
        return InfoImage(pos.w.last().copy(), pos.t)
    if A_nodes is None:
        A_nodes = problem.A.sample(grid)
    stepper = L1Stepper(grid, problem.alpha, A_nodes, pos.w.values)
    zero = np.zeros(problem.dim)
    for _ in range(i0 + 1, grid.n_steps + 1):
        stepper.step(zero)
    return InfoImage(stepper.x[grid.n_steps].copy(), pos.t)


def info_image_explicit(
    pos: Position, F: FundamentalMatrixField, problem: OriginalProblem
) -> InfoImage:
    """Image via the explicit representation at the terminal time.

    Assembles the homogeneous propagation of w(t_*) and the history injection
    directly from the F(theta, .) slice; the hypersingular inner kernel is
    handled by the same analytic panel treatment as the motion solver, but
    the assembly here is coded independently of it.
    """
    pos.check_in_ball(problem.R_x)
    a = problem.alpha.alpha
    grid = problem.grid
    i0 = grid.index_of(pos.t)
    N = grid.n_steps
    if i0 == N:
        return InfoImage(pos.w.last().copy(), pos.t)
    ts = grid.nodes
    m = N - i0
    wl, wr = endpoint_panel_weights(a, grid.h, m)
    wl = wl[::-1]  # index by panel l = 0..m-1 (lag d = m - l)
    wr = wr[::-1]
    Frow = F.table[N, i0:]  # (m+1, n, n)
    A_nodes = problem.A.sample(grid)[i0:]
    w_star = pos.w.last()

    aw = A_nodes @ w_star
    first = w_star.copy()
    for l in range(m):
        first += wl[l] * (Frow[l] @ aw[l]) + wr[l] * (Frow[l + 1] @ aw[l + 1])

    Hb = history_bracket(pos.w.values, grid.t0, grid.h, a, ts[i0:])
    second = np.zeros(problem.dim)
    for l in range(m):
        second += wl[l] * (Frow[l] @ Hb[l]) + wr[l] * (Frow[l + 1] @ Hb[l + 1])
    second /= gamma_fn(1.0 - a)
    return InfoImage(first + second, pos.t)


def info_image_increment(
    z_prev: InfoImage,
    aux: "AuxiliaryProblem",
    u: "ControlSignal | np.ndarray",
    t_from: float,
    t_to: float,
) -> InfoImage:
    """Advance an image along a controlled motion by integrating the reduced
    forcing over [t_from, t_to]; chained increments over a partition equal the
    one-shot increment over its union.
    """
    theta = aux.problem.grid.theta
    if t_to > theta + 1e-12:
        raise DomainError(f"increment end {t_to} beyond the terminal time {theta}")
    if t_to < t_from:
        raise DomainError(f"empty increment range [{t_from}, {t_to}]")
    z = np.atleast_1d(np.asarray(z_prev.z, dtype=float))
    if z.shape[0] != aux.state_dim:
        raise DomainError(
            f"image dimension {z.shape[0]} does not match the auxiliary state "
            f"dimension {aux.state_dim} (reduced={aux.reduced})"
        )
    return InfoImage(z + aux.increment(u, t_from, t_to), t_to)
