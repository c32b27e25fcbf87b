"""Motions of the controlled Caputo system from arbitrary positions.

Two independent routes are provided and cross-validate each other: the
representation formula driven by the fundamental matrix, and direct L1
time stepping.  Both pin the supplied history and always keep the memory
base point at t0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SolverError
from .fractional_core import (
    FracOrder,
    SampledFunction,
    TimeGrid,
    gamma_fn,
    l1_coefficients,
)
from .fundamental_matrix import FundamentalMatrixField, SystemMatrixFunction
from .singquad import endpoint_panel_weights, history_bracket

__all__ = [
    "ControlSet",
    "ControlSignal",
    "Position",
    "Reduction",
    "OriginalProblem",
    "L1Stepper",
    "solve_motion_direct",
    "solve_motion_repr",
    "cost_J",
]


@dataclass(frozen=True)
class ControlSet:
    """Compact control range, materialized to a finite sample list.

    ``points`` drive every discrete optimization; membership tests use the
    box bounds when the set was built from a box, otherwise exact rows.
    """

    points: np.ndarray  # (n_points, r)
    lows: np.ndarray
    highs: np.ndarray
    is_box: bool

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise DomainError("control set must be non-empty")
        if not np.all(np.isfinite(pts)):
            raise DomainError("control points must be finite")
        object.__setattr__(self, "points", pts)
        if np.any(pts < self.lows[None, :] - 1e-12) or np.any(pts > self.highs[None, :] + 1e-12):
            raise DomainError("control points violate the declared bounds")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def point(self, i: int) -> np.ndarray:
        return self.points[i]

    def contains(self, u: Sequence[float], tol: float = 1e-12) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.is_box:
            return bool(np.all(u >= self.lows - tol) and np.all(u <= self.highs + tol))
        return bool(np.any(np.all(np.abs(self.points - u[None, :]) <= tol, axis=1)))

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> "ControlSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points=pts, lows=pts.min(axis=0), highs=pts.max(axis=0), is_box=False)

    @classmethod
    def from_box(
        cls, lows: Sequence[float], highs: Sequence[float], counts: Sequence[int]
    ) -> "ControlSet":
        lows = np.atleast_1d(np.asarray(lows, dtype=float))
        highs = np.atleast_1d(np.asarray(highs, dtype=float))
        counts = np.atleast_1d(np.asarray(counts, dtype=int))
        if not (lows.shape == highs.shape == counts.shape):
            raise DomainError("box specs must share one shape")
        if np.any(highs < lows) or np.any(counts < 1):
            raise DomainError("empty box or non-positive sample count")
        axes = [np.linspace(lo, hi, c) for lo, hi, c in zip(lows, highs, counts)]
        pts = np.array(list(itertools.product(*axes)), dtype=float)
        return cls(points=pts, lows=lows, highs=highs, is_box=True)


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant control on grid panels [tau_j, tau_{j+1})."""

    grid: TimeGrid
    start_index: int
    values: np.ndarray  # (n_panels, r)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DomainError(f"bad control value shape {v.shape}")
        if self.start_index < 0 or self.start_index + v.shape[0] > self.grid.n_steps:
            raise DomainError("control panels fall outside the grid")
        object.__setattr__(self, "values", v)

    @property
    def n_panels(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def end_index(self) -> int:
        return self.start_index + self.n_panels

    def on_panel(self, j: int) -> np.ndarray:
        """Value on the grid panel [tau_j, tau_{j+1})."""
        if j < self.start_index or j >= self.end_index:
            raise DomainError(f"panel {j} outside control range")
        return self.values[j - self.start_index]

    def validate_in(self, cset: ControlSet, tol: float = 1e-12) -> None:
        for k, u in enumerate(self.values):
            if not cset.contains(u, tol):
                raise DomainError(f"control value on panel {self.start_index + k} outside the set")

    def restricted(self, n_panels: int) -> "ControlSignal":
        return ControlSignal(self.grid, self.start_index, self.values[:n_panels].copy())

    @classmethod
    def constant(
        cls, grid: TimeGrid, u: Sequence[float], start_index: int = 0, n_panels: int | None = None
    ) -> "ControlSignal":
        if n_panels is None:
            n_panels = grid.n_steps - start_index
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return cls(grid, start_index, np.tile(u, (n_panels, 1)))

    @classmethod
    def from_function(
        cls,
        grid: TimeGrid,
        fn: Callable[[float], Sequence[float]],
        start_index: int = 0,
        n_panels: int | None = None,
    ) -> "ControlSignal":
        """Sample a control law at panel midpoints (panel-average surrogate)."""
        if n_panels is None:
            n_panels = grid.n_steps - start_index
        mids = grid.nodes[start_index : start_index + n_panels] + 0.5 * grid.h
        vals = np.array([np.atleast_1d(fn(float(t))) for t in mids], dtype=float)
        return cls(grid, start_index, vals)


@dataclass(frozen=True)
class Position:
    """A time t paired with the motion history on [t0, t]."""

    t: float
    w: SampledFunction

    def __post_init__(self) -> None:
        if abs(self.w.t_end - self.t) > 1e-9 * max(1.0, abs(self.t)):
            raise DomainError(f"history ends at {self.w.t_end}, not at t={self.t}")

    @property
    def index(self) -> int:
        return self.w.n_nodes - 1

    def check_in_ball(self, R_x: float) -> None:
        r = float(np.linalg.norm(self.w.first()))
        if r > R_x * (1.0 + 1e-9) + 1e-12:
            raise DomainError(f"||w(t0)|| = {r:.6g} exceeds R_x = {R_x:.6g}")

    @classmethod
    def initial(cls, grid: TimeGrid, x0: Sequence[float]) -> "Position":
        return cls(grid.t0, SampledFunction.constant(grid, x0, 1))


@dataclass(frozen=True)
class Reduction:
    """Terminal-cost factorization sigma(x) = mu(K (x - c)) lowering the state dimension."""

    K: np.ndarray  # (n_red, n)
    c: np.ndarray  # (n,)
    mu: Callable[[np.ndarray], float]

    def __post_init__(self) -> None:
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if K.shape[1] != c.shape[0]:
            raise DomainError(f"K {K.shape} and c {c.shape} disagree")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "c", c)

    @property
    def reduced_dim(self) -> int:
        return self.K.shape[0]

    def apply(self, z: np.ndarray) -> np.ndarray:
        return self.K @ (np.asarray(z, dtype=float) - self.c)


@dataclass(frozen=True)
class OriginalProblem:
    """Controlled linear Caputo system with a Bolza cost."""

    alpha: FracOrder
    grid: TimeGrid
    A: SystemMatrixFunction
    f: Callable[[float, np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], float]
    chi: Callable[[float, np.ndarray], float]
    control_set: ControlSet
    R_x: float
    reduction: Reduction | None = None

    def __post_init__(self) -> None:
        if self.R_x <= 0.0:
            raise DomainError(f"need R_x > 0, got {self.R_x!r}")

    @property
    def dim(self) -> int:
        return self.A.dim

    @property
    def theta(self) -> float:
        return self.grid.theta

    def f_at(self, t: float, u: np.ndarray) -> np.ndarray:
        v = np.atleast_1d(np.asarray(self.f(t, np.atleast_1d(u)), dtype=float))
        if v.shape != (self.dim,):
            raise DomainError(f"f({t}, u) has shape {v.shape}, expected ({self.dim},)")
        return v

    def f_bound(self) -> float:
        """Max of ||f|| over grid nodes and control samples."""
        worst = 0.0
        for t in self.grid.nodes:
            for u in self.control_set.points:
                worst = max(worst, float(np.linalg.norm(self.f_at(float(t), u))))
        return worst

    def chi_bound(self) -> float:
        worst = 0.0
        for t in self.grid.nodes:
            for u in self.control_set.points:
                worst = max(worst, abs(float(self.chi(float(t), u))))
        return worst


class L1Stepper:
    """Incremental L1 marching for (C-D^alpha x)(t) = A(t) x(t) + g(t).

    The memory sum always reaches back to t0; restarting from a mid-course
    position therefore replays the pinned history inside every later step.
    """

    def __init__(self, grid: TimeGrid, alpha: FracOrder, A_nodes: np.ndarray, history: np.ndarray):
        a = alpha.alpha
        self.grid = grid
        self.n = A_nodes.shape[1]
        self.beta = grid.h ** (-a) / gamma_fn(2.0 - a)
        self.c = l1_coefficients(a, grid.n_steps)
        self.dc = np.diff(self.c)
        self.A_nodes = A_nodes
        self.x = np.zeros((grid.n_steps + 1, self.n))
        history = np.atleast_2d(history)
        self.x[: history.shape[0]] = history
        self.filled = history.shape[0]  # nodes 0..filled-1 are set
        self._eye = np.eye(self.n)

    @classmethod
    def from_problem(cls, problem: OriginalProblem, history: np.ndarray) -> "L1Stepper":
        return cls(problem.grid, problem.alpha, problem.A.sample(problem.grid), history)

    def step(self, forcing: np.ndarray) -> np.ndarray:
        """Advance one node using the forcing value at the new node."""
        i = self.filled
        if i > self.grid.n_steps:
            raise SolverError("stepper ran past the grid end")
        mem = self.c[i - 1] * self.x[0]
        if i > 1:
            mem = mem - self.dc[: i - 1][::-1] @ self.x[1:i]
        lhs = self.beta * self.c[0] * self._eye - self.A_nodes[i]
        try:
            self.x[i] = np.linalg.solve(lhs, self.beta * mem + forcing)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular L1 step at node {i} ({exc})") from exc
        self.filled += 1
        return self.x[i]

    def values(self) -> np.ndarray:
        return self.x[: self.filled]


def _check_motion_inputs(
    problem: OriginalProblem, pos: Position, t_star: float, u: ControlSignal | None
) -> tuple[int, int]:
    pos.check_in_ball(problem.R_x)
    i0 = problem.grid.index_of(pos.t)
    i1 = problem.grid.index_of(t_star)
    if i1 < i0:
        raise DomainError(f"target time {t_star} precedes the position time {pos.t}")
    if i1 > i0:
        if u is None:
            raise DomainError("a control is required on a non-degenerate interval")
        if u.start_index > i0 or u.end_index < i1:
            raise DomainError(
                f"control covers panels [{u.start_index}, {u.end_index}), "
                f"need [{i0}, {i1})"
            )
    return i0, i1


def solve_motion_direct(
    problem: OriginalProblem, pos: Position, t_star: float, u: ControlSignal | None
) -> SampledFunction:
    """L1 time stepping of the controlled equation from a position.

    The forcing at the implicit node tau_i uses the control active on the
    panel ending there.  The degenerate case t_star == pos.t returns the
    history unchanged.
    """
    i0, i1 = _check_motion_inputs(problem, pos, t_star, u)
    if i1 == i0:
        return pos.w
    stepper = L1Stepper.from_problem(problem, pos.w.values)
    ts = problem.grid.nodes
    for i in range(i0 + 1, i1 + 1):
        u_i = u.on_panel(i - 1)
        stepper.step(problem.f_at(float(ts[i]), u_i))
    return SampledFunction(problem.grid, stepper.values())


def solve_motion_repr(
    problem: OriginalProblem,
    pos: Position,
    t_star: float,
    u: ControlSignal | None,
    F: FundamentalMatrixField,
) -> SampledFunction:
    """Motion via the representation formula, using the tabulated F.

    Three terms are assembled per target node: the homogeneous propagation of
    w(t_*), the history injection (whose hypersingular inner kernel is
    integrated by parts analytically per history panel), and the forcing
    convolution.  All (t - tau)^(alpha-1) factors are integrated exactly
    against piecewise-linear regular factors.
    """
    i0, i1 = _check_motion_inputs(problem, pos, t_star, u)
    if i1 == i0:
        return pos.w
    a = problem.alpha.alpha
    grid = problem.grid
    ts = grid.nodes
    n = problem.dim
    m_max = i1 - i0
    wl, wr = endpoint_panel_weights(a, grid.h, m_max)
    A_nodes = problem.A.sample(grid)
    w_star = pos.w.last()

    # node samples of the three regular factors on [t_*, t_star]
    aw = A_nodes[i0 : i1 + 1] @ w_star  # (m_max+1, n)
    Hb = history_bracket(pos.w.values, grid.t0, grid.h, a, ts[i0 : i1 + 1])
    f_left = np.empty((m_max, n))
    f_right = np.empty((m_max, n))
    for k in range(m_max):
        u_k = u.on_panel(i0 + k)
        f_left[k] = problem.f_at(float(ts[i0 + k]), u_k)
        f_right[k] = problem.f_at(float(ts[i0 + k + 1]), u_k)

    inv_g1a = 1.0 / gamma_fn(1.0 - a)
    out = np.empty((i1 + 1, n))
    out[: i0 + 1] = pos.w.values
    for m in range(1, m_max + 1):
        Ft = F.table[i0 + m, i0 : i0 + m + 1]  # (m+1, n, n)
        wl_m = wl[m - 1 :: -1]  # aligned with panels l = 0..m-1
        wr_m = wr[m - 1 :: -1]
        # homogeneous term: F A w*  (left/right node samples of A w*)
        vl = np.einsum("lab,lb->la", Ft[:m], aw[:m])
        vr = np.einsum("lab,lb->la", Ft[1 : m + 1], aw[1 : m + 1])
        term1 = w_star + wl_m @ vl + wr_m @ vr
        # history term: F * bracket
        hl = np.einsum("lab,lb->la", Ft[:m], Hb[:m])
        hr = np.einsum("lab,lb->la", Ft[1 : m + 1], Hb[1 : m + 1])
        term2 = inv_g1a * (wl_m @ hl + wr_m @ hr)
        # forcing term: F f with panel-frozen control
        gl = np.einsum("lab,lb->la", Ft[:m], f_left[:m])
        gr = np.einsum("lab,lb->la", Ft[1 : m + 1], f_right[:m])
        term3 = wl_m @ gl + wr_m @ gr
        out[i0 + m] = term1 + term2 + term3
    return SampledFunction(grid, out)


def cost_J(problem: OriginalProblem, motion: SampledFunction, u: ControlSignal) -> float:
    """Bolza cost: terminal sigma plus the trapezoidal running-cost integral.

    The running integrand is chi(t, u(t)) with u frozen per panel, so the
    trapezoidal rule is applied panel by panel with the panel's control.
    """
    if motion.n_nodes != problem.grid.n_steps + 1:
        raise DomainError("motion must reach the terminal time")
    if u.start_index != 0 or u.end_index != problem.grid.n_steps:
        raise DomainError("cost control must cover [t0, theta)")
    ts = problem.grid.nodes
    total = float(problem.sigma(motion.last()))
    h = problem.grid.h
    for k in range(problem.grid.n_steps):
        u_k = u.values[k]
        total += 0.5 * h * (
            float(problem.chi(float(ts[k]), u_k)) + float(problem.chi(float(ts[k + 1]), u_k))
        )
    return total
