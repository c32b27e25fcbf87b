"""Positional feedback: partitions, control strategies, extremal shift to
accompanying points, the lift of auxiliary strategies to the original
system through the informational image, and closed-loop runners.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .auxiliary_problem import AuxiliaryProblem
from .errors import DomainError
from .fde_motion import (
    ControlSignal,
    L1Stepper,
    OriginalProblem,
    Position,
    cost_J,
)
from .fractional_core import FracOrder, SampledFunction, TimeGrid, gamma_fn
from .fundamental_matrix import FundamentalMatrixField
from .informational_image import info_image_ode
from .open_loop import ValueTable

__all__ = [
    "Partition",
    "AuxStrategy",
    "OriginalStrategy",
    "ClosedLoopResult",
    "extremal_shift",
    "extremal_shift_strategy",
    "example3_psi",
    "example3_strategy",
    "example3_aux_strategy",
    "unit_ball_mesh",
    "NuTable",
    "example4_nu_table",
    "example4_strategy",
    "example4_aux_strategy",
    "lift_strategy",
    "run_control_law",
    "run_aux_control_law",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    """Strictly increasing sampling times driving a piecewise-constant law."""

    nodes: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.size < 2 or np.any(np.diff(nodes) <= 0.0):
            raise DomainError("partition nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @property
    def diameter(self) -> float:
        return float(np.max(np.diff(self.nodes)))

    @property
    def n_panels(self) -> int:
        return self.nodes.size - 1

    @classmethod
    def uniform(cls, grid: TimeGrid, diameter: float) -> "Partition":
        """Partition snapped to grid nodes with step close to ``diameter``."""
        k = max(1, round(diameter / grid.h))
        idx = list(range(0, grid.n_steps, k))
        idx.append(grid.n_steps)
        return cls(grid.nodes[np.array(idx)])


@dataclass(frozen=True)
class AuxStrategy:
    """Positional strategy for the auxiliary problem: (t, z, kappa) -> control."""

    rule: Callable[[float, np.ndarray, float], np.ndarray]
    name: str = "aux-strategy"


def r_shift(t: float, t0: float, kappa: float) -> float:
    """Accompanying-point search radius r(t, kappa) = sqrt(kappa + (t - t0) kappa)."""
    return math.sqrt(kappa + (t - t0) * kappa)


def extremal_shift(
    table: ValueTable, t: float, z: float, kappa: float, aux: AuxiliaryProblem
) -> np.ndarray:
    """Extremal shift to accompanying points over a value table.

    Picks (z_acc, s_acc) minimizing rho(t, z_bar) + z_bar_extra over the
    sampled ball (z - z_bar)^2 + z_bar_extra^2 <= r^2(t, kappa), then steers
    against the offset: argmin_p <z - z_acc, f*(t, p)> - s_acc chi(t, p).
    Ties break to the smallest sample index throughout.
    """
    g = aux.problem.grid
    if not 0.0 < kappa < g.theta - g.t0:
        raise DomainError(f"kappa must lie in (0, theta - t0), got {kappa!r}")
    r = r_shift(t, g.t0, kappa)
    zg = table.z_grid
    mask = np.abs(zg - z) <= r
    if not np.any(mask):
        mask = np.zeros_like(mask)
        mask[int(np.argmin(np.abs(zg - z)))] = True
    cand_z = zg[mask]
    rho_row = table.value_row(t)[mask]
    best = (math.inf, 0.0, 0.0)
    for zb, rho in zip(cand_z, rho_row):
        span = math.sqrt(max(r * r - (z - zb) ** 2, 0.0))
        for s in np.linspace(-span, span, 33):
            val = rho + s
            if val < best[0] - 1e-15:
                best = (val, zb, s)
    _, z_acc, s_acc = best
    controls = aux.control_set.points
    offset = z - z_acc
    best_k, best_v = 0, math.inf
    for k, u in enumerate(controls):
        v = offset * float(aux.f_star_at(t, u)[0]) - s_acc * float(aux.problem.chi(t, u))
        if v < best_v - 1e-15:
            best_k, best_v = k, v
    return controls[best_k]


def extremal_shift_strategy(table: ValueTable, aux: AuxiliaryProblem) -> AuxStrategy:
    def rule(t: float, z: np.ndarray, kappa: float) -> np.ndarray:
        return extremal_shift(table, t, float(np.atleast_1d(z)[0]), kappa, aux)

    return AuxStrategy(rule=rule, name="extremal-shift")


def example3_psi(t, eta: float, alpha: FracOrder, theta: float):
    """Indifference-band half width ((theta-t)^(2a) - eta^(2a)) / Gamma(2a + 1)."""
    a = alpha.alpha
    return ((theta - np.asarray(t)) ** (2 * a) - eta ** (2 * a)) / gamma_fn(2 * a + 1.0)


def example3_strategy(
    t: float, z: float, eta: float, alpha: FracOrder, theta: float
) -> float:
    """Bang-bang band strategy: -sign(z) outside the band, +1 inside (tie-break)."""
    psi = float(example3_psi(t, eta, alpha, theta))
    if abs(z) > psi:
        return -math.copysign(1.0, z)
    return 1.0


def example3_aux_strategy(eta: float, alpha: FracOrder, theta: float) -> AuxStrategy:
    def rule(t: float, z: np.ndarray, kappa: float) -> np.ndarray:
        return np.array([example3_strategy(t, float(np.atleast_1d(z)[0]), eta, alpha, theta)])

    return AuxStrategy(rule=rule, name="band-bang-bang")


def unit_ball_mesh(dim: int, n_radial: int = 16, n_angular: int = 32) -> np.ndarray:
    """Deterministic radial x angular sample of the closed unit ball."""
    radii = np.linspace(0.0, 1.0, n_radial + 1)[1:]
    if dim == 1:
        pts = np.concatenate([-radii[::-1], [0.0], radii])
        return pts[:, None]
    if dim == 2:
        ang = 2.0 * math.pi * np.arange(n_angular) / n_angular
        ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        pts = [np.zeros((1, 2))]
        for r in radii:
            pts.append(r * ring)
        return np.vstack(pts)
    raise DomainError(f"unit-ball mesh supports dim 1 or 2, got {dim}")


@dataclass(frozen=True)
class NuTable:
    """Support-function integrals nu(t, l) on aux-grid layers x direction mesh."""

    times: np.ndarray  # (M+1,)
    l_points: np.ndarray  # (L, d)
    nu: np.ndarray  # (M+1, L)

    def row(self, t: float) -> np.ndarray:
        ts = self.times
        step = ts[1] - ts[0]
        f = (t - ts[0]) / step
        j = min(max(int(math.floor(f + 1e-12)), 0), len(ts) - 2)
        w = min(max(f - j, 0.0), 1.0)
        return (1.0 - w) * self.nu[j] + w * self.nu[j + 1]


def example4_nu_table(aux: AuxiliaryProblem, l_points: np.ndarray | None = None) -> NuTable:
    """nu(t, l) = integral_t^terminal min_p (<l, f*_red(tau, p)> + chi(tau, p)) dtau,
    accumulated backwards with the trapezoidal rule on the aux grid."""
    if aux.terminal >= aux.problem.grid.theta - 1e-15:
        raise DomainError("support-function table needs a shifted terminal time")
    if l_points is None:
        l_points = unit_ball_mesh(aux.state_dim)
    g = aux.aux_grid
    ts = g.nodes
    L = l_points.shape[0]
    gmin = np.empty((ts.size, L))
    for j, t in enumerate(ts):
        fs = np.stack([aux.f_star_at(float(t), u) for u in aux.control_set.points])
        ch = np.array([float(aux.problem.chi(float(t), u)) for u in aux.control_set.points])
        gmin[j] = np.min(l_points @ fs.T + ch[None, :], axis=1)
    nu = np.zeros((ts.size, L))
    for j in range(ts.size - 2, -1, -1):
        nu[j] = nu[j + 1] + 0.5 * g.h * (gmin[j] + gmin[j + 1])
    return NuTable(times=ts.copy(), l_points=np.atleast_2d(l_points), nu=nu)


def example4_strategy(
    t: float,
    z: np.ndarray,
    kappa: float,
    nu_table: NuTable,
    aux: AuxiliaryProblem,
) -> np.ndarray:
    """Norm-cost strategy: pick the steering direction maximizing
    <l, z> + nu(t, l) - r(t, kappa) sqrt(1 + |l|^2) over the ball mesh, then
    steer argmin_p <l, f*_red(t, p)> + chi(t, p)."""
    g = aux.problem.grid
    z = np.atleast_1d(np.asarray(z, dtype=float))
    r = r_shift(t, g.t0, kappa)
    ls = nu_table.l_points
    obj = ls @ z + nu_table.row(t) - r * np.sqrt(1.0 + np.sum(ls * ls, axis=1))
    l_best = ls[int(np.argmax(obj))]
    best_k, best_v = 0, math.inf
    for k, u in enumerate(aux.control_set.points):
        v = float(l_best @ aux.f_star_at(t, u)) + float(aux.problem.chi(t, u))
        if v < best_v - 1e-15:
            best_k, best_v = k, v
    return aux.control_set.points[best_k]


def example4_aux_strategy(nu_table: NuTable, aux: AuxiliaryProblem) -> AuxStrategy:
    def rule(t: float, z: np.ndarray, kappa: float) -> np.ndarray:
        return example4_strategy(t, z, kappa, nu_table, aux)

    return AuxStrategy(rule=rule, name="norm-support")


@dataclass(frozen=True)
class OriginalStrategy:
    """Original-side positional strategy: the auxiliary strategy evaluated at
    the (reduced) informational image while t < terminal, a fixed fallback
    control afterwards."""

    aux_strategy: AuxStrategy
    aux: AuxiliaryProblem
    kappa: float
    u_bar: np.ndarray

    @property
    def eta(self) -> float:
        return self.aux.eta

    def control_from_image(self, t: float, z_aux: np.ndarray) -> np.ndarray:
        if t < self.aux.terminal - 1e-12:
            return np.atleast_1d(self.aux_strategy.rule(t, z_aux, self.kappa))
        return self.u_bar

    def evaluate(self, t: float, w: SampledFunction) -> np.ndarray:
        """Definitional route: recompute the image of (t, w) from scratch."""
        if t >= self.aux.terminal - 1e-12:
            return self.u_bar
        image = info_image_ode(Position(t, w), self.aux.problem).z
        z = self.aux.problem.reduction.apply(image) if self.aux.reduced else image
        return np.atleast_1d(self.aux_strategy.rule(t, z, self.kappa))


def lift_strategy(
    aux_strategy: AuxStrategy,
    aux: AuxiliaryProblem,
    u_bar: np.ndarray,
    kappa: float | None = None,
) -> OriginalStrategy:
    """Lift an auxiliary strategy to the original system.

    ``kappa`` defaults to the horizon shift eta, which keeps a single
    accuracy knob for the whole closed loop.
    """
    if aux.terminal >= aux.problem.grid.theta - 1e-15:
        raise DomainError("lifting needs a shifted auxiliary problem (eta > 0)")
    kappa = aux.eta if kappa is None else kappa
    horizon = aux.problem.grid.theta - aux.problem.grid.t0
    if not 0.0 < kappa < horizon:
        raise DomainError(f"kappa must lie in (0, theta - t0), got {kappa!r}")
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    if not aux.control_set.contains(u_bar):
        raise DomainError("fallback control must belong to the control set")
    return OriginalStrategy(aux_strategy=aux_strategy, aux=aux, kappa=kappa, u_bar=u_bar)


@dataclass(frozen=True)
class ClosedLoopResult:
    u: ControlSignal
    x: SampledFunction
    J: float
    z_panel: np.ndarray  # image estimate at each partition node (panel starts)
    audits: tuple[tuple[float, float], ...]  # (time, image discrepancy)
    running_chi: np.ndarray  # cumulative running cost at partition nodes


def run_control_law(
    problem: OriginalProblem,
    strategy: OriginalStrategy,
    partition: Partition,
    x0: np.ndarray,
    F: FundamentalMatrixField,
    audit_every: int = 16,
) -> ClosedLoopResult:
    """Close the loop on the original system over a partition.

    Per panel the control is the strategy at the panel-start position; the
    motion advances by L1 stepping and the image estimate by the incremental
    update.  Every ``audit_every`` panels the image is recomputed from
    scratch and the discrepancy recorded (the estimate itself is not
    overwritten, so loops stay bit-for-bit deterministic).
    """
    grid = problem.grid
    aux = strategy.aux
    idx = [grid.index_of(float(t)) for t in partition.nodes]
    if idx[0] != 0 or idx[-1] != grid.n_steps:
        raise DomainError("closed-loop partition must span [t0, theta] on grid nodes")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    pos0 = Position.initial(grid, x0)
    pos0.check_in_ball(problem.R_x)
    A_nodes = problem.A.sample(grid)
    image0 = info_image_ode(pos0, problem, A_nodes).z
    z = aux.problem.reduction.apply(image0) if aux.reduced else image0

    stepper = L1Stepper(grid, problem.alpha, A_nodes, x0[None, :])
    ts = grid.nodes
    r = problem.control_set.dim
    u_values = np.empty((grid.n_steps, r))
    z_panel = np.empty((partition.n_panels + 1, z.shape[0]))
    z_panel[0] = z
    running_chi = np.zeros(partition.n_panels + 1)
    audits: list[tuple[float, float]] = []
    chi_acc = 0.0
    for p in range(partition.n_panels):
        ia, ib = idx[p], idx[p + 1]
        t_a = float(ts[ia])
        u_val = strategy.control_from_image(t_a, z)
        for i in range(ia + 1, ib + 1):
            stepper.step(problem.f_at(float(ts[i]), u_val))
            u_values[i - 1] = u_val
            chi_acc += 0.5 * grid.h * (
                float(problem.chi(float(ts[i - 1]), u_val))
                + float(problem.chi(float(ts[i]), u_val))
            )
        if t_a < aux.terminal:
            t_b = min(float(ts[ib]), aux.terminal)
            z = z + aux.increment(u_val, t_a, t_b)
        z_panel[p + 1] = z
        running_chi[p + 1] = chi_acc
        t_end = float(ts[ib])
        if audit_every > 0 and (p + 1) % audit_every == 0 and t_end <= aux.terminal:
            w = SampledFunction(grid, stepper.values().copy())
            image = info_image_ode(Position(t_end, w), problem, A_nodes).z
            z_ref = aux.problem.reduction.apply(image) if aux.reduced else image
            gap = float(np.max(np.abs(z_ref - z)))
            audits.append((t_end, gap))
            logger.debug("image audit at t=%.6g: discrepancy %.3e", t_end, gap)

    u = ControlSignal(grid, 0, u_values)
    x = SampledFunction(grid, stepper.values().copy())
    return ClosedLoopResult(
        u=u,
        x=x,
        J=cost_J(problem, x, u),
        z_panel=z_panel,
        audits=tuple(audits),
        running_chi=running_chi,
    )


def run_aux_control_law(
    aux: AuxiliaryProblem,
    aux_strategy: AuxStrategy,
    kappa: float,
    partition: Partition,
    z0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Close the loop on the auxiliary system over a partition of [t0, terminal].

    Returns (controls per panel, states at partition nodes).  Uses the same
    incremental quadrature as the original-side loop, so matching partitions
    reproduce the original loop's controls exactly.
    """
    nodes = partition.nodes
    if abs(nodes[-1] - aux.terminal) > 1e-9:
        raise DomainError("auxiliary partition must end at the shifted terminal time")
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    z_path = np.empty((partition.n_panels + 1, z.shape[0]))
    z_path[0] = z
    controls = None
    for p in range(partition.n_panels):
        t_a, t_b = float(nodes[p]), float(nodes[p + 1])
        u_val = np.atleast_1d(aux_strategy.rule(t_a, z, kappa))
        if controls is None:
            controls = np.empty((partition.n_panels, u_val.shape[0]))
        controls[p] = u_val
        z = z + aux.increment(u_val, t_a, t_b)
        z_path[p + 1] = z
    return controls, z_path
