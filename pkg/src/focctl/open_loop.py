"""Open-loop optimal controls for the auxiliary problems.

Closed forms for the two worked scalar examples (a direction field maximizer
and a saturated linear-quadratic law via the maximum principle), plus a
generic backward-induction grid solver for scalar reduced auxiliary states.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .auxiliary_problem import AuxiliaryProblem
from .errors import DomainError, SolverError
from .fde_motion import ControlSignal
from .fractional_core import FracOrder, gamma_fn
from .singquad import gauss_legendre_panels, terminal_power_substitution

__all__ = [
    "ValueTable",
    "b1_weight",
    "b2_weight",
    "example1_control",
    "example1_value",
    "example2_lambda",
    "example2_control",
    "example2_value",
    "saturation",
    "value_iteration_1d",
    "reachable_radius",
    "default_z_grid",
    "dp_policy_rollout",
]

logger = logging.getLogger(__name__)


def b1_weight(t, alpha: FracOrder, theta: float):
    """Weight on the first forcing component of the double-integrator family."""
    return 1.0 / (gamma_fn(alpha.alpha) * (theta - t) ** (1.0 - alpha.alpha))


def b2_weight(t, alpha: FracOrder, theta: float):
    """Weight on the second forcing component of the double-integrator family."""
    return 1.0 / (gamma_fn(2.0 * alpha.alpha) * (theta - t) ** (1.0 - 2.0 * alpha.alpha))


def example1_control(t, alpha: FracOrder, theta: float):
    """Pointwise maximizer arctan(Gamma(a) (theta - t)^a / Gamma(2a)) of the
    direction field b1 cos p + b2 sin p; lies in [0, pi/2)."""
    a = alpha.alpha
    return np.arctan(gamma_fn(a) * (theta - np.asarray(t)) ** a / gamma_fn(2.0 * a))


def example1_value(alpha: FracOrder, t0: float, theta: float, quad_n: int = 4096) -> float:
    """Optimal value -integral sqrt(b1^2 + b2^2) dt of the direction-field problem.

    The substitution s = (theta - t)^alpha turns the integrand into the smooth
    function sqrt(1/Gamma(a)^2 + s^2/Gamma(2a)^2) / alpha on
    [0, (theta - t0)^alpha], which composite Gauss-Legendre resolves to high
    order.  ``quad_n`` is the total node budget.
    """
    if quad_n < 64:
        raise DomainError(f"need quad_n >= 64, got {quad_n}")
    a = alpha.alpha
    ga, g2a = gamma_fn(a), gamma_fn(2.0 * a)

    def integrand(s):
        return np.sqrt(1.0 / ga**2 + (s / g2a) ** 2) / a

    return -gauss_legendre_panels(
        integrand, 0.0, (theta - t0) ** a, max(1, quad_n // 8), order=8
    )


def saturation(x):
    """S(x) = max(x, 2): the denominator of the saturated quadratic-cost law."""
    return np.maximum(np.asarray(x, dtype=float), 2.0)


def _ex2_pieces(lam: float, eta: float, alpha: FracOrder, t0: float, theta: float):
    """Split [t0, theta - eta] at the saturation switch b2(t)|lam| = 2."""
    a = alpha.alpha
    hi = theta - eta
    pieces = [(t0, hi)]
    if abs(2.0 * a - 1.0) > 1e-14 and lam != 0.0:
        g2a = gamma_fn(2.0 * a)
        base = 2.0 * g2a / abs(lam)
        t_k = theta - base ** (1.0 / (2.0 * a - 1.0))
        if t0 < t_k < hi:
            pieces = [(t0, t_k), (t_k, hi)]
    return pieces


def _ex2_integral(lam: float, eta: float, alpha: FracOrder, t0, theta, power: int, quad_n=2048):
    """integral b2^2 / S(b2 |lam|)^power dt over [t0, theta - eta]."""
    a = alpha.alpha

    def g(t):
        b = b2_weight(t, alpha, theta)
        return b * b / saturation(b * abs(lam)) ** power

    total = 0.0
    for lo, hi in _ex2_pieces(lam, eta, alpha, t0, theta):
        total += terminal_power_substitution(g, lo, hi, theta, 2.0 * a, quad_n)
    return total


def example2_lambda(
    c1: float,
    eta: float,
    alpha: FracOrder,
    t0: float,
    theta: float,
    tol: float = 1e-13,
) -> float:
    """Multiplier of the saturated quadratic-cost law, found by bisection.

    The scalar equation lam * integral b2^2 / S(b2 |lam|) dt + lam / 2 = c1
    has an odd, continuous, strictly increasing left side, so the root is
    unique; the bracket is widened geometrically if needed.
    """
    if tol <= 0.0:
        raise DomainError(f"need tol > 0, got {tol!r}")
    if not 0.0 <= eta < theta - t0:
        raise DomainError(f"eta must lie in [0, theta - t0), got {eta!r}")
    if eta == 0.0 and alpha.alpha <= 0.25:
        raise DomainError("full-horizon multiplier needs alpha > 1/4 for an integrable b2^2")

    def lhs(lam: float) -> float:
        return lam * _ex2_integral(lam, eta, alpha, t0, theta, power=1) + 0.5 * lam - c1

    lo, hi = -2.0 * abs(c1) - 1.0, 2.0 * abs(c1) + 1.0
    f_lo, f_hi = lhs(lo), lhs(hi)
    grow = 0
    while f_lo * f_hi > 0.0:
        lo *= 2.0
        hi *= 2.0
        f_lo, f_hi = lhs(lo), lhs(hi)
        grow += 1
        if grow > 60:
            raise SolverError("lost the root bracket after 60 doublings")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = lhs(mid)
        if f_lo * f_mid <= 0.0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo <= tol * max(1.0, abs(mid)) and abs(f_mid) <= 1e-11:
            break
    return 0.5 * (lo + hi)


def example2_control(t, lambda_eta: float, alpha: FracOrder, theta: float):
    """Saturated law b2(t) lam / S(b2(t) |lam|); always inside [-1, 1]."""
    b = b2_weight(np.asarray(t), alpha, theta)
    return b * lambda_eta / saturation(b * abs(lambda_eta))


def example2_value(
    c1: float, eta: float, alpha: FracOrder, t0: float, theta: float
) -> tuple[float, float]:
    """Optimal cost and multiplier of the shifted quadratic-cost problem.

    The state relation z(terminal) = -lam/2 collapses the cost to
    lam^2/4 + lam^2 * integral b2^2/S^2 dt.
    """
    lam = example2_lambda(c1, eta, alpha, t0, theta)
    run = lam * lam * _ex2_integral(lam, eta, alpha, t0, theta, power=2)
    return lam * lam / 4.0 + run, lam


@dataclass(frozen=True)
class ValueTable:
    """Backward-induction value table on a time layer x scalar-state grid."""

    times: np.ndarray  # (M+1,)
    z_grid: np.ndarray  # (m,)
    values: np.ndarray  # (M+1, m)
    argmin: np.ndarray  # (M, m) control sample indices
    control_points: np.ndarray  # (n_u, r)
    clamp_count: int = 0

    def layer_weight(self, t: float) -> tuple[int, float]:
        ts = self.times
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            raise DomainError(f"t={t} outside table span [{ts[0]}, {ts[-1]}]")
        step = ts[1] - ts[0]
        f = (t - ts[0]) / step
        j = min(max(int(math.floor(f + 1e-12)), 0), len(ts) - 2)
        return j, min(max(f - j, 0.0), 1.0)

    def value(self, t: float, z: float) -> float:
        """Bilinear interpolation in (t, z)."""
        j, w = self.layer_weight(t)
        v0 = float(np.interp(z, self.z_grid, self.values[j]))
        v1 = float(np.interp(z, self.z_grid, self.values[j + 1]))
        return (1.0 - w) * v0 + w * v1

    def value_row(self, t: float) -> np.ndarray:
        j, w = self.layer_weight(t)
        return (1.0 - w) * self.values[j] + w * self.values[j + 1]


def _forcing_table(aux: AuxiliaryProblem, controls: np.ndarray) -> np.ndarray:
    """Reduced forcing at (layer node, control sample); shape (M+1, n_u)."""
    ts = aux.aux_grid.nodes
    out = np.empty((ts.size, controls.shape[0]))
    for j, t in enumerate(ts[:-1]):
        for k, u in enumerate(controls):
            out[j, k] = float(aux.f_star_at(float(t), u)[0])
    out[-1] = out[-2]  # terminal layer is never queried for dynamics
    return out


def value_iteration_1d(
    aux: AuxiliaryProblem,
    z_grid: tuple[float, float, int] | np.ndarray,
    controls: np.ndarray | None = None,
) -> ValueTable:
    """Backward induction for a scalar reduced auxiliary state.

    V(terminal, z) = sigma_aux(z); one step earlier,
    V(tau_j, z) = min_u [chi(tau_j, u) h + V(tau_{j+1}, z + f*(tau_j, u) h)]
    with linear interpolation in z and first-index tie breaking.  Excursions
    beyond the grid are clamped (and counted in ``clamp_count``).
    """
    if aux.state_dim != 1:
        raise DomainError(f"grid induction needs a scalar state, got dim {aux.state_dim}")
    if aux.terminal >= aux.problem.grid.theta - 1e-15:
        raise DomainError("grid induction needs a shifted terminal time (bounded dynamics)")
    if controls is None:
        controls = aux.control_set.points
    if isinstance(z_grid, tuple):
        z_lo, z_hi, m = z_grid
        zg = np.linspace(z_lo, z_hi, int(m))
    else:
        zg = np.asarray(z_grid, dtype=float)
    g = aux.aux_grid
    h = g.h
    ts = g.nodes
    M = g.n_steps
    n_u = controls.shape[0]
    fstar = _forcing_table(aux, controls)
    chi_tab = np.empty((M, n_u))
    for j in range(M):
        for k, u in enumerate(controls):
            chi_tab[j, k] = float(aux.problem.chi(float(ts[j]), u))

    values = np.empty((M + 1, zg.size))
    argmin = np.empty((M, zg.size), dtype=np.int32)
    values[M] = [float(aux.sigma_aux(np.atleast_1d(z))) for z in zg]
    clamp = 0
    cand = np.empty((n_u, zg.size))
    for j in range(M - 1, -1, -1):
        nxt = values[j + 1]
        for k in range(n_u):
            z_next = zg + fstar[j, k] * h
            clamp += int(np.count_nonzero((z_next < zg[0]) | (z_next > zg[-1])))
            cand[k] = chi_tab[j, k] * h + np.interp(z_next, zg, nxt)
        argmin[j] = np.argmin(cand, axis=0)
        values[j] = cand[argmin[j], np.arange(zg.size)]
    if clamp:
        logger.warning("value iteration clamped %d state excursions at the grid edge", clamp)
    return ValueTable(
        times=ts.copy(),
        z_grid=zg,
        values=values,
        argmin=argmin,
        control_points=np.atleast_2d(controls),
        clamp_count=clamp,
    )


def reachable_radius(aux: AuxiliaryProblem, z0_radius: float) -> float:
    """Bound on |z| along any admissible control from |z0| <= z0_radius.

    Accumulates per-panel maxima of the reduced forcing magnitude; tighter
    than the global proof constant and the right scale for grid extents.
    """
    total = z0_radius
    g = aux.aux_grid
    for j in range(g.n_steps):
        mid = float(0.5 * (g.node(j) + g.node(j + 1)))
        worst = max(
            float(np.abs(aux.f_star_at(mid, u)).max()) for u in aux.control_set.points
        )
        total += worst * g.h
    return total


def default_z_grid(
    aux: AuxiliaryProblem, z0_radius: float, m: int = 801, margin: float = 1.0
) -> tuple[float, float, int]:
    r = reachable_radius(aux, z0_radius) + margin
    return (-r, r, m)


def dp_policy_rollout(
    table: ValueTable, aux: AuxiliaryProblem, z0: float
) -> tuple[ControlSignal, np.ndarray, float]:
    """Forward rollout of the table's greedy policy under the same Euler step.

    Re-minimizes the one-step objective at the realized state (not a nearest
    node), which keeps the rollout cost within interpolation error of the
    table value at z0.
    """
    g = aux.aux_grid
    h = g.h
    zg = table.z_grid
    controls = table.control_points
    z = float(z0)
    z_path = np.empty(g.n_steps + 1)
    z_path[0] = z
    u_idx = np.empty(g.n_steps, dtype=int)
    run_cost = 0.0
    for j in range(g.n_steps):
        t = float(g.node(j))
        best_k, best_v = 0, math.inf
        for k, u in enumerate(controls):
            z_next = z + float(aux.f_star_at(t, u)[0]) * h
            v = float(aux.problem.chi(t, u)) * h + float(np.interp(z_next, zg, table.values[j + 1]))
            if v < best_v - 1e-15:
                best_k, best_v = k, v
        u = controls[best_k]
        u_idx[j] = best_k
        run_cost += float(aux.problem.chi(t, u)) * h
        z = z + float(aux.f_star_at(t, u)[0]) * h
        z_path[j + 1] = z
    cost = run_cost + float(aux.sigma_aux(np.atleast_1d(z)))
    signal = ControlSignal(g, 0, controls[u_idx])
    return signal, z_path, cost
