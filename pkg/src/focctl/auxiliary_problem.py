"""First-order auxiliary control problems equivalent to the original one.

The auxiliary state integrates the weighted forcing f*(t, u) =
F(theta, t) f(t, u) / (theta - t)^(1-alpha); its terminal value reproduces
the original terminal state.  Shifting the terminal time to theta - eta
bounds the otherwise singular right-hand side, at a cost quantified by an
explicit epsilon budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, SolverError
from .fde_motion import ControlSignal, OriginalProblem, Position
from .fractional_core import SampledFunction, TimeGrid
from .fundamental_matrix import FundamentalMatrixField, ProblemConstants, eval_F
from .informational_image import info_image_ode

__all__ = [
    "AuxiliaryProblem",
    "EpsilonBudget",
    "f_star",
    "build_auxiliary",
    "solve_aux_motion",
    "cost_J_aux",
    "splice_control",
    "sampled_sigma_modulus",
    "epsilon_budget",
    "budget_for_aux",
]


def f_star(
    t: float, u: np.ndarray, F: FundamentalMatrixField, problem: OriginalProblem
) -> np.ndarray:
    """Weighted forcing F(theta, t) f(t, u) / (theta - t)^(1 - alpha).

    Defined for t < theta only; the factor blows up at the terminal time.
    """
    theta = problem.grid.theta
    if t >= theta:
        raise DomainError(f"f_star is singular at t >= theta (t={t}, theta={theta})")
    a = problem.alpha.alpha
    return (eval_F(F, theta, t) @ problem.f_at(t, u)) / (theta - t) ** (1.0 - a)


@dataclass(frozen=True)
class AuxiliaryProblem:
    """Auxiliary dynamics dz/dt = f*(t, p) (optionally reduced by K) plus costs.

    ``terminal`` is theta for the full problem or theta - eta for the shifted
    one; ``aux_grid`` is a uniform grid on [t0, terminal] carrying auxiliary
    trajectories and value tables.
    """

    problem: OriginalProblem
    field: FundamentalMatrixField
    terminal: float
    aux_grid: TimeGrid
    reduced: bool
    sigma_aux: Callable[[np.ndarray], float]
    z0: np.ndarray | None = None
    sigma_lipschitz: float | None = None

    def __post_init__(self) -> None:
        theta = self.problem.grid.theta
        if self.terminal > theta + 1e-12 or self.terminal <= self.problem.grid.t0:
            raise DomainError(f"terminal {self.terminal} outside (t0, theta]")

    @property
    def eta(self) -> float:
        return self.problem.grid.theta - self.terminal

    @property
    def chi(self) -> Callable[[float, np.ndarray], float]:
        return self.problem.chi

    @property
    def control_set(self):
        return self.problem.control_set

    @property
    def state_dim(self) -> int:
        if self.reduced:
            return self.problem.reduction.reduced_dim
        return self.problem.dim

    def f_star_at(self, t: float, u: np.ndarray) -> np.ndarray:
        v = f_star(t, u, self.field, self.problem)
        if self.reduced:
            return self.problem.reduction.K @ v
        return v

    def _control_value(self, u, t: float) -> np.ndarray:
        if isinstance(u, ControlSignal):
            j = min(u.grid.floor_index(t), u.end_index - 1)
            return u.on_panel(max(j, u.start_index))
        return np.atleast_1d(np.asarray(u, dtype=float))

    def increment(self, u, t_from: float, t_to: float) -> np.ndarray:
        """State gain over [t_from, t_to]: per grid panel, the regular factor
        F(theta, .) f(., u) is frozen at the panel midpoint and the singular
        weight (theta - tau)^(alpha - 1) is integrated analytically.

        ``u`` is a constant control point or a piecewise-constant signal.  The
        quadrature stays integrable up to t_to == theta.
        """
        theta = self.problem.grid.theta
        a = self.problem.alpha.alpha
        if t_to > theta + 1e-12:
            raise DomainError(f"increment end {t_to} beyond theta={theta}")
        if t_to < t_from - 1e-12:
            raise DomainError(f"reversed increment range [{t_from}, {t_to}]")
        g = self.aux_grid
        total = np.zeros(self.state_dim)
        c = t_from
        while c < t_to - 1e-14:
            k = g.floor_index(c)
            d = min(g.node(k + 1) if k + 1 <= g.n_steps else t_to, t_to)
            if d <= c + 1e-15:
                break
            mid = 0.5 * (c + d)
            u_val = self._control_value(u, mid)
            R = eval_F(self.field, theta, mid) @ self.problem.f_at(mid, u_val)
            piece = R * (((theta - c) ** a - (theta - d) ** a) / a)
            if self.reduced:
                piece = self.problem.reduction.K @ piece
            total += piece
            c = d
        return total


def build_auxiliary(
    problem: OriginalProblem,
    field: FundamentalMatrixField,
    eta: float | None = None,
    x0: np.ndarray | None = None,
    n_steps: int | None = None,
    use_reduction: bool = True,
    sigma_lipschitz: float | None = None,
) -> AuxiliaryProblem:
    """Assemble the auxiliary problem, optionally shifted and reduced.

    With ``x0`` given, the initial auxiliary state is the informational image
    of (t0, x0) (reduced through K and c when applicable).
    """
    grid = problem.grid
    if eta is not None:
        if not 0.0 < eta < grid.theta - grid.t0:
            raise DomainError(f"eta must lie in (0, theta - t0), got {eta!r}")
        terminal = grid.theta - eta
    else:
        terminal = grid.theta
    reduced = use_reduction and problem.reduction is not None
    sigma_aux = problem.reduction.mu if reduced else problem.sigma
    aux_grid = TimeGrid(grid.t0, terminal, grid.n_steps if n_steps is None else n_steps)
    z0 = None
    if x0 is not None:
        image = info_image_ode(Position.initial(grid, x0), problem).z
        z0 = problem.reduction.apply(image) if reduced else image
    return AuxiliaryProblem(
        problem=problem,
        field=field,
        terminal=terminal,
        aux_grid=aux_grid,
        reduced=reduced,
        sigma_aux=sigma_aux,
        z0=z0,
        sigma_lipschitz=sigma_lipschitz,
    )


def solve_aux_motion(
    aux: AuxiliaryProblem,
    p: ControlSignal | np.ndarray,
    t_from: float,
    t_to: float,
    z_from: np.ndarray,
) -> SampledFunction:
    """Integrate the auxiliary dynamics on aux-grid nodes of [t_from, t_to].

    Returns samples on the aux-grid prefix ending at t_to; nodes before
    t_from carry the start value.  Node-to-node advances reuse the same
    panel quadrature as the incremental image updates, so replaying a
    control here matches the image path bit for bit.
    """
    g = aux.aux_grid
    i0 = g.index_of(t_from)
    i1 = g.index_of(t_to)
    if i1 < i0:
        raise DomainError(f"reversed range [{t_from}, {t_to}]")
    z_from = np.atleast_1d(np.asarray(z_from, dtype=float))
    out = np.empty((i1 + 1, z_from.shape[0]))
    out[: i0 + 1] = z_from
    z = z_from.copy()
    for k in range(i0, i1):
        z = z + aux.increment(p, g.node(k), g.node(k + 1))
        out[k + 1] = z
    return SampledFunction(g, out)


def cost_J_aux(
    aux: AuxiliaryProblem, z_traj: SampledFunction, p: ControlSignal
) -> float:
    """Auxiliary cost: terminal sigma_aux plus the trapezoidal chi integral."""
    g = aux.aux_grid
    if z_traj.grid != g or z_traj.n_nodes != g.n_steps + 1:
        raise DomainError("trajectory must cover the auxiliary grid up to its terminal time")
    if p.grid != g or p.start_index != 0 or p.end_index != g.n_steps:
        raise DomainError("control must cover every auxiliary grid panel")
    total = float(aux.sigma_aux(z_traj.last()))
    ts = g.nodes
    h = g.h
    chi = aux.problem.chi
    for k in range(g.n_steps):
        u_k = p.values[k]
        total += 0.5 * h * (float(chi(float(ts[k]), u_k)) + float(chi(float(ts[k + 1]), u_k)))
    return total


def splice_control(p_eta: ControlSignal, u_bar: np.ndarray) -> ControlSignal:
    """Extend a control defined on a grid prefix by a constant tail value."""
    if p_eta.start_index != 0:
        raise DomainError("spliced control must start at t0")
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    n_tail = p_eta.grid.n_steps - p_eta.end_index
    tail = np.tile(u_bar, (n_tail, 1))
    return ControlSignal(p_eta.grid, 0, np.vstack([p_eta.values, tail]))


@dataclass(frozen=True)
class EpsilonBudget:
    """Accuracy budget translating auxiliary eps*-optimality at horizon
    theta - eta* into epsilon-optimality for the original problem."""

    epsilon: float
    eta_star: float
    eps_star: float
    zeta: float
    M_z: float
    M_chi: float
    eta1: float
    eta2: float


def sampled_sigma_modulus(
    sigma: Callable[[np.ndarray], float],
    state_dim: int,
    radius: float,
    seed: int = 0,
    n_pairs: int = 512,
) -> Callable[[float], float]:
    """Empirical modulus of continuity: delta -> max sampled |sigma(z1) - sigma(z2)|.

    Pairs are drawn inside the ball of the given radius with separation
    exactly delta (directions and centers from a seeded generator, so the
    sampler is deterministic).
    """
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_pairs, state_dim))
    centers /= np.maximum(np.linalg.norm(centers, axis=1, keepdims=True), 1e-300)
    centers *= radius * rng.random((n_pairs, 1)) ** (1.0 / state_dim)
    dirs = rng.standard_normal((n_pairs, state_dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)

    def modulus(delta: float) -> float:
        worst = 0.0
        for z, d in zip(centers, dirs):
            z1 = z
            if np.linalg.norm(z1) + delta > radius:
                z1 = z * max(0.0, (radius - delta) / max(np.linalg.norm(z), 1e-300))
            z2 = z1 + delta * d
            worst = max(worst, abs(float(sigma(z1)) - float(sigma(z2))))
        return worst

    return modulus


def epsilon_budget(
    epsilon: float,
    consts: ProblemConstants,
    sigma_modulus: Callable[[float], float] | None = None,
    lipschitz: float | None = None,
) -> EpsilonBudget:
    """Compute (eta*, eps*) so that eps*-optimal shifted-horizon controls,
    extended arbitrarily past theta - eta, are epsilon-optimal originally.

    zeta certifies |sigma(z1) - sigma(z2)| <= epsilon/6 for ||z1 - z2|| <=
    zeta on the reachable ball B(M_z): exactly for a declared Lipschitz
    constant, otherwise from the sampled modulus with a 2x safety factor.
    eta1 caps the terminal drift (M_F M_f eta^alpha / alpha <= zeta), eta2
    caps the dropped running cost (M_chi eta <= epsilon/6), and
    eps* = epsilon/3.
    """
    if epsilon <= 0.0:
        raise DomainError(f"need epsilon > 0, got {epsilon!r}")
    if consts.M_chi is None:
        raise DomainError("budget needs the running-cost bound M_chi")
    a = consts.alpha
    M_z = consts.R_z + consts.M_F * consts.M_f * consts.horizon**a / a
    if lipschitz is not None:
        zeta = math.inf if lipschitz == 0.0 else epsilon / (6.0 * lipschitz)
    else:
        if sigma_modulus is None:
            raise DomainError("pass either a sampled modulus or a Lipschitz constant")
        target = epsilon / 12.0  # 2x safety on the sampled modulus
        if sigma_modulus(2.0 * M_z) == 0.0:
            zeta = math.inf
        else:
            zeta = None
            delta = 2.0 * M_z
            for _ in range(60):
                if sigma_modulus(delta) <= target:
                    zeta = delta
                    break
                delta *= 0.5
            if zeta is None:
                raise SolverError("could not certify a continuity modulus for sigma")
    drift = consts.M_F * consts.M_f
    if math.isinf(zeta) or drift == 0.0:
        eta1 = math.inf
    else:
        eta1 = (a * zeta / drift) ** (1.0 / a)
    eta2 = consts.horizon / 2.0
    if consts.M_chi > 0.0:
        eta2 = min(eta2, epsilon / (6.0 * consts.M_chi))
    eta_star = min(eta1, eta2)
    return EpsilonBudget(
        epsilon=epsilon,
        eta_star=eta_star,
        eps_star=epsilon / 3.0,
        zeta=zeta,
        M_z=M_z,
        M_chi=consts.M_chi,
        eta1=eta1,
        eta2=eta2,
    )


def budget_for_aux(
    epsilon: float,
    aux: AuxiliaryProblem,
    consts: ProblemConstants,
    seed: int = 0,
) -> EpsilonBudget:
    """Budget for a concrete auxiliary problem.

    Uses the declared Lipschitz constant when available; otherwise samples
    the terminal cost on the image of the reachable ball.  For reduced
    problems the sampled separation is mapped back through ||K||.
    """
    a = consts.alpha
    M_z = consts.R_z + consts.M_F * consts.M_f * consts.horizon**a / a
    if aux.sigma_lipschitz is not None:
        lip = aux.sigma_lipschitz
        if aux.reduced:
            lip = lip * float(np.linalg.norm(aux.problem.reduction.K, ord=2))
        return epsilon_budget(epsilon, consts, lipschitz=lip)
    if aux.reduced:
        red = aux.problem.reduction
        k_norm = float(np.linalg.norm(red.K, ord=2))
        radius = k_norm * M_z + float(np.linalg.norm(red.K @ red.c))
        mod_red = sampled_sigma_modulus(aux.sigma_aux, aux.state_dim, radius, seed=seed)
        modulus = lambda delta: mod_red(min(delta * k_norm, 2.0 * radius))  # noqa: E731
    else:
        modulus = sampled_sigma_modulus(aux.sigma_aux, aux.state_dim, M_z, seed=seed)
    return epsilon_budget(epsilon, consts, sigma_modulus=modulus)
