"""Fundamental solution matrix F(t, tau) of the linear Caputo system.

For every fixed tau, F(., tau) is the unique continuous solution of a weakly
singular Volterra integral equation; this module tabulates it on the grid
triangle t >= tau and derives the global constants used by the reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, SolverError
from .fractional_core import FracOrder, TimeGrid, gamma_fn, mittag_leffler_matrix
from .singquad import double_power_node_weights

__all__ = [
    "SystemMatrixFunction",
    "FundamentalMatrixField",
    "ProblemConstants",
    "solve_fundamental",
    "field_from_series",
    "constants",
    "eval_F",
]


@dataclass(frozen=True)
class SystemMatrixFunction:
    """Time-dependent system matrix A(t) with a declared norm bound."""

    evaluator: Callable[[float], np.ndarray]
    dim: int
    bound: float  # declared ess-sup of the spectral norm

    @classmethod
    def constant(cls, A: np.ndarray) -> "SystemMatrixFunction":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DomainError(f"A must be square, got {A.shape}")
        nrm = float(np.linalg.norm(A, ord=2))
        return cls(evaluator=lambda t, _A=A: _A, dim=A.shape[0], bound=nrm)

    def at(self, t: float) -> np.ndarray:
        A = np.atleast_2d(np.asarray(self.evaluator(t), dtype=float))
        if A.shape != (self.dim, self.dim):
            raise DomainError(f"A({t}) has shape {A.shape}, expected {(self.dim, self.dim)}")
        return A

    def sample(self, grid: TimeGrid) -> np.ndarray:
        """A at every grid node, validated against the declared bound."""
        out = np.stack([self.at(float(t)) for t in grid.nodes])
        worst = max(float(np.linalg.norm(a, ord=2)) for a in out)
        if worst > self.bound * (1.0 + 1e-9) + 1e-12:
            raise DomainError(
                f"grid norm {worst:.6g} exceeds the declared bound {self.bound:.6g}"
            )
        return out


@dataclass(frozen=True)
class FundamentalMatrixField:
    """Tabulated F on the triangle t_i >= tau_j of a uniform grid."""

    grid: TimeGrid
    alpha: FracOrder
    table: np.ndarray  # (N+1, N+1, n, n); entries with i < j are zero
    m_a: float  # measured max spectral norm of A over the grid

    @property
    def dim(self) -> int:
        return self.table.shape[2]

    def theta_slice(self) -> np.ndarray:
        """F(theta, tau_j) for all j."""
        return self.table[self.grid.n_steps]

    def diagonal_error(self) -> float:
        idx = np.arange(self.grid.n_steps + 1)
        target = np.eye(self.dim) / gamma_fn(self.alpha.alpha)
        return float(np.abs(self.table[idx, idx] - target).max())

    def continuity_bound(self) -> float:
        """Grid estimate of L with ||F[i+1][j] - F[i][j]|| <= L h^alpha."""
        worst = 0.0
        h_a = self.grid.h**self.alpha.alpha
        for j in range(self.grid.n_steps):
            diff = self.table[j + 1 :, j] - self.table[j:-1, j]
            worst = max(worst, float(np.abs(diff).max()) / h_a)
        return worst


def solve_fundamental(
    A: SystemMatrixFunction, grid: TimeGrid, alpha: FracOrder
) -> FundamentalMatrixField:
    """March the weakly singular Volterra equation for F across the grid triangle.

    Columns share lag structure on a uniform grid, so each anti-diagonal
    t_i - tau_j = m*h is advanced for all columns at once.  The doubly
    singular kernel is integrated exactly against per-panel interpolants that
    are quadratic in (xi - tau)^alpha; the implicit diagonal sample is
    resolved by an n-by-n linear solve per column.
    """
    a = alpha.alpha
    N = grid.n_steps
    h = grid.h
    n = A.dim
    A_nodes = A.sample(grid)
    m_a = max(float(np.linalg.norm(x, ord=2)) for x in A_nodes)
    ga = gamma_fn(a)
    eye = np.eye(n)
    idg = eye / ga

    table = np.zeros((N + 1, N + 1, n, n))
    diag_idx = np.arange(N + 1)
    table[diag_idx, diag_idx] = idg
    # G diagonals: g_diags[k][j] = A(tau_{j+k}) @ F(tau_{j+k}, tau_j)
    g_diags = [np.einsum("jab,jbc->jac", A_nodes, table[diag_idx, diag_idx])]
    for m in range(1, N + 1):
        w = double_power_node_weights(a, m)
        pref = (m * h) ** a / ga
        nj = N + 1 - m
        S = np.zeros((nj, n, n))
        for k in range(m):
            if w[k] != 0.0:
                S += w[k] * g_diags[k][:nj]
        rhs = idg + pref * S
        lhs = eye - pref * w[m] * A_nodes[m : m + nj]
        try:
            Fm = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular local solve at lag {m} ({exc})") from exc
        table[diag_idx[:nj] + m, diag_idx[:nj]] = Fm
        g_diags.append(np.einsum("jab,jbc->jac", A_nodes[m : m + nj], Fm))
    return FundamentalMatrixField(grid=grid, alpha=alpha, table=table, m_a=m_a)


def field_from_series(
    A_const: np.ndarray, grid: TimeGrid, alpha: FracOrder, tol: float = 1e-14
) -> FundamentalMatrixField:
    """Field for a constant matrix, filled lag by lag from the power series.

    F(t, tau) depends only on t - tau when A is constant, which makes the
    series route cheap; it doubles as an independent oracle for the Volterra
    solver on constant-coefficient systems.
    """
    A_const = np.atleast_2d(np.asarray(A_const, dtype=float))
    n = A_const.shape[0]
    N = grid.n_steps
    table = np.zeros((N + 1, N + 1, n, n))
    diag_idx = np.arange(N + 1)
    for m in range(N + 1):
        F_m = mittag_leffler_matrix(A_const, alpha, m * grid.h, tol=tol)
        table[diag_idx[: N + 1 - m] + m, diag_idx[: N + 1 - m]] = F_m
    m_a = float(np.linalg.norm(A_const, ord=2))
    return FundamentalMatrixField(grid=grid, alpha=alpha, table=table, m_a=m_a)


@dataclass(frozen=True)
class ProblemConstants:
    """Global bounds feeding the reduction estimates."""

    M_F: float
    M_A: float
    M_f: float
    R_x: float
    R_z: float
    M_chi: float | None = None
    alpha: float = 0.5
    horizon: float = 1.0


def constants(
    field: FundamentalMatrixField,
    f_bound: float,
    R_x: float,
    m_chi: float | None = None,
) -> ProblemConstants:
    """Derive (M_F, M_f, R_z, ...) from a solved field.

    M_F is the max spectral norm of F(theta, .) over grid nodes and
    R_z = (1 + M_F * M_A * (theta - t0)^alpha / alpha) * R_x bounds the
    prediction of any admissible initial state.
    """
    if R_x <= 0.0:
        raise DomainError(f"need R_x > 0, got {R_x!r}")
    if f_bound < 0.0:
        raise DomainError(f"need f_bound >= 0, got {f_bound!r}")
    a = field.alpha.alpha
    horizon = field.grid.theta - field.grid.t0
    M_F = max(float(np.linalg.norm(x, ord=2)) for x in field.theta_slice())
    R_z = (1.0 + M_F * field.m_a * horizon**a / a) * R_x
    return ProblemConstants(
        M_F=M_F,
        M_A=field.m_a,
        M_f=f_bound,
        R_x=R_x,
        R_z=R_z,
        M_chi=m_chi,
        alpha=a,
        horizon=horizon,
    )


def eval_F(field: FundamentalMatrixField, t: float, tau: float) -> np.ndarray:
    """Interpolated F(t, tau); exact at grid nodes.

    Bilinear interpolation on interior cells; cells straddling the diagonal
    use barycentric interpolation on the triangle, which keeps the exact
    diagonal value Id/Gamma(alpha) along t = tau.
    """
    g = field.grid
    slack = 1e-9 * max(1.0, abs(g.theta))
    if t < tau - slack:
        raise DomainError(f"(t, tau)=({t}, {tau}) outside the triangle t >= tau")
    if tau < g.t0 - slack or t > g.theta + slack:
        raise DomainError(f"(t, tau)=({t}, {tau}) outside the grid square")
    t = min(max(t, g.t0), g.theta)
    tau = min(max(tau, g.t0), min(t, g.theta))
    N = g.n_steps

    def locate(x: float) -> tuple[int, float]:
        f = (x - g.t0) / g.h
        r = round(f)
        if abs(f - r) < 1e-9:  # snap to nodes so node queries hit table entries
            f = float(r)
        i = min(max(int(math.floor(f)), 0), N - 1)
        return i, f - i

    i, p = locate(t)
    j, q = locate(tau)
    if i > j:
        T = field.table
        return (
            (1 - p) * (1 - q) * T[i, j]
            + p * (1 - q) * T[i + 1, j]
            + (1 - p) * q * T[i, j + 1]
            + p * q * T[i + 1, j + 1]
        )
    # diagonal cell: interpolate on the triangle (i,j), (i+1,j), (i+1,j+1)
    lam2 = p - q  # weight of (i+1, j)
    lam3 = q  # weight of (i+1, j+1)
    lam2 = min(max(lam2, 0.0), 1.0)
    lam3 = min(max(lam3, 0.0), 1.0 - lam2)
    lam1 = 1.0 - lam2 - lam3
    T = field.table
    return lam1 * T[i, j] + lam2 * T[i + 1, j] + lam3 * T[i + 1, j + 1]
