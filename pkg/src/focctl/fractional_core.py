"""Numerical substrate: time grids, the gamma function, Riemann-Liouville
integration, the L1 Caputo scheme, and Mittag-Leffler type matrix series.

All operations are pure functions of immutable inputs; nothing here keeps
internal mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SolverError

__all__ = [
    "FracOrder",
    "TimeGrid",
    "SampledFunction",
    "gamma_fn",
    "rl_integral",
    "caputo_derivative",
    "mittag_leffler_matrix",
    "l1_coefficients",
]


# Lanczos approximation, g = 7 with 9 coefficients.  Relative error is below
# 3e-14 on [0.05, 50], verified against 40-digit reference values.
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments.

    Uses a Lanczos approximation with reflection below 1/2, so the routine
    has no external dependencies and can be validated through the recurrence
    Gamma(x + 1) = x * Gamma(x).
    """
    if not x > 0.0:
        raise DomainError(f"gamma_fn requires x > 0, got {x!r}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    y = x - 1.0
    acc = _LANCZOS_C[0]
    for k in range(1, len(_LANCZOS_C)):
        acc += _LANCZOS_C[k] / (y + k)
    t = y + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (y + 0.5) * math.exp(-t) * acc


@dataclass(frozen=True)
class FracOrder:
    """Differentiation/integration order restricted to the open interval (0, 1)."""

    alpha: float

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"order must lie strictly in (0, 1), got {self.alpha!r}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t0 = tau_0 < ... < tau_N = theta."""

    t0: float
    theta: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.t0 < self.theta:
            raise DomainError(f"need t0 < theta, got [{self.t0}, {self.theta}]")
        if self.n_steps < 2:
            raise DomainError(f"need at least 2 steps, got {self.n_steps}")

    @property
    def h(self) -> float:
        return (self.theta - self.t0) / self.n_steps

    @cached_property
    def nodes(self) -> np.ndarray:
        ts = self.t0 + self.h * np.arange(self.n_steps + 1)
        ts[-1] = self.theta
        ts.setflags(write=False)
        return ts

    def node(self, i: int) -> float:
        return float(self.nodes[i])

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the node equal to ``t``; raises if ``t`` is off-grid."""
        i = int(round((t - self.t0) / self.h))
        if i < 0 or i > self.n_steps or abs(self.node(i) - t) > tol * max(1.0, abs(t)):
            raise DomainError(f"t={t!r} is not a node of {self}")
        return i

    def floor_index(self, t: float) -> int:
        """Largest node index with node <= t (clipped to the grid)."""
        return int(np.clip(math.floor((t - self.t0) / self.h + 1e-12), 0, self.n_steps))


@dataclass(frozen=True)
class SampledFunction:
    """Vector-valued samples on the prefix nodes[0:len(values)] of a grid."""

    grid: TimeGrid
    values: np.ndarray  # shape (m + 1, n)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[0] > self.grid.n_steps + 1:
            raise DomainError(f"bad sample shape {v.shape} for {self.grid}")
        if not np.all(np.isfinite(v)):
            raise DomainError("samples must be finite")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def t_end(self) -> float:
        return self.grid.node(self.n_nodes - 1)

    def first(self) -> np.ndarray:
        return self.values[0]

    def last(self) -> np.ndarray:
        return self.values[-1]

    def value_at(self, t: float) -> np.ndarray:
        """Piecewise-linear evaluation inside the sampled prefix."""
        if t < self.grid.t0 - 1e-12 or t > self.t_end + 1e-12:
            raise DomainError(f"t={t!r} outside sampled prefix [{self.grid.t0}, {self.t_end}]")
        s = (t - self.grid.t0) / self.grid.h
        i = int(np.clip(math.floor(s), 0, self.n_nodes - 2)) if self.n_nodes > 1 else 0
        if self.n_nodes == 1:
            return self.values[0]
        w = s - i
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def restricted(self, n_nodes: int) -> "SampledFunction":
        return SampledFunction(self.grid, self.values[:n_nodes].copy())

    @classmethod
    def from_callable(
        cls, grid: TimeGrid, fn: Callable[[float], Sequence[float]], n_nodes: int | None = None
    ) -> "SampledFunction":
        m = grid.n_steps + 1 if n_nodes is None else n_nodes
        vals = np.array([np.atleast_1d(fn(float(t))) for t in grid.nodes[:m]], dtype=float)
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: TimeGrid, x0: Sequence[float], n_nodes: int = 1) -> "SampledFunction":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(grid, np.tile(x0, (n_nodes, 1)))


def _trap_panel_weights(alpha: float, h: float, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Left/right node weights of exact panel integrals of the one-sided kernel.

    Returns (wl, wr) with, for a panel whose right end lies d panels before the
    target point T (d = 1 is the panel adjacent to T),

        integral over the panel of (T - tau)^(alpha-1) * hat(tau) dtau
            = wl[d-1] * g(left node) + wr[d-1] * g(right node)

    exactly, for g piecewise linear.
    """
    d = np.arange(1, n_panels + 1, dtype=float)
    pa = d**alpha - (d - 1.0) ** alpha
    pa1 = d ** (alpha + 1.0) - (d - 1.0) ** (alpha + 1.0)
    wl = h**alpha * (pa1 / (alpha + 1.0) - (d - 1.0) * pa / alpha)
    wr = h**alpha * (d * pa / alpha - pa1 / (alpha + 1.0))
    return wl, wr


def rl_integral(x: SampledFunction, alpha: FracOrder) -> SampledFunction:
    """Riemann-Liouville fractional integral of order alpha on the sampled prefix.

    Product-trapezoidal rule: the integrand is interpolated linearly between
    nodes and integrated exactly against the kernel (t - tau)^(alpha-1), so the
    result is exact for piecewise-linear inputs.  The value at t0 is zero.
    """
    if x.n_nodes < 1:
        raise DomainError("empty sample")
    a = alpha.alpha
    m = x.n_nodes - 1
    out = np.zeros_like(x.values)
    if m == 0:
        return SampledFunction(x.grid, out)
    wl, wr = _trap_panel_weights(a, x.grid.h, m)
    ga = gamma_fn(a)
    for i in range(1, m + 1):
        # panels l = 0..i-1, lag d = i - l
        wl_i = wl[i - 1 :: -1]  # wl[d-1] for d = i..1  -> aligned with l = 0..i-1
        wr_i = wr[i - 1 :: -1]
        out[i] = (wl_i @ x.values[:i] + wr_i @ x.values[1 : i + 1]) / ga
    return SampledFunction(x.grid, out)


def l1_coefficients(alpha: float, n: int) -> np.ndarray:
    """L1 scheme coefficients c_m = (m+1)^(1-alpha) - m^(1-alpha), m = 0..n-1."""
    m = np.arange(n, dtype=float)
    return (m + 1.0) ** (1.0 - alpha) - m ** (1.0 - alpha)


def caputo_derivative(x: SampledFunction, alpha: FracOrder) -> SampledFunction:
    """L1 approximation of the Caputo derivative on the sampled prefix.

    Values at nodes tau_1..tau_m are the standard L1 differences; the node-0
    slot carries the tau_1 value (the scheme does not define the derivative at
    the base point).  Adding a constant to ``x`` leaves the result unchanged.
    """
    if x.n_nodes < 2:
        raise DomainError("need at least two nodes for the L1 scheme")
    a = alpha.alpha
    m = x.n_nodes - 1
    h = x.grid.h
    c = l1_coefficients(a, m)
    beta = h ** (-a) / gamma_fn(2.0 - a)
    dx = np.diff(x.values, axis=0)  # (m, n)
    out = np.empty_like(x.values)
    for i in range(1, m + 1):
        out[i] = beta * (c[i - 1 :: -1] @ dx[:i])
    out[0] = out[1]
    return SampledFunction(x.grid, out)


def mittag_leffler_matrix(
    A: np.ndarray,
    alpha: FracOrder,
    s: float,
    tol: float = 1e-14,
    max_terms: int = 10_000,
) -> np.ndarray:
    """Partial sum of sum_i s^(i*alpha) A^i / Gamma((i+1)*alpha).

    Terms are added until their norm drops below ``tol`` while decreasing.
    The sum is entire in s^alpha, so decay eventually sets in; if it does not
    within ``max_terms`` terms (or a term overflows) a SolverError is raised.
    """
    if s < 0.0:
        raise DomainError(f"need s >= 0, got {s!r}")
    if tol <= 0.0:
        raise DomainError(f"need tol > 0, got {tol!r}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise DomainError(f"A must be square, got {A.shape}")
    a = alpha.alpha
    B = A * s**a
    term = np.eye(n) / gamma_fn(a)
    acc = term.copy()
    prev_norm = float(np.linalg.norm(term))
    power = np.eye(n)
    for i in range(1, max_terms + 1):
        power = power @ B
        g = (i + 1) * a
        denom = gamma_fn(g) if g < 170.0 else math.inf
        term = power / denom
        nrm = float(np.linalg.norm(term))
        if not math.isfinite(nrm):
            raise SolverError(f"series term {i} overflowed (s={s!r}, |A|~{np.abs(A).max():g})")
        acc += term
        if nrm < tol and nrm <= prev_norm:
            return acc
        prev_norm = nrm
    raise SolverError(f"series did not decay below tol={tol!r} within {max_terms} terms")
