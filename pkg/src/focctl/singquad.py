"""Quadrature helpers for kernels with algebraic endpoint singularities.

Everything here integrates interpolants exactly against singular weights, so
no routine ever evaluates an integrand at a singular point.
"""

from __future__ import annotations

import numpy as np
from scipy.special import beta as _beta, betainc as _betainc

from .errors import DomainError
from .fractional_core import _trap_panel_weights

__all__ = [
    "endpoint_panel_weights",
    "power_panel_mass",
    "double_power_node_weights",
    "history_bracket",
    "gauss_legendre_panels",
    "terminal_power_substitution",
]


def endpoint_panel_weights(alpha: float, h: float, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact (left, right) node weights for panel integrals of (T - tau)^(alpha-1).

    Index d-1 corresponds to the panel whose right end lies d panels before T.
    Exact for piecewise-linear regular factors.
    """
    return _trap_panel_weights(alpha, h, n_panels)


def power_panel_mass(alpha: float, T: float, a: float, b: float) -> float:
    """integral_a^b (T - tau)^(alpha-1) dtau for a <= b <= T."""
    if b > T + 1e-12 * max(1.0, abs(T)):
        raise DomainError(f"panel end {b!r} beyond weight base {T!r}")
    return (max(T - a, 0.0) ** alpha - max(T - b, 0.0) ** alpha) / alpha


def double_power_node_weights(alpha: float, m: int) -> np.ndarray:
    """Node weights for the doubly singular kernel on m uniform panels.

    Returns w[0..m] such that, for tau fixed, t = tau + m*h and nodes
    xi_l = tau + l*h,

        integral_tau^t g(xi) (t - xi)^(alpha-1) (xi - tau)^(alpha-1) dxi
            ~= (m*h)^(2*alpha-1) * h^(1-2*alpha)... (scale applied by caller)

    more precisely: the caller multiplies by (m*h)^(2*alpha-1) and supplies
    node samples g_l.  The interpolant is quadratic in the stretched variable
    nu = (xi - tau)^alpha per panel (linear when m == 1), which reproduces the
    leading endpoint behaviour of solutions to weakly singular Volterra
    equations; both singular end panels are integrated analytically through
    regularized incomplete beta functions.  Weights depend only on (alpha, m).
    """
    s = np.arange(m + 1) / m
    I = [
        _beta((k + 1) * alpha, alpha)
        * np.diff(_betainc((k + 1) * alpha, alpha, s))
        * float(m) ** (k * alpha)
        for k in range(3)
    ]
    nu = np.arange(m + 1, dtype=float) ** alpha
    w = np.zeros(m + 1)
    if m == 1:
        dnu = nu[1] - nu[0]
        w[0] = (nu[1] * I[0][0] - I[1][0]) / dnu
        w[1] = (I[1][0] - nu[0] * I[0][0]) / dnu
        return w
    for l in range(m):
        i0, i1, i2 = (0, 1, 2) if l == 0 else (l - 1, l, l + 1)
        na, nb, nc = nu[i0], nu[i1], nu[i2]
        J0, J1, J2 = I[0][l], I[1][l], I[2][l]
        w[i0] += (nb * nc * J0 - (nb + nc) * J1 + J2) / ((na - nb) * (na - nc))
        w[i1] += (na * nc * J0 - (na + nc) * J1 + J2) / ((nb - na) * (nb - nc))
        w[i2] += (na * nb * J0 - (na + nb) * J1 + J2) / ((nc - na) * (nc - nb))
    return w


def history_bracket(
    w_values: np.ndarray, t0: float, h: float, alpha: float, taus: np.ndarray
) -> np.ndarray:
    """History term of the motion representation, evaluated at times ``taus``.

    For a piecewise-linear history w on K uniform panels starting at t0 and
    ending at t_*, the combination

        alpha * integral_{t0}^{t*} (w(xi) - w(t0)) (tau - xi)^(-1-alpha) dxi
            - (w(t*) - w(t0)) (tau - t*)^(-alpha)

    telescopes, after integrating by parts panel by panel, to

        -(1/(1-alpha)) * sum_k s_k [ (tau - xi_k)^(1-alpha) - (tau - xi_{k+1})^(1-alpha) ]

    with s_k the panel slopes.  The hypersingular endpoint contributions cancel
    exactly, so the result is finite down to tau -> t_*+ and can be evaluated
    at tau = t_* by continuity.  ``taus`` must satisfy tau >= t_*.
    """
    w_values = np.atleast_2d(w_values)
    K = w_values.shape[0] - 1
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if K < 1:
        return np.zeros((taus.size, w_values.shape[1]))
    slopes = np.diff(w_values, axis=0) / h  # (K, n)
    xi = t0 + h * np.arange(K + 1)
    d0 = np.maximum(taus[:, None] - xi[None, :-1], 0.0) ** (1.0 - alpha)
    d1 = np.maximum(taus[:, None] - xi[None, 1:], 0.0) ** (1.0 - alpha)
    return -((d0 - d1) @ slopes) / (1.0 - alpha)


def gauss_legendre_panels(fn, a: float, b: float, n_panels: int, order: int = 8) -> float:
    """Composite Gauss-Legendre quadrature of a vectorized callable on [a, b]."""
    if n_panels < 1:
        raise DomainError("need at least one panel")
    xs, ws = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    pts = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
    wts = (half[:, None] * ws[None, :]).ravel()
    return float(np.sum(wts * fn(pts)))


def terminal_power_substitution(
    g, t0: float, t_upper: float, theta: float, alpha: float, n_nodes: int
) -> float:
    """integral_{t0}^{t_upper} g(t) dt with algebraic behaviour in (theta - t).

    Substitutes s = (theta - t)^alpha, which removes the endpoint singularity
    of integrands built from powers of (theta - t), and applies composite
    Gauss-Legendre in s.  ``n_nodes`` is the total node budget.
    """
    if not t0 <= t_upper <= theta:
        raise DomainError(f"need t0 <= t_upper <= theta, got {(t0, t_upper, theta)}")
    if t_upper == t0:
        return 0.0
    s_lo = (theta - t_upper) ** alpha
    s_hi = (theta - t0) ** alpha
    order = 8
    n_panels = max(1, n_nodes // order)

    def integrand(s):
        t = theta - s ** (1.0 / alpha)
        return g(t) * s ** (1.0 / alpha - 1.0) / alpha

    return gauss_legendre_panels(integrand, s_lo, s_hi, n_panels, order)
