"""Builtin problem catalog: the four worked double-integrator scenarios plus
a custom constant-matrix linear system.

Each builder returns a bundle carrying the problem together with whatever
closed forms exist for it (fundamental matrix, initial-image map, reference
values), which the CLI and the test suite use as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .fde_motion import ControlSet, OriginalProblem, Reduction
from .fractional_core import FracOrder, TimeGrid, gamma_fn
from .fundamental_matrix import SystemMatrixFunction

__all__ = [
    "ProblemBundle",
    "example1",
    "example2",
    "example3",
    "example4",
    "custom_linear",
    "build_builtin",
    "EXAMPLE1_VALUE_REFERENCE",
]

# Frozen high-resolution quadrature value of the direction-field problem at
# alpha = 1/2 on [0, 1] (1e6-node oracle); guards against quadrature drift.
EXAMPLE1_VALUE_REFERENCE = -1.5737521213123447


@dataclass(frozen=True)
class ProblemBundle:
    name: str
    problem: OriginalProblem
    x0_default: np.ndarray
    params: dict
    closed_form_F: Callable[[float, float], np.ndarray] | None = None
    initial_image: Callable[[np.ndarray], np.ndarray] | None = None
    sigma_lipschitz: float | None = None

    @property
    def grid(self) -> TimeGrid:
        return self.problem.grid

    @property
    def alpha(self) -> FracOrder:
        return self.problem.alpha


def _double_integrator_F(alpha: FracOrder, theta: float):
    a = alpha.alpha
    ga, g2a = gamma_fn(a), gamma_fn(2.0 * a)

    def F(t: float, tau: float) -> np.ndarray:
        return np.array([[1.0 / ga, (t - tau) ** a / g2a], [0.0, 1.0 / ga]])

    return F


def _double_integrator_image(alpha: FracOrder, t0: float, theta: float):
    a = alpha.alpha
    shift = (theta - t0) ** a / gamma_fn(a + 1.0)

    def image(x0: np.ndarray) -> np.ndarray:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return np.array([x0[0] + shift * x0[1], x0[1]])

    return image


def _grid(alpha: float, t0: float, theta: float, n_steps: int) -> tuple[FracOrder, TimeGrid]:
    return FracOrder(alpha), TimeGrid(t0, theta, n_steps)


def example1(
    alpha: float = 0.5,
    t0: float = 0.0,
    theta: float = 1.0,
    n_steps: int = 512,
    control_samples: int = 33,
    R_x: float = 1.0,
) -> ProblemBundle:
    """Steering a fractional double integrator to maximize the first terminal
    coordinate, with the heading angle as the control."""
    order, grid = _grid(alpha, t0, theta, n_steps)
    A = SystemMatrixFunction.constant(np.array([[0.0, 1.0], [0.0, 0.0]]))
    cset = ControlSet.from_box([-math.pi / 2.0], [math.pi / 2.0], [control_samples])

    def f(t: float, u: np.ndarray) -> np.ndarray:
        return np.array([math.cos(u[0]), math.sin(u[0])])

    reduction = Reduction(
        K=np.array([[1.0, 0.0]]), c=np.zeros(2), mu=lambda zz: -float(np.atleast_1d(zz)[0])
    )
    problem = OriginalProblem(
        alpha=order,
        grid=grid,
        A=A,
        f=f,
        sigma=lambda x: -float(np.atleast_1d(x)[0]),
        chi=lambda t, u: 0.0,
        control_set=cset,
        R_x=R_x,
        reduction=reduction,
    )
    return ProblemBundle(
        name="example1",
        problem=problem,
        x0_default=np.zeros(2),
        params={"alpha": alpha, "t0": t0, "theta": theta, "n_steps": n_steps},
        closed_form_F=_double_integrator_F(order, theta),
        initial_image=_double_integrator_image(order, t0, theta),
        sigma_lipschitz=1.0,
    )


def _force_second(t: float, u: np.ndarray) -> np.ndarray:
    return np.array([0.0, float(u[0])])


def example2(
    alpha: float = 0.5,
    t0: float = 0.0,
    theta: float = 1.0,
    n_steps: int = 512,
    c1: float = 1.0,
    control_samples: int = 41,
    R_x: float = 0.25,
) -> ProblemBundle:
    """Quadratic tracking of the first coordinate with a quadratic control
    price; the auxiliary problem is a saturated linear-quadratic law."""
    order, grid = _grid(alpha, t0, theta, n_steps)
    A = SystemMatrixFunction.constant(np.array([[0.0, 1.0], [0.0, 0.0]]))
    cset = ControlSet.from_box([-1.0], [1.0], [control_samples])
    reduction = Reduction(
        K=np.array([[1.0, 0.0]]),
        c=np.array([c1, 0.0]),
        mu=lambda zz: float(np.atleast_1d(zz)[0]) ** 2,
    )
    problem = OriginalProblem(
        alpha=order,
        grid=grid,
        A=A,
        f=_force_second,
        sigma=lambda x: (float(np.atleast_1d(x)[0]) - c1) ** 2,
        chi=lambda t, u: float(u[0]) ** 2,
        control_set=cset,
        R_x=R_x,
        reduction=reduction,
    )
    return ProblemBundle(
        name="example2",
        problem=problem,
        x0_default=np.zeros(2),
        params={"alpha": alpha, "t0": t0, "theta": theta, "n_steps": n_steps, "c1": c1},
        closed_form_F=_double_integrator_F(order, theta),
        initial_image=_double_integrator_image(order, t0, theta),
    )


def example3(
    alpha: float = 0.5,
    t0: float = 0.0,
    theta: float = 1.0,
    n_steps: int = 512,
    c1: float = 0.2,
    control_samples: int = 21,
    R_x: float = 0.5,
) -> ProblemBundle:
    """Pure terminal tracking (no running cost); the auxiliary value function
    has a closed band form and the optimal feedback is bang-bang."""
    order, grid = _grid(alpha, t0, theta, n_steps)
    A = SystemMatrixFunction.constant(np.array([[0.0, 1.0], [0.0, 0.0]]))
    if control_samples % 2 == 0:
        raise ConfigError("example3 needs an odd sample count so that {-1, 0, +1} are samples")
    cset = ControlSet.from_box([-1.0], [1.0], [control_samples])
    reduction = Reduction(
        K=np.array([[1.0, 0.0]]),
        c=np.array([c1, 0.0]),
        mu=lambda zz: float(np.atleast_1d(zz)[0]) ** 2,
    )
    problem = OriginalProblem(
        alpha=order,
        grid=grid,
        A=A,
        f=_force_second,
        sigma=lambda x: (float(np.atleast_1d(x)[0]) - c1) ** 2,
        chi=lambda t, u: 0.0,
        control_set=cset,
        R_x=R_x,
        reduction=reduction,
    )
    return ProblemBundle(
        name="example3",
        problem=problem,
        x0_default=np.zeros(2),
        params={"alpha": alpha, "t0": t0, "theta": theta, "n_steps": n_steps, "c1": c1},
        closed_form_F=_double_integrator_F(order, theta),
        initial_image=_double_integrator_image(order, t0, theta),
    )


def example4(
    alpha: float = 0.5,
    t0: float = 0.0,
    theta: float = 1.0,
    n_steps: int = 512,
    c1: float = 0.2,
    gamma: float = 0.2,
    control_samples: int = 21,
    R_x: float = 0.5,
) -> ProblemBundle:
    """Norm terminal cost with a small quadratic control price; solved through
    support-function tables of the auxiliary problem."""
    order, grid = _grid(alpha, t0, theta, n_steps)
    A = SystemMatrixFunction.constant(np.array([[0.0, 1.0], [0.0, 0.0]]))
    cset = ControlSet.from_box([-1.0], [1.0], [control_samples])
    reduction = Reduction(
        K=np.array([[1.0, 0.0]]),
        c=np.array([c1, 0.0]),
        mu=lambda zz: float(np.linalg.norm(np.atleast_1d(zz))),
    )
    problem = OriginalProblem(
        alpha=order,
        grid=grid,
        A=A,
        f=_force_second,
        sigma=lambda x: abs(float(np.atleast_1d(x)[0]) - c1),
        chi=lambda t, u: gamma * float(u[0]) ** 2,
        control_set=cset,
        R_x=R_x,
        reduction=reduction,
    )
    return ProblemBundle(
        name="example4",
        problem=problem,
        x0_default=np.zeros(2),
        params={
            "alpha": alpha,
            "t0": t0,
            "theta": theta,
            "n_steps": n_steps,
            "c1": c1,
            "gamma": gamma,
        },
        closed_form_F=_double_integrator_F(order, theta),
        initial_image=_double_integrator_image(order, t0, theta),
        sigma_lipschitz=1.0,
    )


_SIGMA_KINDS = ("neg_first", "quad_first", "abs_first", "zero")
_CHI_KINDS = ("zero", "quad", "abs")


def custom_linear(
    A_matrix: np.ndarray,
    B_matrix: np.ndarray,
    alpha: float = 0.5,
    t0: float = 0.0,
    theta: float = 1.0,
    n_steps: int = 512,
    u_lows: tuple[float, ...] = (-1.0,),
    u_highs: tuple[float, ...] = (1.0,),
    u_counts: tuple[int, ...] = (21,),
    sigma_kind: str = "quad_first",
    c1: float = 0.0,
    chi_kind: str = "zero",
    chi_weight: float = 1.0,
    R_x: float = 1.0,
) -> ProblemBundle:
    """Constant-matrix linear system (C-D^a x) = A x + B u with catalog costs."""
    order, grid = _grid(alpha, t0, theta, n_steps)
    A_matrix = np.atleast_2d(np.asarray(A_matrix, dtype=float))
    B_matrix = np.atleast_2d(np.asarray(B_matrix, dtype=float))
    n = A_matrix.shape[0]
    if B_matrix.shape[0] != n:
        raise ConfigError(f"B has {B_matrix.shape[0]} rows, expected {n}")
    if sigma_kind not in _SIGMA_KINDS:
        raise ConfigError(f"unknown sigma kind {sigma_kind!r}; choose from {_SIGMA_KINDS}")
    if chi_kind not in _CHI_KINDS:
        raise ConfigError(f"unknown chi kind {chi_kind!r}; choose from {_CHI_KINDS}")
    A = SystemMatrixFunction.constant(A_matrix)
    cset = ControlSet.from_box(u_lows, u_highs, u_counts)

    def f(t: float, u: np.ndarray) -> np.ndarray:
        return B_matrix @ np.atleast_1d(u)

    K = np.zeros((1, n))
    K[0, 0] = 1.0
    c = np.zeros(n)
    c[0] = c1
    if sigma_kind == "neg_first":
        sigma = lambda x: -(float(np.atleast_1d(x)[0]) - c1)  # noqa: E731
        mu = lambda zz: -float(np.atleast_1d(zz)[0])  # noqa: E731
        reduction = Reduction(K=K, c=c, mu=mu)
    elif sigma_kind == "quad_first":
        sigma = lambda x: (float(np.atleast_1d(x)[0]) - c1) ** 2  # noqa: E731
        mu = lambda zz: float(np.atleast_1d(zz)[0]) ** 2  # noqa: E731
        reduction = Reduction(K=K, c=c, mu=mu)
    elif sigma_kind == "abs_first":
        sigma = lambda x: abs(float(np.atleast_1d(x)[0]) - c1)  # noqa: E731
        mu = lambda zz: float(np.linalg.norm(np.atleast_1d(zz)))  # noqa: E731
        reduction = Reduction(K=K, c=c, mu=mu)
    else:
        sigma = lambda x: 0.0  # noqa: E731
        reduction = None

    if chi_kind == "zero":
        chi = lambda t, u: 0.0  # noqa: E731
    elif chi_kind == "quad":
        chi = lambda t, u: chi_weight * float(np.sum(np.square(u)))  # noqa: E731
    else:
        chi = lambda t, u: chi_weight * float(np.sum(np.abs(u)))  # noqa: E731

    problem = OriginalProblem(
        alpha=order,
        grid=grid,
        A=A,
        f=f,
        sigma=sigma,
        chi=chi,
        control_set=cset,
        R_x=R_x,
        reduction=reduction,
    )
    return ProblemBundle(
        name="custom",
        problem=problem,
        x0_default=np.zeros(n),
        params={"alpha": alpha, "t0": t0, "theta": theta, "n_steps": n_steps, "c1": c1},
        closed_form_F=None,
        initial_image=None,
        sigma_lipschitz=0.0 if sigma_kind == "zero" else (1.0 if sigma_kind in ("neg_first", "abs_first") else None),
    )


_BUILDERS: dict[str, Callable[..., ProblemBundle]] = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
    "custom": custom_linear,
}


def build_builtin(name: str, **kwargs) -> ProblemBundle:
    if name not in _BUILDERS:
        raise ConfigError(f"unknown builtin {name!r}; choose from {sorted(_BUILDERS)}")
    try:
        return _BUILDERS[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for builtin {name!r}: {exc}") from exc
