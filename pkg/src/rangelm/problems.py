"""Synthetic forward models with closed-form derivatives.

Both instances are diagonal, so derivative and adjoint are exact and cheap.
They exist to exercise the solver independently of the FEM code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import InnerProduct, LinearOperator, norm

__all__ = [
    "ProblemInstance",
    "linear_diagonal",
    "nonlinear_exp",
    "empirical_eta",
    "taylor_order",
]


@dataclass(frozen=True)
class ProblemInstance:
    """Forward map ``F: X -> Y`` with everything the solver needs.

    ``domain_check(x)`` returns None for admissible points and a short
    message otherwise.
    """

    name: str
    dim_x: int
    dim_y: int
    forward: Callable[[np.ndarray], np.ndarray]
    jacobian_at: Callable[[np.ndarray], LinearOperator]
    x0: np.ndarray
    domain_check: Callable[[np.ndarray], Optional[str]] = lambda x: None
    known_solution: Optional[np.ndarray] = None
    eta_hint: float = 0.0
    n_blocks: int = 1
    x_ip: InnerProduct = field(default_factory=InnerProduct)
    y_ip: InnerProduct = field(default_factory=InnerProduct)
    meta: dict = field(default_factory=dict)

    def exact_data(self):
        if self.known_solution is None:
            raise ValueError(f"{self.name}: no known solution")
        return self.forward(self.known_solution)

    def rel_error(self, x) -> Optional[float]:
        """``100 ||x - x*|| / ||x*||`` in ``X``; relative to ``||x0 - x*||`` when ``x* = 0``."""
        if self.known_solution is None:
            return None
        ref = norm(self.known_solution, self.x_ip)
        if ref == 0.0:
            ref = norm(self.x0 - self.known_solution, self.x_ip)
        return 100.0 * norm(np.asarray(x) - self.known_solution, self.x_ip) / ref


def _diag(n, s):
    return np.arange(1, n + 1, dtype=float) ** (-float(s))


def linear_diagonal(n: int = 50, s: float = 1.0) -> ProblemInstance:
    """``F(x) = D x`` with ``D = diag(i^-s)``; solution ``x*_i = 1/i``, start at 0."""
    if n < 2 or not s > 0:
        raise ValueError("need n >= 2 and s > 0")
    dvals = _diag(n, s)
    op = LinearOperator(lambda h: dvals * h, lambda z: dvals * z, (n, n))
    return ProblemInstance(
        name="linear_diagonal",
        dim_x=n,
        dim_y=n,
        forward=lambda x: dvals * np.asarray(x, dtype=float),
        jacobian_at=lambda x: op,
        x0=np.zeros(n),
        known_solution=1.0 / np.arange(1, n + 1, dtype=float),
        eta_hint=0.0,
        meta={"n": n, "s": s, "diag": dvals},
    )


def nonlinear_exp(n: int = 50, s: float = 1.0, x0_value: float = 0.5,
                  bound: float = 50.0) -> ProblemInstance:
    """``F(x) = D exp(x)`` componentwise; ``x* = 0`` so ``y = diag(D)``.

    Iterates with ``|x_i| > bound`` are reported as domain violations.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    dvals = _diag(n, s)

    def forward(x):
        x = np.asarray(x, dtype=float)
        if np.max(np.abs(x)) > bound:
            raise FloatingPointError("exp overflow guard: |x_i| above bound")
        return dvals * np.exp(x)

    def jacobian_at(x):
        scale = dvals * np.exp(np.asarray(x, dtype=float))
        return LinearOperator(lambda h: scale * h, lambda z: scale * z, (n, n))

    def domain_check(x):
        worst = float(np.max(np.abs(x)))
        if not np.isfinite(worst) or worst > bound:
            return f"max |x_i| = {worst:.3g} exceeds {bound:g}"
        return None

    return ProblemInstance(
        name="nonlinear_exp",
        dim_x=n,
        dim_y=n,
        forward=forward,
        jacobian_at=jacobian_at,
        x0=np.full(n, float(x0_value)),
        domain_check=domain_check,
        known_solution=np.zeros(n),
        eta_hint=0.4,
        meta={"n": n, "s": s, "x0_value": x0_value, "diag": dvals},
    )


def empirical_eta(problem: ProblemInstance, center, radius, samples=200, seed=0):
    """Largest observed ``||F(xb) - F(x) - F'(x)(xb - x)|| / ||F(xb) - F(x)||``.

    Pairs are drawn uniformly from the ball of the given radius (in ``X``)
    around ``center``. This is a lower estimate of the tangential cone
    constant, not a certificate.
    """
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=float)
    ip = problem.x_ip

    def draw():
        v = rng.standard_normal(center.size)
        v *= radius * rng.random() ** (1.0 / center.size) / norm(v, ip)
        return center + v

    worst = 0.0
    for _ in range(samples):
        x, xb = draw(), draw()
        fx, fxb = problem.forward(x), problem.forward(xb)
        lin = problem.jacobian_at(x).apply(xb - x)
        den = norm(fxb - fx, problem.y_ip)
        if den > 0:
            worst = max(worst, norm(fxb - fx - lin, problem.y_ip) / den)
    return worst


def taylor_order(forward, jac_apply, x, h, ts=(1e-1, 1e-2, 1e-3, 1e-4), ip=None):
    """Observed convergence orders of ``||F(x+th) - F(x) - t F'(x)h||`` between successive ``t``.

    Returns ``(errors, orders)``.
    """
    ip = ip or InnerProduct()
    fx = forward(x)
    dh = jac_apply(h)
    errs = np.array([norm(forward(x + t * h) - fx - t * dh, ip) for t in ts])
    ts = np.asarray(ts, dtype=float)
    orders = np.log(errs[:-1] / errs[1:]) / np.log(ts[:-1] / ts[1:])
    return errs, orders
