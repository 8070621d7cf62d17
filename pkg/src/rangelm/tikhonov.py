"""Damped linearised subproblem ``(A*A + alpha I) h = A* b`` and its residual.

``H(alpha) = ||A h_alpha - b||_Y`` is continuous and strictly increasing in
``alpha``, running from ``inf_h ||A h - b||`` (alpha -> 0) up to ``||b||``
(alpha -> inf). :func:`interval_search` exploits that to land ``H`` inside a
prescribed interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ConvergenceError, LinearOperator, cg_solve, norm

__all__ = [
    "SubproblemResult",
    "SubproblemError",
    "InfeasibleIntervalError",
    "SecantBudgetError",
    "solve_subproblem",
    "linres_profile",
    "interval_search",
    "ALPHA_MIN",
    "ALPHA_MAX",
]

ALPHA_MIN = 1e-14
ALPHA_MAX = 1e14


class SubproblemError(RuntimeError):
    pass


class InfeasibleIntervalError(SubproblemError):
    """No ``alpha`` can put ``H(alpha)`` inside the requested interval."""


class SecantBudgetError(SubproblemError):
    """The secant search ran out of subproblem solves."""


@dataclass(frozen=True)
class SubproblemResult:
    alpha: float
    h: np.ndarray
    linres: float
    inner_iters: int = 1
    cg_iters: int = 0
    secant_used: bool = False


def solve_subproblem(A: LinearOperator, b, alpha, *, tol=1e-10, maxit=None,
                     h0=None) -> SubproblemResult:
    """Minimise ``||A h - b||_Y^2 + alpha ||h||_X^2``.

    CG runs on ``A*A + alpha I`` in the inner product of ``X``, where that
    operator is self-adjoint, so the stopping test bounds the optimality
    residual ``||A*(A h - b) + alpha h||_X`` directly.
    """
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be positive and finite, got {alpha!r}")
    b = np.asarray(b, dtype=float)
    rhs = A.apply_adjoint(b)

    def normal_op(v):
        return A.apply_adjoint(A.apply(v)) + alpha * v

    res = cg_solve(normal_op, rhs, tol=tol, maxit=maxit,
                   weights=A.domain_ip.weights, x0=h0)
    if not res.converged:
        raise ConvergenceError(
            f"CG stalled at relres {res.relres:.3e} after {res.iterations} "
            f"iterations (alpha={alpha:.3e})")
    linres = norm(A.apply(res.x) - b, A.codomain_ip)
    return SubproblemResult(float(alpha), res.x, linres, 1, res.iterations)


def linres_profile(A: LinearOperator, b, alphas, **kw) -> list:
    out = []
    for a in alphas:
        if not a > 0:
            raise ValueError("alphas must be strictly positive")
        out.append(solve_subproblem(A, b, a, **kw).linres)
    return out


def interval_search(A: LinearOperator, b, c, d, alpha_init, target=None, *,
                    max_secant=30, first=None, **kw) -> SubproblemResult:
    """Find ``alpha`` with ``H(alpha)`` in ``[c, d]`` by a secant method in ``log alpha``.

    Parameters
    ----------
    A, b
        Linearised operator and right-hand side.
    c, d : float
        Target interval, ``0 <= c < d < ||b||``.
    alpha_init : float
        First abscissa.
    target : float, optional
        Root of ``H(alpha) - target`` chased by the secant steps; the
        midpoint of ``[c, d]`` by default. Any iterate inside ``[c, d]`` is
        accepted immediately.
    max_secant : int
        Budget of subproblem solves, counting ``first`` when given.
    first : SubproblemResult, optional
        An already computed solve at ``alpha_init``, reused instead of
        solving again.

    Returns
    -------
    SubproblemResult
        ``inner_iters`` is the number of subproblem solves spent, and
        ``secant_used`` is set.

    Raises
    ------
    ValueError
        If the interval is malformed or ``c >= ||b||``.
    InfeasibleIntervalError
        If ``H`` stays above ``d`` down to the smallest admissible alpha.
    SecantBudgetError
    """
    b = np.asarray(b, dtype=float)
    bnorm = norm(b, A.codomain_ip)
    if not (0 <= c < d):
        raise ValueError(f"need 0 <= c < d, got c={c!r}, d={d!r}")
    if c >= bnorm:
        raise ValueError(f"c={c!r} is not below ||b||={bnorm!r}")
    if target is None:
        target = 0.5 * (c + d)
    if not (c < target < d):
        raise ValueError("target must lie strictly inside (c, d)")
    if not alpha_init > 0:
        raise ValueError("alpha_init must be positive")

    lo_u, hi_u = math.log(ALPHA_MIN), math.log(ALPHA_MAX)
    solves = 0
    cg_total = 0
    prev_h = None

    def evaluate(u):
        nonlocal solves, cg_total, prev_h
        r = solve_subproblem(A, b, math.exp(u), h0=prev_h, **kw)
        solves += 1
        cg_total += r.cg_iters
        prev_h = r.h
        return r

    def done(r):
        return SubproblemResult(r.alpha, r.h, r.linres, solves, cg_total, True)

    u0 = min(max(math.log(alpha_init), lo_u), hi_u)
    if first is not None:
        if first.alpha != alpha_init:
            raise ValueError("first was not solved at alpha_init")
        r0 = first
        solves, cg_total, prev_h = 1, first.cg_iters, first.h
    else:
        r0 = evaluate(u0)
    if c <= r0.linres <= d:
        return done(r0)
    g0 = r0.linres - target

    # bracket in log alpha: g(below) < 0 < g(above)
    below = u0 if g0 < 0 else -math.inf
    above = u0 if g0 > 0 else math.inf

    # second abscissa moves in the direction H has to go
    u1 = min(max(u0 + (math.log(2.0) if g0 < 0 else -math.log(2.0)), lo_u), hi_u)
    while True:
        if solves >= max_secant:
            raise SecantBudgetError(
                f"no alpha with H in [{c:.6g}, {d:.6g}] after {solves} solves")
        r1 = evaluate(u1)
        if c <= r1.linres <= d:
            return done(r1)
        g1 = r1.linres - target
        if g1 < 0:
            below = max(below, u1)
        else:
            above = min(above, u1)
        if g1 > 0 and u1 <= lo_u:
            raise InfeasibleIntervalError(
                f"H({ALPHA_MIN:g}) = {r1.linres:.6g} still exceeds d = {d:.6g}")
        if g1 < 0 and u1 >= hi_u:
            raise InfeasibleIntervalError(
                f"H({ALPHA_MAX:g}) = {r1.linres:.6g} still below c = {c:.6g}")

        if g1 != g0:
            u2 = u1 - g1 * (u1 - u0) / (g1 - g0)
        else:
            u2 = math.nan
        # cap the step; H flattens at both ends and secant steps overshoot
        if not math.isfinite(u2) or abs(u2 - u1) > math.log(1e4):
            u2 = u1 + math.copysign(math.log(1e4), -g1)
        if math.isfinite(below) and math.isfinite(above) and not below < u2 < above:
            u2 = 0.5 * (below + above)
        u0, g0 = u1, g1
        u1 = min(max(u2, lo_u), hi_u)
