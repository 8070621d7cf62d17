"""Range-relaxed Levenberg-Marquardt iteration.

Each step solves a damped linearised problem and accepts its multiplier
``alpha_k`` once the linearised residual ``H_k(alpha_k)`` lies in
``[c_k, d_k]``, with

    c_k = (1 + eps) * eta * res_k + (1 + eta) * delta
    d_k = p * c_k + (1 - p) * res_k

where ``res_k = ||F(x_k) - y_delta||``. The iteration stops by the
discrepancy principle ``res_k <= tau * delta``.

Two multiplier strategies are provided. ``adaptive`` proposes
``alpha_k = r * alpha_{k-1}`` and corrects the ratio ``r`` from where the
previous linearised residual fell inside ``[c, d]``, falling back to a secant
search when the proposal misses the interval. ``geometric`` is the classical
a-priori rule ``alpha_k = alpha_0 r^k`` with no range check.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .linalg import ConvergenceError, norm
from .problems import ProblemInstance
from .tikhonov import (
    InfeasibleIntervalError,
    SecantBudgetError,
    SubproblemResult,
    interval_search,
    solve_subproblem,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "RunResult",
    "STRATEGIES",
    "STOP_REASONS",
    "validate_config",
    "paper43_constants",
    "bounds",
    "inner_bounds",
    "update_ratio",
    "choose_multiplier",
    "contraction_factor",
    "run",
]

STRATEGIES = ("adaptive", "geometric")
STOP_REASONS = ("discrepancy", "kmax", "infeasible", "domain-violation")


def paper43_constants(eta: float = 0.4) -> dict:
    """tau, eps, p, p1, p2, a1, a2, alpha0 as used for the EIT experiments."""
    tau = 1.3 * (1 + eta) / (1 - eta)
    eps = 0.1 * (tau * (1 - eta) - (1 + eta)) / (eta * tau) if eta > 0 else 0.1
    return dict(eta=eta, tau=tau, eps=eps, p=0.1, p1=1 / 3, p2=2 / 3,
                a1=2.0, a2=0.5, alpha0=2.0)


@dataclass(frozen=True)
class SolverConfig:
    eta: float = 0.4
    tau: float = 1.3 * 1.4 / 0.6
    eps: float = 0.1 * (1.3 * 1.4 - 1.4) / (0.4 * 1.3 * 1.4 / 0.6)
    p: float = 0.1
    alpha0: float = 2.0
    r0: float = 0.5
    a1: float = 2.0
    a2: float = 0.5
    p1: float = 1 / 3
    p2: float = 2 / 3
    delta: float = 0.0
    kmax: int = 200
    strategy: str = "adaptive"
    seed: int = 0
    r_max: float = 0.99
    max_secant: int = 30
    cg_tol: float = 1e-10
    exact_tol: float = 1e-12

    def replace(self, **kw) -> "SolverConfig":
        return dataclasses.replace(self, **kw)


def validate_config(cfg: SolverConfig) -> List[str]:
    """Return the list of violated parameter constraints (empty when valid)."""
    bad = []
    eta, tau, eps = cfg.eta, cfg.tau, cfg.eps
    if not 0 <= eta < 1:
        bad.append(f"eta={eta!r} not in [0, 1)")
    else:
        tau_min = (1 + eta) / (1 - eta)
        if not tau > tau_min:
            bad.append(f"tau={tau!r} must exceed (1+eta)/(1-eta)={tau_min!r}")
        elif eta > 0:
            eps_max = (tau * (1 - eta) - (1 + eta)) / (eta * tau)
            if not 0 < eps < eps_max:
                bad.append(f"eps={eps!r} not in (0, {eps_max!r})")
        if eta == 0 and not eps > 0:
            bad.append(f"eps={eps!r} must be positive")
    if not 0 < cfg.p < 1:
        bad.append(f"p={cfg.p!r} not in (0, 1)")
    if not cfg.alpha0 > 0:
        bad.append(f"alpha0={cfg.alpha0!r} must be positive")
    if not 0 < cfg.r0 < 1:
        bad.append(f"r0={cfg.r0!r} not in (0, 1)")
    if not (0 < cfg.a2 < 1 < cfg.a1):
        bad.append(f"need 0 < a2 < 1 < a1, got a1={cfg.a1!r}, a2={cfg.a2!r}")
    if not (0 < cfg.p1 < cfg.p2 < 1):
        bad.append(f"need 0 < p1 < p2 < 1, got p1={cfg.p1!r}, p2={cfg.p2!r}")
    if not cfg.delta >= 0:
        bad.append(f"delta={cfg.delta!r} must be nonnegative")
    if not (isinstance(cfg.kmax, (int, np.integer)) and cfg.kmax >= 1):
        bad.append(f"kmax={cfg.kmax!r} must be a positive integer")
    if cfg.strategy not in STRATEGIES:
        bad.append(f"strategy={cfg.strategy!r} not one of {STRATEGIES}")
    if not 0 < cfg.r_max < 1:
        bad.append(f"r_max={cfg.r_max!r} not in (0, 1)")
    return bad


def bounds(residual: float, cfg: SolverConfig):
    """Interval ``(c, d)`` for the linearised residual at the current iterate."""
    if not residual > cfg.tau * cfg.delta:
        raise ValueError(
            f"residual {residual!r} <= tau*delta {cfg.tau * cfg.delta!r}; "
            "the iteration has already stopped")
    c = (1 + cfg.eps) * cfg.eta * residual + (1 + cfg.eta) * cfg.delta
    d = cfg.p * c + (1 - cfg.p) * residual
    return c, d


def inner_bounds(c: float, d: float, cfg: SolverConfig):
    """Inner target interval ``[c_hat, d_hat]`` inside ``[c, d]``.

    Measured from the left end so that ``p1 < p2`` keeps ``c_hat < d_hat``.
    """
    if not c < d:
        raise ValueError("need c < d")
    return c + cfg.p1 * (d - c), c + cfg.p2 * (d - c)


def update_ratio(prev_linres, prev_c, prev_chat, prev_dhat, prev_d, r_prev,
                 cfg: SolverConfig) -> float:
    """Correct the decreasing ratio from where the last linearised residual landed.

    Left of ``[c_hat, d_hat]`` means alpha shrank too fast, so the ratio grows
    by ``a1``; right of it, the ratio shrinks by ``a2``. Result is capped at
    ``cfg.r_max``.
    """
    if prev_c <= prev_linres < prev_chat:
        r = cfg.a1 * r_prev
    elif prev_dhat < prev_linres <= prev_d:
        r = cfg.a2 * r_prev
    else:
        r = r_prev
    return min(r, cfg.r_max)


def contraction_factor(cfg: SolverConfig) -> float:
    """Residual contraction bound ``(C1 + eta) / (1 - eta)``; below 1 only for mild nonlinearity."""
    c0 = (1 + cfg.eps) * cfg.eta + (1 + cfg.eta) / cfg.tau
    c1 = cfg.p * (c0 - 1) + 1
    return (c1 + cfg.eta) / (1 - cfg.eta)


def choose_multiplier(problem: ProblemInstance, x_k, y_delta, alpha_prev, r,
                      c, d, c_hat, d_hat, cfg: SolverConfig, *,
                      jacobian=None, fx=None) -> SubproblemResult:
    """Pick ``alpha_k`` and solve for the step ``h_k``.

    The trial multiplier is ``r * alpha_prev``. The geometric strategy keeps
    it unconditionally. The adaptive strategy keeps it if its linearised
    residual lies in ``[c, d]`` and otherwise searches towards the middle of
    ``[c_hat, d_hat]``.

    ``jacobian`` and ``fx`` may be passed to reuse work already done at
    ``x_k``.
    """
    A = jacobian if jacobian is not None else problem.jacobian_at(x_k)
    if fx is None:
        fx = problem.forward(x_k)
    b = np.asarray(y_delta, dtype=float) - fx
    alpha = r * alpha_prev
    trial = solve_subproblem(A, b, alpha, tol=cfg.cg_tol)
    if cfg.strategy == "geometric" or c <= trial.linres <= d:
        return trial
    return interval_search(A, b, c, d, alpha, 0.5 * (c_hat + d_hat),
                           max_secant=cfg.max_secant, first=trial,
                           tol=cfg.cg_tol)


@dataclass
class IterationRecord:
    """Telemetry of one step ``x_k -> x_{k+1}``.

    ``ratio`` is the decreasing ratio ``r_k`` that proposes ``alpha_{k+1}``.
    The closing row of a run (``k = k*``) carries only ``residual`` and
    ``rel_error``; its other float fields are NaN.
    """

    k: int
    alpha: float
    ratio: float
    residual: float
    linres: float
    c: float
    d: float
    c_hat: float
    d_hat: float
    rel_error: Optional[float] = None
    subproblem_solves: int = 0
    secant_used: bool = False

    @property
    def is_terminal(self) -> bool:
        return self.subproblem_solves == 0 and math.isnan(self.alpha)


@dataclass
class RunResult:
    iterates: list
    records: List[IterationRecord]
    kstar: int
    total_subproblems: int
    stop_reason: str
    final_residual: float
    final_rel_error: Optional[float] = None
    message: str = ""
    config: Optional[SolverConfig] = None

    @property
    def steps(self) -> List[IterationRecord]:
        """Records of executed steps, without the closing row."""
        return [r for r in self.records if not r.is_terminal]

    @property
    def x(self):
        return self.iterates[-1]


def _terminal(k, residual, rel_error):
    nan = math.nan
    return IterationRecord(k, nan, nan, residual, nan, nan, nan, nan, nan,
                           rel_error, 0, False)


def run(problem: ProblemInstance, y_delta, cfg: SolverConfig, x0=None,
        keep_iterates=True) -> RunResult:
    """Run the iteration from ``x0`` (``problem.x0`` by default).

    With ``cfg.delta == 0`` the discrepancy test is replaced by
    ``residual <= cfg.exact_tol``.
    """
    bad = validate_config(cfg)
    if bad:
        raise ValueError("invalid solver config: " + "; ".join(bad))
    y_delta = np.asarray(y_delta, dtype=float)
    x = np.array(problem.x0 if x0 is None else x0, dtype=float)
    threshold = cfg.tau * cfg.delta if cfg.delta > 0 else cfg.exact_tol
    yip = problem.y_ip

    fx = problem.forward(x)
    residual = norm(fx - y_delta, yip)
    iterates = [x.copy()]
    records: List[IterationRecord] = []
    total = 0

    def finish(k, reason, message=""):
        err = problem.rel_error(x)
        records.append(_terminal(k, residual, err))
        log.info("stop at k*=%d (%s) residual=%.6g N=%d", k, reason, residual, total)
        return RunResult(iterates if keep_iterates else [iterates[0], x.copy()],
                         records, k, total, reason, residual, err, message, cfg)

    if residual <= threshold:
        return finish(0, "discrepancy")

    alpha_prev = cfg.alpha0
    r = cfg.r0
    for k in range(cfg.kmax):
        c, d = bounds(residual, cfg)
        c_hat, d_hat = inner_bounds(c, d, cfg)

        # alpha_0 is tried as given; afterwards alpha_k = r_{k-1} alpha_{k-1}
        ratio_used = 1.0 if k == 0 else r
        A = problem.jacobian_at(x)
        try:
            sub = choose_multiplier(problem, x, y_delta, alpha_prev, ratio_used,
                                    c, d, c_hat, d_hat, cfg, jacobian=A, fx=fx)
        except (InfeasibleIntervalError, SecantBudgetError, ConvergenceError) as exc:
            log.warning("k=%d: multiplier search failed: %s", k, exc)
            return finish(k, "infeasible", str(exc))

        total += sub.inner_iters
        if cfg.strategy == "adaptive" and k >= 1:
            prev = records[-1]
            r = update_ratio(prev.linres, prev.c, prev.c_hat, prev.d_hat,
                             prev.d, r, cfg)
        rec = IterationRecord(
            k=k, alpha=sub.alpha, ratio=r, residual=residual, linres=sub.linres,
            c=c, d=d, c_hat=c_hat, d_hat=d_hat, rel_error=problem.rel_error(x),
            subproblem_solves=sub.inner_iters, secant_used=sub.secant_used)
        records.append(rec)
        log.debug("k=%d alpha=%.4g H=%.6g in [%.6g, %.6g] res=%.6g solves=%d",
                  k, sub.alpha, sub.linres, c, d, residual, sub.inner_iters)

        x_new = x + sub.h
        violation = problem.domain_check(x_new)
        if violation is not None:
            log.warning("k=%d: iterate left the domain: %s", k, violation)
            return finish(k, "domain-violation", violation)
        x = x_new
        fx = problem.forward(x)
        residual = norm(fx - y_delta, yip)
        alpha_prev = sub.alpha
        if keep_iterates:
            iterates.append(x.copy())
        else:
            iterates[1:] = [x.copy()]
        if residual <= threshold:
            return finish(k + 1, "discrepancy")
    return finish(cfg.kmax, "kmax")
