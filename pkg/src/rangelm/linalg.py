"""Inner-product spaces, matrix-free linear operators and a plain CG solver.

Vectors are flat ``numpy`` arrays. A space is described only by its inner
product, which is either euclidean or diagonal-weighted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "InnerProduct",
    "LinearOperator",
    "CGResult",
    "ConvergenceError",
    "inner",
    "norm",
    "cg_solve",
    "adjoint_mismatch",
    "dense_operator",
]


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""


@dataclass(frozen=True)
class InnerProduct:
    """Euclidean (``weights is None``) or diagonal-weighted inner product.

    The weighted form is ``<u, v> = sum_i w_i u_i v_i`` with all ``w_i > 0``.
    """

    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1:
                raise ValueError("weights must be one-dimensional")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("weights must be finite and strictly positive")
            w = w.copy()
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def kind(self) -> str:
        return "euclidean" if self.weights is None else "diagonal-weighted"

    @classmethod
    def euclidean(cls) -> "InnerProduct":
        return cls(None)

    def __call__(self, u, v) -> float:
        return inner(u, v, self)

    def norm(self, u) -> float:
        return norm(u, self)

    def riesz(self, u):
        """Return ``W u``, the euclidean representer of ``<u, .>``."""
        u = np.asarray(u, dtype=float)
        return u if self.weights is None else self.weights * u


def inner(u, v, ip: InnerProduct = InnerProduct()) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    if ip.weights is None:
        return float(np.dot(u, v))
    if ip.weights.shape != u.shape:
        raise ValueError(
            f"length mismatch: vectors {u.shape}, weights {ip.weights.shape}")
    # u*v first: keeps inner(u, v) == inner(v, u) bit for bit
    return float(np.sum(ip.weights * (u * v)))


def norm(u, ip: InnerProduct = InnerProduct()) -> float:
    return float(np.sqrt(max(inner(u, u, ip), 0.0)))


@dataclass(frozen=True)
class LinearOperator:
    """A linear map ``X -> Y`` given by its action and its adjoint.

    ``apply_adjoint`` is the adjoint with respect to the declared inner
    products, so ``<A h, z>_Y == <h, A* z>_X``.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    apply_adjoint: Callable[[np.ndarray], np.ndarray]
    shape: tuple
    domain_ip: InnerProduct = field(default_factory=InnerProduct)
    codomain_ip: InnerProduct = field(default_factory=InnerProduct)

    def __call__(self, h):
        return self.apply(h)


def dense_operator(matrix, domain_ip=None, codomain_ip=None) -> LinearOperator:
    """Wrap a dense matrix; the adjoint honours the given inner products.

    With weights ``W_X`` and ``W_Y`` the adjoint is ``W_X^{-1} A^T W_Y``.
    """
    a = np.array(matrix, dtype=float)
    dip = domain_ip or InnerProduct()
    cip = codomain_ip or InnerProduct()

    def adjoint(z):
        v = a.T @ cip.riesz(z)
        return v if dip.weights is None else v / dip.weights

    return LinearOperator(lambda h: a @ np.asarray(h, dtype=float), adjoint,
                          a.shape, dip, cip)


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    converged: bool
    iterations: int
    relres: float


def cg_solve(apply_spd, rhs, tol=1e-10, maxit=None, *, weights=None, x0=None):
    """Conjugate gradients for ``apply_spd(x) = rhs``.

    Parameters
    ----------
    apply_spd : callable
        Operator that is symmetric positive definite in the inner product
        ``<u, v> = sum(weights * u * v)`` (euclidean when ``weights`` is None).
    rhs : array
    tol : float
        Stop when ``||rhs - apply_spd(x)|| <= tol * ||rhs||`` in that norm.
    maxit : int, optional
        Iteration cap, default ``10 * len(rhs)``.
    weights : array, optional
    x0 : array, optional
        Starting guess, zero by default.

    Returns
    -------
    CGResult
        ``converged`` is False when ``maxit`` was hit.

    Raises
    ------
    FloatingPointError
        On NaN/inf in the iteration or a non-positive curvature ``<p, Ap>``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(rhs, dtype=float)
    n = b.size
    if maxit is None:
        maxit = 10 * n
    w = None if weights is None else np.asarray(weights, dtype=float)

    def dot(u, v):
        return float(np.dot(u, v)) if w is None else float(np.dot(w, u * v))

    bnorm = np.sqrt(dot(b, b))
    if not np.isfinite(bnorm):
        raise FloatingPointError("non-finite right-hand side")
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), True, 0, 0.0)

    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - apply_spd(x)
    rr = dot(r, r)
    if np.sqrt(rr) <= tol * bnorm:
        return CGResult(x, True, 0, np.sqrt(rr) / bnorm)
    p = r.copy()
    for it in range(1, maxit + 1):
        q = apply_spd(p)
        pq = dot(p, q)
        if not np.isfinite(pq):
            raise FloatingPointError("non-finite value in CG iteration")
        if pq <= 0.0:
            raise FloatingPointError("operator is not positive definite")
        step = rr / pq
        x += step * p
        r -= step * q
        rr_new = dot(r, r)
        relres = np.sqrt(rr_new) / bnorm
        if relres <= tol:
            # confirm against the true residual; recursion drifts in long runs
            r = b - apply_spd(x)
            rr_new = dot(r, r)
            relres = np.sqrt(rr_new) / bnorm
            if relres <= tol:
                return CGResult(x, True, it, relres)
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    return CGResult(x, False, maxit, float(np.sqrt(rr) / bnorm))


def adjoint_mismatch(op: LinearOperator, trials: int = 20, seed: int = 0) -> float:
    """Largest normalised defect of ``<A h, z>_Y = <h, A* z>_X`` over random pairs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    m, n = op.shape
    worst = 0.0
    for _ in range(trials):
        h = rng.standard_normal(n)
        z = rng.standard_normal(m)
        ah = op.apply(h)
        lhs = inner(ah, z, op.codomain_ip)
        rhs = inner(h, op.apply_adjoint(z), op.domain_ip)
        scale = norm(ah, op.codomain_ip) * norm(z, op.codomain_ip) + 1e-300
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst
