"""P1 finite elements for the EIT Neumann problem and its linearisation.

For a conductivity ``gamma`` constant on each triangle and a boundary current
``g`` with zero mean, the potential ``u`` solves ``K(gamma) u = M_b g`` where
``M_b`` is the lumped boundary mass. The solution is fixed by requiring zero
boundary mean; numerically one node is pinned and the boundary mean is
subtracted afterwards, which is exact because every right-hand side used
here is orthogonal to constants.

Data vectors stack the boundary traces of the ``d`` patterns, pattern-major,
each block ordered by perimeter coordinate.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..linalg import InnerProduct, LinearOperator
from .mesh import TriMesh

__all__ = [
    "EITModel",
    "DomainError",
    "gradient_matrices",
    "stiffness_matrix",
    "current_patterns",
    "compute_weight",
    "jacobian_norm",
]


class DomainError(ValueError):
    """Conductivity below the admissible floor."""


def gradient_matrices(mesh: TriMesh):
    """Sparse ``(Gx, Gy)`` of shape ``(M, N)`` mapping nodal values to per-triangle gradients."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    two_a = 2.0 * mesh.signed_areas
    gx = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]]) / two_a[:, None]
    gy = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]]) / two_a[:, None]
    m = mesh.n_triangles
    rows = np.repeat(np.arange(m), 3)
    cols = mesh.triangles.ravel()
    shape = (m, mesh.n_nodes)
    return (sp.csr_matrix((gx.ravel(), (rows, cols)), shape=shape),
            sp.csr_matrix((gy.ravel(), (rows, cols)), shape=shape))


def stiffness_matrix(mesh: TriMesh, gamma, grads=None):
    """``K_ab = sum_T gamma_T |T| grad phi_a . grad phi_b``; symmetric, constants in its kernel."""
    gx, gy = grads if grads is not None else gradient_matrices(mesh)
    wdiag = sp.diags(np.asarray(gamma, dtype=float) * mesh.areas)
    return (gx.T @ wdiag @ gx + gy.T @ wdiag @ gy).tocsr()


def current_patterns(mesh: TriMesh, kmax: int = 2) -> np.ndarray:
    """Boundary currents ``g_{2m+k} = cos(2 k pi t)`` on face ``m``, zero elsewhere.

    ``t`` is the arclength along the face. Returns an array of shape
    ``(4 * kmax, n_boundary)``; row ``2m + k - 1`` holds pattern ``(m, k)``.
    At a corner the two faces' one-sided values are averaged, which keeps the
    lumped integral of each pattern at zero.
    """
    s = mesh.boundary_s
    out = np.zeros((4 * kmax, len(s)))
    for m in range(4):
        t = s - m
        inside = (t > 1e-12) & (t < 1 - 1e-12)
        start = np.abs(t) <= 1e-12
        end = np.abs(t - 1) <= 1e-12
        if m == 0:
            end |= np.abs(s - 4) <= 1e-12
        if m == 3:
            end |= np.abs(s) <= 1e-12
        for k in range(1, kmax + 1):
            row = out[2 * m + k - 1]
            row[inside] = np.cos(2 * k * np.pi * t[inside])
            row[start | end] = 0.5
    mass = mesh.boundary_mass
    out -= (out @ mass)[:, None] / mass.sum()
    return out


@dataclass(frozen=True)
class _State:
    """Factorised system and pattern potentials at one conductivity."""

    solve: object
    u: np.ndarray       # (N, d) potentials, zero boundary mean
    ux: np.ndarray      # (M, d) gradients per triangle
    uy: np.ndarray


class EITModel:
    """Forward map ``gamma -> (Lambda_gamma g_1, ..., Lambda_gamma g_d)`` on one mesh.

    Parameters
    ----------
    mesh : TriMesh
    patterns : array, optional
        ``(d, n_boundary)`` currents; :func:`current_patterns` by default.
    weight : array, optional
        Per-triangle ``beta_i`` of the parameter-space inner product
        ``<u, v>_X = sum_i u_i v_i beta_i |T_i|``. ``None`` means ``beta = 1``.
    c_min : float
        Conductivities below this are rejected.
    cache_size : int
        Number of factorised conductivities kept.
    """

    def __init__(self, mesh: TriMesh, patterns=None, weight=None, c_min=1e-3,
                 cache_size=4):
        self.mesh = mesh
        self.patterns = current_patterns(mesh) if patterns is None else np.asarray(patterns, float)
        self.d = len(self.patterns)
        self.c_min = float(c_min)
        self.grads = gradient_matrices(mesh)
        self.bidx = mesh.boundary_nodes
        self.bmass = mesh.boundary_mass
        self.blen = self.bmass.sum()
        self.nb = len(self.bidx)
        self.weight = None if weight is None else np.asarray(weight, dtype=float)
        if self.weight is not None and (self.weight.shape != (mesh.n_triangles,)
                                        or np.any(self.weight <= 0)):
            raise ValueError("weight must be positive, one value per triangle")
        beta = np.ones(mesh.n_triangles) if self.weight is None else self.weight
        self.x_ip = InnerProduct(beta * mesh.areas)
        self.y_ip = InnerProduct(np.tile(self.bmass, self.d))
        # Neumann load of each pattern, (N, d)
        self._load = np.zeros((mesh.n_nodes, self.d))
        self._load[self.bidx] = (self.bmass[None, :] * self.patterns).T
        self._cache = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    @property
    def dim_x(self) -> int:
        return self.mesh.n_triangles

    @property
    def dim_y(self) -> int:
        return self.d * self.nb

    def with_weight(self, weight) -> "EITModel":
        return EITModel(self.mesh, self.patterns, weight, self.c_min, self._cache_size)

    def domain_check(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        lo = float(np.min(gamma))
        if not np.all(np.isfinite(gamma)) or lo < self.c_min:
            return f"min conductivity {lo:.4g} below {self.c_min:g}"
        return None

    # -- solves -----------------------------------------------------------

    def _factorise(self, gamma):
        k = stiffness_matrix(self.mesh, gamma, self.grads)
        lu = splu(k[1:, 1:].tocsc())

        def solve(rhs):
            rhs = np.asarray(rhs, dtype=float)
            out = np.zeros_like(rhs)
            out[1:] = lu.solve(rhs[1:])
            return out - (self.bmass @ out[self.bidx]) / self.blen

        return solve

    def state(self, gamma) -> _State:
        gamma = np.ascontiguousarray(gamma, dtype=float)
        if gamma.shape != (self.dim_x,):
            raise ValueError(f"expected {self.dim_x} conductivity values, got {gamma.shape}")
        msg = self.domain_check(gamma)
        if msg:
            raise DomainError(msg)
        key = gamma.tobytes()
        with self._lock:
            st = self._cache.get(key)
            if st is not None:
                self._cache.move_to_end(key)
                return st
        solve = self._factorise(gamma)
        u = solve(self._load)
        gx, gy = self.grads
        st = _State(solve, u, gx @ u, gy @ u)
        with self._lock:
            self._cache[key] = st
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return st

    def _traces(self, nodal):
        """(N, d) nodal fields -> flat data vector of zero-mean boundary traces."""
        tr = nodal[self.bidx].T
        tr = tr - (tr @ self.bmass)[:, None] / self.blen
        return tr.ravel()

    def blocks(self, y):
        return np.asarray(y, dtype=float).reshape(self.d, self.nb)

    def potentials(self, gamma):
        return self.state(gamma).u

    def forward(self, gamma):
        return self._traces(self.state(gamma).u)

    def _derivative_load(self, st, h):
        gx, gy = self.grads
        wh = (np.asarray(h, dtype=float) * self.mesh.areas)[:, None]
        return -(gx.T @ (wh * st.ux) + gy.T @ (wh * st.uy))

    def frechet_apply(self, gamma, h):
        st = self.state(gamma)
        return self._traces(st.solve(self._derivative_load(st, h)))

    def frechet_adjoint(self, gamma, z):
        """Adjoint of :meth:`frechet_apply` for the weighted ``X`` and lumped ``Y`` inner products."""
        st = self.state(gamma)
        zb = self.blocks(z)
        zb = zb - (zb @ self.bmass)[:, None] / self.blen
        load = np.zeros((self.mesh.n_nodes, self.d))
        load[self.bidx] = (self.bmass[None, :] * zb).T
        psi = st.solve(load)
        gx, gy = self.grads
        val = -np.sum(st.ux * (gx @ psi) + st.uy * (gy @ psi), axis=1)
        return val if self.weight is None else val / self.weight

    def jacobian(self, gamma) -> LinearOperator:
        gamma = np.array(gamma, dtype=float)
        self.state(gamma)
        return LinearOperator(lambda h: self.frechet_apply(gamma, h),
                              lambda z: self.frechet_adjoint(gamma, z),
                              (self.dim_y, self.dim_x), self.x_ip, self.y_ip)

    def jacobian_columns(self, gamma) -> np.ndarray:
        """Dense ``(dim_y, M)`` matrix whose column ``i`` is ``F'(gamma) chi_{T_i}``."""
        st = self.state(gamma)
        gx, gy = self.grads
        area = self.mesh.areas
        cols = np.empty((self.d, self.nb, self.dim_x))
        for j in range(self.d):
            load = -(gx.T @ sp.diags(area * st.ux[:, j]) + gy.T @ sp.diags(area * st.uy[:, j]))
            w = st.solve(load.toarray())[self.bidx]
            cols[j] = w - (self.bmass @ w)[None, :] / self.blen
        return cols.reshape(self.dim_y, self.dim_x)


def compute_weight(model: EITModel, gamma0=None) -> np.ndarray:
    """``beta_i = ||F'(gamma0) chi_{T_i}||_Y / |T_i|`` with the unweighted data norm."""
    if gamma0 is None:
        gamma0 = np.ones(model.dim_x)
    cols = model.jacobian_columns(gamma0)
    norms = np.sqrt(np.tile(model.bmass, model.d) @ (cols * cols))
    beta = norms / model.mesh.areas
    if np.any(beta <= 0) or not np.all(np.isfinite(beta)):
        raise ValueError("degenerate weight: some triangle has zero sensitivity")
    return beta


def jacobian_norm(model: EITModel, gamma=None) -> float:
    """Spectral norm of ``F'(gamma)`` from the model's ``X`` to its ``Y`` inner product."""
    if gamma is None:
        gamma = np.ones(model.dim_x)
    cols = model.jacobian_columns(gamma)
    scaled = np.sqrt(model.y_ip.weights)[:, None] * cols / np.sqrt(model.x_ip.weights)[None, :]
    return float(np.linalg.norm(scaled, 2))
