"""EIT test problem: inclusion phantom, noisy data from a finer mesh, solver wiring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..problems import ProblemInstance
from .fem import EITModel, compute_weight, jacobian_norm
from .mesh import TriMesh, structured_mesh

__all__ = [
    "DISC_CENTERS",
    "DISC_RADIUS",
    "ground_truth",
    "transfer_boundary",
    "simulate_data",
    "SimulatedData",
    "eit_problem",
]

DISC_CENTERS = ((0.35, 0.35), (0.65, 0.65))
DISC_RADIUS = 0.15


def ground_truth(mesh: TriMesh, background=1.0, inclusion=2.0) -> np.ndarray:
    """Two discs of conductivity 2 in a background of 1, rasterised by triangle centroid."""
    cen = mesh.centroids
    inside = np.zeros(len(cen), dtype=bool)
    for cx, cy in DISC_CENTERS:
        inside |= np.hypot(cen[:, 0] - cx, cen[:, 1] - cy) < DISC_RADIUS
    return np.where(inside, inclusion, background).astype(float)


def transfer_boundary(y_src, src: EITModel, dst: EITModel) -> np.ndarray:
    """Interpolate boundary traces linearly in perimeter coordinate onto ``dst``'s nodes.

    The result is re-centred to zero mean under ``dst``'s boundary mass.
    """
    s_src = src.mesh.boundary_s
    s_dst = dst.mesh.boundary_s
    blocks = src.blocks(y_src)
    out = np.array([np.interp(s_dst, s_src, b, period=4.0) for b in blocks])
    out -= (out @ dst.bmass)[:, None] / dst.blen
    return out.ravel()


@dataclass(frozen=True)
class SimulatedData:
    y: np.ndarray
    y_delta: np.ndarray
    delta: float          # relative noise level
    delta_abs: float      # ||y_delta - y||_Y
    seed: int


def make_noise(model: EITModel, seed: int) -> np.ndarray:
    """Uniform noise on [-1, 1], centred per block and scaled to unit ``Y`` norm."""
    rng = np.random.default_rng(seed)
    noi = rng.uniform(-1.0, 1.0, size=(model.d, model.nb))
    noi -= (noi @ model.bmass)[:, None] / model.blen
    noi = noi.ravel()
    return noi / model.y_ip.norm(noi)


def simulate_data(fine_mesh: TriMesh, delta: float, seed: int,
                  target: EITModel) -> SimulatedData:
    """Exact data from the phantom on ``fine_mesh``, moved to ``target``'s boundary, plus noise.

    ``y_delta = y + delta * ||y|| * noi`` with ``||noi|| = 1`` in ``target``'s
    data norm, so ``||y_delta - y|| = delta * ||y||``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if fine_mesh.refinement and target.mesh.refinement and \
            fine_mesh.refinement < 2 * target.mesh.refinement:
        raise ValueError("data mesh must be at least twice as fine as the inversion mesh")
    fine = EITModel(fine_mesh, c_min=target.c_min)
    y_fine = fine.forward(ground_truth(fine_mesh))
    y = transfer_boundary(y_fine, fine, target)
    ynorm = target.y_ip.norm(y)
    if delta == 0:
        return SimulatedData(y, y.copy(), 0.0, 0.0, seed)
    y_delta = y + delta * ynorm * make_noise(target, seed)
    return SimulatedData(y, y_delta, float(delta), float(delta * ynorm), seed)


def eit_problem(mesh_n: int = 12, pattern: str = "unionjack", weighted: bool = True,
                normalize: bool = True, eta: float = 0.4,
                c_min: float = 1e-3) -> ProblemInstance:
    """EIT on a structured ``mesh_n`` grid, started from ``gamma_0 = 1``.

    With ``weighted`` the parameter space carries the sensitivity weight
    computed at ``gamma_0``. With ``normalize`` that weight is rescaled so
    that ``||F'(gamma_0)|| = 1`` between the weighted spaces, which puts the
    multiplier ``alpha`` on the scale of ``F'^* F'``. Relative errors do not
    depend on the scale. ``meta["model"]`` holds the :class:`EITModel`.
    """
    mesh = structured_mesh(mesh_n, pattern)
    model = EITModel(mesh, c_min=c_min)
    gamma0 = np.ones(mesh.n_triangles)
    if weighted:
        beta = compute_weight(model, gamma0)
        model = model.with_weight(beta)
        if normalize:
            model = model.with_weight(beta * jacobian_norm(model, gamma0) ** 2)
    return ProblemInstance(
        name="eit",
        dim_x=model.dim_x,
        dim_y=model.dim_y,
        forward=model.forward,
        jacobian_at=model.jacobian,
        x0=gamma0,
        domain_check=model.domain_check,
        known_solution=ground_truth(mesh),
        eta_hint=eta,
        n_blocks=model.d,
        x_ip=model.x_ip,
        y_ip=model.y_ip,
        meta={"model": model, "mesh": mesh, "mesh_n": mesh_n, "pattern": pattern,
              "weighted": weighted, "normalize": normalize},
    )
