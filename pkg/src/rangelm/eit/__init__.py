"""Electrical impedance tomography on the unit square."""

from .fem import (
    DomainError,
    EITModel,
    compute_weight,
    current_patterns,
    jacobian_norm,
    stiffness_matrix,
)
from .mesh import TriMesh, read_mesh, structured_mesh, write_mesh
from .problem import SimulatedData, eit_problem, ground_truth, simulate_data, transfer_boundary

__all__ = [
    "DomainError",
    "EITModel",
    "SimulatedData",
    "TriMesh",
    "compute_weight",
    "current_patterns",
    "eit_problem",
    "ground_truth",
    "jacobian_norm",
    "read_mesh",
    "simulate_data",
    "stiffness_matrix",
    "structured_mesh",
    "transfer_boundary",
    "write_mesh",
]
