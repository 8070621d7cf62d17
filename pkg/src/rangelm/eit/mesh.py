"""Triangulations of the unit square and their text file format.

File layout::

    # rangelm mesh refinement=12
    NODES
    0 0 0
    ...
    TRIANGLES
    0 0 1 14
    ...
    BOUNDARY
    0 1 0
    ...

Node coordinates are written with 17 significant digits so that reading a
file back reproduces every float exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["TriMesh", "structured_mesh", "write_mesh", "read_mesh", "perimeter_coordinate"]

FACES = ("bottom", "right", "top", "left")


def perimeter_coordinate(xy, tol=1e-12):
    """Counter-clockwise arclength ``s in [0, 4)`` of points on the unit square boundary.

    Face ``m`` occupies ``[m, m+1]``, starting at (0,0) along the bottom.
    """
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    x, y = xy[:, 0], xy[:, 1]
    s = np.full(len(xy), np.nan)
    left = np.abs(x) <= tol
    top = np.abs(y - 1) <= tol
    right = np.abs(x - 1) <= tol
    bottom = np.abs(y) <= tol
    # later assignments win at corners, which gives corners s = 0, 1, 2, 3
    s[left] = 4 - y[left]
    s[top] = 3 - x[top]
    s[right] = 1 + y[right]
    s[bottom] = x[bottom]
    if np.any(np.isnan(s)):
        raise ValueError("point is not on the boundary of the unit square")
    return np.where(s >= 4 - tol, s - 4, s)


@dataclass(frozen=True, eq=False)
class TriMesh:
    nodes: np.ndarray           # (N, 2)
    triangles: np.ndarray       # (M, 3), counter-clockwise
    boundary_edges: np.ndarray  # (E, 2)
    edge_faces: np.ndarray      # (E,), face label 0..3
    refinement: int = 0

    def __post_init__(self):
        for name in ("nodes", "triangles", "boundary_edges", "edge_faces"):
            a = np.array(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Boundary node indices sorted by perimeter coordinate."""
        idx = np.unique(self.boundary_edges)
        s = perimeter_coordinate(self.nodes[idx])
        return idx[np.argsort(s, kind="stable")]

    @cached_property
    def boundary_s(self) -> np.ndarray:
        return perimeter_coordinate(self.nodes[self.boundary_nodes])

    @cached_property
    def boundary_mass(self) -> np.ndarray:
        """Lumped boundary mass: half the length of each adjacent boundary edge."""
        pos = np.full(self.n_nodes, -1)
        pos[self.boundary_nodes] = np.arange(len(self.boundary_nodes))
        e = self.boundary_edges
        lengths = np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1)
        mass = np.zeros(len(self.boundary_nodes))
        np.add.at(mass, pos[e[:, 0]], 0.5 * lengths)
        np.add.at(mass, pos[e[:, 1]], 0.5 * lengths)
        return mass

    def check(self) -> list:
        """Return a list of consistency problems (empty for a valid mesh)."""
        bad = []
        if np.any(self.signed_areas <= 0):
            bad.append("non-positive or clockwise triangle")
        total = self.areas.sum()
        if abs(total - 1.0) > 1e-12:
            bad.append(f"areas sum to {total!r}, not 1")
        # every boundary edge must belong to exactly one triangle
        edges = np.sort(np.concatenate([self.triangles[:, [0, 1]],
                                        self.triangles[:, [1, 2]],
                                        self.triangles[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        free = {tuple(e) for e in uniq[counts == 1]}
        given = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        if free != given:
            bad.append("boundary edges do not match the free edges of the triangulation")
        mids = self.nodes[self.boundary_edges].mean(axis=1)
        face = np.floor(perimeter_coordinate(mids)).astype(int)
        if not np.array_equal(face, self.edge_faces):
            bad.append("face labels disagree with edge positions")
        lengths = np.bincount(self.edge_faces, weights=np.linalg.norm(
            self.nodes[self.boundary_edges[:, 0]] - self.nodes[self.boundary_edges[:, 1]],
            axis=1), minlength=4)
        if not np.allclose(lengths, 1.0, atol=1e-12):
            bad.append(f"face lengths {lengths.tolist()} do not cover the sides once")
        return bad


def structured_mesh(n: int, pattern: str = "unionjack") -> TriMesh:
    """Uniform ``n x n`` grid on the unit square, two triangles per cell.

    ``pattern="unionjack"`` alternates the cell diagonal in a checkerboard,
    which for even ``n`` keeps the full symmetry group of the square.
    ``pattern="diagonal"`` cuts every cell along the same diagonal.
    """
    if n < 4:
        raise ValueError("need n >= 4")
    if pattern not in ("unionjack", "diagonal"):
        raise ValueError(f"unknown pattern {pattern!r}")
    g = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(g, g)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            if pattern == "diagonal" or (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]

    edges, faces = [], []
    for i in range(n):
        edges.append((nid(i, 0), nid(i + 1, 0)))
        faces.append(0)
    for j in range(n):
        edges.append((nid(n, j), nid(n, j + 1)))
        faces.append(1)
    for i in range(n, 0, -1):
        edges.append((nid(i, n), nid(i - 1, n)))
        faces.append(2)
    for j in range(n, 0, -1):
        edges.append((nid(0, j), nid(0, j - 1)))
        faces.append(3)
    return TriMesh(nodes, np.array(tris, dtype=np.int64),
                   np.array(edges, dtype=np.int64), np.array(faces, dtype=np.int64), n)


def write_mesh(mesh: TriMesh, path) -> None:
    lines = [f"# rangelm mesh refinement={mesh.refinement}", "NODES"]
    lines += [f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    lines.append("TRIANGLES")
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.triangles.tolist())]
    lines.append("BOUNDARY")
    lines += [f"{a} {b} {m}" for (a, b), m in zip(mesh.boundary_edges.tolist(),
                                                   mesh.edge_faces.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    sections = {"NODES": [], "TRIANGLES": [], "BOUNDARY": []}
    refinement = 0
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "refinement=" in line:
                    refinement = int(line.split("refinement=")[1].split()[0])
                continue
            if line in sections:
                current = line
                continue
            if current is None:
                raise ValueError(f"{path}:{lineno}: data before any section header")
            sections[current].append(line.split())

    nodes = np.zeros((len(sections["NODES"]), 2))
    for row in sections["NODES"]:
        nodes[int(row[0])] = float(row[1]), float(row[2])
    tris = np.zeros((len(sections["TRIANGLES"]), 3), dtype=np.int64)
    for row in sections["TRIANGLES"]:
        tris[int(row[0])] = [int(v) for v in row[1:4]]
    bnd = np.array([[int(v) for v in row[:3]] for row in sections["BOUNDARY"]],
                   dtype=np.int64).reshape(-1, 3)
    return TriMesh(nodes, tris, bnd[:, :2], bnd[:, 2], refinement)
