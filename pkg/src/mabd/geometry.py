"""Rest geometry: tetrahedral meshes and analytic primitives.

Every geometry exposes ``moments()`` returning ``(volume, first, second)``
with ``first = ∫x dV`` and ``second = ∫x xᵀ dV`` in the body rest frame.
"""
from dataclasses import dataclass

import numpy as np


class DegenerateMesh(ValueError):
    """A tetrahedron has non-positive volume or the mesh is empty."""


@dataclass(frozen=True)
class TetMesh:
    vertices: np.ndarray
    tets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "tets", np.asarray(self.tets, dtype=int).reshape(-1, 4))

    def tet_volumes(self):
        v = self.vertices[self.tets]
        e = v[:, 1:] - v[:, :1]
        return np.linalg.det(e) / 6.0

    def moments(self):
        if len(self.tets) == 0:
            raise DegenerateMesh("mesh has no tetrahedra")
        vols = self.tet_volumes()
        bad = np.flatnonzero(vols <= 0.0)
        if bad.size:
            raise DegenerateMesh(f"tet {bad[0]} has volume {vols[bad[0]]:.3e}")
        v = self.vertices[self.tets]  # (n, 4, 3)
        s = v.sum(axis=1)
        first = (vols[:, None] * s / 4.0).sum(axis=0)
        # exact for linear tets: V/20 (Σ vᵢvᵢᵀ + s sᵀ)
        outer = np.einsum("nki,nkj->nij", v, v) + np.einsum("ni,nj->nij", s, s)
        second = (vols[:, None, None] * outer / 20.0).sum(axis=0)
        return vols.sum(), first, second

    def translated(self, d):
        return TetMesh(self.vertices + np.asarray(d, dtype=float), self.tets)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box centred at the origin with full side lengths ``size``."""

    size: tuple

    def moments(self):
        a = np.asarray(self.size, dtype=float)
        if np.any(a <= 0):
            raise DegenerateMesh(f"box size {tuple(a)} must be positive")
        V = float(np.prod(a))
        return V, np.zeros(3), np.diag(V * a**2 / 12.0)

    def tet_mesh(self):
        return box_mesh(self.size)


@dataclass(frozen=True)
class Cylinder:
    """Solid cylinder along z, centred at the origin."""

    radius: float
    height: float

    def moments(self):
        r, h = float(self.radius), float(self.height)
        if r <= 0 or h <= 0:
            raise DegenerateMesh("cylinder radius and height must be positive")
        V = np.pi * r * r * h
        return V, np.zeros(3), np.diag([V * r * r / 4, V * r * r / 4, V * h * h / 12])


@dataclass(frozen=True)
class Capsule:
    """Cylinder of length ``length`` along z capped by two hemispheres."""

    radius: float
    length: float

    def moments(self):
        r, l = float(self.radius), float(self.length)
        if r <= 0 or l < 0:
            raise DegenerateMesh("capsule radius must be positive and length non-negative")
        Vc = np.pi * r * r * l
        Vs = 4.0 / 3.0 * np.pi * r**3
        xx = Vc * r * r / 4 + Vs * r * r / 5
        zz = Vc * l * l / 12 + Vs * l * l / 4 + l * np.pi * r**4 / 2 + 4 * np.pi * r**5 / 15
        return Vc + Vs, np.zeros(3), np.diag([xx, xx, zz])


_CUBE_TETS = np.array(
    [[0, 1, 3, 7], [0, 1, 7, 5], [0, 5, 7, 4], [0, 3, 2, 7], [0, 2, 6, 7], [0, 6, 4, 7]]
)


def box_mesh(size, center=(0.0, 0.0, 0.0)):
    """Six-tet mesh of an axis-aligned box."""
    a = np.asarray(size, dtype=float)
    corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float)
    verts = (corners - 0.5) * a + np.asarray(center, dtype=float)
    mesh = TetMesh(verts, _CUBE_TETS)
    vols = mesh.tet_volumes()
    tets = _CUBE_TETS.copy()
    tets[vols < 0] = tets[vols < 0][:, [0, 2, 1, 3]]
    return TetMesh(verts, tets)


def merge_meshes(meshes):
    verts, tets, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tets.append(m.tets + off)
        off += len(m.vertices)
    return TetMesh(np.vstack(verts), np.vstack(tets))


def t_handle_mesh(bar=(0.25, 0.03, 0.03), stem=(0.03, 0.12, 0.03), asymmetry=0.0):
    """T-shaped handle: a crossbar along x and a stem along -y, recentred at the COM.

    ``asymmetry`` stretches the crossbar thickness along z by ``1 + asymmetry``
    so no two principal moments coincide.
    """
    bx, by, bz = bar
    sx, sy, sz = stem
    bar_m = box_mesh((bx, by, bz * (1.0 + asymmetry)), center=(0.0, 0.0, 0.0))
    stem_m = box_mesh((sx, sy, sz), center=(0.0, -(by + sy) / 2.0, 0.0))
    mesh = merge_meshes([bar_m, stem_m])
    V, first, _ = mesh.moments()
    return mesh.translated(-first / V)


def from_dict(d):
    """Build a geometry from its scene-document record."""
    kind = d.get("type")
    if kind == "box":
        return Box(tuple(float(x) for x in d["size"]))
    if kind == "cylinder":
        return Cylinder(float(d["radius"]), float(d["height"]))
    if kind == "capsule":
        return Capsule(float(d["radius"]), float(d["length"]))
    if kind == "t_handle":
        return t_handle_mesh(
            tuple(d.get("bar", (0.25, 0.03, 0.03))),
            tuple(d.get("stem", (0.03, 0.12, 0.03))),
            float(d.get("asymmetry", 0.0)),
        )
    if kind == "mesh":
        mesh = TetMesh(d["vertices"], d["tets"])
        V, first, _ = mesh.moments()
        return mesh.translated(-first / V) if d.get("recenter", True) else mesh
    raise ValueError(f"unknown geometry type {kind!r}")
