"""Ten-point tetrahedron rule, exact for quadratic integrands."""
import numpy as np

_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def tet_quadrature_points(verts):
    verts = np.asarray(verts, dtype=float)
    V = abs(np.linalg.det(verts[1:] - verts[0])) / 6.0
    pts = list(verts) + [0.5 * (verts[i] + verts[j]) for i, j in _EDGES]
    w = [-V / 20.0] * 4 + [V / 5.0] * 6
    return np.array(pts), np.array(w)


def tet_quadrature_moments(vertices, tets):
    """(volume, ∫x dV, ∫x xᵀ dV) summed over tets."""
    vertices = np.asarray(vertices, dtype=float)
    vol, first, second = 0.0, np.zeros(3), np.zeros((3, 3))
    for tet in np.asarray(tets, dtype=int):
        pts, w = tet_quadrature_points(vertices[tet])
        vol += w.sum()
        first += w @ pts
        second += np.einsum("k,ki,kj->ij", w, pts, pts)
    return vol, first, second
