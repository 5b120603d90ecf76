import numpy as np
import pytest
from scipy import integrate

from mabd.geometry import Box, Capsule, Cylinder, DegenerateMesh, box_mesh, from_dict, t_handle_mesh
from mabd.oracles import tet_quadrature_moments


def test_box_mesh_matches_closed_form():
    size = (0.3, 0.2, 0.1)
    V, first, second = box_mesh(size).moments()
    Vb, fb, sb = Box(size).moments()
    assert V == pytest.approx(Vb)
    np.testing.assert_allclose(first, fb, atol=1e-15)
    np.testing.assert_allclose(second, sb, rtol=1e-12, atol=1e-18)


def test_mesh_moments_match_quadrature(rng):
    mesh = box_mesh((0.2, 0.4, 0.3), center=rng.standard_normal(3))
    V, first, second = mesh.moments()
    Vq, fq, sq = tet_quadrature_moments(mesh.vertices, mesh.tets)
    assert V == pytest.approx(Vq, rel=1e-12)
    np.testing.assert_allclose(first, fq, rtol=1e-12)
    np.testing.assert_allclose(second, sq, rtol=1e-12)


def test_cylinder_second_moment():
    r, h = 0.15, 0.02
    V, _, S = Cylinder(r, h).moments()
    assert V == pytest.approx(np.pi * r * r * h)
    # ∫x² dV over the disk cross-section times height
    xx, _ = integrate.dblquad(lambda rho, th: (rho * np.cos(th)) ** 2 * rho, 0, 2 * np.pi, 0, r)
    assert S[0, 0] == pytest.approx(xx * h, rel=1e-10)


def test_capsule_reduces_to_sphere():
    r = 0.1
    V, _, S = Capsule(r, 0.0).moments()
    assert V == pytest.approx(4 / 3 * np.pi * r**3)
    np.testing.assert_allclose(np.diag(S), [4 * np.pi * r**5 / 15] * 3, rtol=1e-12)


def test_t_handle_principal_axes():
    V, first, second = t_handle_mesh(asymmetry=0.01).moments()
    np.testing.assert_allclose(first, 0, atol=1e-15)
    inertia = np.trace(second) * np.eye(3) - second
    ev = np.sort(np.linalg.eigvalsh(inertia))
    assert ev[0] < ev[1] < ev[2]
    # body y carries the intermediate moment
    assert inertia[1, 1] == pytest.approx(ev[1], rel=1e-3)


def test_from_dict_and_errors():
    assert isinstance(from_dict({"type": "box", "size": [1, 2, 3]}), Box)
    with pytest.raises(ValueError):
        from_dict({"type": "torus"})
    with pytest.raises(DegenerateMesh):
        Cylinder(0.0, 1.0).moments()
    mesh = from_dict({"type": "mesh", "vertices": box_mesh((1, 1, 1), center=(2, 0, 0)).vertices.tolist(),
                      "tets": box_mesh((1, 1, 1)).tets.tolist()})
    np.testing.assert_allclose(mesh.moments()[1], 0, atol=1e-14)
