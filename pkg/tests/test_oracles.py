import math

import numpy as np
import pytest
from scipy import integrate, special

from mabd.oracles import (
    EllipticPendulum, OutOfDomain, RigidReference, VanillaABD, dense_kkt_solve, elliptic_K,
    jacobi_sn, matrix_to_quat, pendulum_theta, quat_to_matrix, rk4_rigid_run, tet_quadrature_moments,
)
from mabd.oracles.quadrature import tet_quadrature_points


class TestElliptic:
    def test_K_at_zero(self):
        assert elliptic_K(0.0) == pytest.approx(math.pi / 2, abs=1e-15)

    def test_K_against_quadrature(self):
        for k in (0.1, 0.5, 0.9):
            ref, _ = integrate.quad(lambda t: 1 / math.sqrt(1 - k * k * math.sin(t) ** 2), 0, math.pi / 2,
                                    epsabs=1e-13, epsrel=1e-13)
            assert elliptic_K(k) == pytest.approx(ref, rel=1e-12)

    def test_K_monotone_near_one(self):
        ks = [0.9, 0.99, 0.999, 0.9999, 0.999999]
        vals = [elliptic_K(k) for k in ks]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(OutOfDomain):
            elliptic_K(1.0)
        with pytest.raises(OutOfDomain):
            jacobi_sn(0.3, -0.1)

    def test_sn_special_values(self, rng):
        for u in rng.uniform(-5, 5, 10):
            assert jacobi_sn(u, 0.0) == pytest.approx(math.sin(u), abs=1e-15)
        for k in (0.3, 0.7, 0.95):
            assert jacobi_sn(elliptic_K(k), k) == pytest.approx(1.0, abs=1e-12)
            assert jacobi_sn(0.0, k) == pytest.approx(0.0, abs=1e-15)

    def test_sn_against_scipy(self):
        sn, *_ = special.ellipj(0.7, 0.6**2)
        assert jacobi_sn(0.7, 0.6) == pytest.approx(sn, abs=1e-13)
        for u, k in ((2.3, 0.2), (-1.1, 0.8), (7.0, 0.95)):
            assert jacobi_sn(u, k) == pytest.approx(special.ellipj(u, k * k)[0], abs=1e-12)


class TestPendulum:
    params = EllipticPendulum(mass=1.0, length=0.5, inertia=1.0 / 3.0)

    def test_release_and_period(self):
        p = self.params
        assert pendulum_theta(0.0, p) == pytest.approx(0.0, abs=1e-14)
        assert pendulum_theta(p.period, p) == pytest.approx(0.0, abs=1e-10)
        assert pendulum_theta(p.period / 2, p) == pytest.approx(math.pi, abs=1e-10)
        assert pendulum_theta(p.period / 4, p) == pytest.approx(math.pi / 2, abs=1e-10)

    def test_energy_conserved(self):
        p = self.params
        dt = 1e-6
        for t in np.linspace(0.05, 2.0, 15):
            th = pendulum_theta(t, p)
            w = (pendulum_theta(t + dt, p) - pendulum_theta(t - dt, p)) / (2 * dt)
            # drop of the COM below the release height is d sin θ
            e = 0.5 * p.inertia * w * w - p.mass * p.gravity * p.length * math.sin(th)
            assert e == pytest.approx(0.0, abs=1e-6)

    def test_small_amplitude_period(self):
        p = EllipticPendulum(1.0, 0.5, 1.0 / 3.0, amplitude=1e-3)
        assert p.period == pytest.approx(2 * math.pi / p.omega_lin, rel=1e-6)


class TestRigid:
    def test_quaternion_round_trip(self, rng):
        from scipy.spatial.transform import Rotation

        for _ in range(20):
            R = Rotation.from_rotvec(rng.standard_normal(3) * 2).as_matrix()
            np.testing.assert_allclose(quat_to_matrix(matrix_to_quat(R)), R, atol=1e-12)

    def test_torque_free_conservation(self):
        I = np.diag([1.0, 2.0, 3.0])
        ref = RigidReference(np.array([1.0, 0, 0, 0]), np.zeros(3), np.array([0.3, 1.0, -0.2]),
                             np.array([1.0, 0, 0]), I, 2.0)
        L0, E0 = ref.angular_momentum(), ref.kinetic_energy()
        out = rk4_rigid_run(ref, None, 1e-3, 3000)
        np.testing.assert_allclose(out.angular_momentum(), L0, atol=1e-9)
        assert out.kinetic_energy() == pytest.approx(E0, rel=1e-9)
        np.testing.assert_allclose(out.position, [3.0, 0, 0], atol=1e-12)
        assert out.time == pytest.approx(3.0)

    def test_constant_force(self):
        ref = RigidReference(np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3), np.zeros(3), np.eye(3), 2.0)
        out = rk4_rigid_run(ref, lambda *a: (np.zeros(3), np.array([0, 0, -2.0])), 1e-2, 100)
        np.testing.assert_allclose(out.position, [0, 0, -0.5], atol=1e-12)

    def test_stable_axis_spin(self):
        I = np.diag([1.0, 2.0, 3.0])
        ref = RigidReference(np.array([1.0, 0, 0, 0]), np.zeros(3), np.array([0, 0, 2.0]), np.zeros(3), I, 1.0)
        out = rk4_rigid_run(ref, None, 1e-3, 1000)
        np.testing.assert_allclose(out.omega, [0, 0, 2.0], atol=1e-12)


class TestQuadrature:
    def test_weights_sum_to_volume(self, rng):
        v = rng.standard_normal((4, 3))
        pts, w = tet_quadrature_points(v)
        assert pts.shape == (10, 3)
        assert w.sum() == pytest.approx(abs(np.linalg.det(v[1:] - v[0])) / 6)

    def test_unit_tet_moments(self):
        v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
        V, first, second = tet_quadrature_moments(v, [[0, 1, 2, 3]])
        assert V == pytest.approx(1 / 6)
        np.testing.assert_allclose(first, [1 / 24] * 3, rtol=1e-12)
        expect = np.full((3, 3), 1 / 120) + np.eye(3) * (1 / 60 - 1 / 120)
        np.testing.assert_allclose(second, expect, rtol=1e-12)


class TestDenseKKT:
    def test_unconstrained_block_is_newton_step(self, rng):
        from mabd import fixture_builders as fb
        from mabd.scene import load_scene

        sc = load_scene(fb.ring())
        for s in sc.state:
            s.qdot = rng.standard_normal(12)
        P = sc.island_problem(0)
        dq, lam = dense_kkt_solve(P)
        p, c = P.kkt_residual(dq, lam)
        assert p <= 1e-9 and c <= 1e-9


class TestVanilla:
    def test_rest_is_fixed_point(self):
        M = np.eye(12)
        v = VanillaABD(M, 1e-3, 1e9, 1e-3)
        q = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
        q1, qd1 = v.step(q, np.zeros(12))
        np.testing.assert_allclose(q1, q)
        np.testing.assert_allclose(qd1, 0)

    def test_gradient_matches_energy(self, rng):
        from mabd.oracles import central_diff_grad

        v = VanillaABD(np.eye(12), 1e-3, 1e5, 1e-3)
        q = rng.standard_normal(12)
        np.testing.assert_allclose(v.gradient(q), central_diff_grad(v.energy, q, 1e-6), rtol=1e-6)

    def test_hessian_matches_gradient(self, rng):
        from mabd.oracles import central_diff_jac

        v = VanillaABD(np.eye(12), 1e-3, 1e5, 1e-3)
        q = rng.standard_normal(12)
        np.testing.assert_allclose(v.hessian(q), central_diff_jac(v.gradient, q, 1e-6), rtol=1e-5, atol=1e-6)
