"""Classical RK4 on quaternion kinematics and Euler's equations."""
import math
from dataclasses import dataclass, replace

import numpy as np


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        q = np.zeros(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def _qmul(a, b):
    aw, av = a[0], a[1:]
    bw, bv = b[0], b[1:]
    return np.concatenate([[aw * bw - av @ bv], aw * bv + bw * av + np.cross(av, bv)])


@dataclass(frozen=True)
class RigidReference:
    """Rigid body state: unit quaternion (w, x, y, z), position, body-frame ω, velocity.

    ``inertia`` is the body-frame tensor about the reference point (the COM
    for free bodies, the pivot for fixed-point motion with ``fixed=True``).
    """

    quat: np.ndarray
    position: np.ndarray
    omega: np.ndarray
    v: np.ndarray
    inertia: np.ndarray
    mass: float
    time: float = 0.0
    fixed: bool = False

    @property
    def rotation(self):
        return quat_to_matrix(self.quat)

    @property
    def omega_world(self):
        return self.rotation @ self.omega

    def angular_momentum(self):
        return self.rotation @ (self.inertia @ self.omega)

    def kinetic_energy(self):
        return 0.5 * self.omega @ self.inertia @ self.omega + 0.5 * self.mass * self.v @ self.v


def _mv(M, x):
    return [M[0][0] * x[0] + M[0][1] * x[1] + M[0][2] * x[2],
            M[1][0] * x[0] + M[1][1] * x[1] + M[1][2] * x[2],
            M[2][0] * x[0] + M[2][1] * x[1] + M[2][2] * x[2]]


def _deriv(I, Iinv, mass, fixed, y, t, wrench):
    # scalar arithmetic: this runs ~10^6 times in reference runs
    qw, qx, qy, qz = y[0:4]
    w = y[7:10]
    tau_b, acc = (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)
    if wrench is not None:
        n = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
        R = quat_to_matrix(np.array([qw, qx, qy, qz]) / n)
        wv = np.array(w)
        tau, f = wrench(t, R, np.array(y[4:7]), R @ wv, np.array(y[10:13]))
        tau_b = (R.T @ tau).tolist()
        acc = (np.asarray(f, dtype=float) / mass).tolist()
    Iw = _mv(I, w)
    rhs = [tau_b[0] - (w[1] * Iw[2] - w[2] * Iw[1]),
           tau_b[1] - (w[2] * Iw[0] - w[0] * Iw[2]),
           tau_b[2] - (w[0] * Iw[1] - w[1] * Iw[0])]
    dw = _mv(Iinv, rhs)
    wx, wy, wz = w
    dq = [0.5 * (-qx * wx - qy * wy - qz * wz),
          0.5 * (qw * wx + qy * wz - qz * wy),
          0.5 * (qw * wy + qz * wx - qx * wz),
          0.5 * (qw * wz + qx * wy - qy * wx)]
    if fixed:
        return dq + [0.0, 0.0, 0.0] + dw + [0.0, 0.0, 0.0]
    return dq + list(y[10:13]) + dw + list(acc)


def rk4_rigid_step(ref, wrench, h):
    """Advance one step. ``wrench(t, R, x, ω_world, v) -> (τ_world, f_world)`` or None."""
    y = np.concatenate([ref.quat, ref.position, ref.omega, ref.v]).tolist()
    I = np.asarray(ref.inertia, dtype=float)
    args = (I.tolist(), np.linalg.inv(I).tolist(), ref.mass, ref.fixed)
    t = ref.time
    k1 = _deriv(*args, y, t, wrench)
    k2 = _deriv(*args, [a + 0.5 * h * b for a, b in zip(y, k1)], t + 0.5 * h, wrench)
    k3 = _deriv(*args, [a + 0.5 * h * b for a, b in zip(y, k2)], t + 0.5 * h, wrench)
    k4 = _deriv(*args, [a + h * b for a, b in zip(y, k3)], t + h, wrench)
    y = np.array([a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                  for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)])
    q = y[:4] / np.linalg.norm(y[:4])
    return replace(ref, quat=q, position=y[4:7], omega=y[7:10], v=y[10:13], time=t + h)


def rk4_rigid_run(ref, wrench, h, n_steps, sample=None):
    """``n_steps`` RK4 steps; ``sample(ref)`` is called after each step if given."""
    for _ in range(n_steps):
        ref = rk4_rigid_step(ref, wrench, h)
        if sample is not None:
            sample(ref)
    return ref
