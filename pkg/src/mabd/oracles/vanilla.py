"""Baseline affine body stepping with the orthogonality energy.

The Hessian depends on ``A``, so it is assembled and Cholesky-factorized
at every Newton iteration.
"""
import numpy as np
import scipy.linalg as sla

_T9 = np.eye(9)[[3 * (k % 3) + k // 3 for k in range(9)]]


class VanillaABD:
    """Implicit Euler for one affine body with ``Ψ = k ‖AAᵀ − I‖²``.

    Parameters
    ----------
    M_A : (12, 12) generalized mass matrix.
    volume : float
    stiffness : float
        ``k_A`` in Pa.
    h : float
        Time step.
    """

    def __init__(self, M_A, volume, stiffness, h):
        self.M = np.asarray(M_A, dtype=float)
        self.kV = stiffness * volume
        self.h = h
        self.Mh = self.M / h**2

    @staticmethod
    def _A(q):
        return q[:9].reshape(3, 3, order="F")

    def energy(self, q):
        A = self._A(q)
        G = A @ A.T - np.eye(3)
        return self.kV * np.sum(G * G)

    def gradient(self, q):
        A = self._A(q)
        g = np.zeros(12)
        g[:9] = (4.0 * self.kV * (A @ A.T - np.eye(3)) @ A).ravel(order="F")
        return g

    def hessian(self, q):
        A = self._A(q)
        I3 = np.eye(3)
        H9 = np.kron(A.T @ A, I3) + np.kron(A.T, A) @ _T9 + np.kron(I3, A @ A.T - I3)
        H = np.zeros((12, 12))
        H[:9, :9] = 4.0 * self.kV * H9
        return H

    def step(self, q, qdot, f_ext=None, iters=1):
        h = self.h
        qhat = q + h * qdot
        fe = np.zeros(12) if f_ext is None else f_ext
        x = q.copy()
        for _ in range(iters):
            f = self.Mh @ (qhat - x) + fe - self.gradient(x)
            c = sla.cho_factor(self.Mh + self.hessian(x), lower=True, check_finite=False)
            x = x + sla.cho_solve(c, f, check_finite=False)
        return x, (x - q) / h
