"""Single-body co-rotated affine dynamics.

State layout: ``q = [a1; a2; a3; t]`` where ``a_i`` are the columns of ``A``
(column-major ``vec(A)``), so a rest point ``x̄`` moves to ``A x̄ + t``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, LinAlgError

from . import kernels
from .kernels import NearSingular

T9 = np.eye(9)[[3 * (k % 3) + k // 3 for k in range(9)]]
VEC_I = np.eye(3).ravel(order="F")


class NonSPD(ValueError):
    """Factorization of the body Hessian failed."""


def vec(A):
    return np.asarray(A).ravel(order="F")


def unvec(a):
    return np.asarray(a).reshape(3, 3, order="F")


def skew(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def lame(youngs, poisson):
    mu = youngs / (2.0 * (1.0 + poisson))
    lam = youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


@dataclass
class AffineState:
    q: np.ndarray
    qdot: np.ndarray = None

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float).reshape(12)
        self.qdot = np.zeros(12) if self.qdot is None else np.array(self.qdot, dtype=float).reshape(12)

    @property
    def A(self):
        return unvec(self.q[:9])

    @property
    def t(self):
        return self.q[9:]

    @classmethod
    def from_pose(cls, A=None, t=None, qdot=None):
        A = np.eye(3) if A is None else np.asarray(A, dtype=float)
        t = np.zeros(3) if t is None else np.asarray(t, dtype=float)
        return cls(np.concatenate([vec(A), t]), qdot)

    def copy(self):
        return AffineState(self.q.copy(), self.qdot.copy())


@dataclass(frozen=True)
class SpatialTwist:
    omega: np.ndarray
    v: np.ndarray

    def stacked(self):
        return np.concatenate([self.omega, self.v])

    @classmethod
    def from_vector(cls, V):
        V = np.asarray(V, dtype=float)
        return cls(V[:3].copy(), V[3:].copy())


@dataclass(frozen=True)
class SpatialWrench:
    tau: np.ndarray
    f: np.ndarray

    def stacked(self):
        return np.concatenate([self.tau, self.f])


@dataclass(frozen=True)
class HessianFactor:
    """Lower Cholesky factor of ``M_A/h² + K̄_A`` tagged with its step size."""

    h: float
    L: np.ndarray


@dataclass(frozen=True)
class BodyModel:
    Mbar: np.ndarray  # 4x4 reduced mass matrix
    M_A: np.ndarray
    Kbar_A: np.ndarray
    Jbar: np.ndarray
    volume: float
    mass: float
    density: float
    youngs: float
    poisson: float
    rest_CT: np.ndarray
    Hbar_factor: HessianFactor
    mu: float = field(init=False)
    lam: float = field(init=False)

    def __post_init__(self):
        mu, lam = lame(self.youngs, self.poisson)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)

    @property
    def h(self):
        return self.Hbar_factor.h

    @property
    def com(self):
        """Rest-frame centre of mass."""
        return self.Mbar[:3, 3] / self.mass

    @property
    def rest_inertia(self):
        """Rigid inertia tensor about the rest-frame origin."""
        X = self.Mbar[:3, :3]
        return np.trace(X) * np.eye(3) - X

    def Hbar(self, h=None):
        h = self.h if h is None else h
        return self.M_A / h**2 + self.Kbar_A

    def with_step(self, h):
        """Same body re-factorized for step ``h`` (returns self if unchanged)."""
        if h == self.h:
            return self
        return BodyModel(
            self.Mbar, self.M_A, self.Kbar_A, self.Jbar, self.volume, self.mass,
            self.density, self.youngs, self.poisson, self.rest_CT,
            _factor(self.M_A, self.Kbar_A, h),
        )


def _factor(M_A, Kbar_A, h):
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    try:
        L = cholesky(M_A / h**2 + Kbar_A, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NonSPD(f"body Hessian not positive definite for h={h}: {exc}") from exc
    return HessianFactor(float(h), np.ascontiguousarray(L))


def default_control_tet(volume, first, second):
    """Centroid plus unit offsets along the principal axes of the rest shape."""
    c = first / volume
    cov = second - volume * np.outer(c, c)
    _, U = np.linalg.eigh(cov)
    if np.linalg.det(U) < 0:
        U[:, 0] = -U[:, 0]
    return np.column_stack([c, c + U[:, 0], c + U[:, 1], c + U[:, 2]])


def precompute_body(rest_mesh, density, youngs, poisson, h, control_tet=None):
    """Build the constant per-body matrices and factor the rest Hessian.

    Parameters
    ----------
    rest_mesh : TetMesh or primitive
        Anything with a ``moments()`` method (see :mod:`mabd.geometry`).
    density, youngs, poisson : float
        Material parameters in SI units.
    h : float
        Time step the Hessian is factorized for.
    control_tet : (3, 4) array, optional
        Rest control points; defaults to :func:`default_control_tet`.
    """
    if not (density > 0 and youngs > 0 and h > 0):
        raise ValueError("density, youngs and h must be positive")
    if not -1.0 < poisson < 0.5:
        raise ValueError(f"poisson ratio {poisson} outside (-1, 0.5)")
    volume, first, second = rest_mesh.moments()
    Mbar = np.empty((4, 4))
    Mbar[:3, :3] = density * second
    Mbar[:3, 3] = Mbar[3, :3] = density * first
    Mbar[3, 3] = density * volume
    M_A = np.kron(Mbar, np.eye(3))
    mu, lam = lame(youngs, poisson)
    Kbar = np.zeros((12, 12))
    Kbar[:9, :9] = volume * (mu * (np.eye(9) + T9) + lam * np.outer(VEC_I, VEC_I))
    Jbar = np.zeros((12, 12))
    Jbar[:9, :9] = volume * np.eye(9)
    Y = default_control_tet(volume, first, second) if control_tet is None else np.asarray(control_tet, float)
    return BodyModel(
        Mbar, M_A, Kbar, Jbar, float(volume), float(Mbar[3, 3]), float(density),
        float(youngs), float(poisson), Y, _factor(M_A, Kbar, h),
    )


def polar_rotation(A):
    """Rotation factor ``A (AᵀA)^{-1/2}``; raises NearSingular if det(A) ≤ 1e-9."""
    return kernels.polar_rotation(A)


def length_preserving_rotate(A, a):
    a = np.asarray(a, dtype=float)
    n0 = np.linalg.norm(a)
    if n0 == 0.0:
        return np.zeros(3)
    Aa = np.asarray(A) @ a
    n1 = np.linalg.norm(Aa)
    if n1 <= 1e-12:
        return np.zeros(3)
    return Aa * (n0 / n1)


def approx_rotation(A):
    """Polar-free rotation estimate: one Newton-Schulz step ``A(3I - AᵀA)/2``."""
    return 0.5 * A @ (3.0 * np.eye(3) - A.T @ A)


def body_rotation(A, use_polar=True):
    return polar_rotation(A) if use_polar else approx_rotation(A)


def _check_factor(model, h):
    if h is not None and model.Hbar_factor.h != h:
        raise ValueError(f"Hessian factor built for h={model.Hbar_factor.h}, step uses h={h}")


def newton_step_single(model, state, f_A, h=None, use_polar=True, R=None):
    """One pre-factorized Newton increment for a single body.

    With ``use_polar`` the result solves ``diag4(R) H̄ diag4(Rᵀ) dq = f_A``
    exactly; otherwise each block is rotated by ``Aᵀ``/``A`` and rescaled to
    keep its length. ``R`` may pass in an already computed polar rotation.
    """
    _check_factor(model, h)
    A = state.A
    L = model.Hbar_factor.L
    if use_polar:
        return kernels.corot_solve(L, polar_rotation(A) if R is None else R, f_A)
    return kernels.corot_solve_lenpres(L, A, f_A)


def corot_solve_many(model, R, F):
    """``H⁻¹ F`` for the rotated Hessian; ``F`` is 12 x k."""
    return kernels.corot_solve(model.Hbar_factor.L, R, F)


def elastic_stress(model, Abar):
    E = Abar - np.eye(3)
    return model.mu * (E + E.T) + model.lam * np.trace(E) * np.eye(3)


def elastic_energy(model, state, use_polar=True):
    A = state.A
    if use_polar:
        Abar = polar_rotation(A).T @ A
    else:
        Abar = 0.5 * (A.T @ A + np.eye(3))
    E = 0.5 * (Abar + Abar.T) - np.eye(3)
    return model.volume * (model.mu * np.sum(E * E) + 0.5 * model.lam * np.trace(E) ** 2)


def elastic_gradient(model, state, use_polar=True, R=None):
    """Gradient of the co-rotated linear elastic energy w.r.t. ``q``.

    Without polar the stretch is approximated by ``(AᵀA + I)/2`` and the
    stress is pushed forward by ``A`` itself.
    """
    A = state.A
    g = np.zeros(12)
    if use_polar:
        R = polar_rotation(A) if R is None else R
        P = elastic_stress(model, R.T @ A)
        g[:9] = model.volume * vec(R @ P)
    else:
        S = 0.5 * (A.T @ A + np.eye(3))
        g[:9] = model.volume * vec(A @ elastic_stress(model, S))
    return g


def twist_matrix(A):
    """G(A): 6x12 map from affine velocity to the spatial twist ``[ω; v]``."""
    A = np.asarray(A)
    G = np.zeros((6, 12))
    for i in range(3):
        G[:3, 3 * i:3 * i + 3] = 0.5 * skew(A[:, i])
    G[3:, 9:] = np.eye(3)
    return G


def embedding_matrix(A):
    """E(A): 12x6 rigid-motion embedding, ``ȧ_i = ω × a_i`` and ``ṫ = v``."""
    A = np.asarray(A)
    E = np.zeros((12, 6))
    for i in range(3):
        E[3 * i:3 * i + 3, :3] = -skew(A[:, i])
    E[9:, 3:] = np.eye(3)
    return E


def twist_map(state):
    qd = state.qdot
    q = state.q
    omega = 0.5 * (np.cross(q[0:3], qd[0:3]) + np.cross(q[3:6], qd[3:6]) + np.cross(q[6:9], qd[6:9]))
    return SpatialTwist(omega, qd[9:].copy())


def wrench_to_affine(state, W):
    f = np.empty(12)
    q = state.q
    for i in range(3):
        # (½[a]×)ᵀ τ = ½ τ × a
        f[3 * i:3 * i + 3] = 0.5 * np.cross(W.tau, q[3 * i:3 * i + 3])
    f[9:] = W.f
    return f


def embedding_map(state, V):
    q = state.q
    qd = np.empty(12)
    for i in range(3):
        qd[3 * i:3 * i + 3] = np.cross(V.omega, q[3 * i:3 * i + 3])
    qd[9:] = V.v
    return qd


def embedding_product(state):
    """Diagnostic ``G(A) E(A)`` (identity for rotations)."""
    return twist_matrix(state.A) @ embedding_matrix(state.A)


def spatial_inertia(model, A):
    """6x6 ``Eᵀ M_A E`` about the body origin ``t``."""
    E = embedding_matrix(A)
    return E.T @ model.M_A @ E


def gyroscopic_residual(model, state):
    """Mismatch between the affine inertial bias and the rigid gyroscopic bias.

    Evaluates ``Gᵀ(Eᵀ M_A Ė V − b(V))`` where ``Ė V = [ω × ȧ_i; 0]`` uses
    the actual ``ȧ_i`` and ``b = [ω × I_o ω; m ω × (ω × c)]`` is the rigid
    bias about the body origin. Vanishes for rigid motion.
    """
    A = state.A
    qd = state.qdot
    omega = twist_map(state).omega
    EdotV = np.zeros(12)
    for i in range(3):
        EdotV[3 * i:3 * i + 3] = np.cross(omega, qd[3 * i:3 * i + 3])
    E = embedding_matrix(A)
    affine_bias = E.T @ (model.M_A @ EdotV)
    X = A @ model.Mbar[:3, :3] @ A.T
    I_o = np.trace(X) * np.eye(3) - X
    c = A @ model.com
    rigid_bias = np.concatenate(
        [np.cross(omega, I_o @ omega), model.mass * np.cross(omega, np.cross(omega, c))]
    )
    return twist_matrix(A).T @ (affine_bias - rigid_bias)
