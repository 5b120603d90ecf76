"""Pure-numpy versions of the hot kernels.

Selected by :mod:`mabd.kernels` when the compiled extension is missing or
when ``MABD_PURE_PYTHON=1`` is set. Every function here has a twin with the
same signature in ``_kernels.pyx``.
"""
import numpy as np
from scipy.linalg import cho_factor, cho_solve

POLAR_DET_MIN = 1e-9
EIG_FLOOR = 1e-12


class NearSingular(ValueError):
    """det(A) is at or below the polar-decomposition threshold."""


def _svd_polar(A):
    U, _, Vt = np.linalg.svd(A)
    return U @ Vt


def polar_rotation(A):
    """Rotation factor of ``A`` by determinant-scaled Newton iteration.

    Works on Python floats: for 3x3 inputs this beats numpy's per-call
    overhead by a wide margin. Badly conditioned inputs go through the SVD.
    """
    A = np.asarray(A, dtype=float)
    (a, b, c), (d, e, f), (g, h, i) = A.tolist()
    for it in range(_NEWTON_MAX):
        # cofactors: X^{-T} = C / det
        c00, c01, c02 = e * i - f * h, f * g - d * i, d * h - e * g
        det = a * c00 + b * c01 + c * c02
        if it == 0 and not det > POLAR_DET_MIN:
            raise NearSingular(f"det(A) = {det:.3e} <= {POLAR_DET_MIN:g}")
        if det <= 0.0:
            return _svd_polar(A)
        c10, c11, c12 = c * h - b * i, a * i - c * g, b * g - a * h
        c20, c21, c22 = b * f - c * e, c * d - a * f, a * e - b * d
        gam = det ** (-1.0 / 3.0) if it < 4 else 1.0
        s1, s2 = 0.5 * gam, 0.5 / (gam * det)
        n = (s1 * a + s2 * c00, s1 * b + s2 * c01, s1 * c + s2 * c02,
             s1 * d + s2 * c10, s1 * e + s2 * c11, s1 * f + s2 * c12,
             s1 * g + s2 * c20, s1 * h + s2 * c21, s1 * i + s2 * c22)
        diff = ((n[0] - a) ** 2 + (n[1] - b) ** 2 + (n[2] - c) ** 2 + (n[3] - d) ** 2 + (n[4] - e) ** 2
                + (n[5] - f) ** 2 + (n[6] - g) ** 2 + (n[7] - h) ** 2 + (n[8] - i) ** 2)
        a, b, c, d, e, f, g, h, i = n
        # quadratic convergence: a step below 1e-9 leaves an error near 1e-18
        if diff < 1e-18:
            return np.array([[a, b, c], [d, e, f], [g, h, i]])
    return _svd_polar(A)


_NEWTON_MAX = 40


def corot_solve(L, R, F):
    """Solve ``diag4(R) Hbar diag4(R^T) X = F`` given ``Hbar = L L^T``.

    ``F`` is 12 x k (or a 12-vector).
    """
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        local = (F.reshape(4, 3) @ R).ravel()
        x = cho_solve((L, True), local, check_finite=False)
        return (x.reshape(4, 3) @ R.T).ravel()
    k = F.shape[1]
    # blocks (4, 3, k): rotate each 3-block into the body frame
    local = np.einsum("ji,bjk->bik", R, F.reshape(4, 3, k)).reshape(12, k)
    x = cho_solve((L, True), local, check_finite=False)
    return np.einsum("ij,bjk->bik", R, x.reshape(4, 3, k)).reshape(12, k)


def _renormalize(blocks, out_blocks):
    for b, ob in zip(blocks, out_blocks):
        n0 = b @ b
        n1 = ob @ ob
        if n1 > 0.0:
            ob *= np.sqrt(n0 / n1)
    return out_blocks


def corot_solve_lenpres(L, A, f):
    """Single-vector solve that rotates with ``A`` and restores block lengths."""
    f = np.asarray(f, dtype=float).reshape(4, 3)
    local = f @ A  # rows: A^T f_k
    _renormalize(f, local)
    p = cho_solve((L, True), local.ravel(), check_finite=False).reshape(4, 3)
    out = p @ A.T  # rows: A p_k
    _renormalize(p, out)
    return out.ravel()


def block_thomas(diag, upper, rhs):
    """Block-tridiagonal SPD solve; returns (x, n_block_ops).

    ``diag[j]`` is D^j, ``upper[j]`` is B^j coupling j and j+1, ``rhs[j]`` is b^j.
    """
    K = len(diag)
    ops = 0
    facs = [None] * K
    bp = [None] * K
    gam = [None] * K
    Dp = diag[0]
    b = rhs[0]
    for j in range(K):
        facs[j] = cho_factor(Dp, lower=True, check_finite=False)
        ops += 1
        bp[j] = b
        if j + 1 < K:
            gam[j] = cho_solve(facs[j], upper[j], check_finite=False)
            Dp = diag[j + 1] - upper[j].T @ gam[j]
            b = rhs[j + 1] - gam[j].T @ bp[j]
            ops += 3
    x = [None] * K
    x[K - 1] = cho_solve(facs[K - 1], bp[K - 1], check_finite=False)
    ops += 1
    for j in range(K - 2, -1, -1):
        x[j] = cho_solve(facs[j], bp[j], check_finite=False) - gam[j] @ x[j + 1]
        ops += 2
    return x, ops
