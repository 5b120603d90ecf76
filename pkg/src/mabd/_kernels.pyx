# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Signatures mirror :mod:`mabd._fallback`."""
import numpy as np
from libc.math cimport sqrt, fabs

from mabd._fallback import NearSingular
from mabd._fallback import polar_rotation as _polar_py
from mabd import _fallback

cdef double POLAR_DET_MIN = _fallback.POLAR_DET_MIN
cdef double EIG_FLOOR = _fallback.EIG_FLOOR


cdef void _jacobi3(double[3][3] S, double[3] w, double[3][3] V) noexcept nogil:
    cdef int i, j, p, q, r, sweep
    cdef double off, theta, t, c, s, tau, apq, app, aqq, arp, arq, vrp, vrq
    for i in range(3):
        for j in range(3):
            V[i][j] = 1.0 if i == j else 0.0
    for sweep in range(50):
        off = S[0][1] * S[0][1] + S[0][2] * S[0][2] + S[1][2] * S[1][2]
        if off < 1e-300:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = S[p][q]
                if fabs(apq) < 1e-300:
                    continue
                app = S[p][p]
                aqq = S[q][q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                S[p][p] = app - t * apq
                S[q][q] = aqq + t * apq
                S[p][q] = 0.0
                S[q][p] = 0.0
                for r in range(3):
                    if r != p and r != q:
                        arp = S[r][p]
                        arq = S[r][q]
                        S[r][p] = arp - s * (arq + tau * arp)
                        S[p][r] = S[r][p]
                        S[r][q] = arq + s * (arp - tau * arq)
                        S[q][r] = S[r][q]
                for r in range(3):
                    vrp = V[r][p]
                    vrq = V[r][q]
                    V[r][p] = vrp - s * (vrq + tau * vrp)
                    V[r][q] = vrq + s * (vrp - tau * vrq)
    for i in range(3):
        w[i] = S[i][i]


cdef int _polar3(const double[:, :] A, double[:, ::1] R) noexcept nogil:
    """0 ok, 1 near-singular, 2 tiny eigenvalue (caller falls back to SVD)."""
    cdef double S[3][3]
    cdef double V[3][3]
    cdef double w[3]
    cdef double Q[3][3]
    cdef double det, acc
    cdef int i, j, k
    det = (A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
           - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
           + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]))
    if not det > POLAR_DET_MIN:
        return 1
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc = acc + A[k, i] * A[k, j]
            S[i][j] = acc
    _jacobi3(S, w, V)
    for i in range(3):
        if w[i] < EIG_FLOOR:
            return 2
        w[i] = 1.0 / sqrt(w[i])
    # Q = V diag(w) V^T
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc = acc + V[i][k] * w[k] * V[j][k]
            Q[i][j] = acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc = acc + A[i, k] * Q[k][j]
            R[i, j] = acc
    return 0


def polar_rotation(A):
    cdef double[:, :] Av = np.asarray(A, dtype=np.float64)
    out = np.empty((3, 3))
    cdef double[:, ::1] Rv = out
    cdef int status = _polar3(Av, Rv)
    if status == 1:
        raise NearSingular(f"det(A) <= {POLAR_DET_MIN:g}")
    if status == 2:
        return _polar_py(A)
    return out


cdef void _chol_solve12(const double[:, ::1] L, double* x) noexcept nogil:
    # x <- (L L^T)^{-1} x for a 12x12 lower factor
    cdef int i, k
    cdef double acc
    for i in range(12):
        acc = x[i]
        for k in range(i):
            acc = acc - L[i, k] * x[k]
        x[i] = acc / L[i, i]
    for i in range(11, -1, -1):
        acc = x[i]
        for k in range(i + 1, 12):
            acc = acc - L[k, i] * x[k]
        x[i] = acc / L[i, i]


def corot_solve(L, R, F):
    cdef double[:, ::1] Lv = np.ascontiguousarray(L, dtype=np.float64)
    cdef double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    Fa = np.asarray(F, dtype=np.float64)
    vec = Fa.ndim == 1
    cdef double[:, :] Fv = Fa.reshape(12, -1)
    cdef Py_ssize_t ncol = Fv.shape[1]
    out = np.empty((12, ncol))
    cdef double[:, ::1] Ov = out
    cdef double x[12]
    cdef double y[12]
    cdef Py_ssize_t c
    cdef int b, i, k
    cdef double acc
    with nogil:
        for c in range(ncol):
            for b in range(4):
                for i in range(3):
                    acc = 0.0
                    for k in range(3):
                        acc = acc + Rv[k, i] * Fv[3 * b + k, c]
                    x[3 * b + i] = acc
            _chol_solve12(Lv, x)
            for b in range(4):
                for i in range(3):
                    acc = 0.0
                    for k in range(3):
                        acc = acc + Rv[i, k] * x[3 * b + k]
                    Ov[3 * b + i, c] = acc
    return out.ravel() if vec else out


def corot_solve_lenpres(L, A, f):
    cdef double[:, ::1] Lv = np.ascontiguousarray(L, dtype=np.float64)
    cdef double[:, :] Av = np.asarray(A, dtype=np.float64)
    cdef double[:] fv = np.asarray(f, dtype=np.float64).reshape(12)
    out = np.empty(12)
    cdef double[::1] ov = out
    cdef double x[12]
    cdef double n0, n1, acc
    cdef int b, i, k
    with nogil:
        for b in range(4):
            n0 = 0.0
            n1 = 0.0
            for i in range(3):
                n0 = n0 + fv[3 * b + i] * fv[3 * b + i]
                acc = 0.0
                for k in range(3):
                    acc = acc + Av[k, i] * fv[3 * b + k]
                x[3 * b + i] = acc
                n1 = n1 + acc * acc
            if n1 > 0.0:
                n0 = sqrt(n0 / n1)
                for i in range(3):
                    x[3 * b + i] = x[3 * b + i] * n0
        _chol_solve12(Lv, x)
        for b in range(4):
            n0 = 0.0
            n1 = 0.0
            for i in range(3):
                n0 = n0 + x[3 * b + i] * x[3 * b + i]
                acc = 0.0
                for k in range(3):
                    acc = acc + Av[i, k] * x[3 * b + k]
                ov[3 * b + i] = acc
                n1 = n1 + acc * acc
            if n1 > 0.0:
                n0 = sqrt(n0 / n1)
                for i in range(3):
                    ov[3 * b + i] = ov[3 * b + i] * n0
    return out


cdef int _chol_inplace(double[:, ::1] M) noexcept nogil:
    cdef Py_ssize_t n = M.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for j in range(n):
        acc = M[j, j]
        for k in range(j):
            acc = acc - M[j, k] * M[j, k]
        if not acc > 0.0:
            return 1
        M[j, j] = sqrt(acc)
        for i in range(j + 1, n):
            acc = M[i, j]
            for k in range(j):
                acc = acc - M[i, k] * M[j, k]
            M[i, j] = acc / M[j, j]
    return 0


cdef void _chol_apply(double[:, ::1] Lf, double[:, ::1] X) noexcept nogil:
    # X <- (L L^T)^{-1} X, column by column
    cdef Py_ssize_t n = Lf.shape[0]
    cdef Py_ssize_t m = X.shape[1]
    cdef Py_ssize_t c, i, k
    cdef double acc
    for c in range(m):
        for i in range(n):
            acc = X[i, c]
            for k in range(i):
                acc = acc - Lf[i, k] * X[k, c]
            X[i, c] = acc / Lf[i, i]
        for i in range(n - 1, -1, -1):
            acc = X[i, c]
            for k in range(i + 1, n):
                acc = acc - Lf[k, i] * X[k, c]
            X[i, c] = acc / Lf[i, i]


def block_thomas(diag, upper, rhs):
    cdef Py_ssize_t K = len(diag)
    cdef Py_ssize_t j, r, c, k, n, m
    cdef double acc
    cdef long ops = 0
    cdef double[:, ::1] Fv
    cdef double[:, ::1] Gv
    cdef double[:, ::1] Bv
    cdef double[:, ::1] Nv
    cdef double[:, ::1] bpv
    cdef double[:, ::1] nbv
    facs = [None] * K
    gam = [None] * K
    bp = [None] * K
    Dp = np.array(diag[0], dtype=np.float64, order="C")
    b = np.array(rhs[0], dtype=np.float64).reshape(-1, 1)
    for j in range(K):
        Fv = Dp
        if _chol_inplace(Fv):
            raise np.linalg.LinAlgError(f"block {j} is not positive definite")
        ops += 1
        facs[j] = Dp
        bp[j] = b
        if j + 1 < K:
            G = np.array(upper[j], dtype=np.float64, order="C")
            Gv = G
            _chol_apply(Fv, Gv)
            gam[j] = G
            Bv = np.ascontiguousarray(upper[j], dtype=np.float64)
            Dn = np.array(diag[j + 1], dtype=np.float64, order="C")
            Nv = Dn
            n = Dn.shape[0]
            m = Bv.shape[0]
            for r in range(n):
                for c in range(n):
                    acc = 0.0
                    for k in range(m):
                        acc = acc + Bv[k, r] * Gv[k, c]
                    Nv[r, c] = Nv[r, c] - acc
            bn = np.array(rhs[j + 1], dtype=np.float64).reshape(-1, 1)
            nbv = bn
            bpv = b
            for r in range(n):
                acc = 0.0
                for k in range(m):
                    acc = acc + Gv[k, r] * bpv[k, 0]
                nbv[r, 0] = nbv[r, 0] - acc
            Dp = Dn
            b = bn
            ops += 3
    x = [None] * K
    xl = bp[K - 1].copy()
    Gv = xl
    Fv = facs[K - 1]
    _chol_apply(Fv, Gv)
    ops += 1
    x[K - 1] = xl.ravel()
    for j in range(K - 2, -1, -1):
        xj = bp[j].copy()
        Gv = xj
        Fv = facs[j]
        _chol_apply(Fv, Gv)
        xj = xj.ravel() - gam[j] @ x[j + 1]
        x[j] = xj
        ops += 2
    return x, ops
