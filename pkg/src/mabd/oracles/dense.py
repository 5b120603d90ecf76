"""Dense global KKT assembly and solve, the reference for every dual solver."""
import numpy as np
import scipy.linalg as sla


class SingularKKT(np.linalg.LinAlgError):
    pass


def _svd_rotation(A):
    U, _, Vt = np.linalg.svd(A)
    if np.linalg.det(U @ Vt) < 0:
        U[:, -1] = -U[:, -1]
    return U @ Vt


def dense_kkt_matrix(problem, rotations="svd"):
    """Full ``[H Jᵀ; J 0]`` matrix and right-hand side.

    ``rotations='svd'`` recomputes each body's rotation from its affine
    block; ``'given'`` uses the rotations stored on the problem.
    """
    M = problem.n_bodies
    sizes = [len(r.g) for r in problem.rows]
    n = 12 * M + sum(sizes)
    K = np.zeros((n, n))
    rhs = np.zeros(n)
    for j in range(M):
        R = _svd_rotation(problem.A[j]) if rotations == "svd" else problem.R[j]
        Hb = problem.Hbar[j]
        D = np.kron(np.eye(4), R)
        K[12 * j:12 * j + 12, 12 * j:12 * j + 12] = D @ Hb @ D.T
        rhs[12 * j:12 * j + 12] = problem.f[j]
    off = 12 * M
    for r, c in zip(problem.rows, sizes):
        for b, G in ((r.a, r.Ga), (r.b, r.Gb)):
            if b is None:
                continue
            K[off:off + c, 12 * b:12 * b + 12] = G
            K[12 * b:12 * b + 12, off:off + c] = G.T
        rhs[off:off + c] = r.g
        off += c
    return K, rhs


def dense_kkt_solve(problem, rotations="svd"):
    """Solve the global KKT by a pivoted symmetric-indefinite factorization.

    Returns (per-body δq list, per-joint λ list).
    """
    K, rhs = dense_kkt_matrix(problem, rotations)
    try:
        x = sla.solve(K, rhs, assume_a="sym")
    except np.linalg.LinAlgError as exc:
        raise SingularKKT(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularKKT("non-finite KKT solution")
    M = problem.n_bodies
    dq = [x[12 * j:12 * j + 12] for j in range(M)]
    lam, off = [], 12 * M
    for r in problem.rows:
        lam.append(x[off:off + len(r.g)])
        off += len(r.g)
    return dq, lam
