"""Block-sparse dual system ``J H⁻¹ Jᵀ λ = J H⁻¹ f - g`` and primal recovery."""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import SolverFailure


@dataclass
class DualSystem:
    """Dual matrix blocks keyed by joint pairs ``(k, k')`` with ``k <= k'``.

    ``U[j]`` holds ``H_j⁻¹ J_jᵀ`` for the joints incident to body ``j``
    (columns in ``cols[j]`` order) and ``w[j] = H_j⁻¹ f_j``; both are reused
    by :func:`recover_primal`.
    """

    blocks: dict
    rhs: list
    sizes: list
    topology: object = None
    joint_order: tuple = ()
    U: list = field(default_factory=list)
    w: list = field(default_factory=list)
    cols: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.sizes)

    def block(self, k, l):
        if k <= l:
            B = self.blocks.get((k, l))
            return B
        B = self.blocks.get((l, k))
        return None if B is None else B.T

    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)

    def to_dense(self):
        off = self.offsets()
        N = off[-1]
        M = np.zeros((N, N))
        for (k, l), B in self.blocks.items():
            M[off[k]:off[k + 1], off[l]:off[l + 1]] = B
            if k != l:
                M[off[l]:off[l + 1], off[k]:off[k + 1]] = B.T
        return M

    def to_sparse(self):
        off = self.offsets()
        r, c, v = [], [], []
        for (k, l), B in self.blocks.items():
            ii, jj = np.meshgrid(np.arange(off[k], off[k + 1]), np.arange(off[l], off[l + 1]), indexing="ij")
            r.append(ii.ravel()); c.append(jj.ravel()); v.append(B.ravel())
            if k != l:
                r.append(jj.ravel()); c.append(ii.ravel()); v.append(B.ravel())
        N = off[-1]
        return sp.csc_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(N, N))

    def stacked_rhs(self):
        return np.concatenate(self.rhs) if self.rhs else np.zeros(0)

    def split(self, x):
        off = self.offsets()
        return [x[off[k]:off[k + 1]] for k in range(self.n)]

    def apply(self, lam):
        """Dual matrix-vector product on block lists."""
        out = [np.zeros(s) for s in self.sizes]
        for (k, l), B in self.blocks.items():
            out[k] += B @ lam[l]
            if k != l:
                out[l] += B.T @ lam[k]
        return out

    def residual(self, lam):
        Ax = self.apply(lam)
        return max((np.abs(b - a).max() for a, b in zip(Ax, self.rhs) if len(b)), default=0.0)


def assemble_dual(problem, rows=None, with_residual=True, check=True):
    """Assemble the dual system for ``problem`` (optionally a row subset).

    ``with_residual`` keeps ``g`` on the right-hand side; otherwise it is
    treated as zero.
    """
    rows = problem.rows if rows is None else rows
    nb = problem.n_bodies
    inc = [[] for _ in range(nb)]
    for k, r in enumerate(rows):
        for b in r.bodies:
            inc[b].append(k)
    sizes = [r.rank for r in rows]
    blocks = {}
    rhs = [(-r.g if with_residual else np.zeros(r.rank)) for r in rows]
    U, w, cols = [None] * nb, [None] * nb, [None] * nb
    for j in range(nb):
        w[j] = problem.hinv(j, problem.f[j])
        ks = inc[j]
        cols[j] = ks
        if not ks:
            U[j] = np.zeros((12, 0))
            continue
        G = np.vstack([rows[k].grad(j) for k in ks])
        Uj = problem.hinv(j, G.T)
        U[j] = Uj
        GU = G @ Uj
        Gw = G @ w[j]
        off = np.concatenate([[0], np.cumsum([sizes[k] for k in ks])]).astype(int)
        for x, k in enumerate(ks):
            rhs[k] = rhs[k] + Gw[off[x]:off[x + 1]]
            for y in range(x, len(ks)):
                l = ks[y]
                B = GU[off[x]:off[x + 1], off[y]:off[y + 1]]
                key, blk = ((k, l), B) if k <= l else ((l, k), B.T)
                if key in blocks:
                    blocks[key] = blocks[key] + blk
                else:
                    blocks[key] = blk.copy()
    ds = DualSystem(blocks, rhs, sizes, U=U, w=w, cols=cols)
    if check:
        for k in range(len(rows)):
            D = blocks[(k, k)]
            scale = max(np.abs(D).max(), 1e-300)
            if np.abs(D - D.T).max() > 1e-9 * scale:
                raise SolverFailure(f"dual diagonal block {k} is not symmetric")
    return ds


def recover_primal(dual, lam):
    """``δq_j = H_j⁻¹(f_j - Σ J_kᵀ λ_k)`` using the cached assembly products."""
    dq = []
    for j, ks in enumerate(dual.cols):
        if not ks:
            dq.append(dual.w[j].copy())
            continue
        lj = np.concatenate([lam[k] for k in ks])
        dq.append(dual.w[j] - dual.U[j] @ lj)
    return dq


def solve_dual_direct(dual, sparse_threshold=300):
    """Direct factorization of the dual matrix (dense Cholesky or sparse LU)."""
    b = dual.stacked_rhs()
    if b.size == 0:
        return []
    if b.size <= sparse_threshold:
        M = dual.to_dense()
        try:
            x = sla.cho_solve(sla.cho_factor(M, lower=True, check_finite=False), b, check_finite=False)
        except np.linalg.LinAlgError:
            x = sla.solve(M, b, assume_a="sym")
    else:
        x = spla.splu(dual.to_sparse(), permc_spec="MMD_AT_PLUS_A").solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverFailure("dual solve produced non-finite values")
    return dual.split(x)
