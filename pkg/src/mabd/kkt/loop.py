"""Few-loop systems via a Schur complement on breaker bodies.

Unknowns split into block A (non-breaker bodies and the joints among
them, an acyclic system) and block D (breaker bodies plus every joint
touching a breaker). Block A is solved with the chain or tree solver.
"""
import numpy as np
import scipy.linalg as sla

from .problem import KKTSolution, SingularSchur
from .topology import islands


def _split(problem, breakers):
    brk = set(breakers)
    rows_A, rows_D = [], []
    for k, r in enumerate(problem.rows):
        (rows_D if any(b in brk for b in r.bodies) else rows_A).append(k)
    bodies_A = [j for j in range(problem.n_bodies) if j not in brk]
    return bodies_A, rows_A, rows_D


class _InnerA:
    """Solves block A for arbitrary primal/constraint right-hand sides."""

    def __init__(self, problem, bodies_A, rows_A):
        from . import solve_acyclic

        self.solve_acyclic = solve_acyclic
        self.problem = problem
        self.bodies_A = bodies_A
        self.rows_A = rows_A
        pairs = []
        pos = {b: i for i, b in enumerate(bodies_A)}
        for k in rows_A:
            r = problem.rows[k]
            pairs.append((pos[r.a], None if r.b is None else pos[r.b]))
        self.parts = []
        for bodies, joints in islands(len(bodies_A), pairs):
            gb = [bodies_A[i] for i in bodies]
            gr = [rows_A[x] for x in joints]
            self.parts.append((gb, gr))

    def solve(self, f, g):
        """``f``: dict body -> 12-vector; ``g``: dict row -> vector. Returns (dq dict, lam dict)."""
        dq, lam = {}, {}
        for gb, gr in self.parts:
            sub = self.problem.subproblem(gb, gr)
            sub.f = [f[b] for b in gb]
            for r, k in zip(sub.rows, gr):
                r.g = g[k]
            sol = self.solve_acyclic(sub)
            for i, b in enumerate(gb):
                dq[b] = sol.dq[i]
            for i, k in enumerate(gr):
                lam[k] = sol.lam[i]
        return dq, lam


def solve_loop(problem, breakers, with_residual=True):
    """Schur-complement solve with ``breakers`` (local body ids) in block D."""
    P = problem
    bodies_A, rows_A, rows_D = _split(P, breakers)
    inner = _InnerA(P, bodies_A, rows_A)
    B = list(breakers)
    bpos = {b: i for i, b in enumerate(B)}
    # D-side unknown layout: breaker bodies (12 each) then D-joint multipliers
    nB = 12 * len(B)
    d_off = [nB]
    for k in rows_D:
        d_off.append(d_off[-1] + P.rows[k].rank)
    nD = d_off[-1]
    zero_f = {b: np.zeros(12) for b in bodies_A}
    zero_g = {k: np.zeros(P.rows[k].rank) for k in rows_A}
    gvec = lambda k: P.rows[k].g if with_residual else np.zeros(P.rows[k].rank)

    def J_DA_times(dq):
        """Constraint rows of D joints applied to block-A primal values."""
        out = np.zeros(nD - nB)
        for x, k in enumerate(rows_D):
            r = P.rows[k]
            v = np.zeros(r.rank)
            for b in r.bodies:
                if b in dq:
                    v += r.grad(b) @ dq[b]
            out[d_off[x] - nB:d_off[x + 1] - nB] = v
        return out

    S = np.zeros((nD, nD))
    for b in B:
        i = bpos[b]
        S[12 * i:12 * i + 12, 12 * i:12 * i + 12] = P.H_dense(b)
    for x, k in enumerate(rows_D):
        r = P.rows[k]
        for b in r.bodies:
            if b in bpos:
                i = bpos[b]
                G = r.grad(b)
                S[d_off[x]:d_off[x + 1], 12 * i:12 * i + 12] += G
                S[12 * i:12 * i + 12, d_off[x]:d_off[x + 1]] += G.T
    # -J_DA K_AA⁻¹ J_DAᵀ, one inner solve per D-joint row
    solves = 0
    for x, k in enumerate(rows_D):
        r = P.rows[k]
        a_bodies = [b for b in r.bodies if b not in bpos]
        if not a_bodies:
            continue
        for c in range(r.rank):
            f = dict(zero_f)
            for b in a_bodies:
                f[b] = r.grad(b)[c]
            dq, _ = inner.solve(f, zero_g)
            solves += 1
            S[nB:, d_off[x] + c] -= J_DA_times(dq)
    # right-hand side
    f_A = {b: P.f[b] for b in bodies_A}
    g_A = {k: gvec(k) for k in rows_A}
    dq0, _ = inner.solve(f_A, g_A)
    rhs = np.zeros(nD)
    for b in B:
        rhs[12 * bpos[b]:12 * bpos[b] + 12] = P.f[b]
    for x, k in enumerate(rows_D):
        rhs[d_off[x]:d_off[x + 1]] = gvec(k)
    rhs[nB:] -= J_DA_times(dq0)
    try:
        wD = sla.solve(0.5 * (S + S.T), rhs, assume_a="sym", check_finite=False)
    except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
        raise SingularSchur(f"Schur complement on breakers {B} is singular") from exc
    if not np.all(np.isfinite(wD)):
        raise SingularSchur(f"Schur complement on breakers {B} is singular")
    lam = [None] * len(P.rows)
    for x, k in enumerate(rows_D):
        lam[k] = wD[d_off[x]:d_off[x + 1]]
    # back-substitute block A with D multipliers moved to the right-hand side
    f = {b: P.f[b].copy() for b in bodies_A}
    for x, k in enumerate(rows_D):
        r = P.rows[k]
        for b in r.bodies:
            if b in f:
                f[b] = f[b] - r.grad(b).T @ lam[k]
    dqA, lamA = inner.solve(f, g_A)
    dq = [None] * P.n_bodies
    for b in B:
        dq[b] = wD[12 * bpos[b]:12 * bpos[b] + 12]
    for b in bodies_A:
        dq[b] = dqA[b]
    for k, v in lamA.items():
        lam[k] = v
    return KKTSolution(dq, lam, {"breakers": tuple(B), "inner_solves": solves + 2})
