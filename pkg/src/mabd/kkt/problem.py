"""Shared containers for one island's Newton-step KKT system.

The system is ``[H Jᵀ; J 0][δq; λ] = [f; g]`` with ``H`` block diagonal
(one rotated, pre-factorized 12x12 block per body) and ``J`` built from
joint gradient blocks.
"""
from dataclasses import dataclass, field

import numpy as np

from .. import kernels


class SolverFailure(RuntimeError):
    pass


class SingularDiagonalBlock(SolverFailure):
    pass


class SingularD(SolverFailure):
    pass


class SingularSchur(SolverFailure):
    pass


class NotATree(SolverFailure):
    pass


class EmptyScene(ValueError):
    pass


@dataclass
class JointRows:
    """Constraint rows of one joint: ``Ga δq_a + Gb δq_b = g``.

    ``a`` and ``b`` are local body indices; ``b`` is ``None`` for unary joints.
    """

    a: int
    b: object
    Ga: np.ndarray
    Gb: np.ndarray
    g: np.ndarray
    tag: object = None

    @property
    def rank(self):
        return len(self.g)

    @property
    def bodies(self):
        return (self.a,) if self.b is None else (self.a, self.b)

    def grad(self, body):
        if body == self.a:
            return self.Ga
        if body == self.b:
            return self.Gb
        raise KeyError(body)


def merge_rows(rows):
    """Stack joints into one block. All must touch only bodies in a shared pair."""
    bodies = []
    for r in rows:
        for b in r.bodies:
            if b not in bodies:
                bodies.append(b)
    if len(bodies) > 2:
        raise ValueError("merged joints touch more than two bodies")
    a = bodies[0]
    b = bodies[1] if len(bodies) > 1 else None
    Ga = np.vstack([r.Ga if r.a == a else (r.Gb if r.b == a else np.zeros((r.rank, 12))) for r in rows])
    Gb = None
    if b is not None:
        Gb = np.vstack([r.Ga if r.a == b else (r.Gb if r.b == b else np.zeros((r.rank, 12))) for r in rows])
    return JointRows(a, b, Ga, Gb, np.concatenate([r.g for r in rows]), tag=[r.tag for r in rows])


@dataclass
class KKTProblem:
    """One island: per-body factors, rotations and forces plus joint rows.

    Attributes
    ----------
    L : list of (12, 12) lower Cholesky factors of the rest Hessians.
    R : list of (3, 3) rotations used to co-rotate each Hessian.
    f : list of 12-vectors, the primal right-hand sides.
    rows : list of JointRows.
    A : list of (3, 3) current affine blocks (used by the dense oracle).
    """

    L: list
    R: list
    f: list
    rows: list
    A: list = None
    Hbar: list = None
    counters: dict = field(default_factory=dict)

    @property
    def n_bodies(self):
        return len(self.L)

    def hinv(self, j, X):
        """Apply the inverse of body ``j``'s rotated Hessian to ``X`` (12 or 12 x k)."""
        return kernels.corot_solve(self.L[j], self.R[j], X)

    def H_dense(self, j):
        D = np.kron(np.eye(4), self.R[j])
        Hb = self.L[j] @ self.L[j].T if self.Hbar is None else self.Hbar[j]
        return D @ Hb @ D.T

    def incident(self):
        inc = [[] for _ in range(self.n_bodies)]
        for k, r in enumerate(self.rows):
            for b in r.bodies:
                inc[b].append(k)
        return inc

    def subproblem(self, bodies, rows):
        """Restrict to ``bodies`` (list of local ids) and ``rows`` (indices)."""
        remap = {b: i for i, b in enumerate(bodies)}
        new_rows = []
        for k in rows:
            r = self.rows[k]
            new_rows.append(JointRows(remap[r.a], None if r.b is None else remap[r.b], r.Ga, r.Gb, r.g, r.tag))
        pick = lambda xs: None if xs is None else [xs[b] for b in bodies]
        return KKTProblem([self.L[b] for b in bodies], [self.R[b] for b in bodies],
                          [self.f[b] for b in bodies], new_rows, pick(self.A), pick(self.Hbar))

    def kkt_residual(self, dq, lam):
        """Relative primal and constraint residuals of a candidate solution."""
        prim = [self.H_dense(j) @ dq[j] - self.f[j] for j in range(self.n_bodies)]
        cons = []
        for k, r in enumerate(self.rows):
            prim[r.a] = prim[r.a] + r.Ga.T @ lam[k]
            c = r.Ga @ dq[r.a] - r.g
            if r.b is not None:
                prim[r.b] = prim[r.b] + r.Gb.T @ lam[k]
                c = c + r.Gb @ dq[r.b]
            cons.append(c)
        fn = max(np.sqrt(sum(float(x @ x) for x in self.f)), 1e-300)
        p = np.sqrt(sum(float(x @ x) for x in prim)) / fn
        c = max((np.abs(x).max() for x in cons), default=0.0)
        return p, c


@dataclass
class KKTSolution:
    dq: list
    lam: list
    info: dict = field(default_factory=dict)
