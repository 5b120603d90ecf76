"""General graphs by bidirectional block Gauss-Seidel over chains.

Each chain of the cover is relaxed exactly (block Thomas on its
tridiagonal sub-blocks) with coupling to the other chains moved to the
right-hand side. Sweeps alternate forward and backward chain orders.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .. import kernels


@dataclass
class GSResult:
    lam: list
    residual: float
    sweeps: int
    converged: bool
    history: list = field(default_factory=list)


class NotConverged(RuntimeWarning):
    pass


class _ChainSolver:
    """Prefactored block Thomas on one chain's tridiagonal sub-system."""

    def __init__(self, dual, ks):
        self.ks = ks
        self.diag = [dual.blocks[(k, k)] for k in ks]
        self.upper = [dual.block(ks[i], ks[i + 1]) for i in range(len(ks) - 1)]
        self.upper = [np.zeros((dual.sizes[a], dual.sizes[b])) if U is None else U
                      for U, a, b in zip(self.upper, ks[:-1], ks[1:])]
        if len(ks) == 1:
            self.single = sla.cho_factor(self.diag[0], lower=True, check_finite=False)

    def solve(self, rhs):
        if len(self.ks) == 1:
            return [sla.cho_solve(self.single, rhs[0], check_finite=False)]
        x, _ = kernels.block_thomas(self.diag, self.upper, rhs)
        return [np.asarray(v).ravel() for v in x]


class BlockGS:
    """Chain-block Gauss-Seidel sweeps on a dual system."""

    def __init__(self, dual, chains):
        self.dual = dual
        self.chains = chains
        n = dual.n
        chain_of = np.full(n, -1)
        pos = np.full(n, -1)
        for c, ks in enumerate(chains):
            chain_of[ks] = c
            pos[ks] = np.arange(len(ks))
        # off-chain couplings per joint
        self.coupling = [[] for _ in range(n)]
        for (k, l), B in dual.blocks.items():
            if k == l:
                continue
            if chain_of[k] == chain_of[l] and abs(pos[k] - pos[l]) == 1:
                continue
            self.coupling[k].append((l, B))
            self.coupling[l].append((k, B.T))
        self.solvers = [_ChainSolver(dual, ks) for ks in chains]

    def sweep(self, lam, rhs, forward=True):
        """One in-place sweep over all chains for ``S lam = rhs``."""
        order = range(len(self.chains)) if forward else range(len(self.chains) - 1, -1, -1)
        for c in order:
            ks = self.chains[c]
            local = []
            for k in ks:
                r = rhs[k].copy()
                for l, B in self.coupling[k]:
                    r -= B @ lam[l]
                local.append(r)
            for k, v in zip(ks, self.solvers[c].solve(local)):
                lam[k] = v
        return lam

    def precondition(self, r):
        """Symmetric sweep pair from zero: an SPD approximation of S⁻¹ r."""
        z = [np.zeros_like(x) for x in r]
        self.sweep(z, r, True)
        return self.sweep(z, r, False)


def _dot(a, b):
    return float(sum(x @ y for x, y in zip(a, b)))


def solve_graph_gs(dual, chains, tol=1e-6, max_sweeps=200, lam0=None, accelerate="cg"):
    """Bidirectional block Gauss-Seidel on the dual system.

    Parameters
    ----------
    dual : DualSystem
    chains : list of lists of joint indices; consecutive joints in a chain
        must be the only pairs that share a body within that chain.
    tol : float
        Stop when the dual residual ∞-norm falls below this value.
    accelerate : {"cg", None}
        With ``"cg"`` each forward/backward sweep pair preconditions a
        conjugate-gradient iteration; ``None`` runs plain alternating sweeps.
        ``sweeps`` counts single sweeps either way.
    """
    gs = BlockGS(dual, chains)
    lam = [np.zeros(s) for s in dual.sizes] if lam0 is None else [l.copy() for l in lam0]
    res = dual.residual(lam)
    history = [res]
    best = (res, [l.copy() for l in lam])
    sweeps = 0
    if accelerate == "cg":
        Ax = dual.apply(lam)
        r = [b - a for a, b in zip(Ax, dual.rhs)]
        z = gs.precondition(r)
        p = [x.copy() for x in z]
        rz = _dot(r, z)
        while res > tol and sweeps < max_sweeps:
            sweeps += 2
            Ap = dual.apply(p)
            pAp = _dot(p, Ap)
            if pAp <= 0.0:
                break
            a = rz / pAp
            lam = [l + a * x for l, x in zip(lam, p)]
            r = [x - a * y for x, y in zip(r, Ap)]
            res = max((np.abs(x).max() for x in r if len(x)), default=0.0)
            history.append(res)
            if res < best[0]:
                best = (res, [l.copy() for l in lam])
            z = gs.precondition(r)
            rz_new = _dot(r, z)
            p = [x + (rz_new / rz) * y for x, y in zip(z, p)]
            rz = rz_new
        res = dual.residual(best[1])
        return GSResult(best[1], res, sweeps, res <= tol, history)
    if accelerate is not None:
        raise ValueError(f"unknown acceleration {accelerate!r}")
    while res > tol and sweeps < max_sweeps:
        sweeps += 1
        gs.sweep(lam, dual.rhs, forward=sweeps % 2 == 1)
        res = dual.residual(lam)
        history.append(res)
        if res < best[0]:
            best = (res, [l.copy() for l in lam])
    return GSResult(best[1], best[0], sweeps, best[0] <= tol, history)
