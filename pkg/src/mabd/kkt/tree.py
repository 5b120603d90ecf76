"""Articulated-body recursion on tree topologies.

Leaf-to-root condensation folds each subtree into a quadratic model of its
parent body; the root-to-leaf pass then solves one small local KKT per
body. The condensation works directly in the joint's constraint rows
(the dual form), which is exact for every joint rank.
"""
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .problem import KKTSolution, NotATree, SingularD


@dataclass
class ArticulatedNode:
    body: int
    parent: object
    rows: list  # original row indices: parent joint first, then unary joints
    J: np.ndarray  # constraint rows w.r.t. this body
    P: np.ndarray  # rows w.r.t. the parent (zeros for unary joints)
    g: np.ndarray
    Hhat: np.ndarray = None  # None: the body's own pre-factorized Hessian
    fhat: np.ndarray = None
    U: np.ndarray = None
    D: object = None  # Cholesky factor of J Ĥ⁻¹ Jᵀ
    alpha: np.ndarray = None
    w: np.ndarray = None
    dH: np.ndarray = None
    df: np.ndarray = None


def _build_nodes(problem):
    nb = problem.n_bodies
    inc = problem.incident()
    root = next((j for j in range(nb) if any(problem.rows[k].b is None for k in inc[j])), 0)
    parent = {root: (None, None)}
    order = [root]
    dq = deque([root])
    while dq:
        u = dq.popleft()
        for k in inc[u]:
            r = problem.rows[k]
            if r.b is None:
                continue
            v = r.b if r.a == u else r.a
            if v in parent:
                if parent[u][1] != k:
                    raise NotATree("joint graph contains a cycle")
                continue
            parent[v] = (u, k)
            order.append(v)
            dq.append(v)
    if len(order) != nb:
        raise NotATree("joint graph is not connected")
    nodes = {}
    for j in order:
        p, kp = parent[j]
        ks = ([kp] if kp is not None else []) + [k for k in inc[j] if problem.rows[k].b is None]
        J = [problem.rows[k].grad(j) for k in ks]
        P = []
        for k in ks:
            r = problem.rows[k]
            P.append(r.grad(p) if (r.b is not None) else np.zeros((r.rank, 12)))
        g = [problem.rows[k].g for k in ks]
        nodes[j] = ArticulatedNode(
            j, p, ks,
            np.vstack(J) if J else np.zeros((0, 12)),
            np.vstack(P) if P else np.zeros((0, 12)),
            np.concatenate(g) if g else np.zeros(0),
        )
    return nodes, order


def solve_tree_aba(problem, with_residual=True):
    """Solve a tree-structured island. ``info['touches']`` counts body visits."""
    nodes, order = _build_nodes(problem)
    children = {j: [] for j in order}
    for j in order:
        if nodes[j].parent is not None:
            children[nodes[j].parent].append(j)
    touches = np.zeros(problem.n_bodies, dtype=int)

    def hinv(node, X):
        if node.Hhat is None:
            return problem.hinv(node.body, X)
        return sla.cho_solve(node.Hhat, X, check_finite=False)

    for j in reversed(order):
        nd = nodes[j]
        touches[j] += 1
        f = problem.f[j]
        if children[j]:
            H = problem.H_dense(j)
            for c in children[j]:
                H = H + nodes[c].dH
                f = f + nodes[c].df
            nd.Hhat = sla.cho_factor(H, lower=True, check_finite=False)
        nd.fhat = f
        nd.w = hinv(nd, f)
        g = nd.g if with_residual else np.zeros_like(nd.g)
        nd.g = g
        if nd.J.shape[0] == 0:
            continue
        nd.U = hinv(nd, nd.J.T)
        Dm = nd.J @ nd.U
        try:
            nd.D = sla.cho_factor(0.5 * (Dm + Dm.T), lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularD(f"condensed joint block at body {j} is singular") from exc
        nd.alpha = sla.cho_solve(nd.D, nd.J @ nd.w - g, check_finite=False)
        if nd.parent is not None:
            DinvP = sla.cho_solve(nd.D, nd.P, check_finite=False)
            nd.dH = nd.P.T @ DinvP
            nd.df = -nd.P.T @ nd.alpha

    dq = [None] * problem.n_bodies
    lam = [None] * len(problem.rows)
    for j in order:
        nd = nodes[j]
        touches[j] += 1
        if nd.J.shape[0] == 0:
            dq[j] = nd.w
            continue
        r = nd.g if nd.parent is None else nd.g - nd.P @ dq[nd.parent]
        l = sla.cho_solve(nd.D, nd.J @ nd.w - r, check_finite=False)
        dq[j] = nd.w - nd.U @ l
        off = 0
        for k in nd.rows:
            c = problem.rows[k].rank
            lam[k] = l[off:off + c]
            off += c
    return KKTSolution(dq, lam, {"touches": touches, "nodes": nodes, "order": order})
