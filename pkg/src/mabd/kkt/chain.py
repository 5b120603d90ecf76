"""Joint chains solved by block Thomas on the tridiagonal dual."""
import numpy as np

from .. import kernels
from .dual import assemble_dual, recover_primal
from .problem import KKTSolution, SingularDiagonalBlock, merge_rows


def chain_rows(problem, order):
    """Binary joints re-indexed along the body path ``order``.

    Unary joints on body ``order[i]`` are merged into the block of the
    binary joint that follows it (or precedes it, for the last body), so
    the dual remains block tridiagonal. Returns ``(groups, members)`` where
    ``members[i]`` lists the original row indices stacked in group ``i``.
    """
    pos = {b: i for i, b in enumerate(order)}
    n = len(order)
    links = [[] for _ in range(max(n - 1, 1))]
    for k, r in enumerate(problem.rows):
        if r.b is None:
            i = pos[r.a]
            links[min(i, n - 2) if n > 1 else 0].append(k)
        else:
            links[min(pos[r.a], pos[r.b])].append(k)
    groups, members = [], []
    for ks in links:
        if not ks:
            continue
        # binary joint first so the merged block keeps the body pair order
        ks = sorted(ks, key=lambda k: problem.rows[k].b is None)
        groups.append(merge_rows([problem.rows[k] for k in ks]))
        members.append(ks)
    return groups, members


def solve_chain(dual):
    """Block-Thomas solve of a block-tridiagonal dual. Returns (λ blocks, op count)."""
    K = dual.n
    for (k, l) in dual.blocks:
        if l - k > 1:
            raise ValueError(f"dual is not block tridiagonal: block ({k}, {l}) present")
    diag = [dual.blocks[(k, k)] for k in range(K)]
    upper = []
    for k in range(K - 1):
        B = dual.blocks.get((k, k + 1))
        upper.append(np.zeros((dual.sizes[k], dual.sizes[k + 1])) if B is None else B)
    try:
        lam, ops = kernels.block_thomas(diag, upper, dual.rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularDiagonalBlock(str(exc)) from exc
    return [np.asarray(x).ravel() for x in lam], ops


def solve_chain_problem(problem, order, with_residual=True):
    groups, members = chain_rows(problem, order)
    if not groups:
        dq = [problem.hinv(j, problem.f[j]) for j in range(problem.n_bodies)]
        return KKTSolution(dq, [], {"ops": 0})
    dual = assemble_dual(problem, groups, with_residual)
    lam_g, ops = solve_chain(dual)
    dq = recover_primal(dual, lam_g)
    return KKTSolution(dq, split_members(problem, members, lam_g), {"ops": ops, "dual": dual})


def split_members(problem, members, lam_g):
    """Map merged-block multipliers back to the original joint order."""
    out = [None] * len(problem.rows)
    for ks, lam in zip(members, lam_g):
        off = 0
        for k in ks:
            c = problem.rows[k].rank
            out[k] = lam[off:off + c]
            off += c
    return out
