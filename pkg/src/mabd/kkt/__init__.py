"""Dual-space KKT solvers and topology dispatch."""
import warnings

from .chain import chain_rows, solve_chain, solve_chain_problem
from .dual import DualSystem, assemble_dual, recover_primal, solve_dual_direct
from .graph import GSResult, NotConverged, solve_graph_gs
from .loop import solve_loop
from .problem import (
    EmptyScene, JointRows, KKTProblem, KKTSolution, NotATree, SingularD,
    SingularDiagonalBlock, SingularSchur, SolverFailure,
)
from .topology import Topology, chain_cover, classify_topology, islands
from .tree import ArticulatedNode, solve_tree_aba

SOLVERS = ("auto", "dense", "chain", "aba", "loop", "gs")


def problem_topology(problem, max_breakers=4):
    return classify_topology(problem.n_bodies, [(r.a, r.b) for r in problem.rows], max_breakers)


def solve_acyclic(problem, with_residual=True):
    topo = problem_topology(problem)
    if topo.kind == "chain":
        return solve_chain_problem(problem, topo.order, with_residual)
    if topo.kind == "tree":
        return solve_tree_aba(problem, with_residual)
    raise NotATree(f"expected an acyclic island, got {topo}")


def solve_dense_dual(problem, with_residual=True):
    dual = assemble_dual(problem, with_residual=with_residual)
    lam = solve_dual_direct(dual)
    return KKTSolution(recover_primal(dual, lam), lam, {"dual": dual})


def solve_gs(problem, tol=1e-6, max_sweeps=200, with_residual=True):
    dual = assemble_dual(problem, with_residual=with_residual)
    chains = chain_cover(problem.n_bodies, [(r.a, r.b) for r in problem.rows])
    res = solve_graph_gs(dual, chains, tol, max_sweeps)
    if not res.converged:
        warnings.warn(f"Gauss-Seidel stopped at residual {res.residual:.3e} after {res.sweeps} sweeps",
                      NotConverged, stacklevel=2)
    return KKTSolution(recover_primal(dual, res.lam), res.lam, {"gs": res, "dual": dual})


def solve_island(problem, solver="auto", topology=None, gs_tol=1e-6, gs_max_sweeps=200,
                 with_residual=True, direct_limit=3000):
    """Solve one island's KKT system.

    ``solver='auto'`` dispatches on topology; graphs whose dual has at most
    ``direct_limit`` rows use a sparse direct factorization instead of
    Gauss-Seidel.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    if not problem.rows:
        dq = [problem.hinv(j, problem.f[j]) for j in range(problem.n_bodies)]
        return KKTSolution(dq, [], {"solver": "free"})
    topo = topology or problem_topology(problem)
    if solver == "auto":
        solver = {"chain": "chain", "tree": "aba", "loop": "loop"}.get(topo.kind)
        if solver is None:
            n_rows = sum(r.rank for r in problem.rows)
            solver = "dense" if n_rows <= direct_limit else "gs"
    if solver == "dense":
        sol = solve_dense_dual(problem, with_residual)
    elif solver == "chain":
        if topo.kind != "chain":
            raise SolverFailure(f"chain solver requested on a {topo} island")
        sol = solve_chain_problem(problem, topo.order, with_residual)
    elif solver == "aba":
        if topo.kind not in ("chain", "tree"):
            raise SolverFailure(f"ABA solver requested on a {topo} island")
        sol = solve_tree_aba(problem, with_residual)
    elif solver == "loop":
        if topo.kind in ("chain", "tree"):
            sol = solve_acyclic(problem, with_residual)
        elif topo.kind == "loop":
            sol = solve_loop(problem, topo.breakers, with_residual)
        else:
            raise SolverFailure(f"loop solver requested on a {topo} island")
    else:
        sol = solve_gs(problem, gs_tol, gs_max_sweeps, with_residual)
    sol.info["solver"] = solver
    sol.info["topology"] = topo
    return sol
