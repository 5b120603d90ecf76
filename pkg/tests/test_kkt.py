import numpy as np
import pytest

from mabd import fixture_builders as fb
from mabd.bench import _random_state_scene, constraint_space_error
from mabd.kkt import (
    DualSystem, EmptyScene, SolverFailure, assemble_dual, chain_cover, classify_topology, islands,
    problem_topology, recover_primal, solve_chain, solve_chain_problem, solve_dual_direct,
    solve_graph_gs, solve_island, solve_loop, solve_tree_aba,
)
from mabd.oracles import dense_kkt_solve


def rel_error(dq, ref):
    return max(np.abs(a - b).max() for a, b in zip(dq, ref)) / max(np.abs(b).max() for b in ref)


def problem_for(doc, rng, rigid=False):
    return _random_state_scene(doc, rng, rigid=rigid).island_problem(0)


class TestTopology:
    def test_chain(self):
        t = classify_topology(3, [(0, 1), (1, 2), (0, None)])
        assert t.kind == "chain" and t.order in ((0, 1, 2), (2, 1, 0))
        assert str(t) == "Chain"

    def test_single_body(self):
        assert classify_topology(1, [(0, None)]).kind == "chain"

    def test_tree(self):
        assert classify_topology(4, [(0, 1), (0, 2), (0, 3)]).kind == "tree"

    def test_loop(self):
        t = classify_topology(3, [(0, 1), (1, 2), (2, 0)])
        assert t.kind == "loop" and len(t.breakers) == 1
        assert str(t) == "Loop(breakers=1)"

    def test_grid_is_graph(self):
        n = 5
        idx = lambda i, j: i + n * j
        edges = [(idx(i, j), idx(i + 1, j)) for j in range(n) for i in range(n - 1)]
        edges += [(idx(i, j), idx(i, j + 1)) for j in range(n - 1) for i in range(n)]
        assert classify_topology(n * n, edges).kind == "graph"

    def test_empty(self):
        with pytest.raises(EmptyScene):
            classify_topology(0, [])

    def test_islands(self):
        out = islands(5, [(0, 1), (3, 4), (2, None)])
        assert [b for b, _ in out] == [[0, 1], [2], [3, 4]]
        assert [k for _, k in out] == [[0], [2], [1]]

    def test_chain_cover_covers_every_joint_once(self):
        edges = [(0, 1), (1, 2), (2, 0), (2, 3), (0, None)]
        chains = chain_cover(4, edges)
        flat = sorted(k for c in chains for k in c)
        assert flat == list(range(len(edges)))


class TestDual:
    def test_symmetric_positive_definite(self, rng):
        P = problem_for(fb.ring(), rng)
        S = assemble_dual(P).to_dense()
        np.testing.assert_allclose(S, S.T, rtol=0, atol=1e-9 * np.abs(S).max())
        assert np.linalg.eigvalsh(0.5 * (S + S.T)).min() > 0

    def test_chain_is_block_tridiagonal(self, rng):
        P = problem_for(fb.chain(n=6, kinds=("ball", "prismatic")), rng)
        order = problem_topology(P).order
        from mabd.kkt import chain_rows

        groups, _ = chain_rows(P, order)
        dual = assemble_dual(P, groups)
        assert all(abs(k - l) <= 1 for k, l in dual.blocks)

    def test_sparse_matches_dense(self, rng):
        dual = assemble_dual(problem_for(fb.tree(depth=2), rng))
        np.testing.assert_allclose(dual.to_sparse().toarray(), dual.to_dense())

    def test_direct_solve_kkt_residual(self, rng):
        P = problem_for(fb.ring(), rng)
        dual = assemble_dual(P)
        lam = solve_dual_direct(dual)
        dq = recover_primal(dual, dual.split(np.concatenate(lam)) if isinstance(lam, np.ndarray) else lam)
        p, c = P.kkt_residual(dq, lam)
        assert p <= 1e-10
        assert c <= 1e-10 * max(np.abs(x).max() for x in dq)


class TestChain:
    def test_matches_dense(self, rng):
        for kinds in (("hinge",), ("ball", "prismatic"), ("universal", "hinge")):
            P = problem_for(fb.chain(n=7, kinds=kinds), rng)
            sol = solve_chain_problem(P, problem_topology(P).order)
            ref, _ = dense_kkt_solve(P)
            assert rel_error(sol.dq, ref) <= 1e-8

    def test_single_block(self, rng):
        A = rng.standard_normal((5, 5))
        S = A @ A.T + 5 * np.eye(5)
        b = rng.standard_normal(5)
        dual = DualSystem({(0, 0): S}, [b], [5])
        lam, ops = solve_chain(dual)
        np.testing.assert_allclose(lam[0], np.linalg.solve(S, b), rtol=1e-12)
        assert ops > 0

    def test_decoupled_blocks(self, rng):
        blocks, rhs = {}, []
        for k in range(4):
            A = rng.standard_normal((3, 3))
            blocks[(k, k)] = A @ A.T + 3 * np.eye(3)
            rhs.append(rng.standard_normal(3))
        lam, _ = solve_chain(DualSystem(blocks, rhs, [3] * 4))
        for k in range(4):
            np.testing.assert_allclose(lam[k], np.linalg.solve(blocks[(k, k)], rhs[k]), rtol=1e-12)

    def test_rejects_non_tridiagonal(self):
        I = np.eye(2)
        dual = DualSystem({(0, 0): I, (1, 1): I, (2, 2): I, (0, 2): 0.1 * I}, [np.ones(2)] * 3, [2] * 3)
        with pytest.raises(ValueError, match="tridiagonal"):
            solve_chain(dual)

    def test_op_count_linear(self, rng):
        ops = []
        for n in (20, 40):
            P = problem_for(fb.chain(n=n, kinds=("ball",)), rng)
            ops.append(solve_chain_problem(P, problem_topology(P).order).info["ops"])
        assert ops[1] / ops[0] == pytest.approx(2.0, rel=0.1)


class TestTree:
    def test_matches_dense_and_touches(self, rng):
        for depth in (1, 2, 3):
            P = problem_for(fb.tree(depth=depth), rng)
            sol = solve_tree_aba(P)
            ref, _ = dense_kkt_solve(P)
            assert rel_error(sol.dq, ref) <= 1e-8
            assert np.all(sol.info["touches"] == 2)

    def test_chain_is_a_tree(self, rng):
        P = problem_for(fb.chain(n=5), rng)
        ref, _ = dense_kkt_solve(P)
        assert rel_error(solve_tree_aba(P).dq, ref) <= 1e-8


class TestLoop:
    def test_ring_matches_dense(self, rng):
        for n in (3, 6, 9):
            P = problem_for(fb.ring(n=n), rng)
            topo = problem_topology(P)
            assert topo.kind == "loop"
            ref, _ = dense_kkt_solve(P)
            assert rel_error(solve_loop(P, topo.breakers).dq, ref) <= 1e-8

    def test_random_loops(self, rng):
        for _ in range(5):
            P = problem_for(fb.random_articulation(rng, int(rng.integers(3, 15)), "loop"), rng)
            ref, _ = dense_kkt_solve(P)
            assert rel_error(solve_island(P, "loop").dq, ref) <= 1e-8


class TestGaussSeidel:
    def test_single_chain_one_sweep(self, rng):
        P = problem_for(fb.chain(n=6, kinds=("ball",)), rng)
        dual = assemble_dual(P)
        chains = chain_cover(P.n_bodies, [(r.a, r.b) for r in P.rows])
        res = solve_graph_gs(dual, chains, tol=1e-9 * max(np.abs(b).max() for b in dual.rhs), accelerate=None)
        if len(chains) == 1:
            assert res.sweeps == 1
        assert res.converged

    def test_monotone_on_diagonally_dominant(self, rng):
        n = 12
        S = rng.uniform(-1, 1, (n, n))
        S = 0.5 * (S + S.T)
        np.fill_diagonal(S, np.abs(S).sum(axis=1) + 1.0)
        blocks = {(k, l): S[k:k + 1, l:l + 1] for k in range(n) for l in range(k, n) if S[k, l] != 0}
        b = rng.standard_normal(n)
        dual = DualSystem(blocks, [b[k:k + 1] for k in range(n)], [1] * n)
        exact = np.linalg.solve(S, b)
        errs = []
        for sweeps in range(1, 8):
            res = solve_graph_gs(dual, [[k] for k in range(n)], tol=0.0, max_sweeps=sweeps, accelerate=None)
            errs.append(np.abs(np.concatenate(res.lam) - exact).max())
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_cg_matches_dense_on_net(self, rng):
        P = problem_for(fb.net(n=4), rng, rigid=True)
        dual = assemble_dual(P)
        chains = chain_cover(P.n_bodies, [(r.a, r.b) for r in P.rows])
        res = solve_graph_gs(dual, chains, tol=1e-6, max_sweeps=400)
        assert res.converged and res.residual <= 1e-6
        ref, _ = dense_kkt_solve(P)
        assert constraint_space_error(P, recover_primal(dual, res.lam), ref) <= 1e-6

    def test_unknown_acceleration(self, rng):
        dual = DualSystem({(0, 0): np.eye(1)}, [np.ones(1)], [1])
        with pytest.raises(ValueError):
            solve_graph_gs(dual, [[0]], tol=0.0, max_sweeps=1, accelerate="multigrid")


class TestDispatch:
    def test_auto_picks_by_topology(self, rng):
        cases = [(fb.chain(n=4), "chain"), (fb.tree(depth=2), "aba"), (fb.ring(), "loop"), (fb.net(n=4), "dense")]
        for doc, expect in cases:
            P = problem_for(doc, rng)
            sol = solve_island(P)
            assert sol.info["solver"] == expect
            ref, _ = dense_kkt_solve(P)
            assert rel_error(sol.dq, ref) <= 1e-8

    def test_mismatched_solver(self, rng):
        P = problem_for(fb.ring(), rng)
        with pytest.raises(SolverFailure):
            solve_island(P, "chain")
        with pytest.raises(SolverFailure):
            solve_island(problem_for(fb.net(n=4), rng), "aba")
        with pytest.raises(ValueError):
            solve_island(P, "magic")

    def test_kkt_residual_of_solutions(self, rng):
        P = problem_for(fb.tree(depth=2), rng)
        sol = solve_island(P)
        p, c = P.kkt_residual(sol.dq, sol.lam)
        assert p <= 1e-9
        assert c <= 1e-9 * max(np.abs(x).max() for x in sol.dq)
