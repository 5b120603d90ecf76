"""Acceptance criteria 1-10, one pass/fail line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or
``python3 tests/test_acceptance.py``. The lines are printed even when
output capture is on.
"""
import time

import pytest

from mabd import bench


def _run(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out[0], out[1], time.perf_counter() - t


def _report(capsys, n, title, values, checks, runtime, limit=None):
    results = [bench.Check(m, c, tol, float(values[m])) for m, c, tol in checks]
    if limit is not None:
        results.append(bench.Check("runtime_s", "<=", limit, runtime))
    ok = all(r.passed for r in results)
    detail = "; ".join(f"{r.metric}={r.value:.4g}" for r in results)
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n} ({title}): {detail} [{runtime:.1f} s]")
    failed = [str(r) for r in results if not r.passed]
    assert not failed, failed


def test_criterion_01_linear_momentum(capsys):
    values, checks, rt = _run(bench.cube_momentum)
    checks = [c for c in checks if c[0].startswith("p_drift")]
    _report(capsys, 1, "linear momentum", values, checks, rt, limit=5.0)


@pytest.mark.slow
def test_criterion_02_pendulum(capsys):
    values, checks, rt = _run(bench.pendulum)
    checks = checks + [("max_err_h0.01", ">", 0.0)]
    _report(capsys, 2, "pendulum vs elliptic", values, checks, rt, limit=60.0)


@pytest.mark.slow
def test_criterion_03_intermediate_axis(capsys):
    values, checks, rt = _run(bench.t_handle)
    _report(capsys, 3, "intermediate-axis flips", values, checks, rt)


@pytest.mark.slow
def test_criterion_04_heavy_top(capsys):
    values, checks, rt = _run(bench.heavy_top)
    _report(capsys, 4, "heavy top", values, checks, rt)


def test_criterion_05_gyroscopic(capsys):
    values, checks, rt = _run(bench.gyroscopic, 100)
    _report(capsys, 5, "gyroscopic cancellation", values, checks, rt, limit=1.0)


@pytest.mark.slow
def test_criterion_06_solver_equivalence(capsys):
    t = time.perf_counter()
    v1, c1, _ = bench.solver_equivalence(count=50, max_bodies=50)
    v2, c2, _ = bench.graph_gs(instances=5, tol=1e-6)
    rt = time.perf_counter() - t
    _report(capsys, 6, "solvers vs dense KKT", {**v1, **v2}, c1 + c2, rt, limit=120.0)


@pytest.mark.slow
def test_criterion_07_net_one_iteration(capsys):
    values, checks, rt = _run(bench.net, n=10, steps=300)
    checks = checks + [("joints", "==", 220)]
    _report(capsys, 7, "10x10 net, one Newton iteration", values, checks, rt)


def test_criterion_08_gradients(capsys):
    values, checks, rt = _run(bench.gradients, 100)
    _report(capsys, 8, "gradients vs finite differences", values, checks, rt)


@pytest.mark.slow
def test_criterion_09_complexity(capsys):
    t = time.perf_counter()
    v1, c1, _ = bench.chain_scaling((1000, 10000))
    v2, c2, _ = bench.tree_aba(depth=4)
    rt = time.perf_counter() - t
    c2 = [c for c in c2 if "touches" in c[0]]
    _report(capsys, 9, "chain linearity and ABA touches", {**v1, **v2}, c1 + c2, rt)


@pytest.mark.slow
def test_criterion_10_performance(capsys):
    values, checks, rt = _run(bench.perf_corotated, n=10000, repeats=3)
    _report(capsys, 10, "co-rotated vs vanilla stepping", values, checks, rt)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
