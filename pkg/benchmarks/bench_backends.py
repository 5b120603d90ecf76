"""Compare the compiled and pure-Python kernel backends.

Kernel timings call each backend module directly. The end-to-end timing
runs a single-body co-rotated stepping loop in a subprocess per backend,
since the backend is fixed at import time (``MABD_PURE_PYTHON=1`` forces
the fallback).

    python3 benchmarks/bench_backends.py [--steps 10000] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np
from scipy.spatial.transform import Rotation

from mabd import kernels
from mabd.body import precompute_body
from mabd.geometry import Box

LOOP = """
import json, time
import numpy as np
from mabd import kernels
from mabd.bench import corotated_loop
from mabd.body import AffineState, SpatialTwist, embedding_map, precompute_body
from mabd.geometry import Box
h = 1e-3
m = precompute_body(Box((0.1, 0.1, 0.1)), 1000.0, 1e9, 0.3, h)
s = AffineState.from_pose(np.eye(3), np.zeros(3))
s.qdot = embedding_map(s, SpatialTwist(np.array([0.0, 3.0, 1.0]), np.array([1.0, 0.0, 0.0])))
corotated_loop(m, s, 200, h)
best = float("inf")
for _ in range({repeat}):
    t = time.perf_counter()
    corotated_loop(m, s, {steps}, h)
    best = min(best, time.perf_counter() - t)
print(json.dumps({{"backend": kernels.BACKEND, "us_per_step": best / {steps} * 1e6}}))
"""


def kernel_cases(rng):
    L = precompute_body(Box((0.2, 0.1, 0.05)), 1000.0, 1e8, 0.3, 1e-3).Hbar_factor.L
    A = Rotation.from_rotvec(rng.standard_normal(3)).as_matrix() @ (np.eye(3) + 1e-3 * rng.standard_normal((3, 3)))
    R = kernels.backends()["python"].polar_rotation(A)
    f = rng.standard_normal(12)
    F = rng.standard_normal((12, 8))
    K = 200
    diag = [np.eye(5) * 10 + 0.1 * np.ones((5, 5)) for _ in range(K)]
    upper = [0.5 * np.eye(5) for _ in range(K - 1)]
    rhs = [rng.standard_normal(5) for _ in range(K)]
    return {
        "polar_rotation": lambda mod: mod.polar_rotation(A),
        "corot_solve (vector)": lambda mod: mod.corot_solve(L, R, f),
        "corot_solve (12x8)": lambda mod: mod.corot_solve(L, R, F),
        "corot_solve_lenpres": lambda mod: mod.corot_solve_lenpres(L, A, f),
        "block_thomas (K=200)": lambda mod: mod.block_thomas(diag, upper, rhs),
    }


def time_call(fn, repeat):
    number, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number * 1e6


def end_to_end(steps, repeat, pure):
    env = dict(os.environ)
    if pure:
        env["MABD_PURE_PYTHON"] = "1"
    else:
        env.pop("MABD_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", LOOP.format(steps=steps, repeat=repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.backends()
    names = sorted(backends)
    print(f"backends available: {', '.join(names)} (active: {kernels.BACKEND})")
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    print(f"\n{'kernel':24s}" + "".join(f"{n:>14s}" for n in names) + ("      speedup" if len(names) > 1 else ""))
    for label, call in cases.items():
        times = {n: time_call(lambda: call(backends[n]), args.repeat) for n in names}
        line = f"{label:24s}" + "".join(f"{times[n]:11.2f} us" for n in names)
        if len(names) > 1:
            line += f"{times['python'] / times['compiled']:12.2f}x"
        print(line)

    print(f"\nsingle-body co-rotated stepping, {args.steps} steps (best of {args.repeat})")
    runs = [end_to_end(args.steps, args.repeat, pure=True)]
    if "compiled" in backends:
        runs.append(end_to_end(args.steps, args.repeat, pure=False))
    for r in runs:
        print(f"  {r['backend']:10s} {r['us_per_step']:8.1f} us/step")
    if len(runs) == 2:
        print(f"  compiled speedup over python: {runs[0]['us_per_step'] / runs[1]['us_per_step']:.2f}x")


if __name__ == "__main__":
    main()
