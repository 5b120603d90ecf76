"""Command-line front end: ``mabd run | bench | validate``.

Exit codes: 0 success, 2 parse/validation error (including unreadable
files), 3 solver failure, 4 failing benchmark checks.
"""
import argparse
import os
import statistics
import sys
from pathlib import Path

import numpy as np

from . import bench
from .fixture_builders import BUNDLED, fixture_path
from .kkt import SOLVERS, SolverFailure
from .scene import ParseError, ValidationError, load_scene

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_BENCH = 0, 2, 3, 4


def _resolve(path):
    """A scene path, or the name of a bundled fixture."""
    p = Path(path)
    if not p.exists() and path in BUNDLED:
        return fixture_path(path)
    return p


def _load(path):
    p = _resolve(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read scene file {path}: {exc.strerror}") from None
    return load_scene(text)


def cmd_run(args):
    try:
        scene = _load(args.scene)
        if args.solver:
            scene.settings.solver = args.solver
        if args.polar:
            scene.settings.use_polar = args.polar == "on"
        if args.h:
            scene.set_step(args.h)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    steps = scene.settings.steps if args.steps is None else args.steps
    try:
        rec = scene.run(steps)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.out:
        rec.to_csv(args.out, timing=not args.no_timing)
    res = [float(np.max(r)) if len(r) else 0.0 for r in rec.residuals]
    us = rec.us[1:]
    print(f"{steps} steps, h = {scene.settings.h:g} s, topology {scene.topology_summary()}")
    print(f"max joint residual over run: {max(res):.3e}")
    if us:
        print(f"time per step: median {statistics.median(us):.1f} us, mean {statistics.fmean(us):.1f} us")
    if args.out:
        print(f"wrote {len(rec)} rows to {args.out}")
    return EXIT_OK


def cmd_bench(args):
    names = list(bench.SUITES) if args.suite == "all" else [args.suite]
    if any(n not in bench.SUITES for n in names):
        print(f"error: unknown suite {args.suite!r}; choose from {', '.join(bench.SUITES)} or all",
              file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    results = []
    for name in names:
        r = bench.run_suite(name)
        results.append(r)
        print(f"[{'pass' if r.passed else 'FAIL'}] {name} ({r.runtime:.1f} s)")
        for c in r.checks:
            print(f"    {c}")
        if out:
            for fname, text in r.csv.items():
                (out / fname).write_text(text)
    table = bench.summary_table(results)
    if out:
        (out / "summary.csv").write_text(table)
    failing = [f"{r.spec.name}:{c.metric}" for r in results for c in r.checks if not c.passed]
    if failing:
        print("failing checks: " + ", ".join(failing), file=sys.stderr)
        return EXIT_BENCH
    return EXIT_OK


def cmd_validate(args):
    try:
        scene = _load(args.scene)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    res = scene.residuals()
    n_anchor = sum(1 for j in scene.joints if j.kind == "anchor")
    n_joint = len(scene.joints) - n_anchor
    worst = max(res, default=0.0)
    print(f"{scene.topology_summary()}, {n_joint} joints, max residual {worst:.0e}")
    print(f"{scene.n_bodies} bodies, {n_anchor} anchors, {len(scene.islands)} islands")
    tol = 1e-8
    if worst > tol:
        bad = [scene.joints[k].name or f"joint{k}" for k, r in enumerate(res) if r > tol]
        print(f"error: t = 0 constraint residual above {tol:g} at {', '.join(bad)}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mabd", description="Co-rotated affine body dynamics with joints.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scene and write a CSV trajectory")
    r.add_argument("scene", help="scene JSON file or bundled fixture name")
    r.add_argument("--steps", type=int)
    r.add_argument("--h", type=float)
    r.add_argument("--out")
    r.add_argument("--solver", choices=SOLVERS)
    r.add_argument("--polar", choices=("on", "off"))
    r.add_argument("--no-timing", action="store_true", help="write 0 in us_per_step for byte-stable CSVs")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run benchmark suites")
    b.add_argument("suite", help=f"one of {', '.join(bench.SUITES)} or all")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", help="check a scene without simulating")
    v.add_argument("scene")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
