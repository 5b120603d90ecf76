"""Builders for the bundled scene documents.

The JSON files under ``mabd/fixtures`` are generated from these functions
(``python -m mabd.fixture_builders``); a test keeps them in sync.
"""
import json
import math
import os
from pathlib import Path

import numpy as np

FIXTURE_DIR = Path(__file__).with_name("fixtures")
STEEL_ISH = {"density": 1000.0, "youngs": 1e9, "poisson": 0.3}


def _body(bid, geometry, position, rotation=None, twist=None, **material):
    b = {"id": bid, "geometry": geometry, **STEEL_ISH, **material, "position": [float(x) for x in position]}
    if rotation is not None:
        b["rotation"] = rotation
    if twist is not None:
        b["twist"] = twist
    return b


def _doc(bodies, joints=(), anchors=(), gravity=(0.0, 0.0, 0.0), schedule=(), **integrator):
    return {
        "schema_version": 1,
        "gravity": list(gravity),
        "bodies": list(bodies),
        "joints": list(joints),
        "anchors": list(anchors),
        "schedule": list(schedule),
        "integrator": integrator,
    }


def minimal():
    return _doc([_body("box", {"type": "box", "size": [0.1, 0.1, 0.1]}, [0, 0, 0])],
                gravity=(0, 0, -9.81), h=1e-2, steps=10)


def cube_momentum(h=1e-3, steps=1000):
    """Free 0.1 m cube (1 kg) launched with p0 = [100,0,0], L0 = [0,100,0]."""
    return _doc([_body("cube", {"type": "box", "size": [0.1, 0.1, 0.1]}, [0, 0, 0],
                       twist={"p": [100.0, 0.0, 0.0], "L": [0.0, 100.0, 0.0]})], h=h, steps=steps)


PENDULUM = {"length": 1.0, "width": 0.05}


def pendulum(h=1e-4, steps=50000):
    """Rod hinged at one end to a fully anchored pivot block, released horizontally."""
    L, w = PENDULUM["length"], PENDULUM["width"]
    return _doc(
        [_body("pivot", {"type": "box", "size": [w, w, w]}, [0, 0, 0]),
         _body("rod", {"type": "box", "size": [L, w, w]}, [L / 2, 0, 0])],
        joints=[{"kind": "hinge", "name": "pivot_hinge", "bodies": ["rod", "pivot"],
                 "point": [0, 0, 0], "axis": [0, 1, 0]}],
        anchors=[{"body": "pivot", "mode": "full", "name": "ground"}],
        gravity=(0, 0, -9.81), h=h, steps=steps,
    )


T_HANDLE = {"asymmetry": 0.01, "omega0": 3.0, "perturbation": 1e-3}


def t_handle(h=1e-3, steps=20000):
    """Free T-handle spinning about its intermediate principal axis (body y)."""
    w = T_HANDLE["perturbation"]
    omega = [w, T_HANDLE["omega0"], w]
    return _doc([_body("handle", {"type": "t_handle", "asymmetry": T_HANDLE["asymmetry"]}, [0, 0, 0],
                       twist={"omega": omega, "v": [0, 0, 0]})], h=h, steps=steps)


HEAVY_TOP = {"radius": 0.15, "height": 0.02, "offset": 0.02, "tilt_deg": 5.0, "spin": 10.0}


def heavy_top(h=1e-3, steps=3000):
    """Disk on a ball joint below its centre, tilted 5 degrees and spinning at 10 rad/s."""
    p = HEAVY_TOP
    tilt = math.radians(p["tilt_deg"])
    axis = [0.0, -math.sin(tilt), math.cos(tilt)]
    return _doc(
        [_body("top", {"type": "cylinder", "radius": p["radius"], "height": p["height"]},
               [p["offset"] * a for a in axis], rotation={"rotvec": [tilt, 0.0, 0.0]},
               twist={"omega": [p["spin"] * a for a in axis], "v": [0, 0, 0]})],
        joints=[{"kind": "ball", "name": "tip", "bodies": ["top", "world"], "point": [0, 0, 0]}],
        gravity=(0, 0, -9.81), h=h, steps=steps,
    )


def net(n=10, spacing=0.1, h=1.0 / 30.0, steps=300, solver="auto"):
    """Hanging net of (n+1)x(n+1) node blocks with ball joints at edge midpoints.

    The y = 0 boundary row is pinned with ball anchors; the net is horizontal
    at t = 0 and swings down under gravity.
    """
    m = n + 1
    bodies, joints, anchors = [], [], []
    size = [0.4 * spacing, 0.4 * spacing, 0.2 * spacing]
    bid = lambda i, j: f"n{i}_{j}"
    for j in range(m):
        for i in range(m):
            bodies.append(_body(bid(i, j), {"type": "box", "size": size}, [i * spacing, j * spacing, 0.0]))
    for j in range(m):
        for i in range(m):
            if i + 1 < m:
                joints.append({"kind": "ball", "bodies": [bid(i, j), bid(i + 1, j)],
                               "point": [(i + 0.5) * spacing, j * spacing, 0.0]})
            if j + 1 < m:
                joints.append({"kind": "ball", "bodies": [bid(i, j), bid(i, j + 1)],
                               "point": [i * spacing, (j + 0.5) * spacing, 0.0]})
    for i in range(m):
        anchors.append({"body": bid(i, 0), "mode": "ball", "name": f"pin{i}"})
    return _doc(bodies, joints, anchors, gravity=(0, 0, -9.81), h=h, steps=steps, solver=solver)


def chain(n=8, link=0.2, kinds=("hinge",), h=1e-3, steps=1000):
    """Horizontal chain of links along x, hinged to the world at x = 0."""
    bodies, joints = [], []
    for i in range(n):
        bodies.append(_body(f"link{i}", {"type": "box", "size": [link, 0.03, 0.03]}, [(i + 0.5) * link, 0, 0]))
    joints.append({"kind": "hinge", "bodies": ["link0", "world"], "point": [0, 0, 0], "axis": [0, 1, 0]})
    for i in range(n - 1):
        kind = kinds[i % len(kinds)]
        j = {"kind": kind, "bodies": [f"link{i}", f"link{i + 1}"], "point": [(i + 1) * link, 0, 0]}
        if kind in ("hinge", "prismatic"):
            j["axis"] = [0, 1, 0] if kind == "hinge" else [1, 0, 0]
        if kind == "universal":
            j["axes"] = [[0, 1, 0], [0, 0, 1]]
        joints.append(j)
    return _doc(bodies, joints, gravity=(0, 0, -9.81), h=h, steps=steps)


def tree(depth=3, link=0.15, h=1e-3, steps=500):
    """Binary tree of links hanging from a ball joint to the world."""
    bodies, joints = [], []

    def grow(name, pos, direction, level):
        centre = [p + 0.5 * link * d for p, d in zip(pos, direction)]
        bodies.append(_body(name, {"type": "box", "size": [0.03, 0.03, link]}, centre,
                            rotation={"rotvec": _tilt(direction)}))
        tip = [p + link * d for p, d in zip(pos, direction)]
        if level == depth:
            return
        for side, s in (("L", -1.0), ("R", 1.0)):
            child = name + side
            d = np.array([s * 0.5, 0.0, -1.0])
            d = (d / np.linalg.norm(d)).tolist()
            grow(child, tip, d, level + 1)
            joints.append({"kind": "ball", "bodies": [child, name], "point": tip})

    grow("root", [0.0, 0.0, 0.0], [0.0, 0.0, -1.0], 0)
    joints.append({"kind": "ball", "bodies": ["root", "world"], "point": [0, 0, 0]})
    return _doc(bodies, joints, gravity=(0, 0, -9.81), h=h, steps=steps)


def _tilt(direction):
    """Rotation vector taking -z onto ``direction``."""
    d = np.asarray(direction, dtype=float)
    z = np.array([0.0, 0.0, -1.0])
    c = np.cross(z, d)
    s = np.linalg.norm(c)
    if s < 1e-12:
        return [0.0, 0.0, 0.0]
    return (c / s * math.atan2(s, z @ d)).tolist()


def ring(n=6, radius=0.3, h=1e-3, steps=500):
    """Closed ring of ball-jointed links, one link anchored: a single loop."""
    bodies, joints = [], []
    for i in range(n):
        th = 2 * math.pi * (i + 0.5) / n
        bodies.append(_body(f"r{i}", {"type": "box", "size": [0.05, 0.05, 0.05]},
                            [radius * math.cos(th), radius * math.sin(th), 0.0]))
    for i in range(n):
        th = 2 * math.pi * (i + 1) / n
        joints.append({"kind": "ball", "bodies": [f"r{i}", f"r{(i + 1) % n}"],
                       "point": [radius * math.cos(th), radius * math.sin(th), 0.0]})
    return _doc(bodies, joints, anchors=[{"body": "r0", "mode": "full", "name": "mount"}],
                gravity=(0, 0, -9.81), h=h, steps=steps)


def random_articulation(rng, n, topology="chain", kinds=("ball", "hinge", "prismatic", "universal"),
                        anchored=True):
    """Random jointed scene of ``n`` bodies for solver cross-checks.

    ``topology`` is ``"chain"``, ``"tree"`` or ``"loop"``. Loops are a chain
    closed by a ball joint between its ends. Universal joints add one virtual
    body each when the scene is built.
    """
    if topology == "tree" and n < 4:
        raise ValueError("a branching tree needs at least 4 bodies")
    if topology == "loop":
        r = 0.1 * n / math.pi
        centres = [[r * math.cos(2 * math.pi * i / n), r * math.sin(2 * math.pi * i / n), 0.0] for i in range(n)]
        parents = list(range(-1, n - 1))
    else:
        centres, parents = [[0.0, 0.0, 0.0]], [-1]
        for i in range(1, n):
            # bodies 1..3 all hang off body 0 so a tree always branches
            p = i - 1 if topology == "chain" else (0 if i <= 3 else int(rng.integers(0, i)))
            d = rng.standard_normal(3)
            centres.append((np.asarray(centres[p]) + 0.2 * d / np.linalg.norm(d)).tolist())
            parents.append(p)
    bodies = [_body(f"b{i}", {"type": "box", "size": rng.uniform(0.03, 0.08, 3).tolist()}, c,
                    rotation={"rotvec": rng.uniform(-1, 1, 3).tolist()}) for i, c in enumerate(centres)]
    joints = []

    def link(i, p, kind):
        mid = (0.5 * (np.asarray(centres[i]) + np.asarray(centres[p]))).tolist()
        j = {"kind": kind, "bodies": [f"b{i}", f"b{p}"], "point": mid}
        a = rng.standard_normal(3)
        a /= np.linalg.norm(a)
        if kind in ("hinge", "prismatic"):
            j["axis"] = a.tolist()
        if kind == "universal":
            b = np.cross(a, rng.standard_normal(3))
            j["axes"] = [a.tolist(), (b / np.linalg.norm(b)).tolist()]
        joints.append(j)

    for i in range(1, n):
        link(i, parents[i], kinds[int(rng.integers(0, len(kinds)))])
    if topology == "loop":
        link(0, n - 1, "ball")
    anchors = [{"body": "b0", "mode": "ball"}] if anchored else []
    return _doc(bodies, joints, anchors, gravity=(0, 0, -9.81), h=1e-3, steps=1)


BUNDLED = {
    "minimal": minimal,
    "cube_momentum": cube_momentum,
    "pendulum": pendulum,
    "t_handle": t_handle,
    "heavy_top": heavy_top,
    "net": net,
    "net_5x5": lambda: net(n=4, solver="gs"),
    "chain": chain,
    "tree": tree,
    "ring": ring,
}


def fixture_path(name):
    return FIXTURE_DIR / f"{name}.json"


def dump(doc):
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_all(directory=FIXTURE_DIR):
    os.makedirs(directory, exist_ok=True)
    for name, build in BUNDLED.items():
        (Path(directory) / f"{name}.json").write_text(dump(build()))


if __name__ == "__main__":
    write_all()
