"""Scene documents, the time-stepping loop and trajectory recording.

Scene document (JSON, ``schema_version`` 1)::

    {
      "schema_version": 1,
      "gravity": [0, 0, -9.81],
      "bodies": [{"id": "link0", "geometry": {"type": "box", "size": [1, .1, .1]},
                  "density": 1000, "youngs": 1e9, "poisson": 0.3,
                  "position": [0, 0, 0], "rotation": {"rotvec": [0, 0, 0]},
                  "twist": {"omega": [0, 0, 0], "v": [0, 0, 0]}}],
      "joints": [{"kind": "hinge", "bodies": ["link0", "world"],
                  "point": [0, 0, 0], "axis": [0, 1, 0], "limits": [-1, 1]}],
      "anchors": [{"body": "link0", "point": [0, 0, 0], "mode": "ball"}],
      "schedule": [{"body": "link0", "start": 0, "end": 1, "tau": [0, 0, 0], "f": [0, 0, 0]}],
      "integrator": {"h": 1e-3, "steps": 1000, "newton_iters": 1, "solver": "auto",
                     "use_polar": true, "gs_tol": 1e-6, "gs_max_sweeps": 200}
    }

Geometry types: ``box`` (size), ``cylinder`` (radius, height along z),
``capsule`` (radius, length along z), ``t_handle`` and ``mesh``
(vertices, tets). Rotations are given as ``{"rotvec": [...]}``,
``{"matrix": [[...]]}`` or ``{"quat": [x, y, z, w]}``. Twists are
``{"omega", "v"}`` (world frame, ``v`` the velocity of the body origin) or
``{"p", "L"}`` (momentum about the world origin).
"""
import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from . import geometry as geo
from .body import (
    AffineState, SpatialWrench, approx_rotation, elastic_energy, elastic_gradient,
    embedding_map, newton_step_single, polar_rotation, precompute_body, unvec, vec,
    wrench_to_affine, SpatialTwist,
)
from .joints import (
    InvalidJoint, JointSpec, apply_joint_limits, default_k_limit, eval_constraint,
    eval_gradient, joint_coordinate, make_anchor, make_joint,
)
from .kkt import JointRows, KKTProblem, SolverFailure, islands, problem_topology, solve_island

SCHEMA_VERSION = 1
WORLD = "world"


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass
class BodyRecord:
    id: object
    geometry: object
    density: float
    youngs: float
    poisson: float
    A0: np.ndarray
    t0: np.ndarray
    twist: dict = field(default_factory=dict)
    virtual: bool = False


@dataclass
class JointRecord:
    kind: str
    bodies: tuple
    point: np.ndarray
    axis: np.ndarray = None
    axes: tuple = None
    limits: tuple = None
    k_limit: float = None
    linear: bool = False
    expand: bool = False
    name: str = ""


@dataclass
class AnchorRecord:
    body: object
    point: np.ndarray = None
    mode: str = "ball"
    name: str = ""


@dataclass
class WrenchEvent:
    body: object
    start: float
    end: float
    tau: np.ndarray
    f: np.ndarray

    def active(self, t):
        return self.start <= t < self.end


@dataclass
class IntegratorSettings:
    h: float = 1e-3
    steps: int = 100
    newton_iters: int = 1
    newton_tol: float = 1e-10
    solver: str = "auto"
    use_polar: bool = True
    gs_tol: float = 1e-6
    gs_max_sweeps: int = 200
    residual_rhs: bool = True


@dataclass
class SceneDescription:
    bodies: list
    joints: list
    anchors: list
    gravity: np.ndarray
    schedule: list
    integrator: IntegratorSettings
    schema_version: int = SCHEMA_VERSION


# ---------------------------------------------------------------- parsing


def _vec3(x, what):
    try:
        v = np.asarray(x, dtype=float).reshape(3)
    except (TypeError, ValueError):
        raise ValidationError(f"{what}: expected a 3-vector, got {x!r}") from None
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{what}: non-finite entries")
    return v


def _rotation(spec, what):
    if spec is None:
        return np.eye(3)
    if isinstance(spec, dict):
        if "rotvec" in spec:
            return Rotation.from_rotvec(_vec3(spec["rotvec"], what)).as_matrix()
        if "quat" in spec:
            return Rotation.from_quat(np.asarray(spec["quat"], dtype=float)).as_matrix()
        if "matrix" in spec:
            spec = spec["matrix"]
        else:
            raise ValidationError(f"{what}: unknown rotation format {sorted(spec)}")
    R = np.asarray(spec, dtype=float).reshape(3, 3)
    if np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or np.linalg.det(R) <= 0:
        raise ValidationError(f"{what}: matrix is not a proper rotation")
    return R


def _material(d, what, key, default, lo=None):
    v = float(d.get(key, default))
    if not math.isfinite(v) or (lo is not None and not v > lo):
        raise ValidationError(f"{what}: {key} = {v} must be > {lo}")
    return v


def parse_description(doc):
    if not isinstance(doc, dict):
        raise ValidationError("scene document must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version}")
    bodies = []
    seen = set()
    for i, b in enumerate(doc.get("bodies", [])):
        bid = b.get("id", i)
        what = f"body {bid!r}"
        if bid == WORLD or bid in seen:
            raise ValidationError(f"{what}: duplicate or reserved id")
        seen.add(bid)
        try:
            g = geo.from_dict(b.get("geometry", {}))
            g.moments()
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"{what}: bad geometry ({exc})") from None
        poisson = float(b.get("poisson", 0.3))
        if not -1.0 < poisson < 0.5:
            raise ValidationError(f"{what}: poisson = {poisson} outside (-1, 0.5)")
        twist = b.get("twist", {}) or {}
        if not (set(twist) <= {"omega", "v"} or set(twist) <= {"p", "L"}):
            raise ValidationError(f"{what}: twist must use either (omega, v) or (p, L)")
        bodies.append(BodyRecord(
            bid, g, _material(b, what, "density", 1000.0, 0.0), _material(b, what, "youngs", 1e9, 0.0),
            poisson, _rotation(b.get("rotation"), what), _vec3(b.get("position", [0, 0, 0]), what),
            {k: _vec3(v, f"{what} twist {k}") for k, v in twist.items()},
        ))
    if not bodies:
        raise ValidationError("scene has no bodies")

    def ref(x, what, allow_world=True):
        if x == WORLD and allow_world:
            return WORLD
        if x not in seen:
            raise ValidationError(f"{what}: unknown body id {x!r}")
        return x

    joints = []
    for i, j in enumerate(doc.get("joints", [])):
        name = j.get("name", f"joint{i}")
        what = f"joint {name}"
        kind = j.get("kind")
        if kind not in ("ball", "hinge", "universal", "prismatic"):
            raise ValidationError(f"{what}: unknown kind {kind!r}")
        bs = j.get("bodies", [])
        if len(bs) != 2:
            raise ValidationError(f"{what}: needs exactly two bodies")
        pair = (ref(bs[0], what), ref(bs[1], what))
        if pair[0] == pair[1]:
            raise ValidationError(f"{what}: connects {pair[0]!r} to itself")
        rec = JointRecord(kind, pair, _vec3(j.get("point"), f"{what} point"), name=name,
                          linear=bool(j.get("linear", False)), expand=bool(j.get("expand", False)))
        if kind in ("hinge", "prismatic"):
            a = _vec3(j.get("axis"), f"{what} axis")
            if abs(np.linalg.norm(a) - 1.0) > 1e-9:
                raise ValidationError(f"{what}: axis {a.tolist()} is not unit length")
            rec.axis = a
        if kind == "universal":
            axes = j.get("axes")
            if not axes or len(axes) != 2:
                raise ValidationError(f"{what}: universal joints need two axes")
            rec.axes = tuple(_vec3(a, f"{what} axis") for a in axes)
            for a in rec.axes:
                if abs(np.linalg.norm(a) - 1.0) > 1e-9:
                    raise ValidationError(f"{what}: axis {a.tolist()} is not unit length")
            if abs(rec.axes[0] @ rec.axes[1]) > 1e-10:
                raise ValidationError(f"{what}: axes are not orthogonal")
        if "limits" in j:
            if kind not in ("hinge", "prismatic"):
                raise ValidationError(f"{what}: limits only apply to hinge and prismatic joints")
            lo, hi = (float(x) for x in j["limits"])
            if not lo <= hi:
                raise ValidationError(f"{what}: empty limit range")
            rec.limits = (lo, hi)
            if "k_limit" in j:
                rec.k_limit = float(j["k_limit"])
        joints.append(rec)
    anchors = []
    for i, a in enumerate(doc.get("anchors", [])):
        name = a.get("name", f"anchor{i}")
        mode = a.get("mode", "ball")
        if mode not in ("ball", "full"):
            raise ValidationError(f"anchor {name}: unknown mode {mode!r}")
        anchors.append(AnchorRecord(ref(a.get("body"), f"anchor {name}", False),
                                    None if a.get("point") is None else _vec3(a["point"], f"anchor {name}"),
                                    mode, name))
    schedule = []
    for i, w in enumerate(doc.get("schedule", [])):
        schedule.append(WrenchEvent(ref(w.get("body"), f"schedule {i}", False), float(w.get("start", 0.0)),
                                    float(w.get("end", math.inf)), _vec3(w.get("tau", [0, 0, 0]), "tau"),
                                    _vec3(w.get("f", [0, 0, 0]), "f")))
    ig = dict(doc.get("integrator", {}))
    unknown = set(ig) - set(IntegratorSettings.__dataclass_fields__)
    if unknown:
        raise ValidationError(f"integrator: unknown keys {sorted(unknown)}")
    settings = IntegratorSettings(**ig)
    if not settings.h > 0:
        raise ValidationError(f"integrator: h = {settings.h} must be positive")
    if settings.steps < 0 or settings.newton_iters < 1:
        raise ValidationError("integrator: steps must be >= 0 and newton_iters >= 1")
    return SceneDescription(bodies, joints, anchors, _vec3(doc.get("gravity", [0, 0, 0]), "gravity"),
                            schedule, settings, version)


def load_scene(text):
    """Parse a scene document (JSON text or dict) and build the runtime scene."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    else:
        doc = text
    return Scene(parse_description(doc))


def load_scene_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return load_scene(fh.read())


# ---------------------------------------------------------------- runtime


@dataclass
class TrajectoryRecord:
    body_ids: list
    joint_names: list
    times: list = field(default_factory=list)
    q: list = field(default_factory=list)
    qdot: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    p: list = field(default_factory=list)
    L: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    us: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    def append(self, t, states, residuals, diag, us):
        self.times.append(t)
        self.q.append(np.array([s.q for s in states]))
        self.qdot.append(np.array([s.qdot for s in states]))
        self.residuals.append(np.asarray(residuals, dtype=float))
        self.p.append(diag["p"])
        self.L.append(diag["L"])
        self.energy.append(diag["energy"])
        self.us.append(us)

    def arrays(self):
        return {
            "time": np.array(self.times), "q": np.array(self.q), "qdot": np.array(self.qdot),
            "residual": np.array(self.residuals), "p": np.array(self.p), "L": np.array(self.L),
            "energy": np.array(self.energy), "us": np.array(self.us),
        }

    def header(self):
        cols = ["time"]
        names = ["A00", "A10", "A20", "A01", "A11", "A21", "A02", "A12", "A22", "tx", "ty", "tz"]
        order = [0, 3, 6, 1, 4, 7, 2, 5, 8, 9, 10, 11]  # row-major A, then t
        names = [names[k] for k in order]
        for i in range(len(self.body_ids)):
            cols += [f"body{i}_{n}" for n in names]
        cols += [f"joint{k}_residual" for k in range(len(self.joint_names))]
        cols += ["px", "py", "pz", "Lx", "Ly", "Lz", "energy", "us_per_step"]
        return cols, order

    def write_csv(self, fh, timing=True):
        cols, order = self.header()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        fmt = lambda x: repr(float(x))
        for i in range(len(self.times)):
            row = [fmt(self.times[i])]
            for q in self.q[i]:
                row += [fmt(q[k]) for k in order]
            row += [fmt(r) for r in self.residuals[i]]
            row += [fmt(x) for x in self.p[i]] + [fmt(x) for x in self.L[i]]
            row += [fmt(self.energy[i]), fmt(self.us[i] if timing else 0.0)]
            w.writerow(row)

    def to_csv(self, path=None, timing=True):
        if path is None:
            buf = io.StringIO()
            self.write_csv(buf, timing)
            return buf.getvalue()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.write_csv(fh, timing)
        return path


def momentum_energy(models, states, use_polar=True):
    """Linear momentum, angular momentum about the world origin and energy.

    Momenta are the exact integrals of ρ ẋ and ρ x × ẋ over the bodies;
    energy is kinetic plus co-rotated elastic.
    """
    p = np.zeros(3)
    L = np.zeros(3)
    E = 0.0
    for m, s in zip(models, states):
        Mq = m.M_A @ s.qdot
        p += Mq[9:]
        a = s.q.reshape(4, 3)
        ad = s.qdot.reshape(4, 3)
        Mb = m.Mbar
        for i in range(4):
            # Σ_j M̄_ij ȧ_j
            L += np.cross(a[i], Mb[i] @ ad)
        E += 0.5 * s.qdot @ Mq + elastic_energy(m, s, use_polar)
    return {"p": p, "L": L, "energy": float(E)}


def _twist_to_qdot(model, state, twist):
    """Initial affine velocity from (ω, v) or (p, L)."""
    if not twist:
        return np.zeros(12)
    A = state.A
    if "p" in twist or "L" in twist:
        p = twist.get("p", np.zeros(3))
        Lw = twist.get("L", np.zeros(3))
        m = model.mass
        c = A @ model.com + state.t
        Ic = A @ (model.rest_inertia - m * ((model.com @ model.com) * np.eye(3) - np.outer(model.com, model.com))) @ A.T
        omega = np.linalg.solve(Ic, Lw - np.cross(c, p))
        v_com = p / m
        v = v_com - np.cross(omega, A @ model.com)
    else:
        omega = twist.get("omega", np.zeros(3))
        v = twist.get("v", np.zeros(3))
    return embedding_map(state, SpatialTwist(np.asarray(omega, float), np.asarray(v, float)))


class Scene:
    """Runtime scene: per-body models and states plus joints and islands."""

    def __init__(self, description):
        self.description = d = description
        self.settings = d.integrator
        h = self.settings.h
        bodies = list(d.bodies)
        joints = []
        for rec in d.joints:
            if rec.kind == "universal" and rec.expand:
                joints += self._expand_universal(rec, bodies)
            else:
                joints.append(rec)
        self.body_records = bodies
        self.index = {b.id: i for i, b in enumerate(bodies)}
        self.models = [precompute_body(b.geometry, b.density, b.youngs, b.poisson, h) for b in bodies]
        self.state = []
        for b, m in zip(bodies, self.models):
            s = AffineState.from_pose(b.A0, b.t0)
            s.qdot = _twist_to_qdot(m, s, b.twist)
            self.state.append(s)
        self.time = 0.0
        self.gravity = d.gravity
        self.joints = [self._build_joint(r) for r in joints]
        for a in d.anchors:
            i = self.index[a.body]
            self.joints.append(make_anchor(i, self.state[i].q, a.point, a.mode,
                                           self._scale(i, None), name=a.name))
        self.schedule = [(self.index[w.body], w) for w in d.schedule]
        self._theta = {}
        self._build_islands()

    # -- construction helpers

    def _scale(self, i, j):
        vols = [self.models[k].volume for k in (i, j) if k is not None]
        return min(vols) ** (1.0 / 3.0)

    def _expand_universal(self, rec, bodies):
        """Replace a universal joint by two hinges through a small virtual body."""
        owner = next(b for b in bodies if b.id == rec.bodies[0])
        vid = f"__virtual_{rec.name}"
        size = 0.05 * owner.geometry.moments()[0] ** (1.0 / 3.0)
        bodies.append(BodyRecord(vid, geo.Box((size, size, size)), owner.density, owner.youngs,
                                 owner.poisson, np.eye(3), rec.point.copy(), {}, virtual=True))
        a1, a2 = rec.axes
        return [
            JointRecord("hinge", (rec.bodies[0], vid), rec.point, axis=a1, name=rec.name + "_h1"),
            JointRecord("hinge", (vid, rec.bodies[1]), rec.point, axis=a2, name=rec.name + "_h2"),
        ]

    def _build_joint(self, rec):
        ia = self.index[rec.bodies[0]] if rec.bodies[0] != WORLD else None
        ib = self.index[rec.bodies[1]] if rec.bodies[1] != WORLD else None
        if ia is None:
            ia, ib = ib, None
        scale = self._scale(ia, ib)
        k_limit = rec.k_limit
        if rec.limits is not None and k_limit is None:
            m = self.models[ia]
            k_limit = default_k_limit(m.youngs, m.volume, m.volume ** (1.0 / 3.0))
        try:
            return make_joint(rec.kind, ia, ib, rec.point, self.state[ia].q,
                              None if ib is None else self.state[ib].q, rec.axis, rec.axes, scale,
                              rec.limits, k_limit, rec.linear, rec.name, self.settings.use_polar)
        except InvalidJoint as exc:
            raise ValidationError(str(exc)) from None

    def _build_islands(self):
        pairs = [(j.body_a, j.body_b) for j in self.joints]
        self.islands = []
        for bodies, jidx in islands(len(self.models), pairs):
            topo = None
            if jidx:
                pos = {b: i for i, b in enumerate(bodies)}
                from .kkt import classify_topology
                topo = classify_topology(len(bodies), [(pos[self.joints[k].body_a],
                                                        None if self.joints[k].body_b is None
                                                        else pos[self.joints[k].body_b]) for k in jidx])
            self.islands.append((bodies, jidx, topo))

    # -- queries

    @property
    def n_bodies(self):
        return len(self.models)

    def topology_summary(self):
        kinds = [str(t) for _, j, t in self.islands if t is not None]
        if not kinds:
            return "Free"
        return kinds[0] if len(set(kinds)) == 1 else ", ".join(kinds)

    def residuals(self, states=None):
        states = self.state if states is None else states
        out = []
        for j in self.joints:
            qb = None if j.body_b is None else states[j.body_b].q
            r = eval_constraint(j, states[j.body_a].q, qb, self.settings.use_polar)
            out.append(float(np.abs(r).max()) if r.size else 0.0)
        return out

    def diagnostics(self, states=None):
        states = self.state if states is None else states
        return momentum_energy(self.models, states, self.settings.use_polar)

    def set_step(self, h):
        """Change the step size; every body Hessian is re-factorized."""
        self.settings.h = h
        self.models = [m.with_step(h) for m in self.models]

    # -- stepping

    def _external_forces(self, states, t):
        f = []
        g = self.gravity
        for m, s in zip(self.models, states):
            fi = np.zeros(12)
            if np.any(g):
                fi[:9] = np.outer(m.Mbar[:3, 3], g).ravel()
                fi[9:] = m.mass * g
            f.append(fi)
        for i, w in self.schedule:
            if w.active(t):
                f[i] = f[i] + wrench_to_affine(states[i], SpatialWrench(w.tau, w.f))
        return f

    def _limit_terms(self, states, forces):
        """Penalty forces (added in place) and one-iteration hold rows per joint."""
        holds = {}
        for k, j in enumerate(self.joints):
            if j.limits is None:
                continue
            qa = states[j.body_a].q
            qb = None if j.body_b is None else states[j.body_b].q
            th = joint_coordinate(j, qa, qb, self.settings.use_polar)
            if j.kind == "hinge" and k in self._theta:
                prev = self._theta[k]
                th = prev + (th - prev + math.pi) % (2 * math.pi) - math.pi
            res = apply_joint_limits(j, qa, qb, theta=th, use_polar=self.settings.use_polar)
            if res.clamped:
                forces[j.body_a] = forces[j.body_a] + res.penalty_a
                if j.body_b is not None:
                    forces[j.body_b] = forces[j.body_b] + res.penalty_b
                holds[k] = res
        return holds

    def _update_angles(self, states):
        for k, j in enumerate(self.joints):
            if j.limits is None or j.kind != "hinge":
                continue
            qb = None if j.body_b is None else states[j.body_b].q
            th = joint_coordinate(j, states[j.body_a].q, qb, self.settings.use_polar)
            if k in self._theta:
                prev = self._theta[k]
                th = prev + (th - prev + math.pi) % (2 * math.pi) - math.pi
            self._theta[k] = th

    def step(self, h=None):
        """Advance one step in place. Returns the step's solver info per island."""
        st = self.settings
        if h is not None and h != st.h:
            self.set_step(h)
        h = st.h
        use_polar = st.use_polar
        q_n = [s.q.copy() for s in self.state]
        qd_n = [s.qdot.copy() for s in self.state]
        cur = [AffineState(q.copy(), qd.copy()) for q, qd in zip(q_n, qd_n)]
        fext = self._external_forces(cur, self.time)
        infos = []
        for it in range(st.newton_iters):
            forces = []
            rots = [polar_rotation(s.A) for s in cur] if use_polar else [None] * len(cur)
            for m, s, q0, qd0, fe, R in zip(self.models, cur, q_n, qd_n, fext, rots):
                inertia = m.M_A @ (q0 + h * qd0 - s.q) / h**2
                forces.append(inertia + fe - elastic_gradient(m, s, use_polar, R))
            holds = self._limit_terms(cur, forces) if it == 0 else {}
            max_res = 0.0
            max_dq = 0.0
            for bodies, jidx, topo in self.islands:
                if not jidx:
                    j = bodies[0]
                    dq = newton_step_single(self.models[j], cur[j], forces[j], h, use_polar, rots[j])
                    cur[j].q = cur[j].q + dq
                    max_dq = max(max_dq, np.abs(dq).max())
                    continue
                prob, res = self._island_problem(bodies, jidx, cur, forces, holds, rots)
                max_res = max(max_res, res)
                try:
                    sol = solve_island(prob, st.solver, topo if not holds else None, st.gs_tol,
                                       st.gs_max_sweeps, st.residual_rhs)
                except (SolverFailure, np.linalg.LinAlgError) as exc:
                    raise SolverFailure(f"step {len(self._steps_done())}: {exc}") from exc
                infos.append(sol.info)
                for i, b in enumerate(bodies):
                    cur[b].q = cur[b].q + sol.dq[i]
                    max_dq = max(max_dq, np.abs(sol.dq[i]).max())
            if st.newton_iters > 1 and it + 1 < st.newton_iters:
                if max(self.residuals(cur), default=0.0) <= st.newton_tol and max_dq <= st.newton_tol:
                    break
        for s, q0 in zip(cur, q_n):
            s.qdot = (s.q - q0) / h
        self.state = cur
        self.time += h
        self._update_angles(cur)
        return infos

    def _steps_done(self):
        return range(int(round(self.time / self.settings.h)))

    def _island_problem(self, bodies, jidx, states, forces, holds, rots=None):
        use_polar = self.settings.use_polar
        pos = {b: i for i, b in enumerate(bodies)}
        rot = polar_rotation if use_polar else approx_rotation
        L, R, A, Hb = [], [], [], []
        for b in bodies:
            m = self.models[b]
            Ab = states[b].A
            L.append(m.Hbar_factor.L)
            R.append(rot(Ab) if rots is None or rots[b] is None else rots[b])
            A.append(Ab)
            Hb.append(None)
        rows = []
        max_res = 0.0
        for k in jidx:
            j = self.joints[k]
            qb = None if j.body_b is None else states[j.body_b].q
            blk = eval_gradient(j, states[j.body_a].q, qb, use_polar)
            if blk.residual.size:
                max_res = max(max_res, float(np.abs(blk.residual).max()))
            g = -blk.residual
            Ga, Gb = blk.grad_a, blk.grad_b
            if k in holds:
                hr = holds[k]
                Ga = np.vstack([Ga, hr.grad_a])
                if Gb is not None:
                    Gb = np.vstack([Gb, hr.grad_b])
                g = np.concatenate([g, [hr.theta_hat - hr.theta]])
            rows.append(JointRows(pos[j.body_a], None if j.body_b is None else pos[j.body_b],
                                  Ga, Gb, g, tag=k))
        prob = KKTProblem(L, R, [forces[b] for b in bodies], rows, A,
                          [self.models[b].Hbar() for b in bodies])
        return prob, max_res

    def island_problem(self, island=0):
        """KKT problem of one island at the current state (first Newton iteration)."""
        h = self.settings.h
        bodies, jidx, _ = self.islands[island]
        fext = self._external_forces(self.state, self.time)
        forces = []
        for m, s, fe in zip(self.models, self.state, fext):
            forces.append(m.M_A @ (h * s.qdot) / h**2 + fe - elastic_gradient(m, s, self.settings.use_polar))
        return self._island_problem(bodies, jidx, self.state, forces, {})[0]

    def run(self, n_steps=None, record=True, callback=None):
        """Advance ``n_steps`` and return a TrajectoryRecord with ``n_steps + 1`` rows."""
        n = self.settings.steps if n_steps is None else n_steps
        if n < 0:
            raise ValueError("n_steps must be non-negative")
        names = [j.name or f"joint{k}" for k, j in enumerate(self.joints)]
        rec = TrajectoryRecord([b.id for b in self.body_records], names)
        if record:
            rec.append(self.time, self.state, self.residuals(), self.diagnostics(), 0.0)
        for i in range(n):
            t0 = time.perf_counter()
            try:
                self.step()
            except SolverFailure as exc:
                raise SolverFailure(f"step {i}: {exc}") from exc
            us = (time.perf_counter() - t0) * 1e6
            if record:
                rec.append(self.time, self.state, self.residuals(), self.diagnostics(), us)
            if callback is not None:
                callback(i, self)
        return rec


def step(scene, h=None):
    """Advance ``scene`` by one step; returns (state list, record row dict)."""
    t0 = time.perf_counter()
    scene.step(h)
    us = (time.perf_counter() - t0) * 1e6
    row = {"time": scene.time, "residuals": scene.residuals(), "us": us}
    row.update(scene.diagnostics())
    return scene.state, row


def run(scene, n_steps):
    return scene.run(n_steps)
