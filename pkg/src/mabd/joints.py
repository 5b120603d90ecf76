"""Joint constraints expressed on control-point coordinates.

Each joint carries its own virtual control tetrahedron per incident body,
built so that all four control points coincide in world space at setup.
For the rotational families the control points are compared in a joint
frame ``R_J = ΔR R(A_o)ᵀ`` owned by one incident body ``o`` (or by the
world, in which case ``R_J`` is constant and the constraint is linear).
"""
from dataclasses import dataclass, field

import numpy as np

from .body import AffineState, body_rotation, unvec

KINDS = ("ball", "hinge", "universal", "prismatic", "anchor")
RANKS = {"ball": 3, "hinge": 5, "universal": 4, "prismatic": 5}


class DegenerateCT(ValueError):
    pass


class AntiParallelAxis(ValueError):
    pass


class WrongBodies(ValueError):
    pass


class NoLimitDefined(ValueError):
    pass


class InvalidJoint(ValueError):
    pass


@dataclass(frozen=True)
class ControlMap:
    T: np.ndarray
    T_inv: np.ndarray

    def cps(self, q):
        """Current control points as a 3x4 matrix (columns y_k)."""
        return (self.T @ q).reshape(4, 3).T


def build_control_map(rest_CT):
    Y = np.asarray(rest_CT, dtype=float).reshape(3, 4)
    edges = Y[:, 1:] - Y[:, :1]
    if abs(np.linalg.det(edges)) <= 1e-12:
        raise DegenerateCT(f"control tetrahedron is degenerate (det = {np.linalg.det(edges):.3e})")
    T = np.kron(np.hstack([Y.T, np.ones((4, 1))]), np.eye(3))
    T_inv = np.linalg.inv(T)
    err = np.abs(T @ T_inv - np.eye(12)).max()
    if err > 1e-10:
        raise DegenerateCT(f"control map inverse inaccurate ({err:.2e})")
    return ControlMap(T, T_inv)


def axis_alignment_rotation(a):
    """Rotation taking the unit vector ``a`` onto ``e_y``."""
    a = np.asarray(a, dtype=float)
    if a[1] <= -1.0 + 1e-9:
        raise AntiParallelAxis(f"axis {a} is anti-parallel to e_y")
    v = np.cross(a, [0.0, 1.0, 0.0])
    K = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + K + K @ K / (1.0 + a[1])


def aligned_frame(a):
    """Rotation taking ``a`` to ``e_y``, pre-rotating anti-parallel axes."""
    a = np.asarray(a, dtype=float)
    if a[1] > -1.0 + 1e-6:
        return axis_alignment_rotation(a)
    # flip about x first, then align
    Fx = np.diag([1.0, -1.0, -1.0])
    return axis_alignment_rotation(Fx @ a) @ Fx


_PAIRS = ((1, 3), (2, 6), (5, 7))


def skew_symmetrize(s):
    """Project a vectorized 3x3 (column-major, length 9) onto skew form.

    Diagonal entries are zeroed. Each transposed pair receives magnitude
    ``(|a| + |b|)/2`` with opposite signs; the larger-magnitude entry keeps
    its sign and an exact tie defers to the lower index.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for i, j in _PAIRS:
        a, b = s[..., i], s[..., j]
        m = 0.5 * (np.abs(a) + np.abs(b))
        lead_a = np.abs(a) >= np.abs(b)
        sign = np.where(lead_a, np.sign(a), -np.sign(b))
        sign = np.where(sign == 0, 1.0, sign)
        out[..., i] = sign * m
        out[..., j] = -sign * m
    return out


def _sel(rows):
    """Selection matrix from a list of {index: coefficient} dicts."""
    S = np.zeros((len(rows), 12))
    for r, coeffs in enumerate(rows):
        for k, c in coeffs.items():
            S[r, k] = c
    return S


def selection_matrices(kind, linear=False):
    """(S_a, S_b) for a joint family.

    Index ``3k + c`` picks component ``c`` of control point ``k`` in the
    joint frame.
    """
    if kind == "ball":
        rows = [{0: 1}, {1: 1}, {2: 1}]
        return _sel(rows), _sel(rows)
    if kind == "hinge":
        if linear:
            rows = [{i: 1} for i in range(6)]
            return _sel(rows), _sel(rows)
        rows = [{0: 1}, {1: 1}, {2: 1}, {3: 1}, {5: 1}]
        return _sel(rows), _sel(rows)
    if kind == "universal":
        Sa = _sel([{0: 1}, {1: 1}, {2: 1}, {}])
        Sb = _sel([{0: 1}, {1: 1}, {2: 1}, {4: 1, 1: -1}])
        return Sa, Sb
    if kind == "prismatic":
        Sa = _sel([{3: 1}, {5: 1}, {}, {}, {}])
        # b's own axis edge stays parallel to e_y and its third CP
        # keeps a fixed x offset from its first one
        Sb = _sel([{0: 1}, {2: 1}, {3: 1, 0: -1}, {5: 1, 2: -1}, {0: 1, 6: -1}])
        return Sa, Sb
    raise InvalidJoint(f"unknown joint kind {kind!r}")


@dataclass
class JointSpec:
    """A joint between ``body_a`` and ``body_b`` (``None`` means the world).

    ``Y_a`` / ``Y_b`` are the per-joint rest control tetrahedra in each
    body's rest frame; for a world side they hold the fixed world CPs.
    """

    kind: str
    body_a: int
    body_b: object
    S_a: np.ndarray
    S_b: np.ndarray
    Y_a: np.ndarray
    Y_b: np.ndarray
    map_a: ControlMap
    map_b: object
    R_axis: np.ndarray
    owner: object  # "a", "b" or None for a world-owned (constant) frame
    dR: np.ndarray
    point: np.ndarray
    axis: np.ndarray = None
    axes: tuple = None
    limits: tuple = None
    k_limit: float = None
    linear: bool = False
    name: str = ""
    target: np.ndarray = None  # anchor world targets (12,)
    _const_grad: tuple = field(default=None, repr=False)

    @property
    def rank(self):
        return self.S_a.shape[0]

    @property
    def bodies(self):
        return tuple(b for b in (self.body_a, self.body_b) if b is not None)

    @property
    def is_unary(self):
        return self.body_b is None

    @property
    def rotating(self):
        return self.owner is not None


@dataclass
class ConstraintBlock:
    residual: np.ndarray
    grad_a: np.ndarray
    grad_b: np.ndarray


def _q(state):
    if state is None:
        return None
    return state.q if isinstance(state, AffineState) else np.asarray(state, dtype=float)


def _joint_cps(kind, point, axis=None, axes=None, scale=1.0):
    """World-space CPs (3x4) and the alignment rotation for a joint."""
    p = np.asarray(point, dtype=float)
    if kind in ("hinge", "prismatic"):
        R = aligned_frame(axis)
        ux, uz = R.T @ [1.0, 0.0, 0.0], R.T @ [0.0, 0.0, 1.0]
        P = np.column_stack([p, p + scale * np.asarray(axis), p + scale * uz, p + scale * ux])
        return P, R
    if kind == "universal":
        a1, a2 = (np.asarray(x, dtype=float) for x in axes)
        n = np.cross(a1, a2)
        R = np.vstack([n, a1, a2])
        P = np.column_stack([p, p + scale * a2, p + scale * a1, p + scale * n])
        return P, R
    # ball / anchor: canonical offsets in the world frame
    P = np.column_stack([p, p + scale * np.array([1.0, 0, 0]), p + scale * np.array([0, 1.0, 0]),
                         p + scale * np.array([0, 0, 1.0])])
    return P, np.eye(3)


def _check_unit(name, v, what):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)) or abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise InvalidJoint(f"joint {name}: {what} {v.tolist()} is not a unit 3-vector")
    return v


def make_joint(kind, body_a, body_b, point, pose_a, pose_b=None, axis=None, axes=None,
               scale=0.1, limits=None, k_limit=None, linear=False, name="", use_polar=True):
    """Author a joint from world-space data and the bodies' setup poses.

    ``pose_a`` / ``pose_b`` are 12-vectors ``q`` at setup (``pose_b`` is
    ignored when ``body_b`` is ``None``).
    """
    if kind not in RANKS:
        raise InvalidJoint(f"joint {name}: unknown kind {kind!r}")
    if body_a is None:
        raise WrongBodies(f"joint {name}: first body must not be the world")
    if body_a == body_b:
        raise WrongBodies(f"joint {name}: body {body_a} cannot be jointed to itself")
    if kind in ("hinge", "prismatic"):
        axis = _check_unit(name, axis, "axis")
    if kind == "universal":
        if axes is None or len(axes) != 2:
            raise InvalidJoint(f"joint {name}: universal joint needs two axes")
        axes = tuple(_check_unit(name, a, "axis") for a in axes)
        if abs(axes[0] @ axes[1]) > 1e-10:
            raise InvalidJoint(f"joint {name}: universal axes are not orthogonal")
    P, R_axis = _joint_cps(kind, point, axis, axes, scale)
    Sa, Sb = selection_matrices(kind, linear)
    qa = np.asarray(pose_a, dtype=float)
    Ya = _to_rest(qa, P)
    map_a = build_control_map(Ya)
    if body_b is None:
        Yb, map_b, owner = P.copy(), None, None
    else:
        qb = np.asarray(pose_b, dtype=float)
        Yb = _to_rest(qb, P)
        map_b = build_control_map(Yb)
        owner = "a"
    if kind == "ball" or (kind == "hinge" and linear):
        owner = None
    dR = R_axis
    if owner == "a":
        dR = R_axis @ body_rotation(unvec(qa[:9]), use_polar)
    lim = None
    if limits is not None:
        lo, hi = float(limits[0]), float(limits[1])
        if not lo <= hi:
            raise InvalidJoint(f"joint {name}: limit range [{lo}, {hi}] is empty")
        lim = (lo, hi)
    j = JointSpec(kind, body_a, body_b, Sa, Sb, Ya, Yb, map_a, map_b, R_axis, owner, dR,
                  np.asarray(point, dtype=float), axis, axes, lim, k_limit, linear, name)
    return j


def make_anchor(body, pose, point=None, mode="ball", scale=0.1, name=""):
    """Pin a body to the world: the CP at ``point`` (ball) or all four CPs (full)."""
    q = np.asarray(pose, dtype=float)
    if point is None:
        point = q[9:]
    P, _ = _joint_cps("ball", point, scale=scale)
    Y = _to_rest(q, P)
    cmap = build_control_map(Y)
    if mode == "ball":
        S = _sel([{0: 1}, {1: 1}, {2: 1}])
    elif mode == "full":
        S = np.eye(12)
    else:
        raise InvalidJoint(f"anchor {name}: unknown mode {mode!r}")
    j = JointSpec("anchor", body, None, S, S.copy(), Y, P.copy(), cmap, None, np.eye(3), None,
                  np.eye(3), np.asarray(point, dtype=float), name=name)
    j.target = P.T.ravel()
    return j


def _to_rest(q, P):
    A = unvec(q[:9])
    return np.linalg.solve(A, P - q[9:, None])


def _frame(joint, qa, qb, use_polar):
    """Current joint rotation R_J and the owner's rotation."""
    if joint.owner is None:
        return joint.dR, None
    qo = qa if joint.owner == "a" else qb
    R = body_rotation(unvec(qo[:9]), use_polar)
    return joint.dR @ R.T, R


def _block_rot(R_J):
    D = np.zeros((12, 12))
    for k in range(4):
        D[3 * k:3 * k + 3, 3 * k:3 * k + 3] = R_J
    return D


def _rotate_cps(R_J, y):
    """Apply R_J to each of the four stacked CPs in a 12-vector."""
    return (y.reshape(4, 3) @ R_J.T).ravel()


def _local_cps(joint, R_J, qa, qb):
    ya = joint.map_a.T @ qa
    yb = joint.Y_b.T.ravel() if joint.body_b is None else joint.map_b.T @ qb
    return _rotate_cps(R_J, ya), _rotate_cps(R_J, yb), ya, yb


def _check_states(joint, qa, qb):
    if qa is None:
        raise WrongBodies(f"joint {joint.name}: missing state for body {joint.body_a}")
    if joint.body_b is not None and qb is None:
        raise WrongBodies(f"joint {joint.name}: missing state for body {joint.body_b}")


def eval_constraint(joint, q_a, q_b=None, use_polar=True):
    """Residual vector of length ``joint.rank``."""
    qa, qb = _q(q_a), _q(q_b)
    _check_states(joint, qa, qb)
    if joint.kind == "anchor":
        return joint.S_a @ (joint.map_a.T @ qa - joint.target)
    R_J, _ = _frame(joint, qa, qb, use_polar)
    ta, tb, _, _ = _local_cps(joint, R_J, qa, qb)
    return joint.S_a @ ta - joint.S_b @ tb


def _rotation_columns(joint, R, qa, qb):
    """d C / d q_owner through R_J, for the nine A entries of the owner."""
    ya = (joint.map_a.T @ qa).reshape(4, 3)
    yb = joint.Y_b.T if joint.body_b is None else (joint.map_b.T @ qb).reshape(4, 3)
    # body-frame derivative of Rᵀ: K_l Rᵀ with K_l = skew(E_lᵀ R); q index l = 3j + i is A[i, j]
    M = np.zeros((9, 3, 3))
    for l in range(9):
        M[l, l // 3, :] = R[l % 3, :]
    K = skew_symmetrize(M.transpose(0, 2, 1).reshape(9, 9)).reshape(9, 3, 3).transpose(0, 2, 1)
    dRJ = np.einsum("ab,lbc,dc->lad", joint.dR, K, R)
    da = np.einsum("lad,kd->lka", dRJ, ya).reshape(9, 12)
    db = np.einsum("lad,kd->lka", dRJ, yb).reshape(9, 12)
    return joint.S_a @ da.T - joint.S_b @ db.T


def eval_gradient(joint, q_a, q_b=None, use_polar=True):
    """Residual plus gradients with respect to each incident body's ``q``."""
    qa, qb = _q(q_a), _q(q_b)
    _check_states(joint, qa, qb)
    if joint.kind == "anchor":
        if joint._const_grad is None:
            joint._const_grad = (joint.S_a @ joint.map_a.T, None)
        return ConstraintBlock(eval_constraint(joint, qa, qb), joint._const_grad[0], None)
    R_J, R = _frame(joint, qa, qb, use_polar)
    ta, tb, _, _ = _local_cps(joint, R_J, qa, qb)
    res = joint.S_a @ ta - joint.S_b @ tb
    if not joint.rotating:
        if joint._const_grad is None:
            D = _block_rot(R_J)
            ga = joint.S_a @ D @ joint.map_a.T
            gb = None if joint.body_b is None else -joint.S_b @ D @ joint.map_b.T
            joint._const_grad = (ga, gb)
        return ConstraintBlock(res, *joint._const_grad)
    D = _block_rot(R_J)
    ga = joint.S_a @ D @ joint.map_a.T
    gb = -joint.S_b @ D @ joint.map_b.T
    rot = _rotation_columns(joint, R, qa, qb)
    if joint.owner == "a":
        ga = ga.copy()
        ga[:, :9] += rot
    else:
        gb = gb.copy()
        gb[:, :9] += rot
    return ConstraintBlock(res, ga, gb)


def default_k_limit(youngs, volume, length):
    return 10.0 * youngs * volume / length**2


def joint_coordinate(joint, q_a, q_b=None, use_polar=True):
    """Scalar hinge angle (rad, in (-π, π]) or prismatic displacement (m)."""
    qa, qb = _q(q_a), _q(q_b)
    R_J, _ = _frame(joint, qa, qb, use_polar)
    _, _, ya, yb = _local_cps(joint, R_J, qa, qb)
    ya, yb = ya.reshape(4, 3), yb.reshape(4, 3)
    if joint.kind == "hinge":
        d = R_J @ (yb[2] - yb[0])
        return float(np.arctan2(d[0], d[2]))
    if joint.kind == "prismatic":
        return float((R_J @ (yb[0] - ya[0]))[1])
    raise NoLimitDefined(f"joint {joint.name}: {joint.kind} joints have no scalar coordinate")


def coordinate_gradient(joint, q_a, q_b=None, use_polar=True, step=1e-7):
    """Central-difference gradient of :func:`joint_coordinate` (per body)."""
    qa, qb = _q(q_a), _q(q_b)
    out = []
    for side, q in (("a", qa), ("b", qb)):
        if q is None:
            out.append(None)
            continue
        g = np.empty(12)
        for i in range(12):
            qp, qm = q.copy(), q.copy()
            qp[i] += step
            qm[i] -= step
            args_p = (qp, qb) if side == "a" else (qa, qp)
            args_m = (qm, qb) if side == "a" else (qa, qm)
            dp = joint_coordinate(joint, *args_p, use_polar=use_polar)
            dm = joint_coordinate(joint, *args_m, use_polar=use_polar)
            diff = dp - dm
            if joint.kind == "hinge":
                diff = (diff + np.pi) % (2 * np.pi) - np.pi
            g[i] = diff / (2 * step)
        out.append(g)
    return out


@dataclass
class LimitResult:
    clamped: bool
    theta: float
    theta_hat: float
    penalty: float  # k_limit * (θ - θ̂)
    penalty_a: np.ndarray = None  # primal force on body a
    penalty_b: np.ndarray = None
    grad_a: np.ndarray = None  # dθ/dq for the hold row
    grad_b: np.ndarray = None


def apply_joint_limits(joint, q_a, q_b=None, theta=None, use_polar=True):
    """Clamp the joint coordinate to its range.

    ``theta`` overrides the measured coordinate (used by callers that unwrap
    hinge angles over time). When clamped, the returned penalty forces
    ``-k (θ - θ̂) ∂θ/∂q`` are meant for the primal right-hand side, and
    ``grad_*`` define the one-iteration hold row ``θ = θ̂``.
    """
    if joint.limits is None:
        raise NoLimitDefined(f"joint {joint.name} has no limits")
    if theta is None:
        theta = joint_coordinate(joint, q_a, q_b, use_polar)
    lo, hi = joint.limits
    theta_hat = min(max(theta, lo), hi)
    if theta_hat == theta:
        return LimitResult(False, theta, theta_hat, 0.0)
    k = joint.k_limit if joint.k_limit is not None else 0.0
    pen = k * (theta - theta_hat)
    ga, gb = coordinate_gradient(joint, q_a, q_b, use_polar)
    pa = -pen * ga
    pb = None if gb is None else -pen * gb
    return LimitResult(True, theta, theta_hat, pen, pa, pb, ga, gb)
