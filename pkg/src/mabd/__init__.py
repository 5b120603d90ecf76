"""Co-rotated affine body dynamics with joint constraints solved in dual space."""
from .body import (
    AffineState, BodyModel, HessianFactor, NonSPD, SpatialTwist, SpatialWrench,
    elastic_energy, elastic_gradient, embedding_map, gyroscopic_residual, newton_step_single,
    polar_rotation, precompute_body, twist_map, wrench_to_affine,
)
from .joints import (
    ConstraintBlock, ControlMap, JointSpec, apply_joint_limits, build_control_map,
    eval_constraint, eval_gradient, make_anchor, make_joint, skew_symmetrize,
)
from .kernels import BACKEND
from .kkt import (
    KKTProblem, SolverFailure, Topology, classify_topology, solve_chain, solve_graph_gs,
    solve_island, solve_loop, solve_tree_aba,
)
from .scene import ParseError, Scene, TrajectoryRecord, ValidationError, load_scene, momentum_energy

__version__ = "0.1.0"
