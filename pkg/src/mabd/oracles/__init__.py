"""Independent reference implementations used by tests and benchmarks.

Nothing here imports the fast-path solver, joint or body modules.
"""
from .dense import SingularKKT, dense_kkt_solve
from .elliptic import EllipticPendulum, OutOfDomain, elliptic_K, jacobi_sn, pendulum_theta
from .fd import central_diff_grad, central_diff_jac
from .quadrature import tet_quadrature_moments
from .rigid import RigidReference, matrix_to_quat, quat_to_matrix, rk4_rigid_run, rk4_rigid_step
from .vanilla import VanillaABD
