import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from mabd.body import AffineState, precompute_body, vec
from mabd.geometry import Box, box_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cube_model():
    return precompute_body(Box((0.1, 0.1, 0.1)), 1000.0, 1e9, 0.3, 1e-3)


@pytest.fixture
def mesh_model():
    return precompute_body(box_mesh((0.2, 0.1, 0.05), center=(0.01, -0.02, 0.03)), 800.0, 1e8, 0.25, 1e-2)


def random_rotation(rng):
    return Rotation.from_rotvec(rng.standard_normal(3)).as_matrix()


def near_rigid_state(rng, strain=1e-4, with_velocity=True):
    A = random_rotation(rng) @ (np.eye(3) + strain * rng.standard_normal((3, 3)))
    s = AffineState.from_pose(A, rng.standard_normal(3))
    if with_velocity:
        s.qdot = rng.standard_normal(12)
    return s


def rigid_state(rng, omega=None, v=None):
    from mabd.body import SpatialTwist, embedding_map

    s = AffineState.from_pose(random_rotation(rng), rng.standard_normal(3))
    w = rng.standard_normal(3) if omega is None else np.asarray(omega, float)
    u = rng.standard_normal(3) if v is None else np.asarray(v, float)
    s.qdot = embedding_map(s, SpatialTwist(w, u))
    return s
