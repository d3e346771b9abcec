from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlpilot.geometry import Pose6D, RigidTransform, normalize_angle, rpy_to_matrix


class TestNormalizeAngle:
    def test_pi_stays_pi(self):
        assert normalize_angle(math.pi) == math.pi

    def test_minus_pi_maps_to_pi(self):
        assert normalize_angle(-math.pi) == math.pi

    @given(st.floats(-100.0, 100.0))
    def test_range_and_equivalence(self, angle):
        wrapped = normalize_angle(angle)
        assert -math.pi < wrapped <= math.pi
        assert math.isclose(math.sin(wrapped), math.sin(angle), abs_tol=1e-9)
        assert math.isclose(math.cos(wrapped), math.cos(angle), abs_tol=1e-9)


class TestPose6D:
    def test_angles_normalized_on_construction(self):
        pose = Pose6D(0, 0, 0, roll=3 * math.pi, yaw=-math.pi)
        assert pose.roll == math.pi
        assert pose.yaw == math.pi

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Pose6D(float("nan"), 0, 0)
        with pytest.raises(ValueError):
            Pose6D(0, 0, 0, pitch=float("inf"))

    def test_matrix_matches_rpy(self):
        pose = Pose6D(1, 2, 3, roll=0.3, pitch=-0.2, yaw=1.1)
        m = pose.as_matrix()
        assert np.allclose(m[:3, :3], rpy_to_matrix(0.3, -0.2, 1.1))
        assert np.allclose(m[:3, 3], [1, 2, 3])

    def test_dict_round_trip(self):
        pose = Pose6D(0.5, -0.1, 0.8, math.pi, 0.0, 0.25)
        assert Pose6D.from_dict(pose.to_dict()) == pose

    def test_top_down_attitude_flips_z(self):
        # roll=pi points the tool (and camera) straight down.
        pose = Pose6D(0, 0, 0, roll=math.pi)
        assert np.allclose(pose.rotation() @ [0, 0, 1], [0, 0, -1])


class TestRigidTransform:
    def test_identity(self):
        t = RigidTransform.identity()
        assert np.allclose(t.apply([1, 2, 3]), [1, 2, 3])

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            RigidTransform(np.zeros(3), np.diag([1.0, 1.0, -1.0]))

    def test_rejects_non_orthonormal(self):
        bad = np.eye(3)
        bad[0, 1] = 1e-6
        with pytest.raises(ValueError):
            RigidTransform(np.zeros(3), bad)

    def test_tolerates_tiny_error(self):
        nearly = np.eye(3)
        nearly[0, 1] = 1e-12
        RigidTransform(np.zeros(3), nearly)

    def test_apply_matches_matrix(self):
        rotation = rpy_to_matrix(0.2, 0.5, -0.7)
        t = RigidTransform(np.array([0.1, 0.2, 0.3]), rotation)
        point = np.array([0.4, -0.5, 0.6])
        via_matrix = (t.as_matrix() @ np.append(point, 1.0))[:3]
        assert np.allclose(t.apply(point), via_matrix)

    def test_dict_round_trip_is_equal(self):
        t = RigidTransform(np.array([1.0, 2.0, 3.0]), rpy_to_matrix(0.1, 0.2, 0.3))
        assert RigidTransform.from_dict(t.to_dict()) == t


@given(
    st.floats(-math.pi, math.pi),
    st.floats(-math.pi / 2 + 0.01, math.pi / 2 - 0.01),
    st.floats(-math.pi, math.pi),
)
def test_rpy_matrices_are_rotations(roll, pitch, yaw):
    r = rpy_to_matrix(roll, pitch, yaw)
    assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert math.isclose(np.linalg.det(r), 1.0, abs_tol=1e-12)
