import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisson_safety import (BodyPoint, JointSpec, LinkGeometry, RobotModel,
                            Transform, body_point_position, default_models,
                            forward_kinematics, point_jacobian)
from poisson_safety.kinematics import model_reach


def planar_fk_oracle(l1, l2, q1, q2):
    return np.array([
        l1 * np.cos(q1) + l2 * np.cos(q1 + q2),
        l1 * np.sin(q1) + l2 * np.sin(q1 + q2),
        0.0,
    ])


class TestForwardKinematics:
    def test_zero_config_composes_offsets(self, arm7):
        poses = forward_kinematics(arm7, np.zeros(7))
        expect = np.zeros(3)
        for k, spec in enumerate(arm7.joints):
            expect = expect + spec.parent_offset.pos  # offsets stay axis-aligned at q=0
            np.testing.assert_allclose(poses[k + 1].pos, expect, atol=1e-12)

    def test_planar_matches_trig_closed_form(self, planar2):
        rng = np.random.default_rng(0)
        tip = planar2.end_effector()
        for _ in range(25):
            q = rng.uniform(-np.pi, np.pi, size=2)
            got = body_point_position(planar2, q, tip)
            np.testing.assert_allclose(got, planar_fk_oracle(0.5, 0.4, *q), atol=1e-12)

    def test_prismatic_translates_along_axis(self):
        j = JointSpec(Transform.identity(), np.array([0.0, 0.0, 1.0]),
                      kind="prismatic", q_min=-1.0, q_max=1.0)
        model = RobotModel("slider", (j,), (LinkGeometry(), LinkGeometry()))
        poses = forward_kinematics(model, np.array([0.3]))
        np.testing.assert_allclose(poses[1].pos, [0.0, 0.0, 0.3], atol=1e-15)
        np.testing.assert_allclose(poses[1].rot, np.eye(3), atol=1e-15)

    def test_rotations_are_proper(self, arm7):
        rng = np.random.default_rng(1)
        for _ in range(20):
            q = rng.uniform(arm7.q_lower, arm7.q_upper)
            for pose in forward_kinematics(arm7, q):
                assert abs(np.linalg.det(pose.rot) - 1.0) < 1e-9
                np.testing.assert_allclose(pose.rot @ pose.rot.T, np.eye(3), atol=1e-9)

    def test_wrong_q_length_rejected(self, arm7):
        with pytest.raises(ValueError):
            forward_kinematics(arm7, np.zeros(5))


class TestBodyPoints:
    def test_local_origin_is_frame_origin(self, arm7):
        q = np.linspace(-0.5, 0.5, 7)
        poses = forward_kinematics(arm7, q)
        got = body_point_position(arm7, q, BodyPoint(3, np.zeros(3)))
        np.testing.assert_allclose(got, poses[3].pos, atol=1e-12)

    def test_planar_tip_point(self, planar2):
        q = np.array([0.3, -0.7])
        got = body_point_position(planar2, q, planar2.end_effector())
        np.testing.assert_allclose(got, planar_fk_oracle(0.5, 0.4, 0.3, -0.7), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_rigid_distances_configuration_invariant(self, arm7, seed):
        rng = np.random.default_rng(seed)
        p1 = BodyPoint(4, rng.uniform(-0.1, 0.1, 3))
        p2 = BodyPoint(4, rng.uniform(-0.1, 0.1, 3))
        ref = np.linalg.norm(p1.local - p2.local)
        q = rng.uniform(arm7.q_lower, arm7.q_upper)
        d = np.linalg.norm(body_point_position(arm7, q, p1)
                           - body_point_position(arm7, q, p2))
        assert d == pytest.approx(ref, abs=1e-12)


class TestJacobians:
    def test_base_point_has_zero_jacobian(self, arm7):
        q = np.zeros(7)
        J = point_jacobian(arm7, q, BodyPoint(0, np.array([0.0, 0.0, 0.25])))
        assert np.all(J == 0.0)

    def test_distal_columns_are_zero(self, arm7):
        q = np.linspace(0.1, 0.7, 7)
        J = point_jacobian(arm7, q, BodyPoint(3, np.array([0.02, 0.0, 0.1])))
        assert np.all(J[:, 3:] == 0.0)

    def test_finite_difference_agreement(self, arm7):
        rng = np.random.default_rng(2)
        step = 1e-6
        worst = 0.0
        for _ in range(50):
            q = rng.uniform(arm7.q_lower, arm7.q_upper)
            link = int(rng.integers(1, 8))
            p = BodyPoint(link, rng.uniform(-0.1, 0.1, 3))
            J = point_jacobian(arm7, q, p)
            scale = max(1.0, np.abs(J).max())
            for k in range(7):
                dq = np.zeros(7)
                dq[k] = step
                fd = (body_point_position(arm7, q + dq, p)
                      - body_point_position(arm7, q - dq, p)) / (2 * step)
                worst = max(worst, np.abs(fd - J[:, k]).max() / scale)
        assert worst <= 1e-5

    def test_velocity_transport_first_order(self, arm7):
        rng = np.random.default_rng(3)
        q = rng.uniform(arm7.q_lower, arm7.q_upper)
        v = rng.uniform(-1.0, 1.0, 7)
        p = BodyPoint(7, np.array([0.0, 0.02, 0.1]))
        Jv = point_jacobian(arm7, q, p) @ v
        errs = []
        for dt in (1e-3, 5e-4, 2.5e-4):
            fd = (body_point_position(arm7, q + v * dt, p)
                  - body_point_position(arm7, q, p)) / dt
            errs.append(np.linalg.norm(fd - Jv))
        # halving dt halves the error (first-order remainder)
        assert errs[1] <= 0.6 * errs[0]
        assert errs[2] <= 0.6 * errs[1]


class TestCatalog:
    def test_seven_joint_model_present(self):
        models = default_models()
        assert models["arm7"].n == 7

    def test_reach_fits_workspace(self, arm7):
        assert model_reach(arm7) <= 1.0

    def test_limits_well_formed(self, arm7):
        assert np.all(arm7.q_lower < arm7.q_upper)
        assert np.all(arm7.v_limits > 0)

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            JointSpec(Transform.identity(), np.array([0.0, 0.0, 2.0]))
        with pytest.raises(ValueError):
            JointSpec(Transform.identity(), np.array([0.0, 0.0, 1.0]),
                      q_min=1.0, q_max=-1.0)
        with pytest.raises(ValueError):
            LinkGeometry((((0, 0, 0), (1, 0, 0), -0.1),))
