"""Pose algebra, projection, and error-metric tests.

Expected values for the composition and projection cases are computed
independently in the tests (explicit 4x4 products, hand pinhole arithmetic)
rather than through the functions under test.
"""

import math

import numpy as np
import pytest

from camselect.geometry import (
    CameraModel,
    Pose,
    PoseError,
    Rig,
    backproject,
    pose_error,
    project,
    project_points,
    rot_x,
    rot_y,
    rot_z,
    so3_exp,
)

from conftest import make_camera, random_pose, random_rotation


class TestPoseAlgebra:
    def test_identity_compose_is_identity(self):
        p = Pose.identity().compose(Pose.identity())
        np.testing.assert_array_equal(p.rotation, np.eye(3))
        np.testing.assert_array_equal(p.translation, np.zeros(3))

    def test_compose_matches_matrix_product(self):
        # oracle: explicit homogeneous 4x4 product
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = random_pose(rng)
            b = random_pose(rng)
            T = a.matrix() @ b.matrix()
            c = a.compose(b)
            np.testing.assert_allclose(c.matrix(), T, atol=1e-12)

    def test_two_quarter_turns_make_half_turn(self):
        quarter = Pose(rot_z(math.pi / 2.0), np.zeros(3))
        half = quarter.compose(quarter)
        expected = np.array([[-1.0, 0.0, 0.0],
                             [0.0, -1.0, 0.0],
                             [0.0, 0.0, 1.0]])
        np.testing.assert_allclose(half.rotation, expected, atol=1e-15)

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(11)
        p = random_pose(rng)
        back = p.compose(p.inverse())
        np.testing.assert_allclose(back.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(back.translation, np.zeros(3), atol=1e-12)

    def test_apply_matches_manual_transform(self):
        rng = np.random.default_rng(3)
        p = random_pose(rng)
        pts = rng.normal(size=(5, 3))
        expected = (p.rotation @ pts.T).T + p.translation
        np.testing.assert_allclose(p.apply(pts), expected, atol=1e-12)

    def test_rejects_non_orthonormal_rotation(self):
        R = np.eye(3)
        R[0, 0] = 1.0 + 1e-6
        with pytest.raises(ValueError, match="orthonormal"):
            Pose(R, np.zeros(3))

    def test_rejects_reflection(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError, match="determinant"):
            Pose(R, np.zeros(3))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            Pose(np.eye(3), np.array([0.0, np.nan, 0.0]))

    def test_serialization_roundtrip(self):
        rng = np.random.default_rng(5)
        p = random_pose(rng)
        numbers = p.to_numbers()
        assert len(numbers) == 12
        q = Pose.from_numbers(numbers)
        np.testing.assert_array_equal(q.rotation, p.rotation)
        np.testing.assert_array_equal(q.translation, p.translation)

    def test_rotation_helpers_are_rotations(self):
        for R in (rot_x(0.3), rot_y(-1.2), rot_z(2.8), so3_exp([0.1, -0.2, 0.4])):
            np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
            assert np.linalg.det(R) > 0.0

    def test_so3_exp_small_angle(self):
        R = so3_exp([1e-14, 0.0, 0.0])
        np.testing.assert_allclose(R, np.eye(3), atol=1e-13)


class TestProjection:
    def test_centered_point_hits_principal_point(self):
        cam = CameraModel(camera_id=0, fx=100.0, fy=100.0, cx=50.0, cy=50.0,
                          width=100, height=100, extrinsic=Pose.identity())
        # camera frame == body frame == world frame here; point on the axis
        px = project(cam, Pose.identity(), [0.0, 0.0, 2.0])
        np.testing.assert_allclose(px, [50.0, 50.0], atol=1e-12)

    def test_hand_computed_pinhole(self):
        # u = fx * x / z + cx = 100 * 1 / 2 + 50 = 100, v = cy = 50
        cam = CameraModel(camera_id=0, fx=100.0, fy=100.0, cx=50.0, cy=50.0,
                          width=200, height=200, extrinsic=Pose.identity())
        px = project(cam, Pose.identity(), [1.0, 0.0, 2.0])
        np.testing.assert_allclose(px, [100.0, 50.0], atol=1e-12)

    def test_behind_camera_is_none(self):
        cam = CameraModel(camera_id=0, fx=100.0, fy=100.0, cx=50.0, cy=50.0,
                          width=100, height=100, extrinsic=Pose.identity())
        assert project(cam, Pose.identity(), [0.0, 0.0, -1.0]) is None
        assert project(cam, Pose.identity(), [0.0, 0.0, 0.0]) is None

    def test_nan_input_rejected(self):
        cam = CameraModel(camera_id=0, fx=100.0, fy=100.0, cx=50.0, cy=50.0,
                          width=100, height=100, extrinsic=Pose.identity())
        with pytest.raises(ValueError, match="finite"):
            project(cam, Pose.identity(), [np.nan, 0.0, 1.0])

    def test_extrinsic_and_body_pose_chain(self):
        # Forward-mounted camera on a body at x=10: a world point 5 m ahead
        # of the body sits 4 m in front of the camera mounted 1 m forward.
        cam = make_camera(fx=400.0)  # mounted at body origin, looking +x
        body = Pose(np.eye(3), np.array([10.0, 0.0, 0.0]))
        px, z = project_points(cam, body, np.array([[15.0, 0.0, 0.0]]))
        np.testing.assert_allclose(z, [5.0], atol=1e-12)
        np.testing.assert_allclose(px, [[320.0, 240.0]], atol=1e-12)

    def test_project_backproject_roundtrip(self):
        rng = np.random.default_rng(23)
        cam = make_camera(yaw_deg=30.0, offset=(0.5, -0.2, 1.1))
        for _ in range(50):
            body = random_pose(rng)
            wfc = body.compose(cam.extrinsic)
            local = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4), 1.0])
            local *= rng.uniform(2.0, 20.0)
            point = wfc.apply(local)
            px = project(cam, body, point)
            assert px is not None
            recovered = backproject(cam, body, px, float(local[2]))
            np.testing.assert_allclose(recovered, point, atol=1e-6)

    def test_rig_validation(self):
        cams = [make_camera(0), make_camera(1)]
        assert len(Rig(tuple(cams))) == 2
        with pytest.raises(ValueError, match="camera ids"):
            Rig((make_camera(0), make_camera(0)))
        with pytest.raises(ValueError, match="at least one"):
            Rig(())


class TestPoseError:
    def test_identical_poses(self):
        rng = np.random.default_rng(2)
        p = random_pose(rng)
        err = pose_error(p, p)
        assert err.translation_err == 0.0
        assert err.rotation_err == 0.0

    def test_three_four_five_translation(self):
        a = Pose(np.eye(3), np.array([3.0, 4.0, 0.0]))
        err = pose_error(a, Pose.identity())
        assert err.translation_err == pytest.approx(5.0, abs=1e-12)
        assert err.rotation_err == 0.0

    def test_quarter_turn_is_90_degrees(self):
        a = Pose(rot_z(math.pi / 2.0), np.zeros(3))
        err = pose_error(a, Pose.identity())
        assert err.rotation_err == pytest.approx(90.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            a, b = random_pose(rng), random_pose(rng)
            ab, ba = pose_error(a, b), pose_error(b, a)
            assert ab.translation_err == pytest.approx(ba.translation_err, abs=1e-12)
            assert ab.rotation_err == pytest.approx(ba.rotation_err, abs=1e-9)

    def test_rotation_error_bounds(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            a, b = random_pose(rng), random_pose(rng)
            err = pose_error(a, b)
            assert 0.0 <= err.rotation_err <= 180.0

    def test_near_identity_clamp(self):
        # trace can exceed 3 by round-off; acos input must be clamped
        R = so3_exp([1e-9, 0.0, 0.0])
        err = pose_error(Pose(R, np.zeros(3)), Pose.identity())
        assert err.rotation_err < 1e-6

    def test_known_angle_against_formula(self):
        # oracle: arccos((trace - 1) / 2) computed right here
        rng = np.random.default_rng(31)
        for _ in range(20):
            R1, R2 = random_rotation(rng), random_rotation(rng)
            trace = np.trace(R1 @ R2.T)
            expected = math.degrees(math.acos(max(-1.0, min(1.0, (trace - 1.0) / 2.0))))
            err = pose_error(Pose(R1, np.zeros(3)), Pose(R2, np.zeros(3)))
            assert err.rotation_err == pytest.approx(expected, abs=1e-9)

    def test_pose_error_validation(self):
        with pytest.raises(ValueError):
            PoseError(-0.1, 0.0)
        with pytest.raises(ValueError):
            PoseError(0.0, 181.0)
        with pytest.raises(ValueError):
            PoseError(float("inf"), 0.0)
