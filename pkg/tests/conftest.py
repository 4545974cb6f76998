"""Shared fixtures: cameras, rigs, and random pose helpers."""

import math

import numpy as np
import pytest

from camselect.geometry import CameraModel, Pose, Rig, rot_z


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation via QR with sign fix."""
    A = rng.normal(size=(3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0.0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_pose(rng: np.random.Generator, translation_scale: float = 5.0) -> Pose:
    return Pose(random_rotation(rng), rng.normal(scale=translation_scale, size=3))


# Camera frame has +z forward; this mounts it looking along body +x.
FORWARD_MOUNT = np.array([[0.0, 0.0, 1.0],
                          [-1.0, 0.0, 0.0],
                          [0.0, -1.0, 0.0]])


def make_camera(camera_id: int = 0, yaw_deg: float = 0.0,
                offset=(0.0, 0.0, 0.0), fx: float = 400.0,
                width: int = 640, height: int = 480) -> CameraModel:
    """Camera mounted on the body, yawed from the forward (+x) direction."""
    R = rot_z(math.radians(yaw_deg)) @ FORWARD_MOUNT
    return CameraModel(camera_id=camera_id, fx=fx, fy=fx,
                       cx=width / 2.0, cy=height / 2.0,
                       width=width, height=height,
                       extrinsic=Pose(R, np.asarray(offset, dtype=float)))


@pytest.fixture
def camera() -> CameraModel:
    """Forward-looking camera with identity-friendly geometry."""
    return make_camera()


@pytest.fixture
def four_camera_rig() -> Rig:
    return Rig((
        make_camera(0, yaw_deg=25.0, offset=(1.0, 0.4, 1.5)),
        make_camera(1, yaw_deg=-25.0, offset=(1.0, -0.4, 1.5)),
        make_camera(2, yaw_deg=90.0, offset=(0.0, 0.6, 1.5)),
        make_camera(3, yaw_deg=-90.0, offset=(0.0, -0.6, 1.5)),
    ))
