"""Rigid-body poses, pinhole cameras, and pose-error metrics.

Conventions used throughout the package:

* A ``Pose`` maps points from its *local* frame into its *parent* frame:
  ``x_parent = R @ x_local + t``.  A body pose is world-from-body, a camera
  extrinsic is body-from-camera.
* The camera frame has +z along the optical axis (points with positive z are
  in front of the camera), +x to the right and +y down.
* Pixel coordinates are (u, v) with u along +x and v along +y, origin at the
  top-left corner.  A pixel is in bounds when ``0 <= u < width`` and
  ``0 <= v < height``.
* Rotations are 3x3 orthonormal matrices with determinant +1.  Angles are
  radians internally; reported rotation errors are degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Pose",
    "CameraModel",
    "Rig",
    "PoseError",
    "pose_error",
    "project",
    "backproject",
    "rot_x",
    "rot_y",
    "rot_z",
    "so3_exp",
]

# Tolerance on ||R^T R - I|| for accepting a rotation matrix.
_ROTATION_TOL = 1e-9


def _as_float_array(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _check_rotation(R: np.ndarray) -> None:
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > _ROTATION_TOL:
        raise ValueError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
    if np.linalg.det(R) < 0.0:
        raise ValueError("rotation has negative determinant (reflection)")


@dataclass(frozen=True)
class Pose:
    """Rigid transform ``x_parent = rotation @ x_local + translation``.

    Immutable; the stored arrays are write-protected copies of the inputs.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _as_float_array(self.rotation, (3, 3), "rotation")
        t = _as_float_array(self.translation, (3,), "translation")
        _check_rotation(R)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (n, 3) stack into the parent frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous transform."""
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def to_numbers(self) -> list[float]:
        """Serialize as 12 floats: row-major rotation, then translation."""
        return [float(x) for x in self.rotation.reshape(-1)] + \
               [float(x) for x in self.translation]

    @classmethod
    def from_numbers(cls, numbers) -> "Pose":
        vals = np.asarray(numbers, dtype=np.float64)
        if vals.shape != (12,):
            raise ValueError(f"pose serialization needs 12 numbers, got {vals.shape}")
        return cls(vals[:9].reshape(3, 3), vals[9:])


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def so3_exp(omega: np.ndarray) -> np.ndarray:
    """Rodrigues formula: rotation matrix for axis-angle vector ``omega``."""
    omega = np.asarray(omega, dtype=np.float64)
    theta = np.linalg.norm(omega)
    K = np.array([[0.0, -omega[2], omega[1]],
                  [omega[2], 0.0, -omega[0]],
                  [-omega[1], omega[0], 0.0]])
    if theta < 1e-12:
        # second-order expansion keeps orthonormality to round-off
        return np.eye(3) + K + 0.5 * (K @ K)
    return (np.eye(3) + math.sin(theta) / theta * K
            + (1.0 - math.cos(theta)) / theta**2 * (K @ K))


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsics plus a fixed mounting pose on the body.

    ``extrinsic`` is body-from-camera, so the camera's pose in the world is
    ``body_pose.compose(extrinsic)``.
    """

    camera_id: int
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsic: Pose

    def __post_init__(self):
        if self.camera_id < 0:
            raise ValueError("camera_id must be non-negative")
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0.0 <= self.cx < self.width and 0.0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def in_bounds(self, pixels: np.ndarray) -> np.ndarray:
        """Boolean mask for (n, 2) pixels inside the image."""
        px = np.asarray(pixels, dtype=np.float64)
        return ((px[..., 0] >= 0.0) & (px[..., 0] < self.width)
                & (px[..., 1] >= 0.0) & (px[..., 1] < self.height))


@dataclass(frozen=True)
class Rig:
    """Cameras rigidly mounted on one body, ids contiguous from zero."""

    cameras: tuple[CameraModel, ...]

    def __post_init__(self):
        cams = tuple(self.cameras)
        if not cams:
            raise ValueError("rig needs at least one camera")
        ids = [c.camera_id for c in cams]
        if ids != list(range(len(cams))):
            raise ValueError(f"camera ids must be 0..{len(cams) - 1} in order, got {ids}")
        object.__setattr__(self, "cameras", cams)

    def __len__(self) -> int:
        return len(self.cameras)

    def __iter__(self):
        return iter(self.cameras)

    def __getitem__(self, camera_id: int) -> CameraModel:
        return self.cameras[camera_id]


def _world_from_camera(cam: CameraModel, body_pose: Pose) -> Pose:
    return body_pose.compose(cam.extrinsic)


def project_points(cam: CameraModel, body_pose: Pose,
                   points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (n, 3) world points; returns ((n, 2) pixels, (n,) depths).

    Pixels for points at or behind the camera plane (depth <= 0) are NaN;
    callers must gate on the returned depths.
    """
    pts = np.asarray(points, dtype=np.float64)
    wfc = _world_from_camera(cam, body_pose)
    local = (pts - wfc.translation) @ wfc.rotation  # rows of R^T (x - t)
    z = local[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * local[:, 0] / z + cam.cx
        v = cam.fy * local[:, 1] / z + cam.cy
    px = np.column_stack([u, v])
    px[z <= 0.0] = np.nan
    return px, z


def project(cam: CameraModel, body_pose: Pose, world_point) -> np.ndarray | None:
    """Project one world point to a pixel, or None if it lies behind the camera.

    Behind-the-camera is an expected outcome, not an error; only non-finite
    input is rejected.
    """
    pt = _as_float_array(world_point, (3,), "world_point")
    px, z = project_points(cam, body_pose, pt[None, :])
    if z[0] <= 0.0:
        return None
    return px[0]


def backproject(cam: CameraModel, body_pose: Pose, pixel, depth: float) -> np.ndarray:
    """World point on the ray through ``pixel`` at camera-frame depth ``depth``."""
    px = _as_float_array(pixel, (2,), "pixel")
    if depth <= 0.0:
        raise ValueError("depth must be positive")
    local = np.array([(px[0] - cam.cx) / cam.fx * depth,
                      (px[1] - cam.cy) / cam.fy * depth,
                      depth])
    return _world_from_camera(cam, body_pose).apply(local)


@dataclass(frozen=True)
class PoseError:
    """Translation error in meters, rotation error in degrees.

    Both are finite by construction; a failed localization has no PoseError
    (callers represent it as None or an infinite entry in an error array).
    """

    translation_err: float
    rotation_err: float

    def __post_init__(self):
        if not (math.isfinite(self.translation_err) and self.translation_err >= 0.0):
            raise ValueError("translation_err must be finite and non-negative")
        if not (math.isfinite(self.rotation_err) and 0.0 <= self.rotation_err <= 180.0):
            raise ValueError("rotation_err must lie in [0, 180] degrees")


def rotation_angle_deg(R1: np.ndarray, R2: np.ndarray) -> float:
    """Geodesic angle between two rotations, in degrees.

    Computed as atan2(sin, cos) of the relative rotation: the acos form
    loses ~8 digits near identity, which matters when asserting sub-1e-6
    degree recovery.
    """
    A = R1 @ R2.T
    c = (float(np.trace(A)) - 1.0) / 2.0
    s = 0.5 * math.sqrt((A[2, 1] - A[1, 2]) ** 2 + (A[0, 2] - A[2, 0]) ** 2
                        + (A[1, 0] - A[0, 1]) ** 2)
    return math.degrees(math.atan2(s, c))


def pose_error(estimate: Pose, truth: Pose) -> PoseError:
    """Error between two world-frame poses.

    Translation error is the Euclidean distance between the two world-frame
    positions; rotation error is the geodesic angle between the rotations.
    """
    dt = float(np.linalg.norm(estimate.translation - truth.translation))
    return PoseError(dt, rotation_angle_deg(estimate.rotation, truth.rotation))
