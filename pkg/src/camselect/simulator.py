"""Synthetic world, traverses, and correspondence generation.

A world is a straight trajectory along +x with landmarks scattered in
lateral bands on both sides, split into fixed-length regions.  Observation
quality (visibility, pixel noise, outliers, dropout) is controlled per
camera and per region, so degradations can be planted at known locations
and rediscovered by the selection pipeline.

Determinism contract: the world seed fixes the landmark cloud and its
mapped (perturbed) copy; a traverse seed plus (frame index, camera id)
fixes every random draw for that frame-camera pair through an isolated
``SeedSequence([traverse_seed, frame_index, camera_id])`` stream.  Changing
the profile of one camera in one region therefore cannot disturb any other
frame-camera pair.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .geometry import CameraModel, Pose, Rig, pose_error, project_points, rot_z
from .localizer import LocalizationResult, RansacConfig, localize_pnp_ransac

__all__ = [
    "K_SHIFT",
    "WorldConfig",
    "QualityParams",
    "CameraQualityProfile",
    "World",
    "TraverseRole",
    "CameraObservations",
    "TraverseFrame",
    "Traverse",
    "BatchResult",
    "generate_world",
    "generate_traverse",
    "run_localization_batch",
    "localization_task_seed",
    "localize_frame_camera",
    "mounted_camera",
    "standard_four_camera_rig",
    "save_traverse",
    "load_traverse",
]

_SEED_MASK = (1 << 64) - 1

# Multiplier applied to noise and outlier rates under a full condition shift:
# effective = nominal * (1 + shift * K_SHIFT), so shift=1 triples both.
K_SHIFT = 2.0

# Trajectories must be long enough for at least one selection window.
_MIN_FRAMES = 40


@dataclass(frozen=True)
class WorldConfig:
    """Geometry and seeding of the synthetic environment.

    Landmarks are drawn per region in two lateral bands (4 to 14 m to either
    side of the trajectory) with heights in [-1, 5] m.  ``map_point_sigma_m``
    perturbs the 3D positions handed to the localizer, emulating
    reconstruction error in the map; the pixels are always generated from
    the true positions.  ``max_observation_depth_m`` bounds the range at
    which a landmark can be matched, standing in for feature scale limits.
    """

    trajectory_length_m: float
    landmarks_per_region: int
    region_length_m: float
    rng_seed: int
    image_spacing_m: float = 1.0
    map_point_sigma_m: float = 0.02
    max_observation_depth_m: float = 50.0
    lateral_amplitude_m: float = 0.0
    lateral_period_m: float = 200.0

    def __post_init__(self):
        if self.trajectory_length_m <= 0.0 or self.image_spacing_m <= 0.0:
            raise ConfigError("trajectory length and image spacing must be positive")
        if self.region_length_m <= 0.0:
            raise ConfigError("region_length_m must be positive")
        if self.landmarks_per_region < 1:
            raise ConfigError("landmarks_per_region must be at least 1")
        if self.map_point_sigma_m < 0.0:
            raise ConfigError("map_point_sigma_m must be non-negative")
        if self.max_observation_depth_m <= 0.0:
            raise ConfigError("max_observation_depth_m must be positive")
        if self.lateral_amplitude_m < 0.0 or self.lateral_period_m <= 0.0:
            raise ConfigError("lateral offset parameters out of range")
        if self.num_frames < _MIN_FRAMES:
            raise ConfigError(
                f"trajectory yields {self.num_frames} frames; "
                f"at least {_MIN_FRAMES} (one selection window) required")

    @property
    def num_frames(self) -> int:
        return int(self.trajectory_length_m / self.image_spacing_m)

    @property
    def num_regions(self) -> int:
        return int(math.ceil(self.trajectory_length_m / self.region_length_m))

    def frame_pose(self, index: int) -> Pose:
        """Ground-truth body pose of frame ``index`` (identity rotation)."""
        x = index * self.image_spacing_m
        y = 0.0
        if self.lateral_amplitude_m > 0.0:
            y = self.lateral_amplitude_m * math.sin(
                2.0 * math.pi * x / self.lateral_period_m)
        return Pose(np.eye(3), np.array([x, y, 0.0]))

    def region_of(self, x: float) -> int:
        r = int(x // self.region_length_m)
        return min(max(r, 0), self.num_regions - 1)


@dataclass(frozen=True)
class QualityParams:
    """Observation quality for one camera in one region."""

    visible_landmark_fraction: float = 1.0
    pixel_noise_sigma_px: float = 0.0
    outlier_fraction: float = 0.0
    dropout_probability: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visible_landmark_fraction <= 1.0:
            raise ConfigError("visible_landmark_fraction must lie in [0, 1]")
        if self.pixel_noise_sigma_px < 0.0:
            raise ConfigError("pixel_noise_sigma_px must be non-negative")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ConfigError("outlier_fraction must lie in [0, 1]")
        if not 0.0 <= self.dropout_probability <= 1.0:
            raise ConfigError("dropout_probability must lie in [0, 1]")


@dataclass(frozen=True)
class CameraQualityProfile:
    """Per-camera default quality plus (camera, region) overrides."""

    defaults: dict[int, QualityParams]
    overrides: dict[tuple[int, int], QualityParams]

    def __post_init__(self):
        object.__setattr__(self, "defaults", dict(self.defaults))
        object.__setattr__(self, "overrides", dict(self.overrides))
        for cam_id in self.defaults:
            if cam_id < 0:
                raise ConfigError("camera ids must be non-negative")
        for cam_id, region in self.overrides:
            if cam_id not in self.defaults:
                raise ConfigError(f"override references unknown camera {cam_id}")
            if region < 0:
                raise ConfigError("region indices must be non-negative")

    @classmethod
    def uniform(cls, num_cameras: int,
                params: QualityParams | None = None) -> "CameraQualityProfile":
        params = params if params is not None else QualityParams()
        return cls({c: params for c in range(num_cameras)}, {})

    def params_for(self, camera_id: int, region: int) -> QualityParams:
        try:
            return self.overrides.get((camera_id, region), self.defaults[camera_id])
        except KeyError:
            raise ConfigError(f"no quality profile for camera {camera_id}") from None


@dataclass(frozen=True)
class World:
    """Landmark cloud (true and mapped positions) plus rig and profile.

    Landmarks are stored sorted by x so per-frame candidate windows are
    contiguous slices; ``landmark id`` means index into these arrays.
    """

    config: WorldConfig
    rig: Rig
    profile: CameraQualityProfile
    positions: np.ndarray       # (M, 3) true positions, pixels come from these
    map_positions: np.ndarray   # (M, 3) perturbed copies, the localizer's 3D side
    regions: np.ndarray         # (M,) region index per landmark

    @property
    def num_landmarks(self) -> int:
        return len(self.positions)


def generate_world(cfg: WorldConfig, rig: Rig,
                   profile: CameraQualityProfile) -> World:
    """Deterministically populate the landmark cloud for a configuration.

    Every landmark ends up within observation range of some frame, so the
    whole cloud is mappable; there is no separate reconstruction step.  The
    first and last regions stretch their landmark bands past the trajectory
    ends by the observation range (with unchanged landmark counts), so
    forward-looking cameras keep support at the route ends.
    """
    for cam in rig:
        if cam.camera_id not in profile.defaults:
            raise ConfigError(f"profile missing camera {cam.camera_id}")
    root = np.random.SeedSequence(cfg.rng_seed & _SEED_MASK)
    landmark_stream, map_stream = root.spawn(2)
    rng = np.random.default_rng(landmark_stream)

    xs, ys, zs, regions = [], [], [], []
    for r in range(cfg.num_regions):
        lo = r * cfg.region_length_m
        hi = min(lo + cfg.region_length_m, cfg.trajectory_length_m)
        if r == 0:
            lo -= cfg.max_observation_depth_m
        if r == cfg.num_regions - 1:
            hi += cfg.max_observation_depth_m
        n = cfg.landmarks_per_region
        x = rng.uniform(lo, hi, n)
        y_abs = rng.uniform(4.0, 14.0, n)
        side = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        z = rng.uniform(-1.0, 5.0, n)
        xs.append(x)
        ys.append(side * y_abs)
        zs.append(z)
        regions.append(np.full(n, r, dtype=np.int64))

    positions = np.column_stack([np.concatenate(xs), np.concatenate(ys),
                                 np.concatenate(zs)])
    region_idx = np.concatenate(regions)
    order = np.argsort(positions[:, 0], kind="stable")
    positions = positions[order]
    region_idx = region_idx[order]

    map_rng = np.random.default_rng(map_stream)
    offsets = map_rng.normal(0.0, 1.0, positions.shape) * cfg.map_point_sigma_m
    map_positions = positions + offsets

    positions.setflags(write=False)
    map_positions.setflags(write=False)
    region_idx.setflags(write=False)
    return World(cfg, rig, profile, positions, map_positions, region_idx)


class TraverseRole(str, enum.Enum):
    MAP = "map"
    TRAINING = "training"
    QUERY = "query"


@dataclass(frozen=True)
class CameraObservations:
    """2D-3D correspondences of one camera at one frame.

    ``points`` are mapped (perturbed) landmark positions: the 3D side the
    localizer sees.  Shapes: pixels (n, 2), points (n, 3), landmark_ids (n,).
    """

    pixels: np.ndarray
    points: np.ndarray
    landmark_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.pixels)


@dataclass(frozen=True)
class TraverseFrame:
    index: int
    pose: Pose
    observations: tuple[CameraObservations, ...]  # one entry per rig camera


@dataclass(frozen=True)
class Traverse:
    role: TraverseRole
    condition_shift: float
    rng_seed: int
    world_seed: int
    frames: tuple[TraverseFrame, ...]

    def __post_init__(self):
        if [f.index for f in self.frames] != list(range(len(self.frames))):
            raise ValueError("frame indices must be contiguous from 0")

    @property
    def num_frames(self) -> int:
        return len(self.frames)


def _effective(params: QualityParams, shift: float) -> tuple[float, float, float, float]:
    """Noise and outlier rates scale with condition shift; dropout does not."""
    boost = 1.0 + shift * K_SHIFT
    return (params.visible_landmark_fraction,
            params.pixel_noise_sigma_px * boost,
            min(1.0, params.outlier_fraction * boost),
            params.dropout_probability)


def generate_traverse(world: World, role: TraverseRole, rng_seed: int,
                      condition_shift: float = 0.0) -> Traverse:
    """One pass along the trajectory with per-frame-camera observations.

    Per frame and camera, draws happen in a fixed order from the pair's own
    stream: dropout flag, visibility subsampling, pixel noise, outlier
    flags, outlier replacement pixels.  Noisy pixels that leave the image
    are culled (an undetectable feature); outlier pixels are uniform
    in-bounds draws and always survive.  A dropped frame-camera keeps at
    most 2 correspondences, below any usable minimum.
    """
    if not 0.0 <= condition_shift <= 1.0:
        raise ConfigError("condition_shift must lie in [0, 1]")
    role = TraverseRole(role)
    cfg = world.config
    base = rng_seed & _SEED_MASK
    land_x = world.positions[:, 0]
    reach = cfg.max_observation_depth_m

    frames = []
    for i in range(cfg.num_frames):
        pose = cfg.frame_pose(i)
        fx = pose.translation[0]
        region = cfg.region_of(fx)
        lo = int(np.searchsorted(land_x, fx - reach))
        hi = int(np.searchsorted(land_x, fx + reach))
        cand_true = world.positions[lo:hi]
        cand_map = world.map_positions[lo:hi]
        cand_ids = np.arange(lo, hi)

        per_camera = []
        for cam in world.rig:
            rng = np.random.default_rng(
                np.random.SeedSequence([base, i, cam.camera_id]))
            vis_frac, sigma, outlier_frac, dropout = _effective(
                world.profile.params_for(cam.camera_id, region), condition_shift)
            drop = rng.random() < dropout

            pixels, depths = project_points(cam, pose, cand_true)
            center = pose.apply(cam.extrinsic.translation)
            dist_sq = np.sum((cand_true - center) ** 2, axis=1)
            visible = ((depths > 0.0) & cam.in_bounds(np.nan_to_num(pixels))
                       & (dist_sq <= reach * reach))

            keep = rng.random(len(cand_true)) < vis_frac
            visible &= keep
            px = pixels[visible]
            n = len(px)
            px = px + rng.standard_normal((n, 2)) * sigma
            out_mask = rng.random(n) < outlier_frac
            out_px = rng.uniform((0.0, 0.0), (cam.width, cam.height), (n, 2))
            px[out_mask] = out_px[out_mask]
            ok = cam.in_bounds(px)
            px = px[ok]
            pts = cand_map[visible][ok]
            ids = cand_ids[visible][ok]
            if drop:
                px, pts, ids = px[:2], pts[:2], ids[:2]
            per_camera.append(CameraObservations(px, pts, ids))
        frames.append(TraverseFrame(i, pose, tuple(per_camera)))
    return Traverse(role, condition_shift, rng_seed, cfg.rng_seed, tuple(frames))


# ---------------------------------------------------------------------------
# batch localization


def localization_task_seed(base_seed: int, frame_index: int, camera_id: int) -> int:
    """Stable per-(frame, camera) seed so any execution order or grouping of
    the batch reproduces identical results."""
    ss = np.random.SeedSequence([base_seed & _SEED_MASK, frame_index, camera_id])
    return int(ss.generate_state(1, np.uint64)[0])


def localize_frame_camera(frame: TraverseFrame, cam: CameraModel,
                          cfg: RansacConfig) -> LocalizationResult:
    """Localize one frame from one camera under the batch seeding contract."""
    task_cfg = replace(cfg, rng_seed=localization_task_seed(
        cfg.rng_seed, frame.index, cam.camera_id))
    return localize_pnp_ransac(frame.observations[cam.camera_id], cam, task_cfg)


@dataclass(frozen=True)
class BatchResult:
    """Per-frame, per-camera localization outcomes against ground truth.

    Error arrays hold +inf where localization failed, so downstream recall
    and sampling code can treat failure uniformly as unbounded error.
    """

    results: tuple[tuple[LocalizationResult, ...], ...]  # [frame][camera]
    translation_errors: np.ndarray    # (F, C), meters, inf on failure
    rotation_errors_deg: np.ndarray   # (F, C), degrees, inf on failure

    @property
    def num_frames(self) -> int:
        return len(self.results)


def run_localization_batch(traverse: Traverse, rig: Rig,
                           cfg: RansacConfig) -> BatchResult:
    """Localize every (frame, camera) pair of a traverse independently."""
    F, C = traverse.num_frames, len(rig)
    t_err = np.full((F, C), np.inf)
    r_err = np.full((F, C), np.inf)
    rows = []
    for frame in traverse.frames:
        row = []
        for cam in rig:
            result = localize_frame_camera(frame, cam, cfg)
            if result.success:
                err = pose_error(result.pose, frame.pose)
                t_err[frame.index, cam.camera_id] = err.translation_err
                r_err[frame.index, cam.camera_id] = err.rotation_err
            row.append(result)
        rows.append(tuple(row))
    return BatchResult(tuple(rows), t_err, r_err)


# ---------------------------------------------------------------------------
# standard rig

# Camera +z (optical axis) maps to body +x under yaw 0: +z->+x, +x->-y, +y->-z.
_FORWARD_MOUNT = np.array([[0.0, 0.0, 1.0],
                           [-1.0, 0.0, 0.0],
                           [0.0, -1.0, 0.0]])


def mounted_camera(camera_id: int, yaw_deg: float = 0.0,
                   offset=(0.0, 0.0, 0.0), fx: float = 400.0,
                   fy: float = 400.0, width: int = 640, height: int = 480,
                   cx: float | None = None,
                   cy: float | None = None) -> CameraModel:
    """Camera looking along body +x, yawed left-positive, offset in meters."""
    R = rot_z(math.radians(yaw_deg)) @ _FORWARD_MOUNT
    cx = width / 2.0 if cx is None else cx
    cy = height / 2.0 if cy is None else cy
    return CameraModel(camera_id, fx, fy, cx, cy, width, height,
                       Pose(R, np.asarray(offset, dtype=np.float64)))


def standard_four_camera_rig() -> Rig:
    """Four VGA cameras: forward-left/right at +/-25 deg, side pair at +/-90 deg."""
    spec = [
        (0, 25.0, (0.5, 0.3, 0.0)),
        (1, -25.0, (0.5, -0.3, 0.0)),
        (2, 90.0, (0.0, 0.4, 0.0)),
        (3, -90.0, (0.0, -0.4, 0.0)),
    ]
    return Rig(tuple(mounted_camera(cam_id, yaw_deg, offset)
                     for cam_id, yaw_deg, offset in spec))


# ---------------------------------------------------------------------------
# serialization

_TRAVERSE_MAGIC = "traverse v1"


def _fmt(x: float) -> str:
    return repr(float(x))


def save_traverse(traverse: Traverse, rig: Rig, path,
                  profile: CameraQualityProfile | None = None) -> None:
    """Write a traverse (with its rig) as line-oriented text.

    The format round-trips bit-exactly: floats are written with shortest
    round-trip precision.  Profile lines are informational provenance and
    are ignored on load.
    """
    lines = [_TRAVERSE_MAGIC,
             f"role {traverse.role.value}",
             f"world_seed {traverse.world_seed}",
             f"traverse_seed {traverse.rng_seed}",
             f"condition_shift {_fmt(traverse.condition_shift)}",
             f"num_frames {traverse.num_frames}",
             f"num_cameras {len(rig)}"]
    for cam in rig:
        ext = " ".join(_fmt(v) for v in cam.extrinsic.to_numbers())
        lines.append(f"camera {cam.camera_id} {_fmt(cam.fx)} {_fmt(cam.fy)} "
                     f"{_fmt(cam.cx)} {_fmt(cam.cy)} {cam.width} {cam.height} {ext}")
    if profile is not None:
        for cam_id in sorted(profile.defaults):
            p = profile.defaults[cam_id]
            lines.append(f"# quality camera={cam_id} default "
                         f"vis={_fmt(p.visible_landmark_fraction)} "
                         f"sigma={_fmt(p.pixel_noise_sigma_px)} "
                         f"outliers={_fmt(p.outlier_fraction)} "
                         f"dropout={_fmt(p.dropout_probability)}")
        for (cam_id, region) in sorted(profile.overrides):
            p = profile.overrides[(cam_id, region)]
            lines.append(f"# quality camera={cam_id} region={region} "
                         f"vis={_fmt(p.visible_landmark_fraction)} "
                         f"sigma={_fmt(p.pixel_noise_sigma_px)} "
                         f"outliers={_fmt(p.outlier_fraction)} "
                         f"dropout={_fmt(p.dropout_probability)}")
    for frame in traverse.frames:
        nums = " ".join(_fmt(v) for v in frame.pose.to_numbers())
        lines.append(f"frame {frame.index} {nums}")
        for cam_id, obs in enumerate(frame.observations):
            for k in range(len(obs)):
                u, v = obs.pixels[k]
                x, y, z = obs.points[k]
                lines.append(f"obs {frame.index} {cam_id} {obs.landmark_ids[k]} "
                             f"{_fmt(u)} {_fmt(v)} {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_traverse(path) -> tuple[Traverse, Rig]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _TRAVERSE_MAGIC:
        raise ConfigError(f"{path}: not a traverse file")
    header: dict[str, str] = {}
    cameras: list[CameraModel] = []
    pos = 1
    while pos < len(lines):
        parts = lines[pos].split()
        if not parts or parts[0] in ("frame", "obs"):
            break
        if parts[0] == "#":
            pos += 1
            continue
        if parts[0] == "camera":
            ext = Pose.from_numbers([float(v) for v in parts[8:20]])
            cameras.append(CameraModel(int(parts[1]), float(parts[2]),
                                       float(parts[3]), float(parts[4]),
                                       float(parts[5]), int(parts[6]),
                                       int(parts[7]), ext))
        else:
            header[parts[0]] = parts[1]
        pos += 1
    try:
        role = TraverseRole(header["role"])
        world_seed = int(header["world_seed"])
        traverse_seed = int(header["traverse_seed"])
        shift = float(header["condition_shift"])
        num_frames = int(header["num_frames"])
        num_cameras = int(header["num_cameras"])
    except KeyError as exc:
        raise ConfigError(f"{path}: missing header field {exc}") from None
    if len(cameras) != num_cameras:
        raise ConfigError(f"{path}: expected {num_cameras} cameras, "
                          f"found {len(cameras)}")
    rig = Rig(tuple(cameras))

    poses: list[Pose | None] = [None] * num_frames
    obs_acc: list[list[list[tuple]]] = [
        [[] for _ in range(num_cameras)] for _ in range(num_frames)]
    for ln in lines[pos:]:
        parts = ln.split()
        if not parts or parts[0] == "#":
            continue
        if parts[0] == "frame":
            idx = int(parts[1])
            poses[idx] = Pose.from_numbers([float(v) for v in parts[2:14]])
        elif parts[0] == "obs":
            fi, ci, lid = int(parts[1]), int(parts[2]), int(parts[3])
            obs_acc[fi][ci].append((lid, *[float(v) for v in parts[4:9]]))
        else:
            raise ConfigError(f"{path}: unrecognized record {parts[0]!r}")

    frames = []
    for i in range(num_frames):
        if poses[i] is None:
            raise ConfigError(f"{path}: missing pose for frame {i}")
        per_camera = []
        for ci in range(num_cameras):
            rows = obs_acc[i][ci]
            if rows:
                ids = np.array([r[0] for r in rows], dtype=np.int64)
                px = np.array([[r[1], r[2]] for r in rows])
                pts = np.array([[r[3], r[4], r[5]] for r in rows])
            else:
                ids = np.empty(0, dtype=np.int64)
                px = np.empty((0, 2))
                pts = np.empty((0, 3))
            per_camera.append(CameraObservations(px, pts, ids))
        frames.append(TraverseFrame(i, poses[i], tuple(per_camera)))
    return Traverse(role, shift, traverse_seed, world_seed, tuple(frames)), rig
