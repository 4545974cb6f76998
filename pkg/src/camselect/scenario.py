"""Documented synthetic scenarios for worst-case coverage experiments.

Two ready-made run configurations, built so the interesting effects are
structural rather than tuned:

worst_case_config
    A 10-slice route (10,000 frames at 1 m spacing, 1000-frame slices,
    250 m regions, 4 regions per slice) where two slices carry a rotating
    single-camera degradation: within those slices, region r keeps only
    camera (r mod 4) alive and drops every other camera's observations.
    Any single fixed camera therefore works in exactly one of the four
    regions of a rotating slice (~25% of its frames), below the 30%
    failure threshold, while per-place selection keeps picking whichever
    camera the region left alive.  A third slice degrades camera 0 only
    (heavy noise and outliers, no dropout), giving the slice-level static
    choice a reason to prefer another camera without failing the slice.

condition_shift_config
    A 4-slice route (2,000 frames, 500-frame slices, 125 m regions) with
    the same rotating degradation in slices 1 and 3 and a noisier
    baseline.  Replaying its query traverse with a growing condition
    shift scales noise and outlier rates up at a fixed inlier threshold,
    which starves RANSAC consensus for every camera at once; the
    advantage of training-time selection compresses while query-time
    statistic selectors keep dodging the dropped cameras (dropped cameras
    expose at most 2 correspondences regardless of shift).
"""

from __future__ import annotations

from .baselines import SelectorKind
from .config import RunConfig, Seeds
from .evaluation import FailureThresholds
from .localizer import RansacConfig
from .selection import CostFunction, KdeConfig
from .simulator import (
    CameraQualityProfile,
    QualityParams,
    WorldConfig,
    standard_four_camera_rig,
)

__all__ = ["worst_case_config", "condition_shift_config"]

_NUM_CAMERAS = 4


def _rotating_overrides(slice_ids, regions_per_slice, base: QualityParams):
    """Keep only camera (r mod 4) alive in each region r of the given slices."""
    overrides = {}
    for sid in slice_ids:
        for r in range(sid * regions_per_slice, (sid + 1) * regions_per_slice):
            keep = r % _NUM_CAMERAS
            for cam in range(_NUM_CAMERAS):
                if cam != keep:
                    overrides[(cam, r)] = QualityParams(
                        visible_landmark_fraction=base.visible_landmark_fraction,
                        pixel_noise_sigma_px=base.pixel_noise_sigma_px,
                        outlier_fraction=base.outlier_fraction,
                        dropout_probability=1.0)
    return overrides


def worst_case_config() -> RunConfig:
    """Ten 1 km slices; slices 2 and 6 rotate, slice 4 degrades camera 0."""
    base = QualityParams(visible_landmark_fraction=0.7,
                         pixel_noise_sigma_px=0.5,
                         outlier_fraction=0.05,
                         dropout_probability=0.0)
    regions_per_slice = 4
    overrides = _rotating_overrides((2, 6), regions_per_slice, base)
    # camera 0 goes blurry for slice 4 (regions 16..19): noise x4 and a
    # heavy outlier rate, still localizable but clearly the worst choice
    for r in range(16, 20):
        overrides[(0, r)] = QualityParams(
            visible_landmark_fraction=base.visible_landmark_fraction,
            pixel_noise_sigma_px=base.pixel_noise_sigma_px * 4.0,
            outlier_fraction=0.35,
            dropout_probability=0.0)
    rig = standard_four_camera_rig()
    profile = CameraQualityProfile(
        {cam.camera_id: base for cam in rig.cameras}, overrides)
    return RunConfig(
        world=WorldConfig(trajectory_length_m=10000.0,
                          landmarks_per_region=950,
                          region_length_m=250.0,
                          rng_seed=1207),
        rig=rig,
        profile=profile,
        log_name="worstcase",
        output_dir="out-worstcase",
        cost=CostFunction(p=2.0, x_max=2.0),
        kde=KdeConfig(bandwidth=0.1, mc_samples=10000, rng_seed=104),
        ransac=RansacConfig(inlier_threshold_px=2.0, max_iterations=150,
                            confidence=0.99, min_inliers=4, rng_seed=105),
        selectors=(SelectorKind.STATIC, SelectorKind.DYNAMIC,
                   SelectorKind.ORACLE),
        thresholds=FailureThresholds((30.0, 50.0, 70.0)),
        slice_length=1000,
        seeds=Seeds(),
        query_condition_shift=0.0)


def condition_shift_config(query_condition_shift: float) -> RunConfig:
    """Four 500-frame slices; slices 1 and 3 rotate; noisy baseline."""
    base = QualityParams(visible_landmark_fraction=0.7,
                         pixel_noise_sigma_px=0.7,
                         outlier_fraction=0.15,
                         dropout_probability=0.0)
    regions_per_slice = 4
    overrides = _rotating_overrides((1, 3), regions_per_slice, base)
    rig = standard_four_camera_rig()
    profile = CameraQualityProfile(
        {cam.camera_id: base for cam in rig.cameras}, overrides)
    return RunConfig(
        world=WorldConfig(trajectory_length_m=2000.0,
                          landmarks_per_region=950,
                          region_length_m=125.0,
                          rng_seed=2101),
        rig=rig,
        profile=profile,
        log_name="shift",
        output_dir="out-shift",
        cost=CostFunction(p=2.0, x_max=2.0),
        kde=KdeConfig(bandwidth=0.1, mc_samples=10000, rng_seed=104),
        ransac=RansacConfig(inlier_threshold_px=2.0, max_iterations=60,
                            confidence=0.99, min_inliers=4, rng_seed=105),
        selectors=(SelectorKind.STATIC, SelectorKind.DYNAMIC,
                   SelectorKind.NUM_3D_POINTS, SelectorKind.INLIER_COUNT),
        thresholds=FailureThresholds((30.0, 50.0, 70.0)),
        slice_length=500,
        seeds=Seeds(),
        query_condition_shift=query_condition_shift)
