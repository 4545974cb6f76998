"""Run configuration: one YAML file collecting every pipeline knob.

Every hyperparameter that affects an output artifact lives here (world
layout, rig, per-region quality, place geometry, cost and KDE settings,
RANSAC, selector list, evaluation bins, seeds), so a config file plus the
package version pins a run completely.  Unknown keys are rejected with the
full path to the offending field; partial configs inherit the documented
defaults.

Schema (YAML, all sections optional unless marked):

    log_name: sim
    output_dir: out
    world:                      # required
      trajectory_length_m: 200.0
      image_spacing_m: 1.0
      landmarks_per_region: 150
      region_length_m: 50.0
      rng_seed: 7
      map_point_sigma_m: 0.02
      max_observation_depth_m: 50.0
      lateral_amplitude_m: 0.0
      lateral_period_m: 200.0
    rig: standard_four          # or {cameras: [{camera_id, yaw_deg, offset,
                                #   fx, fy, cx, cy, width, height}, ...]}
    quality:
      defaults: {visible_landmark_fraction: 1.0, pixel_noise_sigma_px: 0.0,
                 outlier_fraction: 0.0, dropout_probability: 0.0}
      overrides:                # per (camera, region) deviations
        - {camera: 3, region: 0, dropout_probability: 1.0}
    places: {width: 40, stride: 10}
    cost: {p: 2.0, x_max: 2.0}
    kde: {bandwidth: 0.1, mc_samples: 10000, kernel: gaussian}
    ransac: {inlier_threshold_px: 2.0, max_iterations: 1000,
             confidence: 0.99, min_inliers: 4}
    selectors: [static, dynamic, oracle]
    bins: [[0.25, 2.0], [0.5, 5.0], [5.0, 10.0]]
    thresholds: [30.0, 50.0, 70.0]
    slice_length: 1000
    seeds: {map_traverse: 101, training_traverse: 102, query_traverse: 103,
            selection: 104, run: 105}
    query_condition_shift: 0.0

seeds.run feeds the per-task RANSAC seed derivation and the random
selector's stream; seeds.selection feeds the Monte Carlo expected-cost
draws.  The world's own rng_seed lives in the world section because it is
part of the world's identity, not of the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import yaml

from .baselines import SelectorKind
from .errors import ConfigError
from .evaluation import DEFAULT_BINS, FailureThresholds, ToleranceBin
from .geometry import Rig
from .localizer import RansacConfig
from .selection import (
    DEFAULT_PLACE_STRIDE,
    DEFAULT_PLACE_WIDTH,
    CostFunction,
    KdeConfig,
)
from .simulator import (
    CameraQualityProfile,
    QualityParams,
    WorldConfig,
    mounted_camera,
    standard_four_camera_rig,
)

__all__ = ["Seeds", "RunConfig", "parse_run_config", "load_run_config"]

_REQUIRED = object()


@dataclass(frozen=True)
class Seeds:
    map_traverse: int = 101
    training_traverse: int = 102
    query_traverse: int = 103
    selection: int = 104
    run: int = 105


@dataclass(frozen=True)
class RunConfig:
    world: WorldConfig
    rig: Rig
    profile: CameraQualityProfile
    log_name: str = "sim"
    output_dir: str = "out"
    place_width: int = DEFAULT_PLACE_WIDTH
    place_stride: int = DEFAULT_PLACE_STRIDE
    cost: CostFunction = CostFunction()
    kde: KdeConfig = KdeConfig()
    ransac: RansacConfig = RansacConfig()
    selectors: tuple[SelectorKind, ...] = (SelectorKind.STATIC,
                                           SelectorKind.DYNAMIC)
    bins: tuple[ToleranceBin, ...] = DEFAULT_BINS
    thresholds: FailureThresholds = FailureThresholds()
    slice_length: int = 1000
    seeds: Seeds = field(default_factory=Seeds)
    query_condition_shift: float = 0.0

    def __post_init__(self):
        if self.slice_length <= 0:
            raise ConfigError("slice_length must be positive")
        if len(self.bins) != len(self.thresholds.min_recall_pct):
            raise ConfigError("need one failure threshold per tolerance bin")
        if not 0.0 <= self.query_condition_shift <= 1.0:
            raise ConfigError("query_condition_shift must lie in [0, 1]")


def _pop(d: dict, key: str, path: str, default=_REQUIRED):
    if key in d:
        return d.pop(key)
    if default is _REQUIRED:
        raise ConfigError(f"missing required field {_join(path, key)}")
    return default


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _ensure_empty(d: dict, path: str) -> None:
    if d:
        names = ", ".join(_join(path, k) for k in sorted(d))
        raise ConfigError(f"unknown config field(s): {names}")


def _section(d: dict, key: str, path: str, required=False) -> dict:
    raw = _pop(d, key, path, _REQUIRED if required else None)
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{_join(path, key)} must be a mapping")
    return dict(raw)


def _parse_world(sec: dict, path: str) -> WorldConfig:
    kwargs = {}
    fields = ["trajectory_length_m", "landmarks_per_region", "region_length_m",
              "rng_seed", "image_spacing_m", "map_point_sigma_m",
              "max_observation_depth_m", "lateral_amplitude_m",
              "lateral_period_m"]
    required = {"trajectory_length_m", "landmarks_per_region",
                "region_length_m", "rng_seed"}
    for name in fields:
        val = _pop(sec, name, path,
                   _REQUIRED if name in required else None)
        if val is not None:
            kwargs[name] = val
    _ensure_empty(sec, path)
    try:
        return WorldConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_rig(raw, path: str) -> Rig:
    if raw is None or raw == "standard_four":
        return standard_four_camera_rig()
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must be 'standard_four' or a mapping "
                          "with a cameras list")
    sec = dict(raw)
    cam_list = _pop(sec, "cameras", path)
    _ensure_empty(sec, path)
    if not isinstance(cam_list, list) or not cam_list:
        raise ConfigError(f"{_join(path, 'cameras')} must be a non-empty list")
    cams = []
    for i, entry in enumerate(cam_list):
        cpath = f"{path}.cameras[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{cpath} must be a mapping")
        e = dict(entry)
        kwargs = {"camera_id": int(_pop(e, "camera_id", cpath))}
        for name in ["yaw_deg", "offset", "fx", "fy", "width", "height",
                     "cx", "cy"]:
            val = _pop(e, name, cpath, None)
            if val is not None:
                kwargs[name] = tuple(val) if name == "offset" else val
        _ensure_empty(e, cpath)
        cams.append(mounted_camera(**kwargs))
    try:
        return Rig(tuple(cams))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


_QUALITY_FIELDS = ["visible_landmark_fraction", "pixel_noise_sigma_px",
                   "outlier_fraction", "dropout_probability"]


def _parse_quality_params(sec: dict, path: str,
                          base: QualityParams) -> QualityParams:
    kwargs = {}
    for name in _QUALITY_FIELDS:
        val = _pop(sec, name, path, None)
        kwargs[name] = getattr(base, name) if val is None else float(val)
    _ensure_empty(sec, path)
    try:
        return QualityParams(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_profile(sec: dict, path: str, rig: Rig) -> CameraQualityProfile:
    base = _parse_quality_params(_section(sec, "defaults", path),
                                 _join(path, "defaults"), QualityParams())
    raw_overrides = _pop(sec, "overrides", path, [])
    _ensure_empty(sec, path)
    if raw_overrides is None:
        raw_overrides = []
    if not isinstance(raw_overrides, list):
        raise ConfigError(f"{_join(path, 'overrides')} must be a list")
    overrides = {}
    for i, entry in enumerate(raw_overrides):
        opath = f"{path}.overrides[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{opath} must be a mapping")
        e = dict(entry)
        cam = int(_pop(e, "camera", opath))
        region = int(_pop(e, "region", opath))
        if not 0 <= cam < len(rig.cameras):
            raise ConfigError(f"{opath}: camera {cam} is not in the rig")
        overrides[(cam, region)] = _parse_quality_params(e, opath, base)
    defaults = {cam.camera_id: base for cam in rig.cameras}
    return CameraQualityProfile(defaults, overrides)


def parse_run_config(data, source: str = "config") -> RunConfig:
    """Build a validated RunConfig from parsed YAML data."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    d = dict(data)
    world = _parse_world(_section(d, "world", "", required=True), "world")
    rig = _parse_rig(_pop(d, "rig", "", None), "rig")
    profile = _parse_profile(_section(d, "quality", ""), "quality", rig)

    places = _section(d, "places", "")
    place_width = int(_pop(places, "width", "places", DEFAULT_PLACE_WIDTH))
    place_stride = int(_pop(places, "stride", "places", DEFAULT_PLACE_STRIDE))
    _ensure_empty(places, "places")

    cost_sec = _section(d, "cost", "")
    cost = CostFunction(float(_pop(cost_sec, "p", "cost", 2.0)),
                        float(_pop(cost_sec, "x_max", "cost", 2.0)))
    _ensure_empty(cost_sec, "cost")

    seeds_sec = _section(d, "seeds", "")
    seeds = Seeds(**{name: int(_pop(seeds_sec, name, "seeds",
                                    getattr(Seeds, name)))
                     for name in ["map_traverse", "training_traverse",
                                  "query_traverse", "selection", "run"]})
    _ensure_empty(seeds_sec, "seeds")

    kde_sec = _section(d, "kde", "")
    kde = KdeConfig(bandwidth=float(_pop(kde_sec, "bandwidth", "kde", 0.1)),
                    mc_samples=int(_pop(kde_sec, "mc_samples", "kde", 10000)),
                    rng_seed=seeds.selection,
                    kernel=str(_pop(kde_sec, "kernel", "kde", "gaussian")))
    _ensure_empty(kde_sec, "kde")

    r_sec = _section(d, "ransac", "")
    ransac = RansacConfig(
        inlier_threshold_px=float(_pop(r_sec, "inlier_threshold_px",
                                       "ransac", 2.0)),
        max_iterations=int(_pop(r_sec, "max_iterations", "ransac", 1000)),
        confidence=float(_pop(r_sec, "confidence", "ransac", 0.99)),
        min_inliers=int(_pop(r_sec, "min_inliers", "ransac", 4)),
        rng_seed=seeds.run)
    _ensure_empty(r_sec, "ransac")

    raw_selectors = _pop(d, "selectors", "", ["static", "dynamic"])
    try:
        selectors = tuple(SelectorKind(s) for s in raw_selectors)
    except ValueError as exc:
        raise ConfigError(f"selectors: {exc}") from None

    raw_bins = _pop(d, "bins", "", None)
    if raw_bins is None:
        bins = DEFAULT_BINS
    else:
        try:
            bins = tuple(ToleranceBin(float(t), float(r)) for t, r in raw_bins)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bins: entries must be [t_tol, r_tol] pairs "
                              f"({exc})") from None

    raw_thresh = _pop(d, "thresholds", "", None)
    thresholds = FailureThresholds() if raw_thresh is None else \
        FailureThresholds(tuple(float(v) for v in raw_thresh))

    cfg_kwargs = dict(
        world=world, rig=rig, profile=profile,
        log_name=str(_pop(d, "log_name", "", "sim")),
        output_dir=str(_pop(d, "output_dir", "", "out")),
        place_width=place_width, place_stride=place_stride,
        cost=cost, kde=kde, ransac=ransac, selectors=selectors,
        bins=bins, thresholds=thresholds,
        slice_length=int(_pop(d, "slice_length", "", 1000)),
        seeds=seeds,
        query_condition_shift=float(_pop(d, "query_condition_shift", "", 0.0)))
    _ensure_empty(d, "")
    return RunConfig(**cfg_kwargs)


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_run_config(data, source=str(path))
