"""Camera-selection strategies evaluated against place-specific selection.

Four families: blind (random, static-per-slice), query-time statistics
(matched-point count, inlier count, inlier ratio), joint rig estimation
(all cameras in one PnP problem, handled by the localizer), and a
ground-truth oracle used as the upper-bound reference.  The training-time
place-specific selector lives in the selection module; everything here is
stateless.
"""

from __future__ import annotations

from dataclasses import replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import NoDataForPlaceError
from .localizer import LocalizationResult
from .selection import (
    CostFunction,
    KdeConfig,
    PoseErrorSampleSet,
    _derived_seed,
    expected_cost,
    expected_cost_quadrature,
)

__all__ = [
    "SelectorKind",
    "select_random",
    "select_static",
    "select_by_statistic",
    "select_oracle",
]


class SelectorKind(str, Enum):
    """Every selection strategy the harness can run.

    The string values are the CLI spellings.  ORACLE is evaluation-only:
    it reads ground-truth errors, so it can never ship in a real system.
    """

    RANDOM = "random"
    STATIC = "static"
    NUM_3D_POINTS = "num3d"
    INLIER_COUNT = "inliers"
    INLIER_RATIO = "ratio"
    RIG_PNP = "rigpnp"
    DYNAMIC = "dynamic"
    ORACLE = "oracle"


def select_random(rig, rng: np.random.Generator) -> int:
    """Uniform camera pick; draws one integer from rng per call."""
    return int(rng.integers(len(rig.cameras)))


def select_static(sets_by_camera: Mapping[int, PoseErrorSampleSet],
                  cf: CostFunction, cfg: KdeConfig,
                  method: str = "mc") -> int:
    """Best camera for a whole training slice, by pooled expected cost.

    Mirrors the per-place selector with the slice standing in for the
    place: each camera's samples are the slice's pooled training errors,
    empty cameras score the cost ceiling, ties go to the lowest id.  Seeds
    derive from (cfg.rng_seed, slice_id, camera_id) exactly as the
    per-place path derives from place ids, so a one-place partition makes
    the two selectors identical by construction.
    """
    estimator = expected_cost if method == "mc" else expected_cost_quadrature
    best_cam = None
    best_cost = None
    any_data = False
    slice_id = None
    for cam_id in sorted(sets_by_camera):
        samples = sets_by_camera[cam_id]
        if slice_id is None:
            slice_id = samples.place_id
        if len(samples) == 0:
            c = cf.ceiling
        else:
            any_data = True
            cam_cfg = replace(cfg, rng_seed=_derived_seed(
                cfg.rng_seed, samples.place_id, cam_id))
            c = estimator(samples, cf, cam_cfg)
        if best_cost is None or c < best_cost:
            best_cam, best_cost = cam_id, c
    if not any_data:
        raise NoDataForPlaceError(slice_id if slice_id is not None else -1)
    return best_cam


_STATISTICS = {
    SelectorKind.NUM_3D_POINTS: lambda r: r.num_matched_points,
    SelectorKind.INLIER_COUNT: lambda r: r.inlier_count,
    SelectorKind.INLIER_RATIO: lambda r: r.inlier_ratio,
}


def select_by_statistic(results: Sequence[LocalizationResult],
                        kind: SelectorKind) -> int:
    """Argmax of a per-camera localization statistic for one query frame.

    Failed localizations rank below every success regardless of their
    statistic; ties go to the lowest camera id.  When every camera failed
    the lowest id comes back and the frame is counted as unlocalized by
    whoever consumes the pose.
    """
    stat = _STATISTICS[kind]
    best = 0
    best_key = (results[0].success, stat(results[0]))
    for i in range(1, len(results)):
        key = (results[i].success, stat(results[i]))
        if key > best_key:
            best, best_key = i, key
    return best


def select_oracle(errors) -> int:
    """Camera with the smallest ground-truth translation error this frame.

    Accepts pose-error records (None for failed frames) or a plain float
    array with inf marking failures.  Ties go to the lowest camera id.
    """
    vals = []
    for e in errors:
        if e is None:
            vals.append(np.inf)
        elif hasattr(e, "translation_err"):
            vals.append(e.translation_err)
        else:
            vals.append(float(e))
    return int(np.argmin(vals))
