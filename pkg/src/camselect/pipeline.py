"""The four pipeline stages behind the CLI, as plain functions.

simulate writes the map/training/query traverses for a world; train runs
the per-camera localization batch on the training traverse and writes the
selection table (per-place winners plus per-slice static winners); query
replays the query traverse under one selector and writes per-frame
results; report turns result files into slice/summary/place CSVs.  Stages
hand off through files so runs can be pinned, diffed, and recombined.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from .baselines import (
    SelectorKind,
    select_by_statistic,
    select_oracle,
    select_random,
    select_static,
)
from .config import RunConfig
from .errors import ConfigError
from .evaluation import evaluate_errors, slice_ranges, summarize
from .evaluation import write_place_series_csv, write_slices_csv, write_summary_csv
from .geometry import Rig, pose_error
from .localizer import localize_rig_pnp
from .selection import (
    PoseErrorSampleSet,
    SelectionTable,
    build_sample_sets,
    load_selection_table,
    lookup_cameras,
    partition_places,
    save_selection_table,
    select_cameras,
)
from .simulator import (
    Traverse,
    TraverseRole,
    generate_traverse,
    generate_world,
    load_traverse,
    localization_task_seed,
    localize_frame_camera,
    run_localization_batch,
    save_traverse,
)

__all__ = [
    "ARTIFACT_NAMES",
    "QueryRun",
    "run_simulate",
    "run_train",
    "run_query",
    "run_report",
    "save_query_results",
    "load_query_results",
    "results_filename",
]

_SEED_MASK = (1 << 64) - 1

ARTIFACT_NAMES = {
    TraverseRole.MAP: "map.traverse",
    TraverseRole.TRAINING: "training.traverse",
    TraverseRole.QUERY: "query.traverse",
    "table": "selection_table.txt",
    "slices": "slices.csv",
    "summary": "summary.csv",
    "places": "places.csv",
}


def results_filename(kind: SelectorKind) -> str:
    return f"results_{kind.value}.txt"


def _build_world(cfg: RunConfig):
    return generate_world(cfg.world, cfg.rig, cfg.profile)


def run_simulate(cfg: RunConfig, out_dir) -> dict:
    """Generate the world and write its three traverses; returns a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    world = _build_world(cfg)
    plan = [(TraverseRole.MAP, cfg.seeds.map_traverse, 0.0),
            (TraverseRole.TRAINING, cfg.seeds.training_traverse, 0.0),
            (TraverseRole.QUERY, cfg.seeds.query_traverse,
             cfg.query_condition_shift)]
    manifest = {"world_seed": cfg.world.rng_seed,
                "num_frames": cfg.world.num_frames,
                "num_regions": cfg.world.num_regions,
                "num_landmarks": world.num_landmarks,
                "traverses": []}
    for role, seed, shift in plan:
        traverse = generate_traverse(world, role, seed, condition_shift=shift)
        path = os.path.join(out_dir, ARTIFACT_NAMES[role])
        save_traverse(traverse, cfg.rig, path, profile=cfg.profile)
        manifest["traverses"].append({
            "role": role.value, "seed": seed, "condition_shift": shift,
            "path": path, "num_frames": traverse.num_frames})
    return manifest


def _check_rig(cfg_rig: Rig, loaded: Rig, source) -> None:
    ok = len(cfg_rig.cameras) == len(loaded.cameras)
    if ok:
        for a, b in zip(cfg_rig.cameras, loaded.cameras):
            ok &= (a.camera_id, a.fx, a.fy, a.cx, a.cy, a.width, a.height) == \
                  (b.camera_id, b.fx, b.fy, b.cx, b.cy, b.width, b.height)
            ok &= np.allclose(a.extrinsic.rotation, b.extrinsic.rotation,
                              atol=1e-12)
            ok &= np.allclose(a.extrinsic.translation, b.extrinsic.translation,
                              atol=1e-12)
    if not ok:
        raise ConfigError(f"{source}: traverse was recorded with a different "
                          "rig than the config defines")


def _load_checked_traverse(cfg: RunConfig, path) -> Traverse:
    traverse, rig = load_traverse(path)
    if traverse.world_seed != cfg.world.rng_seed:
        raise ConfigError(f"{path}: traverse world seed {traverse.world_seed} "
                          f"does not match config seed {cfg.world.rng_seed}")
    _check_rig(cfg.rig, rig, path)
    return traverse


def run_train(cfg: RunConfig, traverse_path, out_path,
              method: str = "mc") -> SelectionTable:
    """Learn per-place and per-slice camera choices from a training traverse."""
    traverse = _load_checked_traverse(cfg, traverse_path)
    camera_ids = tuple(cam.camera_id for cam in cfg.rig.cameras)
    batch = run_localization_batch(traverse, cfg.rig, cfg.ransac)

    poses = [frame.pose for frame in traverse.frames]
    partition = partition_places(traverse.num_frames, cfg.place_width,
                                 cfg.place_stride, poses)
    sets = build_sample_sets(batch.translation_errors, partition, camera_ids,
                             sentinel=cfg.cost.x_max)
    table = select_cameras(partition, sets, camera_ids, cfg.cost, cfg.kde,
                           method=method)

    statics = []
    for sid, (a, b) in enumerate(slice_ranges(traverse.num_frames,
                                              cfg.slice_length)):
        by_cam = {}
        for col, cam_id in enumerate(camera_ids):
            vals = batch.translation_errors[a:b, col]
            vals = np.where(np.isfinite(vals), vals, cfg.cost.x_max)
            by_cam[cam_id] = PoseErrorSampleSet(cam_id, sid, vals)
        statics.append((sid, select_static(by_cam, cfg.cost, cfg.kde,
                                           method=method)))
    table = dataclasses.replace(table, static_choices=tuple(statics))
    save_selection_table(table, out_path)
    return table


@dataclass(frozen=True)
class QueryRun:
    """Per-frame outcomes of one selector over one query traverse."""

    selector: SelectorKind
    log_name: str
    condition_shift: float
    chosen_cameras: np.ndarray      # (F,) int, -1 when the whole rig was used
    success: np.ndarray             # (F,) bool
    matched: np.ndarray             # (F,) int
    inliers: np.ndarray             # (F,) int
    ratios: np.ndarray              # (F,) float
    translation_errors: np.ndarray  # (F,) float, inf on failure
    rotation_errors_deg: np.ndarray  # (F,) float, inf on failure

    @property
    def num_frames(self) -> int:
        return len(self.success)


def _needs_table(kind: SelectorKind) -> bool:
    return kind in (SelectorKind.STATIC, SelectorKind.DYNAMIC)


def _check_table(table: SelectionTable, cfg: RunConfig) -> None:
    camera_ids = tuple(cam.camera_id for cam in cfg.rig.cameras)
    if table.camera_ids != camera_ids:
        raise ConfigError("selection table cameras do not match the rig")


def run_query(cfg: RunConfig, traverse_path, kind: SelectorKind,
              table_path=None) -> QueryRun:
    """Replay the query traverse under one selection strategy.

    Single-camera selectors (random, static, dynamic) localize exactly one
    camera per frame; statistic selectors and the oracle localize all of
    them; rigpnp runs one joint estimate over the whole rig.  All RANSAC
    seeds derive from (seeds.run, frame, camera), so results are
    independent of execution order and of which other selectors ran.
    """
    kind = SelectorKind(kind)
    traverse = _load_checked_traverse(cfg, traverse_path)
    table = None
    if _needs_table(kind):
        if table_path is None:
            raise ConfigError(f"selector {kind.value!r} needs a selection "
                              "table (run train first, pass --table)")
        table = load_selection_table(table_path)
        _check_table(table, cfg)

    rig = cfg.rig
    cams_by_id = {cam.camera_id: cam for cam in rig.cameras}
    camera_ids = tuple(cam.camera_id for cam in rig.cameras)
    F = traverse.num_frames
    chosen = np.full(F, -1, dtype=np.int64)
    success = np.zeros(F, dtype=bool)
    matched = np.zeros(F, dtype=np.int64)
    inliers = np.zeros(F, dtype=np.int64)
    ratios = np.zeros(F, dtype=np.float64)
    t_err = np.full(F, np.inf)
    r_err = np.full(F, np.inf)

    if kind is SelectorKind.DYNAMIC:
        translations = np.stack([f.pose.translation for f in traverse.frames])
        dynamic_choices = lookup_cameras(table, translations)
    if kind is SelectorKind.RANDOM:
        # one stream for the whole traverse, separate from localization seeds
        rand_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seeds.run & _SEED_MASK, 1]))

    for frame in traverse.frames:
        i = frame.index
        if kind in (SelectorKind.NUM_3D_POINTS, SelectorKind.INLIER_COUNT,
                    SelectorKind.INLIER_RATIO, SelectorKind.ORACLE):
            results = [localize_frame_camera(frame, cams_by_id[c], cfg.ransac)
                       for c in camera_ids]
            if kind is SelectorKind.ORACLE:
                errs = [pose_error(res.pose, frame.pose) if res.success
                        else None for res in results]
                pick = select_oracle(errs)
            else:
                pick = select_by_statistic(results, kind)
            result = results[pick]
            chosen[i] = camera_ids[pick]
        elif kind is SelectorKind.RIG_PNP:
            # the rig-level task uses the camera slot just past the rig
            task_cfg = dataclasses.replace(
                cfg.ransac, rng_seed=localization_task_seed(
                    cfg.ransac.rng_seed, i, len(rig)))
            result = localize_rig_pnp(
                [frame.observations[c] for c in camera_ids], rig, task_cfg)
        else:
            if kind is SelectorKind.RANDOM:
                cam_id = camera_ids[select_random(rig, rand_rng)]
            elif kind is SelectorKind.STATIC:
                sid = i // cfg.slice_length
                try:
                    cam_id = table.static_for_slice(sid)
                except KeyError:
                    raise ConfigError(
                        f"selection table has no static choice for slice "
                        f"{sid}; retrain with slice_length {cfg.slice_length}"
                    ) from None
            else:   # DYNAMIC
                cam_id = int(dynamic_choices[i])
            result = localize_frame_camera(frame, cams_by_id[cam_id],
                                           cfg.ransac)
            chosen[i] = cam_id

        matched[i] = result.num_matched_points
        inliers[i] = result.inlier_count
        ratios[i] = result.inlier_ratio
        if result.success:
            err = pose_error(result.pose, frame.pose)
            success[i] = True
            t_err[i] = err.translation_err
            r_err[i] = err.rotation_err

    return QueryRun(kind, cfg.log_name, traverse.condition_shift, chosen,
                    success, matched, inliers, ratios, t_err, r_err)


# ---------------------------------------------------------------------------
# results file

_RESULTS_MAGIC = "query-results v1"


def _fmt(x: float) -> str:
    return repr(float(x))


def save_query_results(run: QueryRun, path) -> None:
    lines = [_RESULTS_MAGIC,
             f"selector {run.selector.value}",
             f"log {run.log_name}",
             f"condition_shift {_fmt(run.condition_shift)}",
             f"num_frames {run.num_frames}"]
    for i in range(run.num_frames):
        lines.append(
            f"frame {i} camera {run.chosen_cameras[i]} "
            f"success {int(run.success[i])} matched {run.matched[i]} "
            f"inliers {run.inliers[i]} ratio {_fmt(run.ratios[i])} "
            f"terr {_fmt(run.translation_errors[i])} "
            f"rerr {_fmt(run.rotation_errors_deg[i])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_query_results(path) -> QueryRun:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _RESULTS_MAGIC:
        raise ConfigError(f"{path}: not a query results file")
    header = {}
    for ln in lines[1:5]:
        key, _, val = ln.partition(" ")
        header[key] = val
    try:
        kind = SelectorKind(header["selector"])
        log_name = header["log"]
        shift = float(header["condition_shift"])
        F = int(header["num_frames"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: bad results header ({exc})") from None
    rows = lines[5:]
    if len(rows) != F:
        raise ConfigError(f"{path}: expected {F} frame rows, found {len(rows)}")
    chosen = np.empty(F, dtype=np.int64)
    success = np.empty(F, dtype=bool)
    matched = np.empty(F, dtype=np.int64)
    inliers = np.empty(F, dtype=np.int64)
    ratios = np.empty(F, dtype=np.float64)
    t_err = np.empty(F, dtype=np.float64)
    r_err = np.empty(F, dtype=np.float64)
    for i, ln in enumerate(rows):
        p = ln.split()
        if len(p) != 16 or p[0] != "frame" or int(p[1]) != i:
            raise ConfigError(f"{path}: malformed frame row {i}")
        chosen[i] = int(p[3])
        success[i] = bool(int(p[5]))
        matched[i] = int(p[7])
        inliers[i] = int(p[9])
        ratios[i] = float(p[11])
        t_err[i] = float(p[13])
        r_err[i] = float(p[15])
    return QueryRun(kind, log_name, shift, chosen, success, matched, inliers,
                    ratios, t_err, r_err)


def run_report(cfg: RunConfig, results_paths, out_dir) -> dict:
    """Aggregate result files into slice, summary, and per-place CSVs."""
    runs = [load_query_results(p) for p in results_paths]
    if not runs:
        raise ConfigError("report needs at least one results file")
    names = [r.selector.value for r in runs]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate selector among results files")
    frames = {r.num_frames for r in runs}
    if len(frames) != 1:
        raise ConfigError("results files cover different frame counts")
    logs = {r.log_name for r in runs}
    if len(logs) != 1:
        raise ConfigError("results files come from different logs")
    F = frames.pop()

    runs.sort(key=lambda r: r.selector.value)
    errors_by_selector = {
        r.selector.value: (r.translation_errors, r.rotation_errors_deg)
        for r in runs}

    rows = summarize(errors_by_selector, cfg.slice_length, cfg.bins,
                     cfg.thresholds)
    reports_by_selector = {
        name: evaluate_errors(t, r, cfg.slice_length, cfg.bins,
                              cfg.thresholds)[1]
        for name, (t, r) in errors_by_selector.items()}
    partition = partition_places(F, cfg.place_width, cfg.place_stride)

    os.makedirs(out_dir, exist_ok=True)
    log = runs[0].log_name
    paths = {key: os.path.join(out_dir, ARTIFACT_NAMES[key])
             for key in ("slices", "summary", "places")}
    write_slices_csv(paths["slices"], log, reports_by_selector, cfg.bins)
    write_summary_csv(paths["summary"], log, rows, cfg.bins)
    write_place_series_csv(paths["places"], log, errors_by_selector,
                           partition, cfg.bins[0])
    return {"paths": paths, "summary": rows, "num_frames": F}
