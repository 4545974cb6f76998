"""Place partitioning and per-place camera selection by expected cost.

The trajectory is split into overlapping fixed-width windows of images
(places).  For each place and camera, translation-error samples from a
training traverse feed a Gaussian KDE; the camera minimizing the Monte
Carlo estimate of expected cost under a saturating monomial cost function
wins the place.  A quadrature evaluator of the same integral serves as the
deterministic reference for the MC path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    EmptySamplesError,
    NoDataForPlaceError,
)
from .geometry import Pose

__all__ = [
    "DEFAULT_PLACE_WIDTH",
    "DEFAULT_PLACE_STRIDE",
    "Place",
    "PlacePartition",
    "CostFunction",
    "KdeConfig",
    "PoseErrorSampleSet",
    "SelectionTable",
    "PlaceSelection",
    "partition_places",
    "cost",
    "kde_density",
    "expected_cost",
    "expected_cost_quadrature",
    "build_sample_sets",
    "select_cameras",
    "lookup_camera",
    "lookup_cameras",
    "save_selection_table",
    "load_selection_table",
]

_SEED_MASK = (1 << 64) - 1

DEFAULT_PLACE_WIDTH = 40
DEFAULT_PLACE_STRIDE = 10


@dataclass(frozen=True)
class Place:
    """A window of consecutive trajectory images, [start_index, end_index)."""

    place_id: int
    start_index: int
    end_index: int
    center_pose: Pose | None = None

    def __post_init__(self):
        if self.start_index < 0 or self.end_index <= self.start_index:
            raise ConfigError("place must span a non-empty index range")

    @property
    def width(self) -> int:
        return self.end_index - self.start_index


@dataclass(frozen=True)
class PlacePartition:
    places: tuple[Place, ...]
    width_images: int
    stride_images: int
    num_images: int

    @property
    def overlap_factor(self) -> Fraction:
        return Fraction(self.width_images - self.stride_images, self.width_images)

    def __len__(self) -> int:
        return len(self.places)

    def __iter__(self):
        return iter(self.places)


def partition_places(num_images: int, width: int = DEFAULT_PLACE_WIDTH,
                     stride: int = DEFAULT_PLACE_STRIDE,
                     poses: Sequence[Pose] | None = None) -> PlacePartition:
    """Overlapping windows starting every ``stride`` images.

    The final place is the last full window, extended to absorb any
    trailing partial window so every index is covered and every place holds
    at least ``width`` images.  When the trajectory's ground-truth poses
    are supplied, each place records the pose of its middle image as the
    place center (used for nearest-place lookup at query time).
    """
    if width <= 0 or not 0 < stride <= width:
        raise ConfigError("need width > 0 and 0 < stride <= width")
    if num_images < width:
        raise ConfigError(f"num_images ({num_images}) is smaller than one "
                          f"place width ({width})")
    if poses is not None and len(poses) != num_images:
        raise ConfigError("poses, when given, must cover every image")

    starts = list(range(0, num_images - width + 1, stride))
    places = []
    for pid, s in enumerate(starts):
        last = pid == len(starts) - 1
        end = num_images if last else s + width
        center = poses[(s + end) // 2] if poses is not None else None
        places.append(Place(pid, s, end, center))
    return PlacePartition(tuple(places), width, stride, num_images)


@dataclass(frozen=True)
class CostFunction:
    """Monomial cost with a saturation ceiling: x^p below x_max, flat above."""

    p: float = 2.0
    x_max: float = 2.0

    def __post_init__(self):
        if self.p < 0.0 or not math.isfinite(self.p):
            raise ConfigError("cost exponent p must be finite and >= 0")
        if self.x_max <= 0.0 or not math.isfinite(self.x_max):
            raise ConfigError("cost ceiling x_max must be finite and positive")

    @property
    def ceiling(self) -> float:
        return self.x_max ** self.p


def cost(cf: CostFunction, x):
    """Cost of a non-negative error value (scalar or array)."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError("cost is defined for finite non-negative errors only")
    out = np.where(arr >= cf.x_max, cf.ceiling, np.minimum(arr, cf.x_max) ** cf.p)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass(frozen=True)
class KdeConfig:
    """Gaussian-kernel density estimate and its Monte Carlo budget."""

    bandwidth: float = 0.1
    mc_samples: int = 10000
    rng_seed: int = 0
    kernel: str = "gaussian"

    def __post_init__(self):
        if self.bandwidth <= 0.0 or not math.isfinite(self.bandwidth):
            raise ConfigError("bandwidth must be finite and positive")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be at least 1")
        if self.kernel != "gaussian":
            raise ConfigError(f"unsupported kernel {self.kernel!r}")


@dataclass(frozen=True)
class PoseErrorSampleSet:
    """Translation-error samples (meters) of one camera in one place.

    Failed localizations enter as the cost ceiling's abscissa (x_max) so
    they saturate the cost: see build_sample_sets.  May be empty when the
    camera never produced a result in the place.
    """

    camera_id: int
    place_id: int
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr < 0.0)):
            raise ValueError("samples must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)


_SQRT_2PI = math.sqrt(2.0 * math.pi)


def kde_density(sample_set: PoseErrorSampleSet, cfg: KdeConfig, x):
    """Gaussian KDE value(s) at x: mean over samples of N(x_i, h^2) pdfs."""
    if len(sample_set) == 0:
        raise EmptySamplesError("cannot evaluate a KDE over zero samples")
    h = cfg.bandwidth
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    diffs = (xs[:, None] - sample_set.samples[None, :]) / h
    dens = np.exp(-0.5 * diffs * diffs).sum(axis=1) / (len(sample_set) * h * _SQRT_2PI)
    return float(dens[0]) if np.isscalar(x) or np.ndim(x) == 0 else dens


def expected_cost(sample_set: PoseErrorSampleSet, cf: CostFunction,
                  cfg: KdeConfig) -> float:
    """Monte Carlo estimate of the expected cost under the KDE density.

    Draws are kernel centers plus Gaussian(0, h) noise, clamped at zero
    (errors are non-negative; the kernel leaks mass below it).  The Monte
    Carlo budget is spread evenly across kernels, with the remainder
    assigned to a random subset, which removes the between-kernel variance
    of naive resampling.  Deterministic for a fixed cfg.rng_seed.
    """
    n = len(sample_set)
    if n == 0:
        raise EmptySamplesError("cannot estimate expected cost of zero samples")
    N = cfg.mc_samples
    rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed & _SEED_MASK))
    counts = np.full(n, N // n)
    rem = N % n
    if rem:
        counts[rng.choice(n, size=rem, replace=False)] += 1
    centers = np.repeat(sample_set.samples, counts)
    draws = centers + rng.standard_normal(N) * cfg.bandwidth
    np.maximum(draws, 0.0, out=draws)
    return float(np.mean(cost(cf, draws)))


def _gauss_cdf(t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(t / math.sqrt(2.0)))


def expected_cost_quadrature(sample_set: PoseErrorSampleSet, cf: CostFunction,
                             cfg: KdeConfig) -> float:
    """Deterministic reference for expected_cost.

    Trapezoid rule over [0, x_max + 6h] with step h/20, plus the two exact
    boundary terms the finite grid misses: kernel mass above the upper
    limit saturates at the ceiling, and mass below zero is clamped to
    cost(0) — mirroring the MC estimator's clamp.
    """
    if len(sample_set) == 0:
        raise EmptySamplesError("cannot estimate expected cost of zero samples")
    h = cfg.bandwidth
    upper = cf.x_max + 6.0 * h
    n_steps = max(1, int(round(upper / (h / 20.0))))
    grid = np.linspace(0.0, upper, n_steps + 1)
    dens = kde_density(sample_set, cfg, grid)
    y = cost(cf, grid) * dens
    integral = float(np.sum((y[1:] + y[:-1]) * 0.5 * np.diff(grid)))
    above = float(np.mean(1.0 - _gauss_cdf((upper - sample_set.samples) / h)))
    below = float(np.mean(_gauss_cdf((0.0 - sample_set.samples) / h)))
    return integral + cf.ceiling * above + cost(cf, 0.0) * below


# ---------------------------------------------------------------------------
# selection table


@dataclass(frozen=True)
class PlaceSelection:
    """One selection-table row: the chosen camera and the evidence for it."""

    place_id: int
    start_index: int
    end_index: int
    center: tuple[float, float, float]
    chosen_camera: int
    costs: tuple[float, ...]        # aligned with SelectionTable.camera_ids
    sample_counts: tuple[int, ...]


def _argmin_lowest(values: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(values)):
        if values[i] < values[best]:
            best = i
    return best


@dataclass(frozen=True)
class SelectionTable:
    """Per-place camera choices plus the configuration that produced them.

    ``static_choices`` optionally records slice-level winners (one camera
    per evaluation slice) computed from the same training data, so a single
    artifact drives both per-place and per-slice selection.
    """

    cost_function: CostFunction
    kde_config: KdeConfig
    method: str
    camera_ids: tuple[int, ...]
    rows: tuple[PlaceSelection, ...]
    static_choices: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.method not in ("mc", "quadrature"):
            raise ConfigError(f"unknown selection method {self.method!r}")
        if not self.rows:
            raise ConfigError("selection table must cover at least one place")
        for row in self.rows:
            if len(row.costs) != len(self.camera_ids) \
                    or len(row.sample_counts) != len(self.camera_ids):
                raise ConfigError(f"place {row.place_id}: cost/count arity "
                                  "does not match the camera list")
            want = self.camera_ids[_argmin_lowest(row.costs)]
            if row.chosen_camera != want:
                raise ConfigError(
                    f"place {row.place_id}: chosen camera {row.chosen_camera} "
                    f"is not the lowest-cost camera {want}")
        for slice_id, cam in self.static_choices:
            if cam not in self.camera_ids:
                raise ConfigError(f"slice {slice_id}: unknown camera {cam}")

    def row_for_place(self, place_id: int) -> PlaceSelection:
        return self.rows[place_id]

    def static_for_slice(self, slice_id: int) -> int:
        for sid, cam in self.static_choices:
            if sid == slice_id:
                return cam
        raise KeyError(f"no static choice recorded for slice {slice_id}")


def build_sample_sets(translation_errors: np.ndarray,
                      partition: PlacePartition,
                      camera_ids: Sequence[int],
                      sentinel: float) -> dict[int, dict[int, PoseErrorSampleSet]]:
    """Pool per-frame translation errors into per-place, per-camera sets.

    ``translation_errors`` is (num_frames, num_cameras) with +inf marking
    failed localizations; failures are recorded as ``sentinel`` (normally
    the cost ceiling's onset x_max), which the cost function saturates.
    """
    errs = np.asarray(translation_errors, dtype=np.float64)
    if errs.ndim != 2 or errs.shape[1] != len(camera_ids):
        raise ValueError("translation_errors must be (frames, cameras)")
    if errs.shape[0] != partition.num_images:
        raise ValueError("translation_errors rows must match the partition")
    out: dict[int, dict[int, PoseErrorSampleSet]] = {}
    for place in partition:
        block = errs[place.start_index:place.end_index]
        per_cam = {}
        for col, cam_id in enumerate(camera_ids):
            vals = block[:, col]
            vals = np.where(np.isfinite(vals), vals, sentinel)
            per_cam[cam_id] = PoseErrorSampleSet(cam_id, place.place_id, vals)
        out[place.place_id] = per_cam
    return out


def _derived_seed(base: int, a: int, b: int) -> int:
    ss = np.random.SeedSequence([base & _SEED_MASK, a, b])
    return int(ss.generate_state(1, np.uint64)[0])


def select_cameras(partition: PlacePartition,
                   sets_by_place: Mapping[int, Mapping[int, PoseErrorSampleSet]],
                   camera_ids: Sequence[int],
                   cf: CostFunction,
                   kde_cfg: KdeConfig,
                   method: str = "mc") -> SelectionTable:
    """Choose the minimum-expected-cost camera for every place.

    A camera with no samples in a place scores the cost ceiling (it must be
    selectable-against without crashing); a place where every camera is
    empty raises NoDataForPlaceError.  Ties go to the lowest camera id.
    Each (place, camera) estimate draws from its own seed stream derived
    from (kde_cfg.rng_seed, place_id, camera_id), so evaluation order
    cannot change the table.
    """
    if method not in ("mc", "quadrature"):
        raise ConfigError(f"unknown selection method {method!r}")
    camera_ids = tuple(camera_ids)
    estimator = expected_cost if method == "mc" else expected_cost_quadrature
    rows = []
    for place in partition:
        per_cam = sets_by_place.get(place.place_id, {})
        costs = []
        counts = []
        any_data = False
        for cam_id in camera_ids:
            samples = per_cam.get(cam_id)
            n = 0 if samples is None else len(samples)
            if n == 0:
                costs.append(cf.ceiling)
                counts.append(0)
                continue
            any_data = True
            cam_cfg = replace(kde_cfg, rng_seed=_derived_seed(
                kde_cfg.rng_seed, place.place_id, cam_id))
            costs.append(estimator(samples, cf, cam_cfg))
            counts.append(n)
        if not any_data:
            raise NoDataForPlaceError(place.place_id)
        chosen = camera_ids[_argmin_lowest(costs)]
        if place.center_pose is None:
            raise ConfigError(f"place {place.place_id} has no center pose; "
                              "partition_places needs the trajectory poses")
        cx, cy, cz = (float(v) for v in place.center_pose.translation)
        rows.append(PlaceSelection(place.place_id, place.start_index,
                                   place.end_index, (cx, cy, cz), chosen,
                                   tuple(costs), tuple(counts)))
    return SelectionTable(cf, kde_cfg, method, camera_ids, tuple(rows))


def _centers_array(table: SelectionTable) -> np.ndarray:
    return np.array([row.center for row in table.rows])


def lookup_cameras(table: SelectionTable, translations: np.ndarray) -> np.ndarray:
    """Chosen camera for each query translation, by nearest place center.

    Ties resolve to the lowest place id (argmin keeps the first minimum).
    """
    pts = np.asarray(translations, dtype=np.float64).reshape(-1, 3)
    centers = _centers_array(table)
    d = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    nearest = np.argmin(d, axis=1)
    chosen = np.array([table.rows[i].chosen_camera for i in nearest])
    return chosen


def lookup_camera(table: SelectionTable, query_pose: Pose) -> int:
    """Table lookup for one query pose (coarse place recognition stand-in)."""
    return int(lookup_cameras(table, query_pose.translation[None, :])[0])


# ---------------------------------------------------------------------------
# serialization

_TABLE_MAGIC = "selection-table v1"


def _fmt(x: float) -> str:
    return repr(float(x))


def save_selection_table(table: SelectionTable, path) -> None:
    """Versioned text serialization; floats round-trip bit-exactly."""
    cf, kc = table.cost_function, table.kde_config
    lines = [_TABLE_MAGIC,
             f"method {table.method}",
             f"cost_p {_fmt(cf.p)}",
             f"cost_x_max {_fmt(cf.x_max)}",
             f"kernel {kc.kernel}",
             f"bandwidth {_fmt(kc.bandwidth)}",
             f"mc_samples {kc.mc_samples}",
             f"rng_seed {kc.rng_seed}",
             "cameras " + " ".join(str(c) for c in table.camera_ids)]
    for row in table.rows:
        center = " ".join(_fmt(v) for v in row.center)
        costs = " ".join(_fmt(v) for v in row.costs)
        counts = " ".join(str(v) for v in row.sample_counts)
        lines.append(f"place {row.place_id} {row.start_index} {row.end_index} "
                     f"{center} chosen {row.chosen_camera} "
                     f"costs {costs} counts {counts}")
    for slice_id, cam in table.static_choices:
        lines.append(f"static {slice_id} {cam}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_selection_table(path) -> SelectionTable:
    """Parse and re-validate a table (argmin consistency included)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _TABLE_MAGIC:
        raise ConfigError(f"{path}: not a selection table file")
    header: dict[str, str] = {}
    rows = []
    statics = []
    camera_ids: tuple[int, ...] = ()
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "cameras":
            camera_ids = tuple(int(v) for v in parts[1:])
        elif parts[0] == "place":
            nc = len(camera_ids)
            if nc == 0:
                raise ConfigError(f"{path}: place rows before camera list")
            expect = 11 + 2 * nc
            if len(parts) != expect or parts[7] != "chosen" \
                    or parts[9] != "costs" or parts[10 + nc] != "counts":
                raise ConfigError(f"{path}: malformed place row {parts[1:2]}")
            rows.append(PlaceSelection(
                int(parts[1]), int(parts[2]), int(parts[3]),
                (float(parts[4]), float(parts[5]), float(parts[6])),
                int(parts[8]),
                tuple(float(v) for v in parts[10:10 + nc]),
                tuple(int(v) for v in parts[11 + nc:11 + 2 * nc])))
        elif parts[0] == "static":
            statics.append((int(parts[1]), int(parts[2])))
        else:
            header[parts[0]] = parts[1]
    try:
        cf = CostFunction(float(header["cost_p"]), float(header["cost_x_max"]))
        kc = KdeConfig(float(header["bandwidth"]), int(header["mc_samples"]),
                       int(header["rng_seed"]), header["kernel"])
        method = header["method"]
    except KeyError as exc:
        raise ConfigError(f"{path}: missing header field {exc}") from None
    try:
        return SelectionTable(cf, kc, method, camera_ids, tuple(rows),
                              tuple(statics))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
