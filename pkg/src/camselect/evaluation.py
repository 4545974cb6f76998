"""Recall-at-tolerance metrics, slice failure classification, summaries.

A query log is scored as the percentage of frames localized within each
translation/rotation tolerance bin (conjunctive test, failures count as
infinite error).  The log is then cut into fixed-length slices and a slice
is flagged failed when its recall drops strictly below the per-bin
threshold; worst-case coverage is about how few slices fail, not about the
mean recall.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyInputError
from .selection import PlacePartition

__all__ = [
    "ToleranceBin",
    "DEFAULT_BINS",
    "FailureThresholds",
    "DEFAULT_THRESHOLDS",
    "DEFAULT_SLICE_LENGTH",
    "SliceReport",
    "SummaryRow",
    "recall_at",
    "recall_at_arrays",
    "slice_ranges",
    "classify_slices",
    "evaluate_errors",
    "summarize",
    "write_slices_csv",
    "write_summary_csv",
    "write_place_series_csv",
]

DEFAULT_SLICE_LENGTH = 1000


@dataclass(frozen=True)
class ToleranceBin:
    """A localization success criterion: within t_tol AND within r_tol."""

    t_tol: float
    r_tol: float

    def __post_init__(self):
        if self.t_tol <= 0.0 or self.r_tol <= 0.0:
            raise ConfigError("tolerance bin thresholds must be positive")

    def label(self) -> str:
        def num(x):
            return f"{x:g}"
        return f"{num(self.t_tol)}m_{num(self.r_tol)}deg"


DEFAULT_BINS = (ToleranceBin(0.25, 2.0),
                ToleranceBin(0.5, 5.0),
                ToleranceBin(5.0, 10.0))


@dataclass(frozen=True)
class FailureThresholds:
    """Per-bin minimum recall (%); a slice below a bin's floor fails it."""

    min_recall_pct: tuple[float, ...] = (30.0, 50.0, 70.0)

    def __post_init__(self):
        pcts = tuple(float(v) for v in self.min_recall_pct)
        if not pcts:
            raise ConfigError("need at least one threshold")
        for v in pcts:
            if not 0.0 < v <= 100.0:
                raise ConfigError("thresholds are percentages in (0, 100]")
        if any(b < a for a, b in zip(pcts, pcts[1:])):
            raise ConfigError("thresholds must be non-decreasing across bins")
        object.__setattr__(self, "min_recall_pct", pcts)


DEFAULT_THRESHOLDS = FailureThresholds()


@dataclass(frozen=True)
class SliceReport:
    slice_id: int
    recalls_pct: tuple[float, ...]   # aligned with the bin list
    failed: tuple[bool, ...]
    frame_count: int

    def __post_init__(self):
        if any(not 0.0 <= r <= 100.0 for r in self.recalls_pct):
            raise ValueError("recall is a percentage in [0, 100]")


@dataclass(frozen=True)
class SummaryRow:
    selector: str
    recalls_pct: tuple[float, ...]        # over all frames of the log
    failed_slices: tuple[int, ...]        # per bin
    num_slices: int

    @property
    def failed_pct(self) -> tuple[float, ...]:
        return tuple(100.0 * f / self.num_slices for f in self.failed_slices)


def recall_at_arrays(translation_errors, rotation_errors_deg,
                     bin: ToleranceBin) -> float:
    """Recall (%) from parallel error arrays; inf/nan marks failed frames."""
    t = np.asarray(translation_errors, dtype=np.float64).reshape(-1)
    r = np.asarray(rotation_errors_deg, dtype=np.float64).reshape(-1)
    if t.size == 0:
        raise EmptyInputError("recall over zero frames is undefined")
    if t.shape != r.shape:
        raise ValueError("translation and rotation arrays must align")
    ok = (t <= bin.t_tol) & (r <= bin.r_tol)
    return 100.0 * float(np.count_nonzero(ok)) / t.size


def recall_at(errors: Sequence, bin: ToleranceBin) -> float:
    """Recall (%) over per-frame pose errors; None entries are failures."""
    if len(errors) == 0:
        raise EmptyInputError("recall over zero frames is undefined")
    t = np.array([np.inf if e is None else e.translation_err for e in errors])
    r = np.array([np.inf if e is None else e.rotation_err for e in errors])
    return recall_at_arrays(t, r, bin)


def slice_ranges(num_frames: int,
                 slice_length: int = DEFAULT_SLICE_LENGTH) -> list[tuple[int, int]]:
    """Fixed-length index ranges; the last slice keeps any short remainder."""
    if slice_length <= 0:
        raise ConfigError("slice_length must be positive")
    if num_frames <= 0:
        raise ConfigError("need at least one frame")
    return [(s, min(s + slice_length, num_frames))
            for s in range(0, num_frames, slice_length)]


def classify_slices(recalls_by_slice: Sequence[Sequence[float]],
                    thresholds: FailureThresholds = DEFAULT_THRESHOLDS,
                    frame_counts: Sequence[int] | None = None
                    ) -> tuple[SliceReport, ...]:
    """Flag each slice per bin: failed iff recall is strictly below the floor.

    A recall exactly at the threshold passes.
    """
    floors = thresholds.min_recall_pct
    reports = []
    for sid, recalls in enumerate(recalls_by_slice):
        recalls = tuple(float(v) for v in recalls)
        if len(recalls) != len(floors):
            raise ValueError(f"slice {sid}: expected {len(floors)} recalls")
        failed = tuple(r < f for r, f in zip(recalls, floors))
        count = int(frame_counts[sid]) if frame_counts is not None else 0
        reports.append(SliceReport(sid, recalls, failed, count))
    return tuple(reports)


def evaluate_errors(translation_errors, rotation_errors_deg,
                    slice_length: int = DEFAULT_SLICE_LENGTH,
                    bins: Sequence[ToleranceBin] = DEFAULT_BINS,
                    thresholds: FailureThresholds = DEFAULT_THRESHOLDS,
                    ) -> tuple[tuple[float, ...], tuple[SliceReport, ...]]:
    """Whole-log recalls plus per-slice failure reports from raw errors."""
    t = np.asarray(translation_errors, dtype=np.float64).reshape(-1)
    r = np.asarray(rotation_errors_deg, dtype=np.float64).reshape(-1)
    overall = tuple(recall_at_arrays(t, r, b) for b in bins)
    ranges = slice_ranges(t.size, slice_length)
    per_slice = [[recall_at_arrays(t[a:b], r[a:b], bn) for bn in bins]
                 for a, b in ranges]
    counts = [b - a for a, b in ranges]
    return overall, classify_slices(per_slice, thresholds, counts)


def summarize(errors_by_selector: Mapping[str, tuple],
              slice_length: int = DEFAULT_SLICE_LENGTH,
              bins: Sequence[ToleranceBin] = DEFAULT_BINS,
              thresholds: FailureThresholds = DEFAULT_THRESHOLDS,
              ) -> tuple[SummaryRow, ...]:
    """One summary row per selector, aggregated from raw per-frame errors.

    ``errors_by_selector`` maps a selector name to its (translation,
    rotation) error arrays over the same query log.  Pure aggregation:
    rerunning over the same arrays reproduces the table exactly.
    """
    rows = []
    for name, (t, r) in errors_by_selector.items():
        overall, reports = evaluate_errors(t, r, slice_length, bins, thresholds)
        failed = tuple(sum(rep.failed[i] for rep in reports)
                       for i in range(len(bins)))
        rows.append(SummaryRow(name, overall, failed, len(reports)))
    return tuple(rows)


# ---------------------------------------------------------------------------
# CSV emission (plot-ready; no rendering here)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_slices_csv(path, log_name: str,
                     reports_by_selector: Mapping[str, Sequence[SliceReport]],
                     bins: Sequence[ToleranceBin] = DEFAULT_BINS) -> None:
    """One row per (selector, slice, bin): recall and the failed flag."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["selector", "log", "slice", "bin_t", "bin_r",
                    "recall_pct", "failed"])
        for name in reports_by_selector:
            for rep in reports_by_selector[name]:
                for i, b in enumerate(bins):
                    w.writerow([name, log_name, rep.slice_id,
                                _fmt(b.t_tol), _fmt(b.r_tol),
                                _fmt(rep.recalls_pct[i]),
                                int(rep.failed[i])])


def write_summary_csv(path, log_name: str, rows: Sequence[SummaryRow],
                      bins: Sequence[ToleranceBin] = DEFAULT_BINS) -> None:
    """Per-selector log summary: overall recalls and failed-slice tallies."""
    header = ["selector", "log"]
    header += [f"recall_{b.label()}" for b in bins]
    header += [f"failed_slices_{b.label()}" for b in bins]
    header += [f"failed_pct_{b.label()}" for b in bins]
    header.append("num_slices")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            out = [row.selector, log_name]
            out += [_fmt(v) for v in row.recalls_pct]
            out += [str(v) for v in row.failed_slices]
            out += [_fmt(v) for v in row.failed_pct]
            out.append(str(row.num_slices))
            w.writerow(out)


def write_place_series_csv(path, log_name: str,
                           errors_by_selector: Mapping[str, tuple],
                           partition: PlacePartition,
                           bin: ToleranceBin = DEFAULT_BINS[0]) -> None:
    """Per-place recall at one bin for each selector (segment-level series)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["selector", "log", "place", "start_index", "end_index",
                    "recall_pct"])
        for name, (t, r) in errors_by_selector.items():
            t = np.asarray(t, dtype=np.float64)
            r = np.asarray(r, dtype=np.float64)
            for place in partition:
                rec = recall_at_arrays(t[place.start_index:place.end_index],
                                       r[place.start_index:place.end_index],
                                       bin)
                w.writerow([name, log_name, place.place_id,
                            place.start_index, place.end_index, _fmt(rec)])
