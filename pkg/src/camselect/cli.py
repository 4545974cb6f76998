"""Command-line harness: simulate, train, query, report.

Stages pass artifacts through files, so a full run is:

    camselect simulate --config run.yaml --out out/
    camselect train    --config run.yaml --traverse out/training.traverse \
                       --out out/selection_table.txt
    camselect query    --config run.yaml --traverse out/query.traverse \
                       --selector dynamic --table out/selection_table.txt \
                       --out out/results_dynamic.txt
    camselect report   --config run.yaml --results out/results_*.txt --out out/

Everything is deterministic under a fixed config: rerunning any stage
reproduces its output byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .baselines import SelectorKind
from .config import load_run_config
from .errors import ConfigError
from .localizer import localization_call_count, reset_localization_call_count
from .pipeline import (
    ARTIFACT_NAMES,
    results_filename,
    run_query,
    run_report,
    run_simulate,
    run_train,
    save_query_results,
)

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camselect",
        description="Place-specific camera selection for multi-camera "
                    "visual localization: synthetic worlds, training, "
                    "query replay, and evaluation reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True,
                       help="run configuration YAML")
        p.add_argument("--seed", type=int, default=None,
                       help="override seeds.run (query-time randomness)")

    p_sim = sub.add_parser("simulate",
                           help="generate the world and its three traverses")
    add_common(p_sim)
    p_sim.add_argument("--out", default=None,
                       help="output directory (default: config output_dir)")

    p_train = sub.add_parser("train",
                             help="build the selection table from the "
                                  "training traverse")
    add_common(p_train)
    p_train.add_argument("--traverse", required=True,
                         help="training traverse file")
    p_train.add_argument("--out", default=None,
                         help="table path (default: <output_dir>/"
                              f"{ARTIFACT_NAMES['table']})")
    p_train.add_argument("--quadrature", action="store_true",
                         help="use deterministic integration instead of "
                              "Monte Carlo for expected costs")

    p_query = sub.add_parser("query",
                             help="replay the query traverse under a selector")
    add_common(p_query)
    p_query.add_argument("--traverse", required=True,
                         help="query traverse file")
    p_query.add_argument("--selector", required=True,
                         choices=[k.value for k in SelectorKind])
    p_query.add_argument("--table", default=None,
                         help="selection table (static/dynamic selectors)")
    p_query.add_argument("--out", default=None,
                         help="results path (default: <output_dir>/"
                              "results_<selector>.txt)")

    p_rep = sub.add_parser("report", help="aggregate results into CSVs")
    add_common(p_rep)
    p_rep.add_argument("--results", required=True, nargs="+",
                       help="one or more query results files")
    p_rep.add_argument("--out", default=None,
                       help="output directory (default: config output_dir)")
    return parser


def _load_config(args):
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg,
            seeds=dataclasses.replace(cfg.seeds, run=args.seed),
            ransac=dataclasses.replace(cfg.ransac, rng_seed=args.seed))
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out or cfg.output_dir
    manifest = run_simulate(cfg, out_dir)
    print(f"world seed {manifest['world_seed']}: "
          f"{manifest['num_frames']} frames, "
          f"{manifest['num_regions']} regions, "
          f"{manifest['num_landmarks']} landmarks")
    for entry in manifest["traverses"]:
        print(f"  {entry['role']:9s} seed {entry['seed']} "
              f"shift {entry['condition_shift']} -> {entry['path']}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    out_path = args.out or os.path.join(cfg.output_dir,
                                        ARTIFACT_NAMES["table"])
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    method = "quadrature" if args.quadrature else "mc"
    table = run_train(cfg, args.traverse, out_path, method=method)
    print(f"selection table: {len(table.rows)} places, "
          f"{len(table.static_choices)} slices, method {method} "
          f"-> {out_path}")
    return 0


def _cmd_query(args) -> int:
    cfg = _load_config(args)
    kind = SelectorKind(args.selector)
    out_path = args.out or os.path.join(cfg.output_dir,
                                        results_filename(kind))
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    reset_localization_call_count()
    run = run_query(cfg, args.traverse, kind, table_path=args.table)
    calls = localization_call_count()
    save_query_results(run, out_path)
    print(f"selector {kind.value}: {run.num_frames} frames, "
          f"{int(run.success.sum())} localized, "
          f"{calls} localization calls -> {out_path}")
    return 0


def _cmd_report(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out or cfg.output_dir
    info = run_report(cfg, args.results, out_dir)
    bins = cfg.bins
    print(f"{info['num_frames']} frames per selector")
    header = "selector".ljust(10) + "".join(
        f"  recall@{b.label():<14s}" for b in bins) + "failed slices"
    print(header)
    for row in info["summary"]:
        cells = "".join(f"  {v:8.2f}%{'':<12s}" for v in row.recalls_pct)
        fails = "/".join(str(v) for v in row.failed_slices)
        print(f"{row.selector:<10s}{cells}{fails} of {row.num_slices}")
    for key, path in info["paths"].items():
        print(f"  {key}: {path}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "query": _cmd_query,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
