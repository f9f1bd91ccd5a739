#!/usr/bin/env python3
"""
Command-line entry point.

Usage:
    kcr convert labels/ boxes.json --from dota --to rotated-json
    kcr iou a.json b.json
    kcr assign proposals.json gt.csv --gt-format axis-csv --strategy projection --gamma 1.0
    kcr eval detections.json labels/ --gt-format dota --pr-curve curve.csv
    kcr sim src/config/experiment_default.yaml --out results/ --gamma-sweep
    kcr bench --n 200 --seed 0

Results go to stdout (or --out) as JSON or CSV; logs go to stderr. Exit codes:
0 success, 1 runtime error, 2 input or parse error.
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.assignment.results import positive_recall
from src.assignment.rules import (
    assign_first_stage,
    assign_second_stage_heuristic,
    assign_second_stage_projection,
    assign_second_stage_source,
)
from src.config.config_objects import (
    AREA_RULES,
    ENLARGEMENT_MODES,
    EvaluationConfig,
    HeuristicConfig,
    load_suite_config,
)
from src.core.constants import DEFAULT_ASPECT_RATIO_MIN, EVAL_IOU_THRESHOLD, POSITIVE_IOU_THRESHOLD
from src.core.exceptions import ConfigError, InvalidBox, KcrError, ParseError
from src.core.logger import LoggerFactory, get_logger, set_global_environment
from src.core.utils import dump_json, write_table, write_text
from src.data.convert import object_as_aabox
from src.data.detections import read_detections_file
from src.data.dota import write_dota_directory
from src.data.formats import ANNOTATION_FORMATS, read_annotations, render_annotations
from src.evaluation.nms import rotated_nms
from src.evaluation.report import evaluate_dataset
from src.geometry.batch import iou_rotated_matrix, rotated_boxes_to_array, set_max_workers
from src.objects.annotations import AnnotationRecord, GroundTruthSet
from src.objects.detections import Detection
from src.objects.boxes import RotatedBox
from src.simulator.suite import run_benchmark_suite, run_gamma_sweep

logger = get_logger(__name__, module_name="cli")

ASSIGN_STRATEGIES = ("first_stage", "source", "projection", "heuristic")
ROTATED_FORMATS = ("dota", "rotated-json")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2


# =============================================================================
# ARGUMENT TYPES
# =============================================================================

def _float_in(lo: float, hi: float, lo_open: bool = True) -> Callable[[str], float]:
    def parse(text: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
        below = value <= lo if lo_open else value < lo
        if below or value > hi or not np.isfinite(value):
            bracket = "(" if lo_open else "["
            raise argparse.ArgumentTypeError(f"{value} outside {bracket}{lo}, {hi}]")
        return value
    return parse


def _at_least(minimum: float, cast: Callable[[str], float] = float) -> Callable[[str], float]:
    def parse(text: str):
        try:
            value = cast(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a {cast.__name__}, got '{text}'")
        if not value >= minimum or not np.isfinite(value):
            raise argparse.ArgumentTypeError(f"{value} must be >= {minimum}")
        return value
    return parse


unit_interval = _float_in(0.0, 1.0)


# =============================================================================
# OUTPUT
# =============================================================================

def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_text(out, text)
        logger.info("Wrote %s", out)


def _emit_table(df: pd.DataFrame, out: Optional[str], pretty: bool) -> None:
    if out in (None, "-"):
        if pretty:
            sys.stdout.write(df.to_string(index=False) + "\n")
        else:
            df.to_csv(sys.stdout, index=False, float_format="%.10g", lineterminator="\n")
    else:
        write_table(df, out, "csv")
        logger.info("Wrote %s", out)


def _flatten_rotated(records: Dict[str, AnnotationRecord]) -> List[RotatedBox]:
    return [obj.to_rotated() for image_id in sorted(records) for obj in records[image_id].objects]


def _ground_truth_set(record: Optional[AnnotationRecord], fmt: str) -> GroundTruthSet:
    """Annotation record as single-class ground truth of the kind its format carries."""
    objects = record.objects if record is not None else ()
    label_ids = {label: k for k, label in enumerate(sorted({obj.label for obj in objects}))}
    labels = [label_ids[obj.label] for obj in objects]
    if fmt in ROTATED_FORMATS:
        gt = GroundTruthSet.source([obj.to_rotated() for obj in objects], labels)
    else:
        gt = GroundTruthSet.target([object_as_aabox(obj) for obj in objects], labels)
    return gt.single_class()


# =============================================================================
# SUBCOMMANDS
# =============================================================================

def cmd_convert(args: argparse.Namespace) -> int:
    records = read_annotations(args.input, args.from_fmt)
    out = Path(args.output) if args.output != "-" else None
    if args.to_fmt == "dota" and out is not None and (out.is_dir() or len(records) != 1 or args.output.endswith("/")):
        paths = write_dota_directory(records, out)
        logger.info("Wrote %d DOTA files to %s", len(paths), out)
        return EXIT_OK
    _emit(render_annotations(records, args.to_fmt, args.pretty), args.output)
    return EXIT_OK


def cmd_iou(args: argparse.Namespace) -> int:
    boxes_a = _flatten_rotated(read_annotations(args.boxes_a, args.format))
    boxes_b = _flatten_rotated(read_annotations(args.boxes_b, args.format))
    matrix = iou_rotated_matrix(boxes_a, boxes_b)
    frame = pd.DataFrame(matrix, columns=[f"b{j}" for j in range(len(boxes_b))])
    frame.insert(0, "a", np.arange(len(boxes_a)))
    _emit_table(frame, args.out, args.pretty)
    return EXIT_OK


def cmd_assign(args: argparse.Namespace) -> int:
    proposals = read_annotations(args.proposals, args.proposal_format)
    ground_truth = read_annotations(args.gt, args.gt_format)
    heuristic = HeuristicConfig(args.aspect_ratio_min, args.area_threshold, args.area_rule)
    issues = heuristic.validate()
    if issues:
        raise ConfigError("; ".join(issues))

    images = {}
    for image_id in sorted(proposals):
        gt = _ground_truth_set(ground_truth.get(image_id), args.gt_format)
        objects = proposals[image_id].objects
        if args.strategy == "first_stage":
            rows = np.asarray([object_as_aabox(obj).as_center_form() for obj in objects], dtype=float).reshape(-1, 4)
            batch = assign_first_stage(rows, gt, args.gamma, args.threshold, args.enlargement_mode)
        else:
            rows = rotated_boxes_to_array(obj.to_rotated() for obj in objects)
            if args.strategy == "source":
                batch = assign_second_stage_source(rows, gt, args.threshold)
            elif args.strategy == "projection":
                batch = assign_second_stage_projection(rows, gt, args.gamma, args.threshold, args.enlargement_mode)
            else:
                batch = assign_second_stage_heuristic(rows, gt, heuristic, args.threshold)
        images[image_id] = {
            "n_gt": len(gt),
            "n_positive": batch.n_positive,
            "positive_recall": positive_recall(batch, len(gt)),
            "assignments": batch.to_records(),
        }
    missing = sorted(set(ground_truth) - set(proposals))
    if missing:
        logger.warning("%d ground-truth images have no proposals: %s", len(missing), missing[:5])
    doc = {"strategy": args.strategy, "gamma": args.gamma, "positive_threshold": args.threshold, "images": images}
    _emit(dump_json(doc, args.pretty), args.out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    detections = read_detections_file(args.detections)
    ground_truth = read_annotations(args.gt, args.gt_format)
    cfg = EvaluationConfig(args.iou_threshold, args.nms, args.skip_difficult)
    report = evaluate_dataset(detections.images, ground_truth, cfg)
    if args.pr_curve:
        write_table(report.pr_curve_frame(), args.pr_curve, "csv")
    _emit(dump_json(report.to_dict(include_curve=not args.no_curve), args.pretty), args.out)
    return EXIT_OK


def cmd_sim(args: argparse.Namespace) -> int:
    suite = load_suite_config(args.spec)
    out_dir = Path(args.out) if args.out else None
    table = run_benchmark_suite(suite, out_dir, args.parquet)
    if args.gamma_sweep:
        if not suite.gamma_sweep:
            raise ConfigError("--gamma-sweep needs a 'gamma_sweep' list in the spec file")
        sweep_dir = out_dir / "gamma_sweep" if out_dir else None
        sweep = run_gamma_sweep(suite.sweep_base(), suite.gamma_sweep, sweep_dir, args.parquet)
        table = pd.concat([table, sweep], ignore_index=True)
    if args.pretty:
        sys.stdout.write(table.to_string(index=False) + "\n")
    else:
        sys.stdout.write(dump_json(table.to_dict(orient="records")))
    return EXIT_OK


def bench_workload(n: int, seed: int) -> List[Detection]:
    """n scored rotated boxes in a 100 x 100 field, fixed by the seed."""
    rng = np.random.default_rng(seed)
    centres = rng.uniform(0.0, 100.0, size=(n, 2))
    sizes = rng.uniform(5.0, 30.0, size=(n, 2))
    thetas = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=n)
    scores = rng.uniform(0.0, 1.0, size=n)
    return [
        Detection(RotatedBox(centres[k, 0], centres[k, 1], sizes[k, 0], sizes[k, 1], thetas[k]), scores[k])
        for k in range(n)
    ]


def run_bench(n: int, seed: int) -> Dict[str, object]:
    """Rotated-IoU and NMS throughput on a seeded workload; n = 0 gives no results."""
    report: Dict[str, object] = {"n": n, "seed": seed, "results": []}
    if n == 0:
        return report
    dets = bench_workload(n, seed)
    boxes = rotated_boxes_to_array(d.box for d in dets)

    start = time.perf_counter()
    iou_rotated_matrix(boxes, boxes)
    iou_seconds = time.perf_counter() - start
    start = time.perf_counter()
    kept = rotated_nms(dets, 0.5)
    nms_seconds = time.perf_counter() - start

    report["results"] = [
        {"kernel": "iou_rotated_matrix", "unit": "pairs", "items": n * n, "seconds": iou_seconds,
         "items_per_second": n * n / iou_seconds if iou_seconds > 0 else float("inf")},
        {"kernel": "rotated_nms", "unit": "boxes", "items": n, "kept": len(kept), "seconds": nms_seconds,
         "items_per_second": n / nms_seconds if nms_seconds > 0 else float("inf")},
    ]
    return report


def cmd_bench(args: argparse.Namespace) -> int:
    report = run_bench(args.n, args.seed)
    if args.pretty:
        frame = pd.DataFrame(report["results"], columns=["kernel", "unit", "items", "seconds", "items_per_second"])
        sys.stdout.write(frame.to_string(index=False) + "\n")
    else:
        sys.stdout.write(dump_json(report))
    return EXIT_OK


# =============================================================================
# PARSER
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kcr",
        description="Rotated-box geometry, label assignment, evaluation and the co-training simulator",
    )
    parser.add_argument("--log-env", choices=["dev", "test", "prod"], default="prod",
                        help="Logging environment section of logging_config.yaml (default: prod)")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="Raise console logging to INFO (-v) or DEBUG (-vv)")
    parser.add_argument("--threads", type=_at_least(1, int), default=None,
                        help="Worker threads for batched rotated IoU")
    parser.add_argument("--pretty", action="store_true", help="Indented JSON or aligned text tables")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="Convert annotations between formats")
    p.add_argument("input", help="Input file (or DOTA label directory)")
    p.add_argument("output", help="Output file, '-' for stdout, or a directory for DOTA output")
    p.add_argument("--from", dest="from_fmt", choices=ANNOTATION_FORMATS, required=True)
    p.add_argument("--to", dest="to_fmt", choices=ANNOTATION_FORMATS, required=True)
    p.set_defaults(handler=cmd_convert)

    p = sub.add_parser("iou", help="Rotated IoU matrix between two box files as CSV")
    p.add_argument("boxes_a")
    p.add_argument("boxes_b")
    p.add_argument("--format", choices=ANNOTATION_FORMATS, default="rotated-json",
                   help="Format of both box files (default: rotated-json)")
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.set_defaults(handler=cmd_iou)

    p = sub.add_parser("assign", help="Dump label assignments of proposals against ground truth")
    p.add_argument("proposals", help="Proposal boxes as an annotation file")
    p.add_argument("gt", help="Ground-truth annotation file or DOTA directory")
    p.add_argument("--proposal-format", choices=ANNOTATION_FORMATS, default="rotated-json")
    p.add_argument("--gt-format", choices=ANNOTATION_FORMATS, default="rotated-json",
                   help="dota/rotated-json are rotated (source) labels, axis-* are axis-aligned (target)")
    p.add_argument("--strategy", choices=ASSIGN_STRATEGIES, default="first_stage")
    p.add_argument("--gamma", type=_at_least(1.0), default=1.0, help="Target-box enlargement factor (>= 1)")
    p.add_argument("--enlargement-mode", choices=ENLARGEMENT_MODES, default="scale")
    p.add_argument("--threshold", type=unit_interval, default=POSITIVE_IOU_THRESHOLD,
                   help="Positive IoU threshold in (0, 1]")
    p.add_argument("--aspect-ratio-min", type=_at_least(1.0), default=DEFAULT_ASPECT_RATIO_MIN,
                   help="Heuristic strategy: boxes longer than this ratio are reliable")
    p.add_argument("--area-threshold", type=_at_least(0.0), default=0.0,
                   help="Heuristic strategy: area threshold")
    p.add_argument("--area-rule", choices=AREA_RULES, default="keep_small")
    p.add_argument("--out", default=None, help="JSON output path (default: stdout)")
    p.set_defaults(handler=cmd_assign)

    p = sub.add_parser("eval", help="AP50 of detections against rotated ground truth")
    p.add_argument("detections", help="kcr.detections JSON file")
    p.add_argument("gt", help="Ground-truth annotation file or DOTA directory")
    p.add_argument("--gt-format", choices=ANNOTATION_FORMATS, default="dota")
    p.add_argument("--iou-threshold", type=unit_interval, default=EVAL_IOU_THRESHOLD)
    p.add_argument("--nms", type=unit_interval, default=None, help="Apply rotated NMS at this IoU first")
    p.add_argument("--skip-difficult", action="store_true", help="Ignore boxes flagged difficult")
    p.add_argument("--pr-curve", default=None, help="Write the PR curve CSV here")
    p.add_argument("--no-curve", action="store_true", help="Leave precision/recall arrays out of the JSON")
    p.add_argument("--out", default=None, help="JSON output path (default: stdout)")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sim", help="Run simulator experiments from a spec file")
    p.add_argument("spec", nargs="?", default=None, help="Experiment spec YAML (default: shipped suite)")
    p.add_argument("--out", default=None, help="Directory for results.csv/json, traces and PR curves")
    p.add_argument("--gamma-sweep", action="store_true", help="Also run the spec's gamma sweep")
    p.add_argument("--parquet", action="store_true", help="Also write Parquet copies of the tables")
    p.set_defaults(handler=cmd_sim)

    p = sub.add_parser("bench", help="Rotated IoU and NMS throughput on a seeded workload")
    p.add_argument("--n", type=_at_least(0, int), default=200, help="Number of boxes")
    p.add_argument("--seed", type=_at_least(0, int), default=0)
    p.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        set_global_environment(args.log_env)
        LoggerFactory.set_verbosity(args.verbose)
        if args.threads is not None:
            set_max_workers(args.threads)
        return args.handler(args)
    except (ParseError, InvalidBox, ConfigError, FileNotFoundError) as e:
        print(f"kcr {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except KcrError as e:
        print(f"kcr {args.command}: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
