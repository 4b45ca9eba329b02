"""Command-line surface.

    groundeval score  --task all --truth t.jsonl --pred p.jsonl --out report.json
    groundeval plan   --lengths lens.jsonl --world-size 4 --out plan.json
    groundeval filter --scores report.json --low 40 --high 80 --out ids.json
    groundeval batch  --calls calls.jsonl --out results.jsonl

Exit codes: 0 success, 1 I/O failure, 2 schema/parse-threshold failure,
3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib.metadata import PackageNotFoundError, version as _pkg_version

import numpy as np

from . import harness, metrics, rewards
from .grammar import GroundedSpan, GroundingKind, SpanError
from .geometry import DegeneratePolygon, NotARectangle

EXIT_OK = 0
EXIT_IO = 1
EXIT_SCHEMA = 2
EXIT_CONFIG = 3


def get_version() -> str:
    try:
        return _pkg_version("groundeval")
    except PackageNotFoundError:
        return "0.0.0+unpackaged"


class ConfigExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; that slot belongs to schema failures here
    def error(self, message):
        raise ConfigExit(message)


def _task_arg(value: str) -> GroundingKind | None:
    if value == "all":
        return None
    normalized = value.replace("-", " ")
    kind = harness.TASK_NAMES.get(normalized)
    if kind is None:
        raise ConfigExit(f"unknown task {value!r} (expected one of "
                         f"{', '.join(harness.TASK_NAMES)}, or 'all')")
    return kind


def build_parser() -> _Parser:
    parser = _Parser(prog="groundeval", description=__doc__)
    parser.add_argument("--version", action="store_true", help="print version and exit")
    sub = parser.add_subparsers(dest="command")

    p_score = sub.add_parser("score", help="score predictions against truth")
    p_score.add_argument("--task", default="all")
    p_score.add_argument("--truth", required=True)
    p_score.add_argument("--pred", required=True)
    p_score.add_argument("--out", required=True)
    p_score.add_argument("--lambda-traj", type=float, default=1.0, dest="lambda_traj")
    p_score.add_argument("--lambda-aff", type=float, default=1.0, dest="lambda_aff")
    p_score.add_argument("--traj-mode", choices=[metrics.MODE_SCORE, metrics.MODE_DISTANCE],
                         default=metrics.MODE_SCORE)
    p_score.add_argument("--iou-threshold", type=float, default=metrics.GRASP_IOU_THRESHOLD,
                         help="grasp rectangle IoU gate")
    p_score.add_argument("--strict-parse", action="store_true")
    p_score.add_argument("--workers", type=int, default=1)
    p_score.add_argument("--parse-failure-limit", type=float, default=1.0,
                         help="max tolerated parse-failure fraction")
    p_score.add_argument("--unmatched", choices=[harness.UNMATCHED_ERROR, harness.UNMATCHED_SKIP],
                         default=harness.UNMATCHED_ERROR)

    p_plan = sub.add_parser("plan", help="LPT-balance sequence lengths into buckets")
    p_plan.add_argument("--lengths", required=True)
    p_plan.add_argument("--world-size", type=int, required=True, dest="world_size")
    p_plan.add_argument("--out", required=True)

    p_filter = sub.add_parser("filter", help="retain mid-difficulty sample ids")
    p_filter.add_argument("--scores", required=True)
    p_filter.add_argument("--low", type=float, default=40.0)
    p_filter.add_argument("--high", type=float, default=80.0)
    p_filter.add_argument("--out", required=True)

    p_batch = sub.add_parser("batch", help="evaluate kernel calls from JSONL")
    p_batch.add_argument("--calls", required=True)
    p_batch.add_argument("--out", required=True)
    return parser


def _cmd_score(args) -> int:
    task = _task_arg(args.task)
    if args.workers < 1:
        raise ConfigExit(f"--workers must be >= 1, got {args.workers}")
    if not (0.0 <= args.parse_failure_limit <= 1.0):
        raise ConfigExit(f"--parse-failure-limit must be in [0, 1], got {args.parse_failure_limit}")
    if args.iou_threshold <= 0.0 or args.iou_threshold > 1.0:
        raise ConfigExit(f"--iou-threshold must be in (0, 1], got {args.iou_threshold}")
    config = harness.EvalConfig(
        task=task,
        traj_mode=args.traj_mode,
        traj_decay=args.lambda_traj,
        aff_decay=args.lambda_aff,
        grasp_iou_threshold=args.iou_threshold,
        strict_parse=args.strict_parse,
        workers=args.workers,
        parse_failure_limit=args.parse_failure_limit,
        unmatched=args.unmatched,
    )
    truth = harness.load_truth(args.truth)
    preds = harness.load_pred(args.pred)
    report = harness.run_eval(truth, preds, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    return EXIT_OK


def _cmd_plan(args) -> int:
    if args.world_size < 1:
        raise ConfigExit(f"--world-size must be >= 1, got {args.world_size}")
    harness.plan_batches(args.lengths, args.world_size, args.out)
    return EXIT_OK


def _load_score_rows(path) -> list:
    """Accepts either a score-report JSON object or JSONL of row objects."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        whole = json.loads(text)
    except json.JSONDecodeError:
        whole = None
    if isinstance(whole, dict) and "rows" in whole:
        if not isinstance(whole["rows"], list):
            raise harness.SchemaError("'rows' must be a list", 1)
        numbered = list(enumerate(whole["rows"], start=1))
    else:
        numbered = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise harness.SchemaError(f"invalid JSON ({exc.msg})", lineno) from exc
            numbered.append((lineno, obj))
    out = []
    for lineno, obj in numbered:
        if not isinstance(obj, dict) or "id" not in obj or "value" not in obj:
            raise harness.SchemaError("row needs 'id' and 'value'", lineno)
        out.append(
            (obj["id"], metrics.MetricScore(float(obj["value"]), bool(obj.get("frame_valid", True))))
        )
    return out


def _cmd_filter(args) -> int:
    if not (args.low <= args.high):
        raise ConfigExit(f"--low must not exceed --high, got [{args.low}, {args.high}]")
    scored = _load_score_rows(args.scores)
    ids = metrics.filter_by_difficulty(scored, args.low, args.high)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"ids": ids, "low": args.low, "high": args.high}, sort_keys=True))
        fh.write("\n")
    return EXIT_OK


def _span_from_args(obj, kind: GroundingKind) -> GroundedSpan:
    span = GroundedSpan(
        kind=kind,
        coords=tuple((int(x), int(y)) for x, y in obj["coords"]),
        frame=obj.get("frame"),
        label=obj.get("label"),
    )
    span.validate()
    return span


def _truth_from_args(obj, kind: GroundingKind) -> metrics.FrameIndexedTruth:
    frames = {}
    for key, payload in obj["frames"].items():
        if kind is GroundingKind.OBJECT:
            from .geometry import Box
            x0, y0, x1, y1 = payload
            frames[int(key)] = Box.from_corners((x0, y0), (x1, y1))
        elif kind is GroundingKind.GRASP_POSE:
            frames[int(key)] = [np.asarray(r, dtype=float) for r in payload]
        else:
            frames[int(key)] = np.asarray(payload, dtype=float)
    return metrics.FrameIndexedTruth(task=kind, frames=frames)


def _metric_result(ms: metrics.MetricScore) -> dict:
    return {"value": ms.value, "frame_valid": ms.frame_valid}


def _call_kernel(fn: str, args: dict):
    """Dispatch one batch-mode call. Rewards take unit coordinates; scorers
    take grid-coordinate spans plus unit-coordinate truth geometry."""
    if fn == "reward_trajectory":
        return rewards.reward_trajectory(
            args["pred"], args["truth"],
            decay=args.get("decay", 1.0),
            n_points=args.get("n_points", rewards.DEFAULT_RESAMPLE_POINTS),
        )
    if fn == "reward_affordance":
        return rewards.reward_affordance(args["pred"], args["truth"], decay=args.get("decay", 1.0))
    if fn == "reward_area":
        return rewards.reward_area(args["pred"], args["truth"])
    if fn == "group_advantages":
        group = rewards.group_advantages(
            args["rewards"], epsilon_std=args.get("epsilon_std", rewards.DEFAULT_STD_EPSILON)
        )
        return {"advantages": list(group.advantages)}
    if fn == "grpo_surrogate":
        inputs = rewards.SurrogateInputs(
            ratios=tuple(args["ratios"]),
            advantages=tuple(args["advantages"]),
            kl_terms=tuple(args.get("kl_terms", ())),
            eps_low=args.get("eps_low", rewards.DEFAULT_CLIP_LOW),
            eps_high=args.get("eps_high", rewards.DEFAULT_CLIP_HIGH),
            beta=args.get("beta", rewards.DEFAULT_KL_COEFF),
        )
        return rewards.grpo_surrogate(inputs)
    if fn == "score_grounding":
        return _metric_result(metrics.score_grounding(
            _span_from_args(args["pred"], GroundingKind.OBJECT),
            _truth_from_args(args["truth"], GroundingKind.OBJECT),
        ))
    if fn == "score_area":
        return _metric_result(metrics.score_area(
            _span_from_args(args["pred"], GroundingKind.AREA),
            _truth_from_args(args["truth"], GroundingKind.AREA),
        ))
    if fn == "score_affordance":
        return _metric_result(metrics.score_affordance(
            _span_from_args(args["pred"], GroundingKind.AFFORDANCE),
            _truth_from_args(args["truth"], GroundingKind.AFFORDANCE),
            decay=args.get("decay", 1.0),
        ))
    if fn == "score_trajectory":
        return _metric_result(metrics.score_trajectory(
            _span_from_args(args["pred"], GroundingKind.TRAJECTORY),
            _truth_from_args(args["truth"], GroundingKind.TRAJECTORY),
            mode=args.get("mode", metrics.MODE_SCORE),
            decay=args.get("decay", 1.0),
        ))
    if fn == "score_grasp":
        return _metric_result(metrics.score_grasp(
            _span_from_args(args["pred"], GroundingKind.GRASP_POSE),
            [np.asarray(r, dtype=float) for r in args["truth"]["rects"]],
            iou_threshold=args.get("iou_threshold", metrics.GRASP_IOU_THRESHOLD),
            angle_threshold=args.get("angle_threshold", metrics.GRASP_ANGLE_THRESHOLD),
        ))
    raise harness.SchemaError(f"unknown function {fn!r}", 0)


def _cmd_batch(args) -> int:
    results = []
    with open(args.calls, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise harness.SchemaError(f"invalid JSON ({exc.msg})", lineno) from exc
            if not isinstance(obj, dict) or "fn" not in obj or "args" not in obj:
                raise harness.SchemaError("each call needs 'fn' and 'args'", lineno)
            try:
                value = _call_kernel(obj["fn"], obj["args"])
            except (KeyError, TypeError, metrics.KindMismatch, metrics.MissingFrame) as exc:
                raise harness.SchemaError(
                    f"bad arguments for {obj['fn']!r}: {exc}", lineno
                ) from exc
            results.append({"id": obj.get("id", lineno), "fn": obj["fn"], "result": value})
    with open(args.out, "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r, sort_keys=True))
            fh.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.version:
            print(get_version())
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        handler = {
            "score": _cmd_score,
            "plan": _cmd_plan,
            "filter": _cmd_filter,
            "batch": _cmd_batch,
        }[args.command]
        return handler(args)
    except ConfigExit as exc:
        print(f"groundeval: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (harness.SchemaError, harness.DuplicateId, harness.UnmatchedId,
            harness.ParseFailureThresholdExceeded, SpanError, NotARectangle,
            DegeneratePolygon) as exc:
        print(f"groundeval: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"groundeval: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"groundeval: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
