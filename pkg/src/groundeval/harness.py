"""Corpus-level evaluation: JSONL loading, scoring, report assembly.

Truth and prediction files are JSON Lines, one object per line. Truth
carries frame-indexed grid-coordinate geometry per task; predictions carry
either the raw tagged text or an already-parsed span. run_eval scores every
prediction against its truth record and aggregates per task, deterministic
regardless of the worker count (rows come back sorted by id).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import balancer, metrics
from .geometry import Box, DegeneratePolygon, NotARectangle, polygon_signed_area
from .grammar import (
    COORD_MAX,
    COORD_MIN,
    GRASP_POINTS,
    TRAJECTORY_MAX_POINTS,
    TRAJECTORY_MIN_POINTS,
    GroundedSpan,
    GroundingKind,
    SpanError,
    dequantize,
    parse_spans,
)

TASK_NAMES = {kind.tag: kind for kind in GroundingKind}


class SchemaError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateId(ValueError):
    pass


class UnmatchedId(ValueError):
    pass


class ParseFailureThresholdExceeded(RuntimeError):
    pass


def _int_pair(obj, line: int) -> tuple[int, int]:
    if (
        not isinstance(obj, (list, tuple))
        or len(obj) != 2
        or any(not isinstance(c, int) or isinstance(c, bool) for c in obj)
    ):
        raise SchemaError(f"expected an [x, y] integer pair, got {obj!r}", line)
    x, y = obj
    if not (COORD_MIN <= x <= COORD_MAX and COORD_MIN <= y <= COORD_MAX):
        raise SchemaError(f"coordinates {obj!r} outside [{COORD_MIN}, {COORD_MAX}]", line)
    return x, y


def _validate_payload(task: GroundingKind, payload, line: int):
    if task is GroundingKind.OBJECT:
        if not isinstance(payload, (list, tuple)) or len(payload) != 4:
            raise SchemaError(f"box payload must be [x0, y0, x1, y1], got {payload!r}", line)
        _int_pair(payload[:2], line)
        _int_pair(payload[2:], line)
        return tuple(payload)
    if task is GroundingKind.AREA:
        if not isinstance(payload, (list, tuple)) or len(payload) < 3:
            raise SchemaError("polygon payload needs at least 3 [x, y] pairs", line)
        return tuple(_int_pair(p, line) for p in payload)
    if task is GroundingKind.AFFORDANCE:
        if not isinstance(payload, (list, tuple)) or len(payload) < 1:
            raise SchemaError("point payload needs at least 1 [x, y] pair", line)
        return tuple(_int_pair(p, line) for p in payload)
    if task is GroundingKind.TRAJECTORY:
        if (
            not isinstance(payload, (list, tuple))
            or not (TRAJECTORY_MIN_POINTS <= len(payload) <= TRAJECTORY_MAX_POINTS)
        ):
            raise SchemaError(
                f"trajectory payload needs {TRAJECTORY_MIN_POINTS}-{TRAJECTORY_MAX_POINTS} pairs",
                line,
            )
        return tuple(_int_pair(p, line) for p in payload)
    if not isinstance(payload, (list, tuple)) or len(payload) < 1:
        raise SchemaError("grasp payload needs at least one 4-corner rectangle", line)
    rects = []
    for rect in payload:
        if not isinstance(rect, (list, tuple)) or len(rect) != GRASP_POINTS:
            raise SchemaError(f"grasp rectangle must have exactly {GRASP_POINTS} corners", line)
        rects.append(tuple(_int_pair(p, line) for p in rect))
    return tuple(rects)


@dataclass(frozen=True)
class TruthRecord:
    id: str
    task: GroundingKind
    frames: dict

    def to_truth(self) -> metrics.FrameIndexedTruth:
        """Dequantize grid payloads into unit-coordinate geometry."""
        out = {}
        for frame, payload in self.frames.items():
            if self.task is GroundingKind.OBJECT:
                x0, y0, x1, y1 = (dequantize(c) for c in payload)
                out[frame] = Box.from_corners((x0, y0), (x1, y1))
            elif self.task is GroundingKind.GRASP_POSE:
                out[frame] = [
                    np.array([(dequantize(x), dequantize(y)) for x, y in rect])
                    for rect in payload
                ]
            else:
                geom = np.array([(dequantize(x), dequantize(y)) for x, y in payload])
                if self.task is GroundingKind.AREA and abs(polygon_signed_area(geom)) < 1e-12:
                    raise DegeneratePolygon(f"record {self.id}: degenerate truth polygon")
                out[frame] = geom
        return metrics.FrameIndexedTruth(task=self.task, frames=out)


@dataclass(frozen=True)
class PredRecord:
    id: str
    raw: str | None = None
    parsed_frame: int | None = None
    parsed_coords: tuple | None = None

    @property
    def is_raw(self) -> bool:
        return self.raw is not None


def _read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from exc
            if not isinstance(obj, dict):
                raise SchemaError("each line must be a JSON object", lineno)
            yield lineno, obj


def load_truth(path) -> list[TruthRecord]:
    records = []
    seen = set()
    for lineno, obj in _read_jsonl(path):
        rid = obj.get("id")
        if not isinstance(rid, str) or not rid:
            raise SchemaError("missing or non-string 'id'", lineno)
        if rid in seen:
            raise DuplicateId(f"line {lineno}: duplicate truth id {rid!r}")
        seen.add(rid)
        task_name = obj.get("task")
        task = TASK_NAMES.get(task_name)
        if task is None:
            raise SchemaError(f"unknown task {task_name!r}", lineno)
        frames_obj = obj.get("frames")
        if not isinstance(frames_obj, dict) or not frames_obj:
            raise SchemaError("'frames' must be a non-empty object", lineno)
        frames = {}
        for key, payload in frames_obj.items():
            if not key.isdigit():
                raise SchemaError(f"frame key {key!r} is not a non-negative integer", lineno)
            frames[int(key)] = _validate_payload(task, payload, lineno)
        records.append(TruthRecord(id=rid, task=task, frames=frames))
    return records


def load_pred(path) -> list[PredRecord]:
    records = []
    seen = set()
    for lineno, obj in _read_jsonl(path):
        rid = obj.get("id")
        if not isinstance(rid, str) or not rid:
            raise SchemaError("missing or non-string 'id'", lineno)
        if rid in seen:
            raise DuplicateId(f"line {lineno}: duplicate prediction id {rid!r}")
        seen.add(rid)
        has_raw = "raw" in obj
        has_parsed = "parsed" in obj
        if has_raw == has_parsed:
            raise SchemaError("need exactly one of 'raw' or 'parsed'", lineno)
        if has_raw:
            if not isinstance(obj["raw"], str):
                raise SchemaError("'raw' must be a string", lineno)
            records.append(PredRecord(id=rid, raw=obj["raw"]))
            continue
        parsed = obj["parsed"]
        if not isinstance(parsed, dict) or "coords" not in parsed:
            raise SchemaError("'parsed' must be an object with 'coords'", lineno)
        frame = parsed.get("frame")
        if frame is not None and (not isinstance(frame, int) or isinstance(frame, bool) or frame < 0):
            raise SchemaError(f"'frame' must be a non-negative integer, got {frame!r}", lineno)
        coords = parsed["coords"]
        if not isinstance(coords, (list, tuple)) or not coords:
            raise SchemaError("'coords' must be a non-empty list of pairs", lineno)
        pairs = tuple(_int_pair(p, lineno) for p in coords)
        records.append(PredRecord(id=rid, parsed_frame=frame, parsed_coords=pairs))
    return records


UNMATCHED_ERROR = "error"
UNMATCHED_SKIP = "skip"


@dataclass(frozen=True)
class EvalConfig:
    task: GroundingKind | None = None  # None scores every task
    traj_mode: str = metrics.MODE_SCORE
    traj_decay: float = 1.0
    aff_decay: float = 1.0
    grasp_iou_threshold: float = metrics.GRASP_IOU_THRESHOLD
    grasp_angle_threshold: float = metrics.GRASP_ANGLE_THRESHOLD
    strict_parse: bool = False
    workers: int = 1
    parse_failure_limit: float = 1.0  # fraction of records allowed to fail parsing
    unmatched: str = UNMATCHED_ERROR

    def to_dict(self) -> dict:
        return {
            "task": self.task.tag if self.task else "all",
            "traj_mode": self.traj_mode,
            "traj_decay": self.traj_decay,
            "aff_decay": self.aff_decay,
            "grasp_iou_threshold": self.grasp_iou_threshold,
            "grasp_angle_threshold": self.grasp_angle_threshold,
            "strict_parse": self.strict_parse,
            "workers": self.workers,
            "parse_failure_limit": self.parse_failure_limit,
            "unmatched": self.unmatched,
        }


@dataclass(frozen=True)
class Row:
    id: str
    task: str
    value: float
    frame_valid: bool
    parse_failed: bool
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.task,
            "value": self.value,
            "frame_valid": self.frame_valid,
            "parse_failed": self.parse_failed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Report:
    rows: tuple[Row, ...]
    tasks: dict
    config: EvalConfig
    skipped_unmatched: int = 0

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "tasks": self.tasks,
            "skipped_unmatched": self.skipped_unmatched,
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _span_from_pred(pred: PredRecord, kind: GroundingKind, config: EvalConfig):
    """Returns (span, parse_detail) with span None on parse failure."""
    if not pred.is_raw:
        span = GroundedSpan(kind=kind, coords=pred.parsed_coords, frame=pred.parsed_frame)
        try:
            span.validate()
        except SpanError as exc:
            return None, str(exc)
        return span, None
    try:
        report = parse_spans(pred.raw, strict=config.strict_parse)
    except SpanError as exc:
        return None, str(exc)
    matching = [s for s in report.spans if s.kind is kind]
    if not matching:
        return None, f"no {kind.tag} span found"
    detail = None
    if len(matching) > 1:
        detail = f"{len(matching)} {kind.tag} spans; scored the first"
    return matching[0], detail


def _score_one(truth_rec: TruthRecord, pred: PredRecord, config: EvalConfig) -> Row:
    kind = truth_rec.task
    span, detail = _span_from_pred(pred, kind, config)
    if span is None:
        value = math.inf if (
            kind is GroundingKind.TRAJECTORY and config.traj_mode == metrics.MODE_DISTANCE
        ) else 0.0
        return Row(pred.id, kind.tag, value, True, True, detail)

    truth = truth_rec.to_truth()
    try:
        if kind is GroundingKind.OBJECT:
            ms = metrics.score_grounding(span, truth)
        elif kind is GroundingKind.AREA:
            ms = metrics.score_area(span, truth)
        elif kind is GroundingKind.AFFORDANCE:
            ms = metrics.score_affordance(span, truth, decay=config.aff_decay)
        elif kind is GroundingKind.TRAJECTORY:
            ms = metrics.score_trajectory(
                span, truth, mode=config.traj_mode, decay=config.traj_decay
            )
        else:
            ms = _score_grasp_record(span, truth, config)
    except metrics.MissingFrame:
        ms = metrics.MetricScore(0.0, frame_valid=False, detail="prediction carries no frame")
    except NotARectangle as exc:
        # metric-zero, not parse-zero: the span parsed but its geometry is unusable
        ms = metrics.MetricScore(0.0, detail=str(exc))
    if detail and ms.detail:
        ms = replace(ms, detail=f"{detail}; {ms.detail}")
    elif detail:
        ms = replace(ms, detail=detail)
    return Row(pred.id, kind.tag, ms.value, ms.frame_valid, False, ms.detail)


def _score_grasp_record(span, truth: metrics.FrameIndexedTruth, config: EvalConfig):
    # grasp output is frameless in the wild; a lone truth frame stands in
    if span.frame is not None:
        rects = truth.frames.get(span.frame)
        if rects is None:
            return metrics.MetricScore(0.0, frame_valid=False, detail=f"no ground truth at frame {span.frame}")
    elif len(truth.frames) == 1:
        rects = next(iter(truth.frames.values()))
    else:
        return metrics.MetricScore(
            0.0, frame_valid=False, detail="frameless grasp against multi-frame truth"
        )
    return metrics.score_grasp(
        span,
        rects,
        iou_threshold=config.grasp_iou_threshold,
        angle_threshold=config.grasp_angle_threshold,
    )


def run_eval(truth_records, pred_records, config: EvalConfig = EvalConfig()) -> Report:
    truth_records = list(truth_records)
    by_id = {t.id: t for t in truth_records}
    if len(by_id) != len(truth_records):
        raise DuplicateId("duplicate ids in truth records")

    jobs = []
    skipped = 0
    for pred in pred_records:
        truth_rec = by_id.get(pred.id)
        if truth_rec is None:
            if config.unmatched == UNMATCHED_SKIP:
                skipped += 1
                continue
            raise UnmatchedId(f"prediction id {pred.id!r} has no truth record")
        if config.task is not None and truth_rec.task is not config.task:
            continue
        jobs.append((truth_rec, pred))

    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(lambda j: _score_one(j[0], j[1], config), jobs))
    else:
        rows = [_score_one(t, p, config) for t, p in jobs]
    rows.sort(key=lambda r: r.id)

    tasks: dict = {}
    for row in rows:
        agg = tasks.setdefault(
            row.task,
            {"count": 0, "parse_failures": 0, "frame_misses": 0, "_sum": 0.0},
        )
        agg["count"] += 1
        agg["_sum"] += row.value
        if row.parse_failed:
            agg["parse_failures"] += 1
        if not row.frame_valid:
            agg["frame_misses"] += 1

    distance_mode = config.traj_mode == metrics.MODE_DISTANCE
    for name, agg in tasks.items():
        mean = agg.pop("_sum") / agg["count"]
        if name == GroundingKind.TRAJECTORY.tag and distance_mode:
            agg["mean_distance"] = mean
        else:
            agg["mean_x100"] = round(mean * 100.0, 1)
            agg["mean"] = mean

    total = len(rows)
    failures = sum(1 for r in rows if r.parse_failed)
    if total and failures / total > config.parse_failure_limit:
        raise ParseFailureThresholdExceeded(
            f"{failures}/{total} predictions failed to parse "
            f"(limit {config.parse_failure_limit:.2f})"
        )
    return Report(rows=tuple(rows), tasks=tasks, config=config, skipped_unmatched=skipped)


def plan_batches(lengths_path, world_size: int, out_path) -> balancer.BalancePlan:
    """Read sequence lengths (JSONL: ints or {id, tokens}), write an LPT plan."""
    seqs = []
    with open(lengths_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from exc
            if isinstance(obj, int) and not isinstance(obj, bool):
                if obj < 1:
                    raise SchemaError(f"token count must be positive, got {obj}", lineno)
                seqs.append(balancer.SeqMeta(id=str(lineno - 1), est_tokens=obj))
            elif isinstance(obj, dict) and "tokens" in obj:
                rid = obj.get("id", str(lineno - 1))
                tokens = obj["tokens"]
                if not isinstance(tokens, int) or isinstance(tokens, bool) or tokens < 1:
                    raise SchemaError(f"'tokens' must be a positive integer, got {tokens!r}", lineno)
                seqs.append(balancer.SeqMeta(id=str(rid), est_tokens=tokens))
            else:
                raise SchemaError("each line must be an integer or {'id', 'tokens'}", lineno)
    plan = balancer.balance(seqs, world_size)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(plan.to_dict(), sort_keys=True, indent=2))
        fh.write("\n")
    return plan
