"""Benchmark scorers for grounded predictions.

Every scorer takes a parsed span (grid coordinates, [0, 1000]) plus
frame-indexed ground truth already in unit coordinates, and returns a
MetricScore in [0, 1]. A prediction aimed at a frame with no ground truth
scores exactly 0 with frame_valid=False; distance-mode trajectory scoring
returns +inf in that case instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .geometry import (
    Box,
    NotARectangle,
    angle_difference,
    bidirectional_mean_distance,
    box_iou,
    directed_mean_distance,
    discrete_frechet,
    point_in_polygon,
    rect_angle,
    rect_is_valid,
    resample_polyline,
    rotated_rect_iou,
)
from .grammar import GroundedSpan, GroundingKind, dequantize

TRAJECTORY_RESAMPLE_POINTS = 15
GROUNDING_IOU_THRESHOLD = 0.5
GRASP_IOU_THRESHOLD = 0.25
GRASP_ANGLE_THRESHOLD = math.pi / 6.0
PRED_RECT_TOL = 1e-3

MODE_SCORE = "score"
MODE_DISTANCE = "distance"


class KindMismatch(ValueError):
    pass


class MissingFrame(ValueError):
    pass


@dataclass(frozen=True)
class MetricScore:
    value: float
    frame_valid: bool = True
    detail: str | None = None


@dataclass(frozen=True)
class FrameIndexedTruth:
    """Ground truth geometry per frame index, unit coordinates.

    Payload by task: OBJECT -> Box, AREA -> polygon vertices, AFFORDANCE ->
    point array, TRAJECTORY -> polyline, GRASP_POSE -> list of 4x2 corner
    arrays.
    """

    task: GroundingKind
    frames: Mapping[int, object]

    def __post_init__(self):
        if not self.frames:
            raise ValueError("truth needs at least one frame entry")


def _require_kind(pred: GroundedSpan, kind: GroundingKind) -> None:
    if pred.kind is not kind:
        raise KindMismatch(f"expected a {kind.tag} span, got {pred.kind.tag}")


def _require_frame(pred: GroundedSpan) -> int:
    if pred.frame is None:
        raise MissingFrame(f"{pred.kind.tag} span carries no frame index")
    return pred.frame


def span_points(pred: GroundedSpan) -> np.ndarray:
    """Span coordinates dequantized to the unit square, shape (k, 2)."""
    return np.array([(dequantize(x), dequantize(y)) for x, y in pred.coords])


def _frame_miss(frame: int) -> MetricScore:
    return MetricScore(0.0, frame_valid=False, detail=f"no ground truth at frame {frame}")


def score_grounding(pred: GroundedSpan, truth: FrameIndexedTruth) -> MetricScore:
    """Acc@0.5: 1 iff the frame has truth and IoU is strictly above 0.5."""
    _require_kind(pred, GroundingKind.OBJECT)
    frame = _require_frame(pred)
    gt = truth.frames.get(frame)
    if gt is None:
        return _frame_miss(frame)
    pts = span_points(pred)
    box = Box.from_corners(pts[0], pts[1])
    iou = box_iou(box, gt)
    hit = iou > GROUNDING_IOU_THRESHOLD
    return MetricScore(1.0 if hit else 0.0, detail=f"iou={iou:.6f}")


def score_area(pred: GroundedSpan, truth: FrameIndexedTruth) -> MetricScore:
    """Fraction of predicted points inside the truth polygon."""
    _require_kind(pred, GroundingKind.AREA)
    frame = _require_frame(pred)
    polygon = truth.frames.get(frame)
    if polygon is None:
        return _frame_miss(frame)
    pts = span_points(pred)
    inside = sum(1 for p in pts if point_in_polygon(p, polygon))
    return MetricScore(inside / len(pts))


def score_affordance(
    pred: GroundedSpan, truth: FrameIndexedTruth, decay: float = 1.0
) -> MetricScore:
    """exp(-decay * mean nearest distance from predicted points into the truth set)."""
    _require_kind(pred, GroundingKind.AFFORDANCE)
    frame = _require_frame(pred)
    gt = truth.frames.get(frame)
    if gt is None:
        return _frame_miss(frame)
    d = directed_mean_distance(span_points(pred), gt)
    return MetricScore(math.exp(-decay * d), detail=f"distance={d:.6f}")


def score_trajectory(
    pred: GroundedSpan,
    truth: FrameIndexedTruth,
    mode: str = MODE_SCORE,
    decay: float = 1.0,
) -> MetricScore:
    """Both paths resampled to 15 points, then coupled by discrete Frechet.

    mode="score" maps the distance through exp(-decay * d); mode="distance"
    reports the raw distance (frame miss becomes the +inf sentinel there).
    """
    if mode not in (MODE_SCORE, MODE_DISTANCE):
        raise ValueError(f"mode must be {MODE_SCORE!r} or {MODE_DISTANCE!r}, got {mode!r}")
    _require_kind(pred, GroundingKind.TRAJECTORY)
    frame = _require_frame(pred)
    gt = truth.frames.get(frame)
    if gt is None:
        if mode == MODE_DISTANCE:
            return MetricScore(math.inf, frame_valid=False, detail=f"no ground truth at frame {frame}")
        return _frame_miss(frame)
    p = resample_polyline(span_points(pred), TRAJECTORY_RESAMPLE_POINTS)
    g = resample_polyline(gt, TRAJECTORY_RESAMPLE_POINTS)
    d = discrete_frechet(p, g)
    if mode == MODE_DISTANCE:
        return MetricScore(d)
    return MetricScore(math.exp(-decay * d), detail=f"distance={d:.6f}")


def score_grasp(
    pred: GroundedSpan,
    truth_rects,
    iou_threshold: float = GRASP_IOU_THRESHOLD,
    angle_threshold: float = GRASP_ANGLE_THRESHOLD,
) -> MetricScore:
    """Rectangle metric: 1 iff some truth rect is within angle_threshold of
    the prediction's axis (mod pi) and their rotated IoU reaches iou_threshold."""
    _require_kind(pred, GroundingKind.GRASP_POSE)
    pts = span_points(pred)
    if not rect_is_valid(pts, tol=PRED_RECT_TOL):
        raise NotARectangle("predicted corners do not form a rectangle")
    ang = rect_angle(pts)
    best_iou = 0.0
    for rect in truth_rects:
        gt = np.asarray(rect, dtype=float)
        if angle_difference(ang, rect_angle(gt)) > angle_threshold:
            continue
        iou = rotated_rect_iou(pts, gt)
        best_iou = max(best_iou, iou)
        if iou >= iou_threshold:
            return MetricScore(1.0, detail=f"iou={iou:.6f}")
    return MetricScore(0.0, detail=f"best_iou={best_iou:.6f}")


def filter_by_difficulty(scored, low: float = 40.0, high: float = 80.0) -> list:
    """Ids worth keeping for RL: mid-difficulty scores plus every frame miss.

    scored: iterable of (id, MetricScore) with values on the [0, 1] scale;
    an id is retained when value*100 lies in [low, high], or unconditionally
    when frame_valid is False.
    """
    if not (low <= high):
        raise ValueError(f"low must not exceed high, got [{low}, {high}]")
    keep = []
    for sample_id, score in scored:
        if not score.frame_valid:
            keep.append(sample_id)
        elif low <= score.value * 100.0 <= high:
            keep.append(sample_id)
    return keep
