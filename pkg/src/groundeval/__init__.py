"""groundeval: parse, score, and batch-plan spatially grounded model outputs."""

from .grammar import (
    GroundedSpan,
    GroundingKind,
    ParseReport,
    CardinalityViolation,
    CoordinateOutOfRange,
    InvariantViolation,
    MalformedFrame,
    MalformedSpan,
    OutOfRange,
    SpanError,
    UnclosedTag,
    dequantize,
    emit_span,
    parse_spans,
    quantize,
)
from .geometry import (
    Box,
    GraspParam,
    DegeneratePolygon,
    EmptyPointSet,
    EmptyPolyline,
    NonPositiveDimension,
    NotARectangle,
    bidirectional_mean_distance,
    box_iou,
    directed_mean_distance,
    discrete_frechet,
    grasp_params_to_corners,
    point_in_polygon,
    resample_polyline,
    rotated_rect_iou,
)
from .metrics import (
    FrameIndexedTruth,
    KindMismatch,
    MetricScore,
    MissingFrame,
    TRAJECTORY_RESAMPLE_POINTS,
    filter_by_difficulty,
    score_affordance,
    score_area,
    score_grasp,
    score_grounding,
    score_trajectory,
)
from .rewards import (
    GroupTooSmall,
    LengthMismatch,
    NonPositiveRatio,
    RewardGroup,
    SurrogateInputs,
    group_advantages,
    grpo_surrogate,
    reward_affordance,
    reward_area,
    reward_trajectory,
)
from .balancer import (
    BalancePlan,
    EmptyBatch,
    InvalidDims,
    LossBatch,
    SeqMeta,
    StragglerReport,
    balance,
    estimate_length,
    loss_per_sample,
    loss_per_token_global,
    makespan,
    simulate_straggler_gain,
)
from .harness import (
    DuplicateId,
    EvalConfig,
    ParseFailureThresholdExceeded,
    PredRecord,
    Report,
    SchemaError,
    TruthRecord,
    UnmatchedId,
    load_pred,
    load_truth,
    plan_batches,
    run_eval,
)

__version__ = "0.1.0"
