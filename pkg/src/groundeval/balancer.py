"""Length estimation, LPT load balancing, and loss-reduction identities.

Variable-length multimodal sequences wreck synchronous training throughput
when workers get uneven token counts; the planner here packs sequences into
m buckets greedily, longest first. Sorting is stable (ties keep input
order) and bucket ties go to the lowest index, so plans are byte-identical
across runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

DEFAULT_PATCH_SIZE = 32
DEFAULT_MERGE_FACTOR = 1


class InvalidDims(ValueError):
    pass


class EmptyBatch(ValueError):
    pass


@dataclass(frozen=True)
class SeqMeta:
    id: str
    est_tokens: int

    def __post_init__(self):
        if not isinstance(self.est_tokens, int) or isinstance(self.est_tokens, bool) or self.est_tokens < 1:
            raise ValueError(f"est_tokens must be a positive integer, got {self.est_tokens!r}")


@dataclass(frozen=True)
class BalancePlan:
    buckets: tuple[tuple[str, ...], ...]
    loads: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "buckets": [list(b) for b in self.buckets],
            "loads": list(self.loads),
            "makespan": max(self.loads) if self.loads else 0,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def estimate_length(
    image_dims,
    text_tokens: int,
    patch_size: int = DEFAULT_PATCH_SIZE,
    merge_factor: int = DEFAULT_MERGE_FACTOR,
) -> int:
    """text_tokens plus ceil(w/patch)*ceil(h/patch)*merge_factor per image."""
    if patch_size < 1 or merge_factor < 1:
        raise InvalidDims(f"patch_size/merge_factor must be positive, got {patch_size}, {merge_factor}")
    if text_tokens < 0:
        raise InvalidDims(f"text_tokens must be non-negative, got {text_tokens}")
    total = int(text_tokens)
    for dims in image_dims:
        w, h = dims
        if w <= 0 or h <= 0:
            raise InvalidDims(f"image dims must be positive, got {(w, h)}")
        total += math.ceil(w / patch_size) * math.ceil(h / patch_size) * merge_factor
    return total


def _assign_lpt(seqs: list, m: int) -> tuple[list[list[str]], list[list[int]], list[int]]:
    # stable sort: equal lengths stay in input order
    order = sorted(range(len(seqs)), key=lambda i: -seqs[i].est_tokens)
    buckets: list[list[str]] = [[] for _ in range(m)]
    tokens: list[list[int]] = [[] for _ in range(m)]
    loads = [0] * m
    for i in order:
        b = min(range(m), key=loads.__getitem__)
        buckets[b].append(seqs[i].id)
        tokens[b].append(seqs[i].est_tokens)
        loads[b] += seqs[i].est_tokens
    return buckets, tokens, loads


def balance(seqs, m: int) -> BalancePlan:
    """Longest-processing-time greedy assignment into m buckets."""
    if m < 1:
        raise ValueError(f"need at least one bucket, got m={m}")
    buckets, _, loads = _assign_lpt(list(seqs), m)
    return BalancePlan(
        buckets=tuple(tuple(b) for b in buckets),
        loads=tuple(loads),
    )


def makespan(plan: BalancePlan) -> int:
    return max(plan.loads) if plan.loads else 0


def _coerce_losses(batch) -> tuple[tuple[float, ...], ...]:
    if isinstance(batch, LossBatch):
        return batch.seq_losses
    seqs = tuple(tuple(float(v) for v in seq) for seq in batch)
    if not seqs or any(len(s) == 0 for s in seqs):
        raise EmptyBatch("every sequence needs at least one token loss")
    return seqs


@dataclass(frozen=True)
class LossBatch:
    """Per-sequence token losses; dp_grouping and global_batch are optional
    bookkeeping (neither changes the reductions) validated for consistency."""

    seq_losses: tuple[tuple[float, ...], ...]
    dp_grouping: tuple[tuple[int, ...], ...] | None = None
    global_batch: int | None = None

    def __post_init__(self):
        seqs = tuple(tuple(float(v) for v in s) for s in self.seq_losses)
        object.__setattr__(self, "seq_losses", seqs)
        if not seqs or any(len(s) == 0 for s in seqs):
            raise EmptyBatch("every sequence needs at least one token loss")
        if self.dp_grouping is not None:
            flat = sorted(i for worker in self.dp_grouping for i in worker)
            if flat != list(range(len(seqs))):
                raise ValueError("dp_grouping must partition the sequence indices")
        if self.global_batch is not None and self.global_batch != len(seqs):
            raise ValueError(
                f"global_batch {self.global_batch} != sequence count {len(seqs)}"
            )


def loss_per_token_global(batch) -> float:
    """Sum of every token loss over the total token count."""
    seqs = _coerce_losses(batch)
    total = sum(v for s in seqs for v in s)
    count = sum(len(s) for s in seqs)
    return total / count


def loss_per_sample(batch) -> float:
    """Mean over sequences of each sequence's mean token loss."""
    seqs = _coerce_losses(batch)
    return sum(sum(s) / len(s) for s in seqs) / len(seqs)


@dataclass(frozen=True)
class StragglerReport:
    naive_plan: BalancePlan
    balanced_plan: BalancePlan
    naive_time: float
    balanced_time: float
    speedup: float


def simulate_straggler_gain(seqs, m: int, cost_model=None) -> StragglerReport:
    """Makespan ratio of naive round-robin assignment over the LPT plan.

    cost_model maps a sequence's token count to a processing time (identity
    by default); bucket time is the sum of its sequences' times.
    """
    if m < 1:
        raise ValueError(f"need at least one bucket, got m={m}")
    seqs = list(seqs)
    cost = cost_model or (lambda tokens: float(tokens))

    rr_buckets: list[list[str]] = [[] for _ in range(m)]
    rr_tokens: list[list[int]] = [[] for _ in range(m)]
    rr_loads = [0] * m
    for i, s in enumerate(seqs):
        rr_buckets[i % m].append(s.id)
        rr_tokens[i % m].append(s.est_tokens)
        rr_loads[i % m] += s.est_tokens
    naive = BalancePlan(tuple(tuple(b) for b in rr_buckets), tuple(rr_loads))
    lpt_buckets, lpt_tokens, lpt_loads = _assign_lpt(seqs, m)
    balanced = BalancePlan(tuple(tuple(b) for b in lpt_buckets), tuple(lpt_loads))

    def bucket_time(token_lists: list[list[int]]) -> float:
        return max((sum(cost(t) for t in toks) for toks in token_lists), default=0.0)

    naive_time = bucket_time(rr_tokens)
    balanced_time = bucket_time(lpt_tokens)
    speedup = naive_time / balanced_time if balanced_time > 0 else 1.0
    return StragglerReport(
        naive_plan=naive,
        balanced_plan=balanced,
        naive_time=naive_time,
        balanced_time=balanced_time,
        speedup=speedup,
    )
