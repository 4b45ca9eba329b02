"""Reward kernels and group-relative policy-optimization math.

Rewards operate on unit coordinates and land in (0, 1]. Advantage
normalization and the clipped surrogate use plain Python floats so results
are reproducible bit for bit across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import (
    bidirectional_mean_distance,
    discrete_frechet,
    point_in_polygon,
    resample_polyline,
)

DEFAULT_GROUP_SIZE = 5
DEFAULT_CLIP_LOW = 0.2
DEFAULT_CLIP_HIGH = 0.28
DEFAULT_KL_COEFF = 0.02
DEFAULT_STD_EPSILON = 1e-4
DEFAULT_RESAMPLE_POINTS = 15


class GroupTooSmall(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class NonPositiveRatio(ValueError):
    pass


def reward_trajectory(pred, truth, decay: float = 1.0, n_points: int = DEFAULT_RESAMPLE_POINTS) -> float:
    """exp(-decay * Frechet distance), both paths resampled to n_points."""
    p = resample_polyline(pred, n_points)
    g = resample_polyline(truth, n_points)
    return math.exp(-decay * discrete_frechet(p, g))


def reward_affordance(pred, truth, decay: float = 1.0) -> float:
    """exp(-decay * symmetric mean nearest-neighbour distance)."""
    return math.exp(-decay * bidirectional_mean_distance(pred, truth))


def reward_area(points, polygon) -> float:
    """Fraction of predicted points that fall inside the target polygon."""
    pts = list(points)
    if not pts:
        raise ValueError("no points given")
    inside = sum(1 for p in pts if point_in_polygon(p, polygon))
    return inside / len(pts)


@dataclass(frozen=True)
class RewardGroup:
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    epsilon_std: float


def group_advantages(rewards, epsilon_std: float = DEFAULT_STD_EPSILON) -> RewardGroup:
    """Center by the group mean, scale by population std + epsilon.

    Equal rewards give identically zero advantages (epsilon keeps the
    division finite); the advantages always sum to zero up to rounding.
    """
    rs = tuple(float(r) for r in rewards)
    g = len(rs)
    if g < 2:
        raise GroupTooSmall(f"need at least 2 rewards, got {g}")
    mu = sum(rs) / g
    var = sum((r - mu) ** 2 for r in rs) / g
    sigma = math.sqrt(var)
    denom = sigma + epsilon_std
    return RewardGroup(
        rewards=rs,
        advantages=tuple((r - mu) / denom for r in rs),
        epsilon_std=epsilon_std,
    )


@dataclass(frozen=True)
class SurrogateInputs:
    ratios: tuple[float, ...]
    advantages: tuple[float, ...]
    kl_terms: tuple[float, ...] = field(default=())
    eps_low: float = DEFAULT_CLIP_LOW
    eps_high: float = DEFAULT_CLIP_HIGH
    beta: float = DEFAULT_KL_COEFF


def grpo_surrogate(inputs: SurrogateInputs) -> float:
    """Mean over the group of min(ratio*A, clip(ratio)*A) - beta*kl.

    The clip window is [1 - eps_low, 1 + eps_high], asymmetric by default
    ([0.8, 1.28]).
    """
    ratios = tuple(float(r) for r in inputs.ratios)
    advs = tuple(float(a) for a in inputs.advantages)
    kls = tuple(float(k) for k in inputs.kl_terms) if inputs.kl_terms else (0.0,) * len(ratios)
    g = len(ratios)
    if g == 0:
        raise LengthMismatch("empty group")
    if len(advs) != g or len(kls) != g:
        raise LengthMismatch(
            f"ratios/advantages/kl_terms lengths differ: {g}, {len(advs)}, {len(kls)}"
        )
    lo = 1.0 - inputs.eps_low
    hi = 1.0 + inputs.eps_high
    total = 0.0
    for rho, a, kl in zip(ratios, advs, kls):
        if rho <= 0.0:
            raise NonPositiveRatio(f"probability ratio must be positive, got {rho}")
        if kl < 0.0:
            raise ValueError(f"kl term must be non-negative, got {kl}")
        clipped = min(max(rho, lo), hi)
        total += min(rho * a, clipped * a) - inputs.beta * kl
    return total / g
