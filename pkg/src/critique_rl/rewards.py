"""Reward algebra: thresholded process reward, composite reward, MetaRM reward,
and group-normalised advantages for GRPO."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROCESS_THRESHOLD = 0.5
STD_GUARD = 1e-8
DEFAULT_LAMBDA = 0.5
SOURCES = ("human_critique", "metarm", "outcome_only")


class DomainError(ValueError):
    pass


def _check_lambda(lam):
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")


def process_reward(s: float) -> int:
    """1 when the similarity strictly exceeds 0.5."""
    if not 0.0 <= s <= 1.0 or math.isnan(s):
        raise DomainError(f"similarity must lie in [0, 1], got {s}")
    return 1 if s > PROCESS_THRESHOLD else 0


def composite_reward(format_valid: bool, label_match: bool, r_process=None,
                     lam: float = DEFAULT_LAMBDA, regularized: bool = True) -> float:
    """-1 for invalid output, 0 for a wrong label, 1 + lam * r_process otherwise.

    With ``regularized=False`` a wrong label still earns ``lam * r_process``.
    """
    _check_lambda(lam)
    if not format_valid:
        return -1.0
    if label_match:
        if r_process is None:
            raise DomainError("r_process is required when the label matches")
        return 1.0 + lam * r_process
    if regularized:
        return 0.0
    if r_process is None:
        raise DomainError("r_process is required without outcome regularization")
    return lam * r_process


def metarm_reward(format_valid: bool, label_match: bool, r_meta: float,
                  lam: float = DEFAULT_LAMBDA) -> float:
    """Outcome-gated reward with the MetaRM's process bonus clipped to [0, lam]."""
    _check_lambda(lam)
    if not format_valid:
        return -1.0
    if not label_match:
        return 0.0
    return 1.0 + min(lam, max(0.0, r_meta - 1.0))


@dataclass(frozen=True)
class RewardRecord:
    outcome_correct: bool
    format_valid: bool
    process_score: float | None
    composite: float
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown reward source {self.source!r}")


@dataclass(frozen=True)
class GroupAdvantages:
    rewards: tuple
    mean: float
    std: float
    advantages: tuple


def group_advantages(rewards, guard: float = STD_GUARD, literal_sigma: bool = False) -> GroupAdvantages:
    """Normalise a rollout group's rewards to zero mean and unit population std.

    ``literal_sigma`` divides the root sum of squares by N instead of sqrt(N),
    as the formula is printed in some write-ups; off by default.
    """
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("reward group must be non-empty")
    mean = float(r.mean())
    dev = r - mean
    if literal_sigma:
        std = float(np.sqrt(np.sum(dev ** 2)) / r.size)
    else:
        std = float(np.sqrt(np.mean(dev ** 2)))
    if std >= guard:
        adv = dev / std
    else:
        adv = np.zeros_like(r)
    return GroupAdvantages(tuple(r.tolist()), mean, std, tuple(adv.tolist()))
