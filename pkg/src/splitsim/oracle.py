"""Full-information reference quantities: per-arm mean reward, best arm, gaps, regret."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ContractError, CostParams, ExitProfile, RunReport, ValidationError, reward


@dataclass(frozen=True)
class OracleResult:
    mean_reward: dict[int, float]
    best_arm: int
    gaps: dict[int, float]

    @classmethod
    def from_means(cls, mean_reward: dict[int, float]) -> OracleResult:
        # iteration in increasing layer order so ties keep the shallowest arm
        best = None
        for arm in sorted(mean_reward):
            if best is None or mean_reward[arm] > mean_reward[best]:
                best = arm
        top = mean_reward[best]
        gaps = {arm: top - m for arm, m in mean_reward.items()}
        return cls(dict(mean_reward), best, gaps)


def per_arm_means(trace, profile: ExitProfile | None = None, params: CostParams | None = None) -> OracleResult:
    """Empirical expected reward of every arm over the whole trace.

    Evaluated by brute force: the scalar reward of every (sample, arm) pair,
    summed exactly with :func:`math.fsum`.
    """
    params = params or CostParams()
    profile = profile or getattr(trace, "profile", None)
    if profile is None:
        raise ValidationError("profile is required when trace carries none")
    records = list(trace)
    if not records:
        raise ValidationError("cannot compute oracle means of an empty trace")
    means = {}
    for arm in profile.exit_layers:
        total = math.fsum(reward(rec, arm, profile, params).reward for rec in records)
        means[arm] = total / len(records)
    return OracleResult.from_means(means)


def pseudo_regret(report: RunReport, oracle: OracleResult) -> np.ndarray:
    """Cumulative sum of the best-arm gap of each arm actually played."""
    unknown = set(np.unique(report.arms).tolist()) - set(oracle.gaps)
    if unknown:
        raise ContractError(f"arms {sorted(unknown)} are unknown to the oracle")
    layers = sorted(oracle.gaps)
    lookup = np.array([oracle.gaps[a] for a in layers])
    per_round = lookup[np.searchsorted(layers, report.arms)]
    return np.cumsum(per_round)
