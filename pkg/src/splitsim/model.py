"""Domain types and the split/exit reward model.

A sample is processed on the edge device up to the chosen splitting layer.
If the exit attached there is confident enough (or the splitting layer is the
final layer) the sample is inferred locally; otherwise it is offloaded and
inferred at the final layer in the cloud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class SplitSimError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(SplitSimError, ValueError):
    """Input data or parameters fail validation."""


class ContractError(SplitSimError, ValueError):
    """An operation was called outside its precondition."""


@dataclass(frozen=True)
class ExitProfile:
    """The arm set: layers with an attached exit and the per-layer compute cost.

    The last entry of ``exit_layers`` is the final layer ``L`` of the backbone.
    """

    exit_layers: tuple[int, ...]
    lam: float = 0.1

    def __post_init__(self):
        layers = tuple(int(i) for i in self.exit_layers)
        object.__setattr__(self, "exit_layers", layers)
        object.__setattr__(self, "lam", float(self.lam))
        if not layers:
            raise ValidationError("exit_layers must be non-empty")
        if layers[0] < 1:
            raise ValidationError(f"exit layers must be >= 1, got {layers[0]}")
        if any(b <= a for a, b in zip(layers, layers[1:])):
            raise ValidationError(f"exit_layers must be strictly increasing: {layers}")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ValidationError(f"lambda must be finite and >= 0, got {self.lam}")

    @property
    def final_layer(self) -> int:
        return self.exit_layers[-1]

    @property
    def n_arms(self) -> int:
        return len(self.exit_layers)

    def gamma(self, layer: int) -> float:
        """Compute cost of processing up to ``layer`` on the edge."""
        return self.lam * layer

    def index(self, layer: int) -> int:
        try:
            return self.exit_layers.index(layer)
        except ValueError:
            raise ContractError(f"layer {layer} is not in the arm set {self.exit_layers}") from None


DEFAULT_EXITS = (3, 6, 9, 12, 15, 18, 20)


@dataclass(frozen=True)
class CostParams:
    """Economic knobs of the reward.

    Attributes:
        alpha: confidence threshold for exiting at the splitting layer.
        mu: conversion factor from cost units to confidence units.
        offload_cost: communication cost ``o`` paid when a sample is offloaded.
        beta: weight of the UCB exploration bonus.
    """

    alpha: float = 0.6
    mu: float = 1.0
    offload_cost: float = 1.0
    beta: float = math.sqrt(2.0)

    def __post_init__(self):
        for name in ("alpha", "mu", "offload_cost", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if self.mu < 0:
            raise ValidationError(f"mu must be >= 0, got {self.mu}")
        if self.offload_cost < 0:
            raise ValidationError(f"offload_cost must be >= 0, got {self.offload_cost}")
        if self.beta < 1:
            raise ValidationError(f"beta must be >= 1, got {self.beta}")


@dataclass(frozen=True)
class SampleRecord:
    """Per-exit confidence and correctness of one inference instance."""

    sample_id: int
    confidence: Mapping[int, float]
    correct: Mapping[int, bool]

    def __post_init__(self):
        if self.sample_id < 0:
            raise ValidationError(f"sample_id must be non-negative, got {self.sample_id}")
        if set(self.confidence) != set(self.correct):
            raise ValidationError(f"sample {self.sample_id}: confidence and correct cover different layers")
        for layer, c in self.confidence.items():
            if not 0.0 <= c <= 1.0:
                raise ValidationError(f"sample {self.sample_id}: confidence {c!r} at layer {layer} outside [0, 1]")

    def check_covers(self, profile: ExitProfile) -> None:
        if set(self.confidence) != set(profile.exit_layers):
            raise ValidationError(
                f"sample {self.sample_id} covers layers {sorted(self.confidence)}, "
                f"expected {list(profile.exit_layers)}"
            )


@dataclass(frozen=True)
class StepOutcome:
    round: int
    arm: int
    exited_locally: bool
    reward: float
    raw_cost: float
    correct: bool


def reward(
    sample: SampleRecord,
    arm: int,
    profile: ExitProfile,
    params: CostParams,
    round: int = 0,
) -> StepOutcome:
    """Play ``arm`` as splitting layer on one sample.

    The sample exits locally when its confidence at ``arm`` reaches the
    threshold (ties exit) or when ``arm`` is the final layer. Otherwise it is
    offloaded: the reward uses the final-layer confidence and the cost adds
    the offloading cost.
    """
    if arm not in profile.exit_layers:
        raise ContractError(f"arm {arm} is not in the arm set {profile.exit_layers}")
    sample.check_covers(profile)
    final = profile.final_layer
    c_arm = float(sample.confidence[arm])
    c_final = float(sample.confidence[final])
    for c in (c_arm, c_final):
        if not 0.0 <= c <= 1.0:
            raise ValidationError(f"confidence {c!r} outside [0, 1]")
    gamma = profile.gamma(arm)
    if c_arm >= params.alpha or arm == final:
        return StepOutcome(round, arm, True, c_arm - params.mu * gamma, gamma, bool(sample.correct[arm]))
    cost = gamma + params.offload_cost
    return StepOutcome(round, arm, False, c_final - params.mu * cost, cost, bool(sample.correct[final]))


def raw_cost_final_layer(profile: ExitProfile) -> float:
    """Per-sample cost of running the whole backbone on the edge."""
    return profile.gamma(profile.final_layer)


@dataclass(frozen=True)
class OutcomeTable:
    """Outcomes of every arm on every sample, as ``(T, K)`` arrays."""

    exited_locally: np.ndarray
    reward: np.ndarray
    raw_cost: np.ndarray
    correct: np.ndarray


def outcome_table(confidence: np.ndarray, correct: np.ndarray, profile: ExitProfile,
                  params: CostParams) -> OutcomeTable:
    """Vectorised :func:`reward` over a whole trace and every arm.

    ``confidence`` and ``correct`` are ``(T, K)`` arrays whose columns follow
    ``profile.exit_layers``.
    """
    confidence = np.asarray(confidence, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    gamma = profile.lam * np.asarray(profile.exit_layers, dtype=np.float64)
    local = confidence >= params.alpha
    local[:, -1] = True
    c_final = confidence[:, -1:]
    cost = np.where(local, gamma, gamma + params.offload_cost)
    rew = np.where(local, confidence, c_final) - params.mu * cost
    ok = np.where(local, correct, correct[:, -1:])
    return OutcomeTable(local, rew, cost, ok)


@dataclass
class RunReport:
    """Per-round outcomes of one policy run over a trace.

    Arrays are aligned by round. ``final_accuracy`` is the accuracy of the
    final-layer baseline on the same trace and serves as the normalisation
    base for percentage reporting, together with ``raw_cost_final_layer``.
    """

    policy: str
    seed: int
    profile: ExitProfile
    arms: np.ndarray
    exited_locally: np.ndarray
    rewards: np.ndarray
    raw_costs: np.ndarray
    correct: np.ndarray
    final_accuracy: float
    fixed_arm: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_rounds(self) -> int:
        return len(self.arms)

    @property
    def cumulative_reward(self) -> float:
        return math.fsum(self.rewards.tolist())

    @property
    def cumulative_cost(self) -> float:
        return math.fsum(self.raw_costs.tolist())

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.correct)) if self.n_rounds else 0.0

    @property
    def pulls(self) -> dict[int, int]:
        counts = {layer: 0 for layer in self.profile.exit_layers}
        layers, n = np.unique(self.arms, return_counts=True)
        for layer, k in zip(layers.tolist(), n.tolist()):
            counts[layer] = k
        return counts

    def outcomes(self) -> list[StepOutcome]:
        return [
            StepOutcome(t, a, loc, r, c, ok)
            for t, (a, loc, r, c, ok) in enumerate(
                zip(self.arms.tolist(), self.exited_locally.tolist(), self.rewards.tolist(),
                    self.raw_costs.tolist(), self.correct.tolist()),
                start=1,
            )
        ]


class Trace(Sequence[SampleRecord]):
    """An ordered sequence of sample records backed by ``(T, K)`` arrays.

    Records are materialised on access; simulations read the arrays directly.
    """

    def __init__(self, profile: ExitProfile, confidence, correct, ids=None, metadata: dict | None = None):
        confidence = np.asarray(confidence, dtype=np.float64)
        correct = np.asarray(correct, dtype=bool)
        if confidence.ndim != 2 or confidence.shape[1] != profile.n_arms:
            raise ValidationError(f"confidence must have shape (T, {profile.n_arms}), got {confidence.shape}")
        if correct.shape != confidence.shape:
            raise ValidationError(f"correct shape {correct.shape} != confidence shape {confidence.shape}")
        if confidence.size and not (np.all(confidence >= 0.0) and np.all(confidence <= 1.0)):
            raise ValidationError("confidence values must lie in [0, 1]")
        if ids is None:
            ids = np.arange(len(confidence), dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (len(confidence),):
            raise ValidationError("ids must have one entry per sample")
        self.profile = profile
        self.confidence = confidence
        self.correct = correct
        self.ids = ids
        self.metadata = dict(metadata or {})

    @classmethod
    def from_records(cls, profile: ExitProfile, records, metadata: dict | None = None) -> Trace:
        if isinstance(records, Trace):
            return records
        records = list(records)
        for rec in records:
            rec.check_covers(profile)
        layers = profile.exit_layers
        conf = np.array([[rec.confidence[i] for i in layers] for rec in records], dtype=np.float64)
        ok = np.array([[rec.correct[i] for i in layers] for rec in records], dtype=bool)
        conf = conf.reshape(len(records), len(layers))
        ok = ok.reshape(len(records), len(layers))
        ids = [rec.sample_id for rec in records]
        return cls(profile, conf, ok, ids, metadata)

    def __len__(self) -> int:
        return len(self.confidence)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Trace(self.profile, self.confidence[index], self.correct[index], self.ids[index], self.metadata)
        layers = self.profile.exit_layers
        conf = self.confidence[index].tolist()
        ok = self.correct[index].tolist()
        return SampleRecord(int(self.ids[index]), dict(zip(layers, conf)), dict(zip(layers, ok)))

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.profile == other.profile
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.confidence, other.confidence)
            and np.array_equal(self.correct, other.correct)
        )

    __hash__ = None

    def __repr__(self):
        return f"Trace(n={len(self)}, exits={self.profile.exit_layers})"
