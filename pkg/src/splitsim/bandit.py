"""Splitting-layer selection policies.

``ISPLITEE`` is a UCB policy over the exit layers. The baselines are the
final layer, a randomly drawn but fixed splitting layer, and a classic
on-device early-exit cascade.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ContractError,
    CostParams,
    ExitProfile,
    RunReport,
    Trace,
    ValidationError,
    outcome_table,
)


class PolicyKind(str, enum.Enum):
    ISPLITEE = "isplitee"
    FINAL_LAYER = "final"
    RANDOM_EXIT = "random"
    EARLY_EXIT_CASCADE = "cascade"

    @classmethod
    def parse(cls, value: str | PolicyKind) -> PolicyKind:
        if isinstance(value, cls):
            return value
        aliases = {"i-splitee": "isplitee", "final-layer": "final", "random-exit": "random",
                   "early-exit": "cascade", "ee": "cascade"}
        key = str(value).strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValidationError(f"unknown policy {value!r}; choose from {[k.value for k in cls]}") from None


@dataclass
class UcbState:
    """Empirical means ``q``, pull counts ``n`` and rounds elapsed ``t``."""

    q: dict[int, float]
    n: dict[int, int]
    t: int = 0
    beta: float = math.sqrt(2.0)

    @classmethod
    def fresh(cls, arms, beta: float = math.sqrt(2.0)) -> UcbState:
        return cls({a: 0.0 for a in arms}, {a: 0 for a in arms}, 0, beta)

    @property
    def initialized(self) -> bool:
        return all(k >= 1 for k in self.n.values())

    def index(self, arm: int) -> float:
        """UCB index of ``arm`` for the upcoming round ``t + 1``."""
        return self.q[arm] + self.beta * math.sqrt(math.log(self.t + 1) / self.n[arm])

    def select(self, arms) -> int:
        return ucb_select(self, arms)

    def update(self, arm: int, reward: float) -> UcbState:
        return ucb_update(self, arm, reward)


def ucb_select(state: UcbState, arms) -> int:
    """Arm maximising ``Q(i) + beta * sqrt(ln t / N(i))``.

    ``t`` is the 1-based number of the round being played, counting the
    initialisation plays. Ties go to the lowest layer index.
    """
    arms = sorted(arms)
    missing = [a for a in arms if state.n.get(a, 0) < 1]
    if missing:
        raise ContractError(f"UCB selection before every arm was played once (unplayed: {missing})")
    if state.t < len(arms):
        raise ContractError(f"round counter {state.t} smaller than the number of arms {len(arms)}")
    log_t = math.log(state.t + 1)
    beta = state.beta
    q, n = state.q, state.n
    best, best_index = arms[0], -math.inf
    for a in arms:
        idx = q[a] + beta * math.sqrt(log_t / n[a])
        if idx > best_index:
            best, best_index = a, idx
    return best


def ucb_update(state: UcbState, arm: int, reward: float) -> UcbState:
    """Fold one reward into the running mean of ``arm``; mutates and returns ``state``."""
    if arm not in state.n:
        raise ContractError(f"arm {arm} is not tracked by this state")
    reward = float(reward)
    if not math.isfinite(reward):
        raise ValidationError(f"reward must be finite, got {reward}")
    k = state.n[arm] + 1
    state.n[arm] = k
    state.q[arm] += (reward - state.q[arm]) / k
    state.t += 1
    return state


def _ucb_columns(rewards: np.ndarray, arms: tuple[int, ...], beta: float, offset: float):
    n_rounds, k = rewards.shape
    state = UcbState.fresh(arms, beta)
    cols = np.empty(n_rounds, dtype=np.int64)
    rows = rewards.tolist()
    for t in range(min(k, n_rounds)):
        cols[t] = t
        ucb_update(state, arms[t], rows[t][t] + offset)
    # inlined ucb_select/ucb_update over positional lists; same arithmetic
    q = [state.q[a] for a in arms]
    n = [state.n[a] for a in arms]
    sqrt, log = math.sqrt, math.log
    rng_k = range(k)
    for t in range(k, n_rounds):
        log_t = log(t + 1)
        best, best_index = 0, -math.inf
        for j in rng_k:
            idx = q[j] + beta * sqrt(log_t / n[j])
            if idx > best_index:
                best, best_index = j, idx
        cols[t] = best
        r = rows[t][best] + offset
        m = n[best] + 1
        n[best] = m
        q[best] += (r - q[best]) / m
    for j, a in enumerate(arms):
        state.q[a], state.n[a] = q[j], n[j]
    state.t = n_rounds
    return cols, state


def _cascade_columns(confidence: np.ndarray, alpha: float) -> np.ndarray:
    confident = confidence >= alpha
    confident[:, -1] = True
    return np.argmax(confident, axis=1)


def run_policy(
    kind: PolicyKind | str,
    trace,
    profile: ExitProfile | None = None,
    params: CostParams | None = None,
    seed: int = 0,
    *,
    fixed_arm: int | None = None,
    reward_offset: float = 0.0,
) -> RunReport:
    """Run one policy sequentially over ``trace``.

    Args:
        kind: which policy to run.
        trace: a :class:`Trace` or any sequence of sample records.
        profile: arm set; defaults to ``trace.profile``.
        params: cost parameters and UCB exploration weight.
        seed: drives the random draw of the random-exit baseline. The other
            policies are deterministic functions of the trace.
        fixed_arm: pins the random-exit arm instead of drawing it.
        reward_offset: constant added to every reward the UCB learner
            observes. Reported rewards are unaffected.

    Returns:
        The per-round outcomes and run summary.
    """
    kind = PolicyKind.parse(kind)
    params = params or CostParams()
    if profile is None:
        if not isinstance(trace, Trace):
            raise ValidationError("profile is required when trace is not a Trace")
        profile = trace.profile
    trace = Trace.from_records(profile, trace)
    if trace.profile != profile:
        raise ValidationError(f"trace profile {trace.profile} does not match {profile}")
    n_rounds, k = trace.confidence.shape
    if n_rounds == 0:
        raise ValidationError("trace is empty")
    table = outcome_table(trace.confidence, trace.correct, profile, params)
    arms = profile.exit_layers

    meta: dict = {}
    chosen_fixed = None
    if kind is PolicyKind.ISPLITEE:
        if n_rounds < k:
            raise ValidationError(f"trace has {n_rounds} samples, fewer than the {k} arms to initialise")
        cols, state = _ucb_columns(table.reward, arms, params.beta, float(reward_offset))
        meta["q"] = dict(state.q)
    elif kind is PolicyKind.FINAL_LAYER:
        cols = np.full(n_rounds, k - 1, dtype=np.int64)
    elif kind is PolicyKind.RANDOM_EXIT:
        if fixed_arm is None:
            j = int(np.random.default_rng(seed).integers(k))
        else:
            j = profile.index(fixed_arm)
        chosen_fixed = arms[j]
        cols = np.full(n_rounds, j, dtype=np.int64)
    else:
        cols = _cascade_columns(trace.confidence, params.alpha)

    rows = np.arange(n_rounds)
    layers = np.asarray(arms, dtype=np.int64)
    if kind is PolicyKind.EARLY_EXIT_CASCADE:
        # all on device: reward and cost of the stopping layer, never offloaded
        gamma = profile.lam * layers[cols].astype(np.float64)
        conf = trace.confidence[rows, cols]
        exited = np.ones(n_rounds, dtype=bool)
        rewards = conf - params.mu * gamma
        costs = gamma
        correct = trace.correct[rows, cols]
    else:
        exited = table.exited_locally[rows, cols]
        rewards = table.reward[rows, cols]
        costs = table.raw_cost[rows, cols]
        correct = table.correct[rows, cols]

    return RunReport(
        policy=kind.value,
        seed=int(seed),
        profile=profile,
        arms=layers[cols],
        exited_locally=np.asarray(exited, dtype=bool),
        rewards=np.asarray(rewards, dtype=np.float64),
        raw_costs=np.asarray(costs, dtype=np.float64),
        correct=np.asarray(correct, dtype=bool),
        final_accuracy=float(np.mean(trace.correct[:, -1])),
        fixed_arm=chosen_fixed,
        meta=meta,
    )
