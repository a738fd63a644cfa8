"""Acceptance criteria, one test each. Every test records a PASS/FAIL line."""

import math
import time
from collections import Counter

import numpy as np
import pytest

from splitsim import fixtures as fx
from splitsim.bandit import run_policy
from splitsim.fixtures import BUNDLED, bundled_path
from splitsim.model import DEFAULT_EXITS, CostParams, ExitProfile, SampleRecord, reward
from splitsim.oracle import per_arm_means, pseudo_regret
from splitsim.tracegen import GeneratorConfig, generate_trace
from splitsim.traceio import read_rounds, read_trace, write_report, write_trace

PROFILE = ExitProfile(DEFAULT_EXITS, 0.1)
SEEDS = range(10)


def direct_reward(conf, arm, final, lam, alpha, mu, offload):
    """Reward written straight from its definition, sharing no code with the package."""
    compute = lam * arm
    if arm == final or conf[arm] >= alpha:
        return conf[arm] - mu * compute
    return conf[final] - mu * (compute + offload)


def test_reward_matches_direct_evaluation(verdict):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        layers = tuple(sorted(rng.choice(np.arange(1, 41), size=rng.integers(1, 8), replace=False).tolist()))
        lam = float(rng.uniform(0, 0.2))
        profile = ExitProfile(layers, lam)
        conf = {layer: float(rng.random()) for layer in layers}
        if rng.random() < 0.2:
            conf[layers[0]] = 0.6
        sample = SampleRecord(0, conf, {layer: bool(rng.random() < 0.5) for layer in layers})
        alpha = float(rng.choice([0.6, rng.random()]))
        mu, offload = float(rng.uniform(0, 2)), float(rng.uniform(0, 2))
        arm = int(rng.choice(layers))
        got = reward(sample, arm, profile, CostParams(alpha=alpha, mu=mu, offload_cost=offload)).reward
        worst = max(worst, abs(got - direct_reward(conf, arm, layers[-1], lam, alpha, mu, offload)))
    elapsed = time.perf_counter() - start
    verdict(1, worst <= 1e-15 and elapsed < 1.0, f"max |diff| {worst:.1e} (tol 1e-15), {elapsed:.2f}s (< 1s)")


def test_fixed_arm_consistency(verdict):
    start = time.perf_counter()
    trace = generate_trace(GeneratorConfig(PROFILE, n_samples=10_000, seed=0))
    oracle = per_arm_means(trace)
    worst = max(abs(run_policy("random", trace, fixed_arm=a).rewards.mean() - oracle.mean_reward[a])
                for a in DEFAULT_EXITS)
    elapsed = time.perf_counter() - start
    verdict(2, worst <= 1e-9 and elapsed < 5.0, f"max |diff| {worst:.1e} (tol 1e-9), {elapsed:.2f}s (< 5s)")


@pytest.fixture(scope="module")
def two_arm_runs():
    start = time.perf_counter()
    gaps, regrets = [], []
    for seed in SEEDS:
        trace = fx.two_arm_fixture(100_000, seed)
        oracle = per_arm_means(trace, params=CostParams(beta=math.sqrt(2)))
        gaps.append(oracle.gaps[20])
        regrets.append(pseudo_regret(run_policy("isplitee", trace, seed=seed), oracle))
    return np.array(gaps), np.array(regrets), time.perf_counter() - start


def test_sublinear_regret(verdict, two_arm_runs):
    gaps, regrets, elapsed = two_arm_runs
    final = regrets[:, -1].mean()
    per_round = final / regrets.shape[1]
    ok = np.all(np.abs(gaps - 0.10) <= 0.01) and final <= 1000 and per_round <= 0.01 and elapsed < 30
    verdict(3, ok, f"gaps {gaps.min():.4f}-{gaps.max():.4f} (0.10 +- 0.01), mean regret {final:.1f} (<= 1000), "
                   f"regret/T {per_round:.5f} (<= 0.01), {elapsed:.1f}s (< 30s)")


def test_dyadic_increments_decrease(verdict, two_arm_runs):
    _, regrets, _ = two_arm_runs
    mean = regrets.mean(axis=0)
    at = {t: mean[t - 1] for t in (12_500, 25_000, 50_000, 100_000)}
    inc = [at[25_000] - at[12_500], at[50_000] - at[25_000], at[100_000] - at[50_000]]
    ok = inc[0] > inc[1] > inc[2]
    verdict(4, ok, "R(2T) - R(T) for T = 12.5k, 25k, 50k: " + ", ".join(f"{d:.2f}" for d in inc)
                   + " (must strictly decrease)")


def test_offset_invariance(verdict):
    trace = generate_trace(GeneratorConfig(PROFILE, n_samples=10_000, seed=1))
    a = run_policy("isplitee", trace).arms.tobytes()
    b = run_policy("isplitee", trace, reward_offset=10.0).arms.tobytes()
    verdict(5, a == b, "arm sequence byte-identical under +10 offset on 10,000 rounds")


def test_threshold_extremes(verdict):
    trace = generate_trace(GeneratorConfig(PROFILE, n_samples=1000, seed=2))
    checks = []
    for kind in ("isplitee", "random", "final", "cascade"):
        low = run_policy(kind, trace, params=CostParams(alpha=0.0), seed=3)
        high = run_policy(kind, trace, params=CostParams(alpha=1.01), seed=3)
        deep = high.arms == PROFILE.final_layer
        checks.append(low.exited_locally.all())
        if kind != "cascade":
            checks.append(not high.exited_locally[~deep].any() and high.exited_locally[deep].all())
    verdict(6, all(checks), "alpha 0: no offloads; alpha 1.01: every non-final round offloads (exact)")


def modal_arm(arms) -> int:
    counts = Counter(arms.tolist())
    return max(sorted(counts), key=lambda a: counts[a])


def test_deeper_split_under_costlier_offload(verdict):
    offloads = (0.2, 0.4, 0.6, 0.8, 1.0)
    monotone, hits = True, {o: 0 for o in offloads}
    for seed in SEEDS:
        trace = fx.monotone_fixture(50_000, seed)
        best = []
        for o in offloads:
            params = CostParams(offload_cost=o)
            oracle = per_arm_means(trace, params=params)
            best.append(oracle.best_arm)
            arms = run_policy("isplitee", trace, params=params, seed=seed).arms
            hits[o] += modal_arm(arms[-len(arms) // 5:]) == oracle.best_arm
        monotone &= best == sorted(best)
    ok = monotone and min(hits.values()) >= 8
    verdict(7, ok, f"i* depth non-decreasing in o: {monotone}; modal-arm hits per o "
                   f"{[hits[o] for o in offloads]} (each >= 8/10)")


def test_policy_ordering(verdict):
    start = time.perf_counter()
    worst, lines = math.inf, []
    for sigma in (0.0, 1.0, 3.0):
        totals = {k: [] for k in ("isplitee", "random", "final", "cascade")}
        for seed in SEEDS:
            trace = generate_trace(GeneratorConfig(PROFILE, n_samples=10_000, sigma=sigma, seed=seed))
            for kind in totals:
                totals[kind].append(run_policy(kind, trace, seed=seed).cumulative_reward)
        means = {k: float(np.mean(v)) for k, v in totals.items()}
        margin = means["isplitee"] - max(v for k, v in means.items() if k != "isplitee")
        worst = min(worst, margin)
        lines.append(f"sigma {sigma:g} margin {margin:+.1f}")
    elapsed = time.perf_counter() - start
    verdict(8, worst >= -1e-6 and elapsed < 60, "; ".join(lines) + f" (>= -1e-6), {elapsed:.1f}s (< 60s)")


def test_drift_adaptation(verdict):
    hits = 0
    for seed in SEEDS:
        trace = fx.drift_fixture(40_000, seed)
        half = len(trace) // 2
        first = per_arm_means(trace[:half], trace.profile).best_arm
        second = per_arm_means(trace[half:], trace.profile).best_arm
        assert first != second
        arms = run_policy("isplitee", trace, seed=seed).arms
        hits += modal_arm(arms[-len(arms) // 10:]) == second
    verdict(9, hits >= 7, f"final-10% modal arm equals second-half i* in {hits}/10 seeds (>= 7)")


def test_determinism_and_roundtrips(verdict, tmp_path):
    ok = True
    config = GeneratorConfig(PROFILE, n_samples=2000, sigma=1.0, seed=4)
    files = [write_trace(generate_trace(config), tmp_path / f"t{i}.jsonl") for i in range(2)]
    ok &= files[0].read_bytes() == files[1].read_bytes()
    _, trace, _ = read_trace(files[0])
    oracle = per_arm_means(trace)
    reports = []
    for i in range(2):
        report = run_policy("isplitee", trace, seed=0)
        write_report(report, oracle, tmp_path / f"r{i}.csv")
        reports.append(report)
    ok &= (tmp_path / "r0.csv").read_bytes() == (tmp_path / "r1.csv").read_bytes()
    cols = read_rounds(tmp_path / "r0.csv")
    ok &= cols["reward"].tobytes() == reports[0].rewards.tobytes()
    ok &= cols["arm"].tolist() == reports[0].arms.tolist()
    for name in BUNDLED:
        _, original, _ = read_trace(bundled_path(name))
        _, again, _ = read_trace(write_trace(original, tmp_path / name))
        ok &= again == original
    verdict(10, ok, "byte-identical traces and report CSVs; read(write(x)) = x on bundled fixtures")
