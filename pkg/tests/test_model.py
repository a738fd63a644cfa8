import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitsim.model import (
    DEFAULT_EXITS,
    ContractError,
    CostParams,
    ExitProfile,
    SampleRecord,
    Trace,
    ValidationError,
    outcome_table,
    raw_cost_final_layer,
    reward,
)

PROFILE = ExitProfile(DEFAULT_EXITS, 0.1)


def record(conf: dict, ok: dict | None = None, sid: int = 0) -> SampleRecord:
    full = {layer: 0.5 for layer in DEFAULT_EXITS}
    full.update(conf)
    flags = {layer: False for layer in DEFAULT_EXITS}
    flags.update(ok or {})
    return SampleRecord(sid, full, flags)


class TestExitProfile:
    def test_gamma_is_lambda_times_layer(self):
        assert PROFILE.gamma(3) == pytest.approx(0.3)
        assert PROFILE.final_layer == 20

    @pytest.mark.parametrize("layers", [(), (0, 3), (3, 3), (6, 3)])
    def test_rejects_bad_layers(self, layers):
        with pytest.raises(ValidationError):
            ExitProfile(layers, 0.1)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValidationError):
            ExitProfile((3, 20), -0.1)


class TestCostParams:
    def test_beta_below_one_rejected(self):
        with pytest.raises(ValidationError):
            CostParams(beta=0.5)

    @pytest.mark.parametrize("field", ["alpha", "mu", "offload_cost", "beta"])
    def test_non_finite_rejected(self, field):
        with pytest.raises(ValidationError):
            CostParams(**{field: math.inf})

    def test_defaults(self):
        p = CostParams()
        assert (p.alpha, p.mu, p.offload_cost) == (0.6, 1.0, 1.0)
        assert p.beta == math.sqrt(2)


class TestReward:
    def test_local_exit(self):
        out = reward(record({3: 0.8}, {3: True}), 3, PROFILE, CostParams(alpha=0.6, mu=1))
        assert out.exited_locally
        assert out.reward == pytest.approx(0.5, abs=1e-12)
        assert out.raw_cost == pytest.approx(0.3)
        assert out.correct

    def test_offload(self):
        s = record({3: 0.5, 20: 0.9}, {3: True, 20: False})
        out = reward(s, 3, PROFILE, CostParams(alpha=0.6, mu=1, offload_cost=1.0))
        assert not out.exited_locally
        assert out.reward == pytest.approx(-0.4, abs=1e-12)
        assert out.raw_cost == pytest.approx(1.3)
        assert out.correct is False  # final-layer flag

    def test_final_layer_never_offloads(self):
        out = reward(record({20: 0.5}), 20, PROFILE, CostParams(alpha=0.6, mu=1))
        assert out.exited_locally
        assert out.reward == pytest.approx(-1.5, abs=1e-12)

    def test_zero_mu_returns_confidence(self):
        out = reward(record({9: 0.73}), 9, PROFILE, CostParams(alpha=0.6, mu=0))
        assert out.reward == 0.73

    def test_tie_at_threshold_exits(self):
        out = reward(record({6: 0.6}), 6, PROFILE, CostParams(alpha=0.6))
        assert out.exited_locally

    def test_unknown_arm(self):
        with pytest.raises(ContractError):
            reward(record({}), 4, PROFILE, CostParams())

    def test_confidence_out_of_range(self):
        with pytest.raises(ValidationError):
            record({3: 1.2})

    def test_record_missing_layer(self):
        s = SampleRecord(0, {3: 0.5, 20: 0.5}, {3: True, 20: True})
        with pytest.raises(ValidationError):
            reward(s, 3, PROFILE, CostParams())


@pytest.mark.parametrize("lam,layers,expected", [(0.1, (3, 20), 2.0), (0.0, (5, 7), 0.0), (0.1, (3, 18), 1.8)])
def test_raw_cost_final_layer(lam, layers, expected):
    assert raw_cost_final_layer(ExitProfile(layers, lam)) == pytest.approx(expected, abs=1e-12)


confidences = st.floats(0.0, 1.0, allow_nan=False)
params_st = st.builds(
    CostParams,
    alpha=st.floats(0.0, 1.5),
    mu=st.floats(0.0, 3.0),
    offload_cost=st.floats(0.0, 3.0),
    beta=st.floats(1.0, 3.0),
)


@given(conf=st.lists(confidences, min_size=7, max_size=7), arm=st.sampled_from(DEFAULT_EXITS), params=params_st)
def test_reward_bounds_and_branching(conf, arm, params):
    s = SampleRecord(0, dict(zip(DEFAULT_EXITS, conf)), {layer: True for layer in DEFAULT_EXITS})
    out = reward(s, arm, PROFILE, params)
    low = -params.mu * (raw_cost_final_layer(PROFILE) + params.offload_cost)
    assert low - 1e-12 <= out.reward <= 1.0
    gamma = PROFILE.gamma(arm)
    if out.exited_locally:
        assert out.raw_cost == gamma
    else:
        assert out.raw_cost == gamma + params.offload_cost
        assert arm != 20
    assert reward(s, arm, PROFILE, params) == out


@given(conf=st.lists(confidences, min_size=7, max_size=7), arm=st.sampled_from(DEFAULT_EXITS[:-1]))
def test_threshold_extremes(conf, arm):
    s = SampleRecord(0, dict(zip(DEFAULT_EXITS, conf)), {layer: True for layer in DEFAULT_EXITS})
    assert reward(s, arm, PROFILE, CostParams(alpha=0.0)).exited_locally
    assert not reward(s, arm, PROFILE, CostParams(alpha=1.01)).exited_locally


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1), params=params_st)
def test_outcome_table_matches_scalar_reward(seed, params):
    rng = np.random.default_rng(seed)
    conf = rng.random((20, 7))
    conf[rng.random((20, 7)) < 0.1] = params.alpha  # exercise ties
    conf = np.clip(conf, 0, 1)
    ok = rng.random((20, 7)) < 0.5
    trace = Trace(PROFILE, conf, ok)
    table = outcome_table(conf, ok, PROFILE, params)
    for t, rec in enumerate(trace):
        for j, arm in enumerate(DEFAULT_EXITS):
            out = reward(rec, arm, PROFILE, params)
            assert table.reward[t, j] == out.reward
            assert table.raw_cost[t, j] == out.raw_cost
            assert table.exited_locally[t, j] == out.exited_locally
            assert table.correct[t, j] == out.correct


class TestTrace:
    def test_roundtrip_records(self):
        recs = [record({3: 0.1 * i}, sid=i) for i in range(5)]
        tr = Trace.from_records(PROFILE, recs)
        assert list(tr) == recs
        assert len(tr[1:3]) == 2

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            Trace(PROFILE, np.full((2, 7), 1.5), np.ones((2, 7), bool))

    def test_rejects_wrong_width(self):
        with pytest.raises(ValidationError):
            Trace(PROFILE, np.zeros((2, 3)), np.ones((2, 3), bool))
