"""Bundled fixtures.

Large fixtures are rebuilt deterministically from a seed; small hand-checked
ones ship as trace files under ``data/``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .model import DEFAULT_EXITS, ExitProfile, Trace, ValidationError
from .tracegen import GeneratorConfig, drift_trace

BUNDLED = ("two_arm_small.jsonl", "single_arm.jsonl", "three_sample.jsonl")


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ValidationError(f"unknown bundled fixture {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("splitsim") / "data" / name))


def two_level_trace(
    profile: ExitProfile,
    p_confident,
    confident_conf,
    final_conf: float,
    n_samples: int,
    seed: int = 0,
    *,
    alpha: float = 0.6,
    spread: float = 0.05,
    low_range: tuple[float, float] = (0.2, 0.6),
) -> Trace:
    """Trace whose non-final exits are confident with a fixed probability.

    Exit ``j`` (all but the final one) is confident with probability
    ``p_confident[j]``; its confidence is then ``confident_conf[j]`` jittered
    by ``spread`` and kept at or above ``alpha``, otherwise it is uniform on
    ``low_range`` (which must stay below ``alpha``). The final exit carries
    ``final_conf`` jittered by ``spread``. Correctness is Bernoulli(confidence).
    Exits are independent, so per-arm expected rewards have a closed form.
    """
    k = profile.n_arms
    p = np.asarray(p_confident, dtype=float)
    c = np.asarray(confident_conf, dtype=float)
    if p.shape != (k - 1,) or c.shape != (k - 1,):
        raise ValidationError(f"need one probability and confidence per non-final exit ({k - 1})")
    if low_range[1] > alpha:
        raise ValidationError("low_range must stay below alpha")
    rng = np.random.default_rng(seed)
    conf = np.empty((n_samples, k))
    hit = rng.random((n_samples, k - 1)) < p
    high = np.clip(c + rng.uniform(-spread, spread, (n_samples, k - 1)), alpha, 1.0)
    low = rng.uniform(low_range[0], low_range[1], (n_samples, k - 1))
    conf[:, :-1] = np.where(hit, high, low)
    conf[:, -1] = np.clip(final_conf + rng.uniform(-spread, spread, n_samples), 0.0, 1.0)
    correct = rng.random((n_samples, k)) < conf
    meta = {"generator": {"fixture": "two_level", "p_confident": p.tolist(),
                          "confident_conf": c.tolist(), "final_conf": final_conf,
                          "spread": spread, "seed": int(seed)}}
    return Trace(profile, conf, correct, metadata=meta)


def two_arm_fixture(n_samples: int = 100_000, seed: int = 0) -> Trace:
    """Exits {10, 20}; under the default costs the shallow arm leads by about 0.10.

    Arm 20 earns ``C_L - 2``. Arm 10 earns the same when it offloads and
    ``C_10 - 1`` when local (probability 0.125, ``C_10`` about 0.7, ``C_L``
    about 0.9), so the gap is 0.125 * (0.7 - 0.9 + 1) = 0.10.
    """
    return two_level_trace(ExitProfile((10, 20), 0.1), [0.125], [0.7], 0.9, n_samples, seed)


def dominance_fixture(n_samples: int = 10_000, seed: int = 0) -> Trace:
    """Exits {10, 20} with a gap of about 0.30 in favour of arm 10."""
    return two_level_trace(ExitProfile((10, 20), 0.1), [0.375], [0.7], 0.9, n_samples, seed)


# exit 3 never confident, exit 6 half the time, exit 9 and deeper always:
# offloading gets less frequent with depth, so a costlier offload favours depth
MONOTONE_P = (0.0, 0.5, 1.0, 1.0, 1.0, 1.0)
MONOTONE_CONF = (0.7, 0.85, 0.75, 0.85, 0.88, 0.9)
MONOTONE_FINAL = 0.75


def monotone_fixture(n_samples: int = 50_000, seed: int = 0) -> Trace:
    """Default exits; the best split moves 3 -> 6 -> 9 as the offload cost grows."""
    return two_level_trace(ExitProfile(DEFAULT_EXITS, 0.1), MONOTONE_P, MONOTONE_CONF,
                           MONOTONE_FINAL, n_samples, seed)


def drift_configs(n_samples: int = 40_000, seed: int = 0) -> tuple[GeneratorConfig, GeneratorConfig]:
    """Undistorted and sigma = 3 generator configs with a front-loaded depth ladder."""
    profile = ExitProfile(DEFAULT_EXITS, 0.1)
    shape = dict(base=0.7, depth_gain=(0.2, 0.08, 0.032, 0.0128, 0.00512, 0.002048),
                 noise_penalty=0.05, concentration=30.0, difficulty=0.9)
    a = GeneratorConfig(profile, n_samples, sigma=0.0, seed=seed, **shape)
    b = GeneratorConfig(profile, n_samples, sigma=3.0, seed=seed + 10_000, **shape)
    return a, b


def drift_fixture(n_samples: int = 40_000, seed: int = 0) -> Trace:
    a, b = drift_configs(n_samples, seed)
    return drift_trace(a, b, n_samples // 2)
