"""Synthetic per-exit confidence traces.

Confidence at each exit follows a Beta distribution whose mean rises with
exit depth and falls with the distortion level ``sigma``. Correctness is a
Bernoulli draw on a (by default perfectly calibrated) function of the
confidence. An optional shared per-sample difficulty couples the exits
through a Gaussian copula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .model import ExitProfile, Trace, ValidationError

MEAN_FLOOR = 0.01
MEAN_CEIL = 0.99


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of a synthetic trace.

    Attributes:
        profile: the exit layers the trace covers.
        n_samples: number of records to emit.
        sigma: distortion level; every exit's mean confidence drops by
            ``noise_penalty * sigma``.
        base: mean confidence of the shallowest exit at ``sigma = 0``.
        depth_gain: increase of mean confidence per exit rank. Either a
            scalar or one non-negative increment per consecutive exit pair.
        noise_penalty: mean-confidence loss per unit of ``sigma``.
        concentration: Beta concentration ``a + b``; ``inf`` gives point masses.
        calibration: ``(slope, intercept)`` of P(correct | confidence), clipped
            to [0, 1]. ``(1, 0)`` is perfect calibration.
        difficulty: correlation in [0, 1) of the latent Gaussian shared by all
            exits of a sample; 0 draws exits independently. A hard sample is
            then hard at every exit, which is what makes the on-device cascade
            expensive.
        seed: RNG seed.
    """

    profile: ExitProfile
    n_samples: int = 10_000
    sigma: float = 0.0
    base: float = 0.55
    depth_gain: float | tuple[float, ...] = 0.02
    noise_penalty: float = 0.08
    concentration: float = 12.0
    calibration: tuple[float, float] = (1.0, 0.0)
    difficulty: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ValidationError(f"n_samples must be positive, got {self.n_samples}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValidationError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.noise_penalty < 0:
            raise ValidationError("noise_penalty must be >= 0")
        if not self.concentration > 0:
            raise ValidationError("concentration must be positive")
        if not 0.0 <= self.difficulty < 1.0:
            raise ValidationError("difficulty must lie in [0, 1)")
        gains = self.gains()
        if len(gains) != self.profile.n_arms - 1:
            raise ValidationError(
                f"depth_gain needs {self.profile.n_arms - 1} increments, got {len(gains)}"
            )
        if any(g < 0 for g in gains):
            raise ValidationError("depth_gain increments must be non-negative")
        if len(self.calibration) != 2:
            raise ValidationError("calibration is a (slope, intercept) pair")

    def gains(self) -> tuple[float, ...]:
        if np.ndim(self.depth_gain) == 0:
            return (float(self.depth_gain),) * (self.profile.n_arms - 1)
        return tuple(float(g) for g in self.depth_gain)

    def raw_means(self) -> np.ndarray:
        """Unclamped mean confidence per exit."""
        ladder = np.concatenate([[0.0], np.cumsum(self.gains())])
        return self.base + ladder - self.noise_penalty * self.sigma

    def means(self) -> np.ndarray:
        return np.clip(self.raw_means(), MEAN_FLOOR, MEAN_CEIL)

    def fingerprint(self) -> dict:
        conc = self.concentration
        return {
            "n_samples": int(self.n_samples),
            "sigma": float(self.sigma),
            "base": float(self.base),
            "depth_gain": list(self.gains()),
            "noise_penalty": float(self.noise_penalty),
            "concentration": "inf" if math.isinf(conc) else float(conc),
            "calibration": [float(c) for c in self.calibration],
            "difficulty": float(self.difficulty),
            "seed": int(self.seed),
        }


def generate_trace(config: GeneratorConfig) -> Trace:
    """Draw ``config.n_samples`` records. Same config and seed, same trace."""
    rng = np.random.default_rng(config.seed)
    n, k = int(config.n_samples), config.profile.n_arms
    raw = config.raw_means()
    means = config.means()
    clamped = bool(np.any(raw != means))

    if math.isinf(config.concentration):
        conf = np.broadcast_to(means, (n, k)).copy()
    else:
        a = means * config.concentration
        b = (1.0 - means) * config.concentration
        rho = config.difficulty
        if rho == 0.0:
            conf = rng.beta(a, b, size=(n, k))
        else:
            shared = rng.standard_normal((n, 1))
            own = rng.standard_normal((n, k))
            z = math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * own
            conf = special.betaincinv(a, b, special.ndtr(z))
        conf = np.clip(conf, 0.0, 1.0)

    slope, intercept = config.calibration
    p_correct = np.clip(slope * conf + intercept, 0.0, 1.0)
    correct = rng.random((n, k)) < p_correct

    metadata = {"generator": config.fingerprint(), "clamped": clamped}
    return Trace(config.profile, conf, correct, metadata=metadata)


def drift_trace(config_a: GeneratorConfig, config_b: GeneratorConfig, switch_at: int) -> Trace:
    """Records ``[0, switch_at)`` drawn under ``config_a``, the rest under ``config_b``.

    Both configs describe a stream of the same total length ``n_samples``;
    the result keeps the prefix of the first and the suffix of the second,
    with ids renumbered ``0 .. n - 1``. When both configs are equal the
    result equals ``generate_trace(config_a)``.
    """
    if config_a.profile != config_b.profile:
        raise ValidationError("drift segments must share the same exit profile")
    if config_a.n_samples != config_b.n_samples:
        raise ValidationError("drift segments must describe streams of the same total length")
    total = int(config_a.n_samples)
    if not 0 < switch_at < total:
        raise ValidationError(f"switch_at must lie strictly between 0 and {total}, got {switch_at}")
    a = generate_trace(config_a)
    b = a if config_b == config_a else generate_trace(config_b)
    conf = np.concatenate([a.confidence[:switch_at], b.confidence[switch_at:]])
    ok = np.concatenate([a.correct[:switch_at], b.correct[switch_at:]])
    metadata = {
        "generator": {"a": config_a.fingerprint(), "b": config_b.fingerprint()},
        "clamped": bool(a.metadata["clamped"] or b.metadata["clamped"]),
        "switch_index": int(switch_at),
    }
    return Trace(config_a.profile, conf, ok, metadata=metadata)
