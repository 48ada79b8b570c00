"""Evidence-weighted multi-view fusion and the flow-matching sampler.

Per-token convex weights over a bundle of views turn per-view rectified
velocities into a single fused update; with those velocities the flow is
constant along its own path, so plain Euler integration reproduces the
closed-form endpoint (the weighted average of the views' targets).
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evidence import EvidenceMode, EvidenceVector, evidence_scores
from .generator import Latent, ProbeSettings, ViewFrame, probe_attention, view_velocity

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FusionWeights:
    """Per-token convex weights over the bundle views, in bundle order."""

    bundle_frames: tuple
    weights: np.ndarray  # (Q, B)

    def __post_init__(self):
        frames = tuple(int(f) for f in self.bundle_frames)
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "bundle_frames", frames)
        object.__setattr__(self, "weights", weights)
        if weights.ndim != 2 or weights.shape[1] != len(frames):
            raise ValueError("weights must be (Q, bundle size)")
        if np.any(weights < 0.0):
            raise ValueError("fusion weights must be nonnegative")
        if np.any(np.abs(weights.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("fusion weight rows must sum to 1")


@dataclass(frozen=True)
class SamplerConfig:
    """Euler grid {0, 1/N, ..., (N-1)/N}; epsilon guards the divisor so
    the integrator can never evaluate at t = 1."""

    steps: int = 16
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be > 0")


def compute_fusion_weights(
    bundle_probe_scores: Sequence[EvidenceVector],
) -> FusionWeights:
    """Normalize per-token evidence over the bundle to sum to 1.

    Tokens with zero evidence everywhere fall back to uniform weights so
    every row stays a convex combination.
    """
    if not bundle_probe_scores:
        raise ValueError("bundle must contain at least one evidence vector")
    q_count = bundle_probe_scores[0].q_count
    if any(v.q_count != q_count for v in bundle_probe_scores):
        raise ValueError("bundle evidence vectors must share q_count")
    stacked = np.stack([v.scores for v in bundle_probe_scores], axis=1)
    totals = stacked.sum(axis=1)
    b = stacked.shape[1]
    weights = np.full_like(stacked, 1.0 / b)
    live = totals > 0.0
    weights[live] = stacked[live] / totals[live, None]
    return FusionWeights(
        tuple(v.frame_index for v in bundle_probe_scores), weights
    )


def fused_velocity(
    z: Latent, t: float, bundle: Sequence[ViewFrame], weights: FusionWeights
) -> np.ndarray:
    """Weighted average of the bundle views' velocities, per token."""
    if tuple(v.global_index for v in bundle) != weights.bundle_frames:
        raise ValueError("bundle order does not match the fusion weights")
    velocities = np.stack(
        [view_velocity(z, t, v) for v in bundle], axis=1
    )
    return (weights.weights * velocities).sum(axis=1)


def euler_sample(
    z_init: Latent,
    bundle: Sequence[ViewFrame],
    weights: FusionWeights,
    config: SamplerConfig = SamplerConfig(),
) -> Latent:
    """Integrate the fused flow from t=0 to t=1 with N Euler steps.

    The fused field is constant along the exact path, so the result
    matches sum_v w_v * target_v up to rounding for any step count.
    """
    if tuple(v.global_index for v in bundle) != weights.bundle_frames:
        raise ValueError("bundle order does not match the fusion weights")
    z = np.array(z_init, dtype=np.float64)
    # Same arithmetic as fused_velocity, with the target matrix hoisted
    # out of the step loop.
    targets = np.stack([v.target_latent for v in bundle], axis=1)
    n = config.steps
    dt = 1.0 / n
    for k in range(n):
        t = min(k * dt, 1.0 - config.epsilon)
        velocities = (targets - z[:, None]) / (1.0 - t)
        z = z + dt * (weights.weights * velocities).sum(axis=1)
        if not np.all(np.isfinite(z)):
            raise FloatingPointError(
                f"non-finite latent after Euler step {k} (t={t:.6f})"
            )
    return z


def warmup_probe(
    settings: ProbeSettings,
    views: Sequence[ViewFrame],
    frozen_prior_seed: int,
    probe_step: int,
    mode: EvidenceMode = EvidenceMode.EVIDENCE,
    noise_cache: dict = None,
) -> list:
    """One warmup attention pass under the frozen prior, scored per view.

    The prior seed is drawn once per stream and reused here for every
    chunk, so score differences between chunks reflect the views alone.
    """
    if not views:
        raise ValueError("warmup probe needs at least one view")
    probe = probe_attention(
        views, settings, probe_step, frozen_prior_seed, noise_cache=noise_cache
    )
    return evidence_scores(probe.attention, mode)
