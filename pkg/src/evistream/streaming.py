"""Chunked streaming loop: warmup probes, memory voting, weighted fusion.

The evidential strategy carries exactly one EvidentialMemory plus the
frozen prior seed across chunks (frames no longer referenced by any
memory slot are dropped immediately); the baseline strategies replace the
selection step while keeping the same probe-weighted fusion.
"""

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ExperimentConfig, Strategy
from .fusion import SamplerConfig, compute_fusion_weights, euler_sample, warmup_probe
from .generator import ProbeSettings, Scene, ViewFrame, render_view
from .harness import compute_metrics, synthesize_trajectory
from .memory import ConditioningBundle, EvidentialMemory

_LATENT_TAG = 31
_RANDOM_K_TAG = 32


@dataclass(frozen=True, eq=False)
class ChunkResult:
    """Output of one chunk: elected bundle, fused latent, and metrics.

    memory_scalar_count reports the strategy's cross-chunk state size:
    2*Q*D for evidential (constant by construction), 0 for the stateless
    baselines, and the retained frame-reference count for random_k and
    full_history_oracle (which grows with the stream; the contrast case).
    """

    chunk_index: int
    bundle: ConditioningBundle
    latent: np.ndarray
    metrics: dict
    memory_scalar_count: int
    wall_time: float


@dataclass
class StreamState:
    """Mutable cross-chunk state of the evidential strategy."""

    config: ExperimentConfig
    scene: Scene
    memory: EvidentialMemory
    settings: ProbeSettings
    frame_store: dict = field(default_factory=dict)
    noise_cache: dict = field(default_factory=dict)


def chunk_stream(
    frames: Sequence[ViewFrame], chunk_size: int, stride: int
) -> list:
    """Overlapping windows starting at 0, stride, 2*stride, ...

    The final window may be partial but never empty; stride <= chunk_size
    guarantees every frame lands in at least one chunk.
    """
    if not frames:
        raise ValueError("cannot chunk an empty stream")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride > chunk_size:
        raise ValueError("stride must not exceed chunk_size")
    return [
        list(frames[start : start + chunk_size])
        for start in range(0, len(frames), stride)
    ]


def stream_frames(config: ExperimentConfig, scene: Scene) -> list:
    """Render the full posed view stream for a config's trajectory."""
    seeds = config.stream.seeds
    directions = synthesize_trajectory(config, seeds.noise)
    return [
        render_view(
            scene,
            direction,
            config.patch_grid,
            index,
            seeds.noise,
            config.hallucination_level,
        )
        for index, direction in enumerate(directions)
    ]


def _fresh_latent(config: ExperimentConfig, q_count: int, chunk_index: int):
    rng = np.random.default_rng(
        [config.stream.seeds.per_chunk_latent, _LATENT_TAG, chunk_index]
    )
    return rng.standard_normal(q_count)


def _generate(config, scene, bundle_frames, chunk_index, noise_cache=None):
    """Probe the bundle for weights, then integrate the fused flow."""
    settings = ProbeSettings(
        config.kappa_vis, config.kappa_near, config.logit_noise_sigma
    )
    stream = config.stream
    scores = warmup_probe(
        settings,
        bundle_frames,
        stream.seeds.frozen_prior,
        stream.probe_step,
        stream.evidence_mode,
        noise_cache=noise_cache,
    )
    weights = compute_fusion_weights(scores)
    z_init = _fresh_latent(config, scene.q_count, chunk_index)
    return euler_sample(
        z_init,
        bundle_frames,
        weights,
        SamplerConfig(config.sampler_steps, config.epsilon),
    )


def process_chunk(
    state: StreamState, chunk: Sequence[ViewFrame], chunk_index: int
) -> ChunkResult:
    """One evidential iteration: probe, merge, vote, fuse, sample."""
    config = state.config
    stream = config.stream
    start = time.perf_counter()

    candidates = warmup_probe(
        state.settings,
        chunk,
        stream.seeds.frozen_prior,
        stream.probe_step,
        stream.evidence_mode,
        noise_cache=state.noise_cache,
    )
    for frame in chunk:
        state.frame_store[frame.global_index] = frame
    state.memory.update(candidates)
    referenced = set(state.memory.ownership_counts())
    current = {frame.global_index for frame in chunk}
    state.frame_store = {
        idx: frame
        for idx, frame in state.frame_store.items()
        if idx in referenced or idx in current
    }

    bundle = state.memory.select_bundle(stream.bundle_size)
    if not bundle.frame_indices:
        # Nothing cached yet (all-zero evidence): condition on the chunk.
        bundle = ConditioningBundle(tuple(sorted(current)))
    bundle_frames = [state.frame_store[idx] for idx in bundle.frame_indices]
    latent = _generate(
        config, state.scene, bundle_frames, chunk_index, state.noise_cache
    )

    iou, mse = compute_metrics(latent, state.scene)
    scalar_count, _ = state.memory.footprint()
    return ChunkResult(
        chunk_index=chunk_index,
        bundle=bundle,
        latent=latent,
        metrics={"iou": iou, "mse": mse},
        memory_scalar_count=scalar_count,
        wall_time=time.perf_counter() - start,
    )


def run_stream(config: ExperimentConfig, scene: Scene) -> list:
    """Run the configured strategy over the whole stream."""
    if config.stream.strategy is not Strategy.EVIDENTIAL:
        return run_baseline(config, scene)
    frames = stream_frames(config, scene)
    chunks = chunk_stream(frames, config.stream.chunk_size, config.stream.stride)
    state = StreamState(
        config=config,
        scene=scene,
        memory=EvidentialMemory(scene.q_count, config.stream.depth),
        settings=ProbeSettings(
            config.kappa_vis, config.kappa_near, config.logit_noise_sigma
        ),
    )
    return [
        process_chunk(state, chunk, index) for index, chunk in enumerate(chunks)
    ]


def _baseline_bundle(strategy, chunk, seen, config, chunk_index):
    if strategy is Strategy.SINGLE_LAST_VIEW:
        return [chunk[-1]]
    if strategy is Strategy.LAST_CHUNK:
        return list(chunk)
    if strategy is Strategy.RANDOM_K:
        rng = np.random.default_rng(
            [config.stream.seeds.noise, _RANDOM_K_TAG, chunk_index]
        )
        k = min(config.stream.bundle_size, len(seen))
        picks = sorted(rng.choice(len(seen), size=k, replace=False))
        return [seen[i] for i in picks]
    if strategy is Strategy.FULL_HISTORY_ORACLE:
        return list(seen)
    raise ValueError(f"unknown baseline strategy: {strategy!r}")


def run_baseline(config: ExperimentConfig, scene: Scene) -> list:
    """Table-style selection baselines around the same fusion machinery.

    single_last_view conditions on the chunk's last frame, last_chunk on
    the whole current chunk, random_k on K seeded picks from every frame
    seen so far, and full_history_oracle on all frames seen so far (its
    state grows with the stream; it upper-bounds coverage).
    """
    strategy = config.stream.strategy
    if strategy is Strategy.EVIDENTIAL:
        raise ValueError("run_baseline expects a non-evidential strategy")
    frames = stream_frames(config, scene)
    chunks = chunk_stream(frames, config.stream.chunk_size, config.stream.stride)
    results = []
    noise_cache = {}
    for index, chunk in enumerate(chunks):
        start = time.perf_counter()
        seen = frames[: chunk[-1].global_index + 1]
        selected = _baseline_bundle(strategy, chunk, seen, config, index)
        latent = _generate(config, scene, selected, index, noise_cache)
        iou, mse = compute_metrics(latent, scene)
        if strategy in (Strategy.RANDOM_K, Strategy.FULL_HISTORY_ORACLE):
            state_size = len(seen)
        else:
            state_size = 0
        results.append(
            ChunkResult(
                chunk_index=index,
                bundle=ConditioningBundle(
                    tuple(f.global_index for f in selected)
                ),
                latent=latent,
                metrics={"iou": iou, "mse": mse},
                memory_scalar_count=state_size,
                wall_time=time.perf_counter() - start,
            )
        )
    return results
