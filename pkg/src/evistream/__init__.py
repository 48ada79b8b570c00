"""Streaming multi-view 3D toy simulator with evidential view selection.

Token-level attention evidence drives a constant-size cross-chunk memory;
ownership votes elect a bounded conditioning bundle whose views are fused
by an evidence-weighted flow-matching sampler.
"""

from .config import (
    ConfigError,
    ExperimentConfig,
    Seeds,
    Strategy,
    StreamConfig,
    parse_config,
)
from .evidence import (
    AttentionBlock,
    EvidenceMode,
    EvidenceVector,
    evidence_scores,
    row_entropy,
    view_mass,
)
from .fusion import (
    FusionWeights,
    SamplerConfig,
    compute_fusion_weights,
    euler_sample,
    fused_velocity,
    warmup_probe,
)
from .generator import (
    GeneratorProbe,
    Latent,
    ProbeSettings,
    Scene,
    ShapeKind,
    ViewFrame,
    probe_attention,
    project_to_patches,
    render_view,
    synthesize_scene,
    view_velocity,
)
from .harness import (
    MetricsRow,
    compute_metrics,
    rows_from_results,
    synthesize_trajectory,
    write_results,
    write_tagged_results,
)
from .memory import (
    SENTINEL_FRAME,
    ConditioningBundle,
    EvidentialMemory,
    new_memory,
)
from .streaming import (
    ChunkResult,
    StreamState,
    chunk_stream,
    process_chunk,
    run_baseline,
    run_stream,
    stream_frames,
)

__version__ = "0.1.0"
