"""Experiment harness: camera orbits, voxel metrics, and result files."""

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .generator import Latent, Scene

_JITTER_TAG = 21

CSV_COLUMNS = ("chunk_index", "iou", "mse", "bundle_size", "memory_scalars", "wall_ms")


@dataclass(frozen=True)
class MetricsRow:
    """Per-chunk metric record; one row per chunk, in chunk order."""

    chunk_index: int
    iou: float
    mse: float
    bundle_size: int
    memory_scalars: int
    wall_ms: float

    def values(self) -> tuple:
        return (
            self.chunk_index,
            self.iou,
            self.mse,
            self.bundle_size,
            self.memory_scalars,
            self.wall_ms,
        )


def synthesize_trajectory(config: ExperimentConfig, seed: int) -> list:
    """Camera directions for a full orbit with seeded angular jitter.

    Azimuth sweeps 0 -> 360 degrees across the stream at the configured
    elevation; each frame's azimuth and elevation get independent
    N(0, jitter_sigma^2) offsets.  The camera sits on the orbit looking at
    the grid center, so the returned unit direction points inward.
    """
    t = config.stream.stream_length
    rng = np.random.default_rng([seed, _JITTER_TAG])
    jitter = rng.normal(0.0, config.jitter_sigma_deg, size=(t, 2))
    directions = []
    for i in range(t):
        az = np.radians(360.0 * i / t + jitter[i, 0])
        el = np.radians(config.elevation_deg + jitter[i, 1])
        outward = np.array(
            [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)]
        )
        directions.append(-outward / np.linalg.norm(outward))
    return directions


def compute_metrics(latent: Latent, scene: Scene) -> tuple:
    """(iou, mse) of a latent against the scene's ground truth.

    IoU thresholds the latent at 0.5; an empty union counts as 1.
    """
    latent = np.asarray(latent, dtype=np.float64)
    if latent.shape != scene.ground_truth.shape:
        raise ValueError("latent and scene sizes differ")
    pred = latent >= 0.5
    gt = scene.ground_truth > 0.0
    union = int(np.sum(pred | gt))
    iou = 1.0 if union == 0 else float(np.sum(pred & gt)) / union
    mse = float(np.mean((latent - scene.ground_truth) ** 2))
    return iou, mse


def rows_from_results(results, no_timing: bool = False) -> list:
    """Flatten ChunkResults into MetricsRows; no_timing zeroes wall_ms so
    outputs stay byte-stable across runs."""
    rows = []
    for r in results:
        rows.append(
            MetricsRow(
                chunk_index=r.chunk_index,
                iou=r.metrics["iou"],
                mse=r.metrics["mse"],
                bundle_size=len(r.bundle),
                memory_scalars=r.memory_scalar_count,
                wall_ms=0.0 if no_timing else r.wall_time * 1000.0,
            )
        )
    return rows


def _csv_text(rows: Sequence, lead_columns: Sequence[str] = ()) -> str:
    header = ",".join(tuple(lead_columns) + CSV_COLUMNS)
    lines = [header]
    for lead, row in rows:
        cells = tuple(str(v) for v in tuple(lead) + row.values())
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _json_text(rows: Sequence, config: ExperimentConfig, lead_columns=()) -> str:
    columns = tuple(lead_columns) + CSV_COLUMNS
    payload = {
        "config": config.flat_dict(),
        "rows": [
            dict(zip(columns, tuple(lead) + row.values())) for lead, row in rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _render(rows, config, fmt, lead_columns=()):
    if fmt == "csv":
        return _csv_text(rows, lead_columns)
    if fmt == "json":
        return _json_text(rows, config, lead_columns)
    raise ValueError(f"unsupported format: {fmt!r}")


def _check_order(rows: Sequence[MetricsRow]):
    indices = [r.chunk_index for r in rows]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError("chunk_index must be strictly increasing")


def write_results(
    rows: Sequence[MetricsRow], config: ExperimentConfig, path, fmt: str
) -> None:
    """Write one run's rows; CSV uses the pinned column order and line
    feeds, JSON wraps a config echo plus the same rows."""
    _check_order(rows)
    text = _render([((), r) for r in rows], config, fmt)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_tagged_results(
    tagged_rows: Sequence, config: ExperimentConfig, path, fmt: str,
    lead_columns: Sequence[str],
) -> None:
    """Write a merged table whose rows carry leading tag cells (e.g. a
    strategy name and seed index for `compare`, a seed for multi-seed
    runs)."""
    text = _render(list(tagged_rows), config, fmt, lead_columns)
    with open(path, "w", newline="") as fh:
        fh.write(text)
