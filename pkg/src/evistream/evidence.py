"""Per-token evidence scoring from chunk cross-attention maps.

A chunk's attention block is row-stochastic over the concatenated patch
tokens of all views in the chunk.  Each view is scored per query token by
how much attention mass the token allocates to that view and how peaked
(low-entropy) the attention is within the view's own patches.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-9


class EvidenceMode(str, Enum):
    """How per-view evidence is combined from mass and peakedness."""

    EVIDENCE = "evidence"  # mean-centered mass times peakedness
    EVIDENCE_UNNORMALIZED = "evidence_unnormalized"  # raw mass times peakedness
    ENTROPY_ONLY = "entropy_only"  # peakedness alone


@dataclass(frozen=True, eq=False)
class AttentionBlock:
    """Row-stochastic attention of Q query tokens over all chunk views.

    views: per-view ``(global_frame_index, patch_count)`` in column order;
        the views' column slices partition the columns of ``rows``.
    rows: ``(Q, total_patches)`` nonnegative matrix, each row summing to 1.
    """

    views: tuple
    rows: np.ndarray

    def __post_init__(self):
        views = tuple((int(f), int(p)) for f, p in self.views)
        rows = np.asarray(self.rows, dtype=np.float64)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "rows", rows)
        if not views:
            raise ValueError("attention block needs at least one view")
        if any(p < 1 for _, p in views):
            raise ValueError("every view needs at least one patch token")
        if rows.ndim != 2:
            raise ValueError("attention rows must form a 2-d matrix")
        total = sum(p for _, p in views)
        if rows.shape[1] != total:
            raise ValueError(
                f"expected {total} patch columns, got {rows.shape[1]}"
            )
        if np.any(rows < 0.0) or not np.all(np.isfinite(rows)):
            raise ValueError("attention entries must be finite and nonnegative")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("attention rows must each sum to 1")

    @property
    def q_count(self) -> int:
        return self.rows.shape[0]

    @property
    def view_count(self) -> int:
        return len(self.views)

    def column_span(self, view_slot: int) -> tuple:
        """Half-open column range owned by one view."""
        if not 0 <= view_slot < len(self.views):
            raise IndexError(f"view_slot {view_slot} out of range")
        start = sum(p for _, p in self.views[:view_slot])
        return start, start + self.views[view_slot][1]

    def view_slice(self, view_slot: int) -> np.ndarray:
        lo, hi = self.column_span(view_slot)
        return self.rows[:, lo:hi]


@dataclass(frozen=True, eq=False)
class EvidenceVector:
    """Per-token evidence scores credited to one global frame."""

    frame_index: int
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "frame_index", int(self.frame_index))
        object.__setattr__(self, "scores", scores)
        if scores.ndim != 1:
            raise ValueError("evidence scores must form a 1-d vector")
        if not np.all(np.isfinite(scores)):
            raise ValueError("evidence scores must be finite")
        if np.any(scores < 0.0) or np.any(scores > 1.0):
            raise ValueError("evidence scores must lie in [0, 1]")

    @property
    def q_count(self) -> int:
        return self.scores.shape[0]


def row_entropy(block: AttentionBlock, view_slot: int) -> np.ndarray:
    """Normalized entropy of each row of a view's renormalized slice.

    Rows whose slice carries no mass count as maximally uncertain (1.0).
    Perfectly flat slices short-circuit to exact 1.0: the analytic value
    is 1 and leaving an O(eps) rounding residue would break downstream
    exact-zero-evidence checks.  One-hot rows yield 0.0 (0*log 0 := 0).
    """
    lo, hi = block.column_span(view_slot)
    p = hi - lo
    if p < 2:
        raise ValueError("entropy needs at least 2 patch tokens per view")
    sl = block.rows[:, lo:hi]
    sums = sl.sum(axis=1)
    out = np.ones(block.q_count, dtype=np.float64)
    live = sums > 0.0
    if not np.any(live):
        return out
    a = sl[live] / sums[live, None]
    plogp = np.zeros_like(a)
    pos = a > 0.0
    plogp[pos] = a[pos] * np.log(a[pos])
    h = -plogp.sum(axis=1) / np.log(p)
    flat = sl[live].max(axis=1) == sl[live].min(axis=1)
    h[flat] = 1.0
    out[live] = np.clip(h, 0.0, 1.0)
    return out


def view_mass(block: AttentionBlock, view_slot: int) -> np.ndarray:
    """Attention mass each row allocates to one view's patch columns."""
    lo, hi = block.column_span(view_slot)
    return np.clip(block.rows[:, lo:hi].sum(axis=1), 0.0, 1.0)


def _mass_entropy_equal_p(block: AttentionBlock) -> tuple:
    """Vectorized (masses, entropies) when all views share a patch count.

    Bit-identical to the per-view row_entropy/view_mass path: reductions
    run over the same contiguous slices in the same order.
    """
    p = block.views[0][1]
    b = block.view_count
    sliced = block.rows.reshape(block.q_count, b, p)
    sums = sliced.sum(axis=2)
    masses = np.clip(sums, 0.0, 1.0).T
    ents = np.ones((block.q_count, b), dtype=np.float64)
    live = sums > 0.0
    a = sliced[live] / sums[live][:, None]
    plogp = np.zeros_like(a)
    pos = a > 0.0
    plogp[pos] = a[pos] * np.log(a[pos])
    h = -plogp.sum(axis=1) / np.log(p)
    flat = sliced[live].max(axis=1) == sliced[live].min(axis=1)
    h[flat] = 1.0
    ents[live] = np.clip(h, 0.0, 1.0)
    return masses, ents.T


def evidence_scores(
    block: AttentionBlock, mode: EvidenceMode = EvidenceMode.EVIDENCE
) -> list:
    """Score every chunk view per token, clamped to [0, 1].

    Higher means the token attends to that view both strongly (mass) and
    selectively (low entropy within the view slice).  With a single view
    the mean-centering term vanishes and the score reduces to 1 - entropy.
    """
    mode = EvidenceMode(mode)
    patch_counts = {p for _, p in block.views}
    if patch_counts == {block.views[0][1]} and block.views[0][1] >= 2:
        masses, ents = _mass_entropy_equal_p(block)
        peak = 1.0 - ents
    else:
        masses = np.stack(
            [view_mass(block, s) for s in range(block.view_count)]
        )
        peak = 1.0 - np.stack(
            [row_entropy(block, s) for s in range(block.view_count)]
        )
    if mode is EvidenceMode.ENTROPY_ONLY:
        raw = peak
    elif mode is EvidenceMode.EVIDENCE_UNNORMALIZED:
        raw = masses * peak
    else:
        raw = (1.0 + (masses - masses.mean(axis=0))) * peak
    scores = np.clip(raw, 0.0, 1.0)
    return [
        EvidenceVector(frame, scores[slot])
        for slot, (frame, _) in enumerate(block.views)
    ]
