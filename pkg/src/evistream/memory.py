"""Constant-size cross-chunk evidence cache with frame ownership voting.

Per query token the cache keeps the D highest evidence scores seen so far
together with the global frame indices that produced them.  Total state is
always 2*Q*D scalars no matter how many frames stream past, and every
cached score can only rise as the stream progresses.
"""

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evidence import EvidenceVector

SENTINEL_FRAME = -1


@dataclass(frozen=True)
class ConditioningBundle:
    """Frames elected by token ownership votes, strongest vote first."""

    frame_indices: tuple
    ownership: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frame_indices)


class EvidentialMemory:
    """Per-token top-D evidence scores and the frames that earned them.

    State is a float32 score matrix and an int32 frame-index matrix, both
    Q x D.  Rows stay sorted by descending score; among equal scores the
    newer (larger) frame index ranks first.  A frame occupies at most one
    slot per row (re-presenting a frame keeps its maximum score), and zero
    scores carry no evidence, so they never occupy a slot: a slot scores 0
    exactly when it is the empty sentinel.
    """

    def __init__(self, q_count: int, depth: int):
        if q_count < 1:
            raise ValueError("q_count must be >= 1")
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.q_count = int(q_count)
        self.depth = int(depth)
        self._scores = np.zeros((self.q_count, self.depth), dtype=np.float32)
        self._frames = np.full(
            (self.q_count, self.depth), SENTINEL_FRAME, dtype=np.int32
        )

    @property
    def scores(self) -> np.ndarray:
        return self._scores.copy()

    @property
    def frames(self) -> np.ndarray:
        return self._frames.copy()

    def update(self, candidates: Sequence[EvidenceVector]) -> set:
        """Row-wise top-D merge of new per-frame candidate scores.

        Returns the set of candidate frame indices holding at least one
        slot after the merge; frames outside it never entered any row and
        can be discarded by the caller.
        """
        if not candidates:
            return set()
        frames = [int(c.frame_index) for c in candidates]
        if len(set(frames)) != len(frames):
            raise ValueError("candidate frame indices must be distinct")
        if any(c.scores.shape != (self.q_count,) for c in candidates):
            raise ValueError(
                f"every candidate must carry {self.q_count} token scores"
            )
        n = len(candidates)
        cand_scores = np.stack(
            [c.scores for c in candidates], axis=1
        ).astype(np.float32)
        cand_frames = np.broadcast_to(
            np.asarray(frames, dtype=np.int32), (self.q_count, n)
        ).copy()
        dead = cand_scores <= 0.0
        cand_scores[dead] = 0.0
        cand_frames[dead] = SENTINEL_FRAME

        # Per-frame dedup against the current rows, keeping the max score.
        match = (self._frames[:, :, None] == cand_frames[:, None, :]) & (
            cand_frames[:, None, :] != SENTINEL_FRAME
        )
        if match.any():
            merged = np.where(
                match, cand_scores[:, None, :], -np.inf
            ).max(axis=2)
            self._scores = np.maximum(
                self._scores, merged.astype(np.float32)
            )
            dup = match.any(axis=1)
            cand_scores[dup] = 0.0
            cand_frames[dup] = SENTINEL_FRAME

        all_scores = np.concatenate([self._scores, cand_scores], axis=1)
        all_frames = np.concatenate([self._frames, cand_frames], axis=1)
        # Stable two-pass row sort: score descending, then frame descending.
        order = np.argsort(-all_frames, axis=1, kind="stable")
        all_scores = np.take_along_axis(all_scores, order, axis=1)
        all_frames = np.take_along_axis(all_frames, order, axis=1)
        order = np.argsort(-all_scores, axis=1, kind="stable")
        all_scores = np.take_along_axis(all_scores, order, axis=1)
        all_frames = np.take_along_axis(all_frames, order, axis=1)
        all_scores = all_scores[:, : self.depth]
        all_frames = all_frames[:, : self.depth]
        empty = all_scores <= 0.0
        all_scores[empty] = 0.0
        all_frames[empty] = SENTINEL_FRAME
        self._scores = np.ascontiguousarray(all_scores)
        self._frames = np.ascontiguousarray(all_frames)
        kept = np.isin(np.asarray(frames, dtype=np.int32), self._frames)
        return {f for f, k in zip(frames, kept) if k}

    def ownership_counts(self) -> dict:
        """Number of (token, rank) slots each frame occupies."""
        live = self._frames[self._frames != SENTINEL_FRAME]
        values, counts = np.unique(live, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def select_bundle(self, k: int) -> ConditioningBundle:
        """Top-k frames by ownership count; ties prefer the newer frame."""
        if k < 1:
            raise ValueError("k must be >= 1")
        counts = self.ownership_counts()
        ranked = sorted(counts, key=lambda f: (-counts[f], -f))[:k]
        return ConditioningBundle(
            tuple(ranked), {f: counts[f] for f in ranked}
        )

    def footprint(self) -> tuple:
        """(scalar_count, byte_count) of the cross-chunk state.

        scalar_count is always 2*Q*D.  byte_count reflects the stored
        widths (float32 scores, int32 frames: 4 bytes per scalar).
        """
        scalar_count = 2 * self.q_count * self.depth
        return scalar_count, self._scores.nbytes + self._frames.nbytes

    def snapshot(self) -> dict:
        """Flat row-major snapshot for fixtures and debugging."""
        return {
            "q_count": self.q_count,
            "depth": self.depth,
            "scores": [float(s) for s in self._scores.ravel()],
            "frames": [int(f) for f in self._frames.ravel()],
        }

    @classmethod
    def from_snapshot(cls, data: dict) -> "EvidentialMemory":
        mem = cls(data["q_count"], data["depth"])
        shape = (mem.q_count, mem.depth)
        mem._scores = np.asarray(data["scores"], dtype=np.float32).reshape(shape)
        mem._frames = np.asarray(data["frames"], dtype=np.int32).reshape(shape)
        return mem

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvidentialMemory":
        return cls.from_snapshot(json.loads(text))


def new_memory(q_count: int, depth: int) -> EvidentialMemory:
    """Fresh all-sentinel memory; alias kept for symmetry with callers."""
    return EvidentialMemory(q_count, depth)
