"""Deterministic view-conditioned toy generator.

Provides everything the streaming loop treats as "the frozen model":
procedural occupancy scenes on a cubic voxel grid, posed orthographic
views with z-buffer visibility, geometry-derived cross-attention probes,
and per-view rectified-flow velocities.  Every operation is a pure
function of its inputs and seeds.

Token layout: query token q maps to voxel (i, j, k) with
q = i*G*G + j*G + k; voxel centers sit at (i + 0.5 - G/2, ...) so the
grid is centered on the origin.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .evidence import AttentionBlock

# A latent is a plain length-Q float vector; occupancy-valued once sampling
# finishes.
Latent = np.ndarray

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)

# Substream tags keep unrelated draws from the same seed decoupled.
_SCENE_TAG = 11
_HALLUCINATION_TAG = 12


class ShapeKind(str, Enum):
    SPHERE = "sphere"
    BOX = "box"
    COMPOSITE = "composite"


@dataclass(frozen=True, eq=False)
class Scene:
    """Procedural ground-truth occupancy over a G^3 voxel grid."""

    grid_size: int
    ground_truth: np.ndarray  # (G**3,) of {0.0, 1.0}
    shape_kind: ShapeKind
    seed: int

    @property
    def q_count(self) -> int:
        return self.grid_size**3


@dataclass(frozen=True, eq=False)
class ViewFrame:
    """One posed synthetic observation of a scene.

    visibility marks the occupied voxels this view actually resolves
    (nearest per projected patch cell); target_latent equals the ground
    truth there and a seeded hallucination elsewhere.  patch_index caches
    each voxel's projected patch cell for the attention probe.
    """

    global_index: int
    direction: np.ndarray  # unit 3-vector, camera looks along it
    patch_grid: int
    visibility: np.ndarray  # (Q,) bool
    target_latent: np.ndarray  # (Q,) in [0, 1]
    noise_seed: int
    grid_size: int
    patch_index: np.ndarray  # (Q,) int

    @property
    def q_count(self) -> int:
        return self.visibility.shape[0]

    @property
    def patch_count(self) -> int:
        return self.patch_grid**2


@dataclass(frozen=True)
class ProbeSettings:
    """Logit geometry of the synthetic attention probe."""

    kappa_vis: float = 6.0
    kappa_near: float = 2.0
    logit_noise_sigma: float = 0.25


@dataclass(frozen=True, eq=False)
class GeneratorProbe:
    """Attention extracted by one warmup step at a given probe step."""

    attention: AttentionBlock
    probe_step: int


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over uint64 arrays (wraparound intended)."""
    x = (x + _GAMMA) & _MASK64
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    return x ^ (x >> np.uint64(31))


def _hash_noise(
    seed: int, probe_step: int, q_count: int, column_keys: np.ndarray, sigma: float
) -> np.ndarray:
    base = _splitmix64(
        _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        ^ np.uint64(probe_step & 0xFFFFFFFFFFFFFFFF)
    )
    rows = _splitmix64(base ^ np.arange(q_count, dtype=np.uint64))
    x = _splitmix64(rows[:, None] ^ column_keys.astype(np.uint64))
    u1 = ((x >> np.uint64(32)).astype(np.float64) + 0.5) / 4294967296.0
    u2 = ((x & np.uint64(0xFFFFFFFF)).astype(np.float64) + 0.5) / 4294967296.0
    return sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _gaussian_field(
    seed: int,
    probe_step: int,
    q_count: int,
    column_keys: np.ndarray,
    sigma: float,
    cache: dict = None,
) -> np.ndarray:
    """Counter-based N(0, sigma^2) field, keyed per (seed, step, row, key).

    Row q's substream depends only on (seed, probe_step, q).  Column keys
    identify (view frame, patch) rather than chunk position, so a frame's
    noise is the same wherever it lands in a chunk; without that, chunks
    of equal size would replay identical noise rows and tokens invisible
    everywhere would tie exactly across chunks.

    `cache` memoizes columns per key within one stream run (where seed,
    step, sigma, and q_count are all fixed); columns are hashed
    independently, so cached and fresh values are identical.
    """
    n_cols = column_keys.shape[0]
    if sigma == 0.0:
        return np.zeros((q_count, n_cols))
    with np.errstate(over="ignore"):
        if cache is None:
            return _hash_noise(seed, probe_step, q_count, column_keys, sigma)
        missing = [int(k) for k in column_keys if int(k) not in cache]
        if missing:
            fresh = _hash_noise(
                seed, probe_step, q_count, np.asarray(missing, np.int64), sigma
            )
            for j, key in enumerate(missing):
                cache[key] = fresh[:, j]
        return np.stack([cache[int(k)] for k in column_keys], axis=1)


def _voxel_centers(grid_size: int) -> np.ndarray:
    """(Q, 3) voxel centers relative to the grid center."""
    g = grid_size
    idx = np.indices((g, g, g)).reshape(3, -1).T.astype(np.float64)
    return idx + 0.5 - g / 2.0


def synthesize_scene(shape_kind, grid_size: int, seed: int) -> Scene:
    """Deterministic occupancy: sphere of radius 0.35*G, centered box of
    side G//2, or their union with the box offset drawn from the seed."""
    if grid_size < 4:
        raise ValueError("grid_size must be >= 4")
    kind = ShapeKind(shape_kind)
    g = grid_size
    centers = _voxel_centers(g)
    sphere = np.linalg.norm(centers, axis=1) <= 0.35 * g
    side = g // 2
    lo = (g - side) // 2
    idx = np.indices((g, g, g)).reshape(3, -1).T
    if kind is ShapeKind.SPHERE:
        occupied = sphere
    elif kind is ShapeKind.BOX:
        occupied = ((idx >= lo) & (idx < lo + side)).all(axis=1)
    else:
        rng = np.random.default_rng([seed, _SCENE_TAG])
        shift = rng.integers(-(g // 4), g // 4 + 1, size=3)
        box_lo = np.clip(lo + shift, 0, g - side)
        occupied = sphere | ((idx >= box_lo) & (idx < box_lo + side)).all(axis=1)
    if not occupied.any():
        raise ValueError("degenerate scene: no occupied voxel")
    return Scene(g, occupied.astype(np.float64), kind, int(seed))


def _orthonormal_basis(direction: np.ndarray) -> tuple:
    """Two unit vectors spanning the image plane of `direction`."""
    ref = np.array([0.0, 0.0, 1.0])
    if abs(direction[2]) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    u = np.cross(direction, ref)
    u /= np.linalg.norm(u)
    w = np.cross(direction, u)
    return u, w


def project_to_patches(
    grid_size: int, direction: np.ndarray, patch_grid: int
) -> tuple:
    """Orthographic projection of every voxel center onto a p x p patch
    grid covering the grid footprint (corner overflow clips to edge cells).

    Returns (patch_index, depth), both length Q; depth grows along
    `direction`, so smaller depth means nearer the camera.
    """
    p = patch_grid
    centers = _voxel_centers(grid_size)
    u, w = _orthonormal_basis(direction)
    half = grid_size / 2.0
    cell = 2.0 * half / p
    ia = np.clip((centers @ u + half) // cell, 0, p - 1).astype(np.int64)
    ib = np.clip((centers @ w + half) // cell, 0, p - 1).astype(np.int64)
    return ia * p + ib, centers @ np.asarray(direction, dtype=np.float64)


def render_view(
    scene: Scene,
    direction,
    patch_grid: int,
    global_index: int,
    noise_seed: int,
    hallucination_level: float,
) -> ViewFrame:
    """Posed observation with z-buffer visibility.

    Within each projected patch cell only the occupied voxel nearest the
    camera is visible.  Invisible voxels get a seeded pseudo-random target
    value with mean `hallucination_level` (uniform over an interval inside
    [0, 1]), standing in for single-view hallucination.
    """
    d = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    if not 0.0 <= hallucination_level <= 1.0:
        raise ValueError("hallucination_level must lie in [0, 1]")
    if patch_grid < 2:
        raise ValueError("patch_grid must be >= 2")
    patch_index, depth = project_to_patches(scene.grid_size, d, patch_grid)
    occupied = np.flatnonzero(scene.ground_truth > 0.0)
    # Nearest occupied voxel per patch cell wins; ties by voxel index.
    order = np.lexsort((occupied, depth[occupied]))
    ranked = occupied[order]
    _, first = np.unique(patch_index[ranked], return_index=True)
    visibility = np.zeros(scene.q_count, dtype=bool)
    visibility[ranked[first]] = True

    h = hallucination_level
    lo, hi = (0.0, 2.0 * h) if h <= 0.5 else (2.0 * h - 1.0, 1.0)
    rng = np.random.default_rng(
        [noise_seed, _HALLUCINATION_TAG, global_index]
    )
    target = lo + (hi - lo) * rng.random(scene.q_count)
    target[visibility] = scene.ground_truth[visibility]
    return ViewFrame(
        global_index=int(global_index),
        direction=d,
        patch_grid=int(patch_grid),
        visibility=visibility,
        target_latent=target,
        noise_seed=int(noise_seed),
        grid_size=scene.grid_size,
        patch_index=patch_index,
    )


def probe_attention(
    views: Sequence[ViewFrame],
    settings: ProbeSettings,
    probe_step: int,
    prior_seed: int,
    noise_cache: dict = None,
) -> GeneratorProbe:
    """Single warmup step: synthesize cross-attention from view geometry.

    Per (token, view): if the view resolves the token, the patch holding
    the token's projection gets kappa_vis logits and its 4-neighborhood
    kappa_near; otherwise the view contributes zero logits.  Seeded
    Gaussian noise is added per (prior_seed, probe_step, token), then one
    softmax runs jointly across all views' patches.  Reusing the same
    prior seed across chunks is what keeps scores comparable between them.
    """
    if not views:
        raise ValueError("probe needs at least one view")
    p = views[0].patch_grid
    q_count = views[0].q_count
    if any(v.patch_grid != p or v.q_count != q_count for v in views):
        raise ValueError("views must share patch_grid and grid size")
    pc = p * p
    total = pc * len(views)
    logits = np.zeros((q_count, total))
    for slot, view in enumerate(views):
        off = slot * pc
        rows = np.flatnonzero(view.visibility)
        if rows.size == 0:
            continue
        patch = view.patch_index[rows]
        logits[rows, off + patch] = settings.kappa_vis
        pa, pb = patch // p, patch % p
        for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            na, nb = pa + da, pb + db
            ok = (na >= 0) & (na < p) & (nb >= 0) & (nb < p)
            logits[rows[ok], off + na[ok] * p + nb[ok]] = settings.kappa_near
    column_keys = np.concatenate(
        [np.int64(v.global_index) * pc + np.arange(pc) for v in views]
    )
    logits += _gaussian_field(
        prior_seed,
        probe_step,
        q_count,
        column_keys,
        settings.logit_noise_sigma,
        cache=noise_cache,
    )
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    block = AttentionBlock(
        views=tuple((v.global_index, pc) for v in views), rows=weights
    )
    return GeneratorProbe(attention=block, probe_step=int(probe_step))


def view_velocity(z: Latent, t: float, view: ViewFrame) -> np.ndarray:
    """Rectified-flow velocity pointing from z toward the view's target."""
    if not 0.0 <= t < 1.0:
        raise ValueError("t must lie in [0, 1)")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != view.target_latent.shape:
        raise ValueError("latent and view target sizes differ")
    return (view.target_latent - z) / (1.0 - t)
