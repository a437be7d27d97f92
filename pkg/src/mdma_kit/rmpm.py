"""Regressive mask propagation and its dynamic early-freeze scheduler.

Each object's first-frame mask is carried forward frame by frame. Frame ``l``
is correlated against the first frame (always kept) plus a sliding window of
recent frames, each masked by its own propagated mask; cells whose summed
correlation is strictly above the mean become the new mask.

With window capacity ``W`` the oldest entry is evicted *before* computing a
frame once the window is full, so a correlation sees the first frame plus at
most ``W - 1`` recent frames (``W = 1`` uses the first frame alone).
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dmem import above_mean
from .layout import SpatialMask


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """Row-wise L2 normalization; all-zero rows stay zero."""
    norms = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def as_features(features) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"features must be (frames, cells, channels), got {f.shape}")
    if f.shape[0] == 0:
        raise ValueError("feature sequence has no frames")
    if not np.isfinite(f).all():
        raise ValueError("features must be finite")
    return f


class AnchorWindow:
    """First-frame anchor plus a bounded FIFO of recent (features, mask) pairs."""

    def __init__(self, capacity: int, first_features: np.ndarray, first_mask: np.ndarray):
        if capacity < 1:
            raise ValueError("window capacity W must be >= 1")
        self.capacity = capacity
        self.grid_shape = first_mask.shape
        self.pinned_first = (first_features, first_mask.reshape(-1).astype(bool))
        self.entries: deque = deque()

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    def evict_oldest(self) -> None:
        self.entries.popleft()

    def append(self, features: np.ndarray, mask: np.ndarray) -> None:
        if self.full:
            raise RuntimeError("anchor window is full; evict before appending")
        self.entries.append((features, mask.reshape(-1).astype(bool)))

    def __len__(self) -> int:
        return 1 + len(self.entries)

    def anchors(self) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated anchor features (A, C) and flat anchor mask (A,)."""
        pairs = [self.pinned_first, *self.entries]
        feats = np.concatenate([f for f, _ in pairs], axis=0)
        masks = np.concatenate([m for _, m in pairs], axis=0)
        return feats, masks


def correlation(frame_features: np.ndarray, window: AnchorWindow) -> np.ndarray:
    """Cosine correlation of frame cells against masked anchor cells."""
    anc_f, anc_m = window.anchors()
    if frame_features.shape[-1] != anc_f.shape[-1]:
        raise ValueError(
            f"channel mismatch: frame has {frame_features.shape[-1]}, "
            f"anchors have {anc_f.shape[-1]}"
        )
    masked = anc_f * anc_m[:, None]
    return l2_normalize(frame_features) @ l2_normalize(masked).T


def propagate_step(corr: np.ndarray, window: AnchorWindow, frame: int = 0) -> SpatialMask:
    _, anc_m = window.anchors()
    if corr.shape[1] != anc_m.shape[0]:
        raise ValueError(f"correlation has {corr.shape[1]} anchor columns, window has {anc_m.shape[0]}")
    scores = corr @ anc_m.astype(np.float64)
    h, w = window.grid_shape
    if scores.shape[0] != h * w:
        raise ValueError(f"correlation has {scores.shape[0]} rows, grid has {h * w} cells")
    return SpatialMask(frame, above_mean(scores).reshape(h, w))


@dataclass(frozen=True)
class MaskTrack:
    object: int
    masks: np.ndarray  # (L, H, W) bool

    def spatial_masks(self) -> list[SpatialMask]:
        return [SpatialMask(l, m) for l, m in enumerate(self.masks)]


def propagate_object(features, first_mask, W: int = 2, object_index: int = 0) -> MaskTrack:
    feats = as_features(features)
    first = first_mask.grid if isinstance(first_mask, SpatialMask) else np.asarray(first_mask)
    first = first.astype(bool)
    if first.ndim != 2 or first.size != feats.shape[1]:
        raise ValueError(
            f"first mask shape {first.shape} does not match {feats.shape[1]} cells"
        )
    window = AnchorWindow(W, feats[0], first)
    out = [first]
    for l in range(1, feats.shape[0]):
        if window.full:
            window.evict_oldest()
        mask = propagate_step(correlation(feats[l], window), window, l).grid
        window.append(feats[l], mask)
        out.append(mask)
    masks = np.stack(out)
    masks.setflags(write=False)
    return MaskTrack(object_index, masks)


def propagate_all(features, first_masks, W: int = 2, jobs: int = 1) -> list[MaskTrack]:
    """Propagate each object independently; ``jobs > 1`` runs objects in threads."""
    feats = as_features(features)
    firsts = list(first_masks)
    if jobs > 1 and len(firsts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(propagate_object, feats, m, W, k)
                       for k, m in enumerate(firsts)]
            return [f.result() for f in futures]
    return [propagate_object(feats, m, W, k) for k, m in enumerate(firsts)]


def tracks_array(tracks) -> np.ndarray:
    """Stack tracks into a bool array (K, L, H, W)."""
    return np.stack([t.masks for t in tracks]) if tracks else np.zeros((0, 0, 0, 0), bool)


def mask_difference(tracks_a, tracks_b) -> float:
    """Fraction of differing cells, averaged over objects and frames."""
    a = tracks_array(tracks_a)
    b = tracks_array(tracks_b)
    if a.shape != b.shape:
        raise ValueError(f"track shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.count_nonzero(a != b) / a.size)


@dataclass(frozen=True)
class DynamicState:
    alpha: float = 0.05
    frozen: bool = False
    last_tracks: tuple | None = None
    propagation_calls: int = 0
    frozen_step: int | None = None
    differences: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be a fraction in [0, 1]")


def dynamic_update(state: DynamicState, step, features, first_masks, W: int = 2,
                   jobs: int = 1) -> tuple[list[MaskTrack], DynamicState]:
    """One denoising step of the early-freeze scheduler.

    Once the step-to-step mask difference drops strictly below ``alpha`` the
    state freezes and later steps return the stored tracks without
    propagating.
    """
    if state.frozen:
        return list(state.last_tracks), state
    tracks = propagate_all(features, first_masks, W, jobs=jobs)
    diffs = state.differences
    frozen = False
    if state.last_tracks is not None:
        diff = mask_difference(tracks, state.last_tracks)
        diffs = diffs + (diff,)
        frozen = diff < state.alpha
    new_state = replace(
        state,
        frozen=frozen,
        last_tracks=tuple(tracks),
        propagation_calls=state.propagation_calls + 1,
        frozen_step=step if frozen else None,
        differences=diffs,
    )
    return tracks, new_state
