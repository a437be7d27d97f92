"""Mask overlap and flow-histogram similarity."""
from __future__ import annotations

import numpy as np

MAGNITUDE_BINS = 32
DIRECTION_BINS = 16
MIN_DIRECTION_MAGNITUDE = 1e-6


def mask_iou(a, b) -> float:
    a = np.asarray(getattr(a, "grid", a), dtype=bool)
    b = np.asarray(getattr(b, "grid", b), dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def histogram_intersection(p: np.ndarray, q: np.ndarray) -> float:
    """Sum of bin-wise minima of two count histograms, each normalized to mass 1.

    Evaluated as sum(min(p_i * |q|, q_i * |p|)) / (|p| * |q|) on integers, so
    identical histograms give exactly 1.0 and the result is symmetric.
    """
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    sp, sq = int(p.sum()), int(q.sum())
    overlap = sum(min(int(a) * sq, int(b) * sp) for a, b in zip(p, q))
    return overlap / (sp * sq)


def _masked_vectors(flow, mask) -> np.ndarray:
    flow = np.asarray(flow, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if flow.shape[-1] != 2 or flow.shape[:-1] != mask.shape:
        raise ValueError(f"flow shape {flow.shape} does not match mask shape {mask.shape}")
    if not np.isfinite(flow).all():
        raise ValueError("flow must be finite")
    if not mask.any():
        raise ValueError("flow fidelity needs a non-empty mask")
    return flow[mask]


def magnitude_similarity(vec_a: np.ndarray, vec_b: np.ndarray, bins: int = MAGNITUDE_BINS) -> float:
    mag_a = np.hypot(vec_a[:, 0], vec_a[:, 1])
    mag_b = np.hypot(vec_b[:, 0], vec_b[:, 1])
    lo = min(mag_a.min(), mag_b.min())
    hi = max(mag_a.max(), mag_b.max())
    if hi <= lo:
        return 1.0
    edges = np.linspace(lo, hi, bins + 1)
    h_a, _ = np.histogram(mag_a, edges)
    h_b, _ = np.histogram(mag_b, edges)
    return histogram_intersection(h_a, h_b)


def direction_histogram(vec: np.ndarray, bins: int = DIRECTION_BINS) -> np.ndarray:
    mag = np.hypot(vec[:, 0], vec[:, 1])
    moving = vec[mag >= MIN_DIRECTION_MAGNITUDE]
    angle = np.arctan2(moving[:, 1], moving[:, 0])
    idx = np.floor((angle + np.pi) / (2 * np.pi) * bins).astype(np.int64) % bins
    return np.bincount(idx, minlength=bins)


def direction_similarity(vec_a: np.ndarray, vec_b: np.ndarray, bins: int = DIRECTION_BINS) -> float:
    h_a = direction_histogram(vec_a, bins)
    h_b = direction_histogram(vec_b, bins)
    empty_a, empty_b = h_a.sum() == 0, h_b.sum() == 0
    if empty_a and empty_b:
        return 1.0
    if empty_a or empty_b:
        return 0.0
    return histogram_intersection(h_a, h_b)


def flow_fidelity(flow_gen, flow_ref, mask_gen, mask_ref) -> float:
    """Flow similarity of two objects, in [0, 1].

    Average of a magnitude term and a direction term, each the histogram
    intersection of the flows sampled inside the respective masks. Magnitudes
    use 32 bins over the pooled range; directions use 16 angular bins and skip
    vectors shorter than 1e-6. Flows are ``(..., 2)`` arrays of ``(dx, dy)``
    with masks shaped like the leading dimensions.
    """
    a = _masked_vectors(flow_gen, mask_gen)
    b = _masked_vectors(flow_ref, mask_ref)
    return 0.5 * (magnitude_similarity(a, b) + direction_similarity(a, b))
