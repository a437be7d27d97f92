"""8-bit binary PGM (P5) output for masks and heatmaps."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def to_gray(values, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Min-max scale a 2-d array to uint8; a constant image maps to 0 (or 255 if > 0)."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"can only render 2-d arrays, got shape {a.shape}")
    lo = float(a.min()) if lo is None else lo
    hi = float(a.max()) if hi is None else hi
    if hi <= lo:
        return np.full(a.shape, 255 if lo > 0 else 0, dtype=np.uint8)
    scaled = np.clip((a - lo) / (hi - lo), 0.0, 1.0)
    return np.round(scaled * 255).astype(np.uint8)


def encode_pgm(gray: np.ndarray, scale: int = 1) -> bytes:
    g = np.asarray(gray, dtype=np.uint8)
    if scale > 1:
        g = np.kron(g, np.ones((scale, scale), dtype=np.uint8))
    h, w = g.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + g.tobytes()


def write_pgm(path, gray: np.ndarray, scale: int = 1) -> None:
    data = encode_pgm(gray, scale)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".pgm", dir=path.parent or ".")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5" or len(parts) < 5:
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported")
    pixels = parts[4]
    return np.frombuffer(pixels[: w * h], dtype=np.uint8).reshape(h, w)


def mask_heatmap(mask) -> np.ndarray:
    return np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)


def overlay_frame(tracks: np.ndarray, gt: np.ndarray | None = None) -> np.ndarray:
    """One frame of K object masks as gray levels.

    Object k is drawn at level ``64 + 191 * (k + 1) / K``; ground-truth cells
    that the prediction missed are drawn at 32.
    """
    K = tracks.shape[0]
    img = np.zeros(tracks.shape[1:], dtype=np.uint8)
    if gt is not None:
        img[gt.any(axis=0) & ~tracks.any(axis=0)] = 32
    for k in range(K):
        img[tracks[k]] = 64 + (191 * (k + 1)) // K
    return img
