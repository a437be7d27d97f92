"""Block-structured attention masks over ``[text | motion | video]`` tokens.

Block names use ``<query><key>`` pairs: ``y`` text, ``m`` motion, ``v`` video.
A 1 entry lets the query token attend to the key token.

Defaults chosen where the formulas are read loosely:

* ``v2v`` is all-ones; ``literal_identity_v2v`` swaps in the identity.
* Text rows outside every motion span are all-ones in ``y2v`` (appearance and
  background text stay coupled to the video); ``literal_t2v`` zeroes them.
* Those same rows are all-zero in ``y2m``.
* For K > 2 the union rules extend over all objects and the text-to-text rule
  applies to every ordered pair of distinct objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layout import LayoutError, SpatialMask, TokenLayout

MAX_DENSE_ENTRIES = 2**24

BLOCK_NAMES = ("y2y", "y2m", "y2v", "m2y", "m2m", "m2v", "v2y", "v2m", "v2v")
TRAINING_PASSTHROUGH = ("y2y", "y2v", "v2y")
MODES = ("training", "inference")


def as_object_masks(layout: TokenLayout, object_masks) -> np.ndarray:
    """Normalize per-object per-frame masks to a bool array (K, L, H, W)."""
    if isinstance(object_masks, np.ndarray):
        arr = object_masks
    else:
        arr = np.asarray([
            [m.grid if isinstance(m, SpatialMask) else m for m in frames]
            for frames in object_masks
        ])
    if arr.ndim != 4 or arr.shape[0] == 0:
        raise LayoutError(f"object masks must have shape (K>=1, L, H, W), got {arr.shape}")
    expected = (layout.n_objects, layout.frames, layout.grid_h, layout.grid_w)
    if arr.shape != expected:
        raise LayoutError(f"object masks shape {arr.shape} != expected {expected}")
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise LayoutError("object mask entries must be 0 or 1")
        arr = arr.astype(bool)
    return arr


def build_m2v(layout: TokenLayout, object_masks) -> np.ndarray:
    masks = as_object_masks(layout, object_masks)
    block = np.zeros((layout.n_motion, layout.n_video), dtype=bool)
    for k, (a, b) in enumerate(layout.motion_spans):
        block[a:b] |= masks[k].reshape(-1)
    return block


def build_m2m(layout: TokenLayout) -> np.ndarray:
    return np.zeros((layout.n_motion, layout.n_motion), dtype=bool)


def build_t2v(layout: TokenLayout, object_masks, literal: bool = False) -> np.ndarray:
    masks = as_object_masks(layout, object_masks)
    fill = not literal
    block = np.full((layout.n_text, layout.n_video), fill, dtype=bool)
    for a, b in layout.text_motion_spans:
        block[a:b] = False
    for k, (a, b) in enumerate(layout.text_motion_spans):
        block[a:b] |= masks[k].reshape(-1)
    return block


def build_t2t(layout: TokenLayout) -> np.ndarray:
    block = np.ones((layout.n_text, layout.n_text), dtype=bool)
    spans = layout.text_motion_spans
    for k1, (a1, b1) in enumerate(spans):
        for k2, (a2, b2) in enumerate(spans):
            if k1 != k2:
                block[a1:b1, a2:b2] = False
    return block


def build_t2m(layout: TokenLayout) -> np.ndarray:
    block = np.zeros((layout.n_text, layout.n_motion), dtype=bool)
    for (ta, tb), (ma, mb) in zip(layout.text_motion_spans, layout.motion_spans):
        block[ta:tb, ma:mb] = True
    return block


@dataclass(frozen=True)
class AttentionMask:
    layout: TokenLayout
    blocks: dict
    mode: str
    object_masks: np.ndarray = field(repr=False)

    def block(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def dense(self) -> np.ndarray:
        """Materialize the full (total x total) bool matrix."""
        n = self.layout.total
        if n * n > MAX_DENSE_ENTRIES:
            raise MemoryError(
                f"dense mask would have {n * n} entries (cap {MAX_DENSE_ENTRIES})"
            )
        b = self.blocks
        return np.block([
            [b["y2y"], b["y2m"], b["y2v"]],
            [b["m2y"], b["m2m"], b["m2v"]],
            [b["v2y"], b["v2m"], b["v2v"]],
        ])

    def object_tokens(self, k: int) -> dict:
        """Global token indices tied to object ``k``, by segment."""
        lay = self.layout
        video = lay.video_offset + np.flatnonzero(self.object_masks[k].reshape(-1))
        return {
            "text": lay.motion_text_indices(k),
            "motion": lay.motion_indices(k),
            "video": video,
        }


def assemble(
    layout: TokenLayout,
    object_masks,
    mode: str = "inference",
    *,
    literal_identity_v2v: bool = False,
    literal_t2v: bool = False,
) -> AttentionMask:
    if mode not in MODES:
        raise ValueError(f"unknown mask mode {mode!r}; expected one of {MODES}")
    masks = as_object_masks(layout, object_masks)
    masks.setflags(write=False)
    y2v = build_t2v(layout, masks, literal=literal_t2v)
    y2m = build_t2m(layout)
    m2v = build_m2v(layout, masks)
    if literal_identity_v2v:
        v2v = np.eye(layout.n_video, dtype=bool)
    else:
        v2v = np.ones((layout.n_video, layout.n_video), dtype=bool)
    blocks = {
        "y2y": build_t2t(layout),
        "y2m": y2m,
        "y2v": y2v,
        "m2y": y2m.T.copy(),
        "m2m": build_m2m(layout),
        "m2v": m2v,
        "v2y": y2v.T.copy(),
        "v2m": m2v.T.copy(),
        "v2v": v2v,
    }
    if mode == "training":
        for name in TRAINING_PASSTHROUGH:
            blocks[name] = np.ones_like(blocks[name])
    for arr in blocks.values():
        arr.setflags(write=False)
    return AttentionMask(layout, blocks, mode, masks)
