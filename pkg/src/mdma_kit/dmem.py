"""Training-stage object mask from text-query / video-key attention."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import ProjectedTokens
from .layout import SpatialMask, TokenLayout


@dataclass(frozen=True)
class TextQuerySelection:
    object: int
    text_token_indices: tuple[int, ...]

    def validate(self, layout: TokenLayout) -> None:
        if len(self.text_token_indices) == 0:
            raise ValueError("text query selection is empty")
        for i in self.text_token_indices:
            if not 0 <= i < layout.n_text:
                raise ValueError(f"selected token {i} is not a text token")


def above_mean(scores: np.ndarray) -> np.ndarray:
    """``scores > mean(scores)`` with the mean clipped into [min, max].

    Clipping only absorbs rounding in the mean; it makes a constant map come
    out all-False as it does in exact arithmetic.
    """
    thr = np.clip(scores.mean(), scores.min(), scores.max())
    return scores > thr


def training_scores(tokens: ProjectedTokens, selection: TextQuerySelection,
                    layout: TokenLayout) -> np.ndarray:
    """Per-video-token score averaged over selected text queries and heads."""
    selection.validate(layout)
    if tokens.n_tokens != layout.total:
        raise ValueError(f"tokens have {tokens.n_tokens} rows, layout needs {layout.total}")
    q = tokens.q[:, list(selection.text_token_indices)]
    kv = tokens.k[:, layout.video_offset:]
    s = np.matmul(q, kv.transpose(0, 2, 1)) / np.sqrt(tokens.head_dim)
    return s.mean(axis=(0, 1))


def extract_training_mask(tokens: ProjectedTokens, selection: TextQuerySelection,
                          layout: TokenLayout) -> list[SpatialMask]:
    s = training_scores(tokens, selection, layout)
    grid = above_mean(s).reshape(layout.frames, layout.grid_h, layout.grid_w)
    return [SpatialMask(l, grid[l]) for l in range(layout.frames)]
