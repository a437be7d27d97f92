"""Small seeded inputs shared by tests and demos."""
from __future__ import annotations

import numpy as np

from ..attention import ProjectedTokens, random_tokens
from ..dmem import TextQuerySelection
from ..layout import TokenLayout, build_layout
from ..tensor_io import seeded_rng


def two_column_layout() -> tuple[TokenLayout, np.ndarray]:
    """6 text, 2x2 motion, one 2x2 frame; object 0 = left column, 1 = right."""
    layout = build_layout(6, 2, 2, 1, 2, 2, [(1, 2), (4, 5)])
    masks = np.zeros((2, 1, 2, 2), dtype=bool)
    masks[0, 0, :, 0] = True
    masks[1, 0, :, 1] = True
    return layout, masks


def score_fixture(seed: int = 42) -> ProjectedTokens:
    """Two heads, 4 tokens, head_dim 2."""
    return random_tokens(seeded_rng(seed), 4, n_heads=2, head_dim=2)


def leak_fixture(seed: int = 42) -> tuple[TokenLayout, np.ndarray, ProjectedTokens]:
    """Two objects over two 4x4 frames with disjoint masks, plus random q/k/v."""
    layout = build_layout(8, 2, 2, 2, 4, 4, [(1, 3), (5, 7)])
    masks = np.zeros((2, 2, 4, 4), dtype=bool)
    masks[0, 0, :, :2] = True
    masks[1, 0, :, 2:] = True
    masks[0, 1, :2, :] = True
    masks[1, 1, 2:, :] = True
    tokens = random_tokens(seeded_rng(seed), layout.total, n_heads=4, head_dim=8)
    return layout, masks, tokens


def dmem_fixture(seed: int = 42) -> tuple[TokenLayout, ProjectedTokens, TextQuerySelection]:
    """One object, two 4x4 frames, text tokens 1 and 2 selected."""
    layout = build_layout(5, 1, 1, 2, 4, 4, [(1, 3)])
    tokens = random_tokens(seeded_rng(seed), layout.total, n_heads=2, head_dim=4)
    return layout, tokens, TextQuerySelection(0, (1, 2))


def rmpm_fixture(seed: int = 7) -> tuple[np.ndarray, np.ndarray, int]:
    """Features (4 frames, 3x3 cells, 4 channels), a first mask and W = 2."""
    rng = seeded_rng(seed)
    features = rng.standard_normal((4, 9, 4))
    first = np.zeros((3, 3), dtype=bool)
    first[0, 0] = first[0, 1] = first[1, 1] = True
    return features, first, 2
