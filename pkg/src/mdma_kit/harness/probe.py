"""Measure how much one object's tokens leak into other objects' outputs."""
from __future__ import annotations

import numpy as np

from ..attention import ProjectedTokens, masked_attention
from ..masks import AttentionMask
from ..tensor_io import seeded_rng


def other_object_rows(mask: AttentionMask, j: int) -> np.ndarray:
    rows = [
        idx
        for k in range(mask.layout.n_objects) if k != j
        for idx in mask.object_tokens(k).values()
    ]
    if not rows:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(rows))


def source_rows(mask: AttentionMask, j: int) -> np.ndarray:
    tok = mask.object_tokens(j)
    return np.concatenate([tok["motion"], tok["text"]])


def leak_probe(tokens: ProjectedTokens, mask: AttentionMask, j: int, trials: int = 1,
               seed: int = 0, mode: str = "neg_inf", dense=None) -> float:
    """Max absolute change of other objects' outputs when object ``j``'s
    motion and motion-text keys/values are replaced by random values.

    ``mask`` defines which tokens belong to which object; ``dense``, when
    given, replaces the matrix actually used for attention.
    """
    rows = other_object_rows(mask, j)
    if rows.size == 0:
        return 0.0
    if dense is None:
        dense = mask.dense()
    base = masked_attention(tokens, dense, mode, rows=rows)
    src = source_rows(mask, j)
    rng = seeded_rng(seed)
    worst = 0.0
    shape = (tokens.n_heads, src.size, tokens.head_dim)
    for _ in range(trials):
        perturbed = tokens.replace_rows(src, rng.standard_normal(shape) * 3.0,
                                        rng.standard_normal(shape) * 3.0)
        out = masked_attention(perturbed, dense, mode, rows=rows)
        worst = max(worst, float(np.max(np.abs(out - base))))
    return worst


def leak_max(tokens: ProjectedTokens, mask: AttentionMask, trials: int = 1, seed: int = 0,
             mode: str = "neg_inf") -> float:
    """:func:`leak_probe` maximized over every source object."""
    return max(leak_probe(tokens, mask, j, trials, seed + j, mode)
               for j in range(mask.layout.n_objects))
