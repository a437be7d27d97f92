"""Reference masked multi-head attention over the concatenated token sequence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masks import AttentionMask

MASK_MODES = ("neg_inf", "mul_logits", "mul_probs")


@dataclass(frozen=True)
class ProjectedTokens:
    """Query/key/value tensors, each shaped (n_heads, n_tokens, head_dim)."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(x, dtype=np.float64) for x in (self.q, self.k, self.v)]
        if any(a.ndim != 3 for a in arrays):
            raise ValueError("q, k, v must be 3-d (heads, tokens, head_dim)")
        if not (arrays[0].shape == arrays[1].shape == arrays[2].shape):
            raise ValueError(
                f"q/k/v shape mismatch: {[a.shape for a in arrays]}"
            )
        if not all(np.isfinite(a).all() for a in arrays):
            raise ValueError("q/k/v must be finite")
        for name, a in zip("qkv", arrays):
            object.__setattr__(self, name, a)

    @property
    def n_heads(self) -> int:
        return self.q.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.q.shape[1]

    @property
    def head_dim(self) -> int:
        return self.q.shape[2]

    def stacked(self) -> np.ndarray:
        """(3, heads, tokens, head_dim) array, the on-disk layout."""
        return np.stack([self.q, self.k, self.v])

    @classmethod
    def from_stacked(cls, arr) -> "ProjectedTokens":
        arr = np.asarray(arr)
        if arr.ndim != 4 or arr.shape[0] != 3:
            raise ValueError(f"expected (3, heads, tokens, head_dim), got {arr.shape}")
        return cls(arr[0], arr[1], arr[2])

    def replace_rows(self, rows, k_rows, v_rows) -> "ProjectedTokens":
        k = self.k.copy()
        v = self.v.copy()
        k[:, rows] = k_rows
        v[:, rows] = v_rows
        return ProjectedTokens(self.q, k, v)


def random_tokens(rng: np.random.Generator, n_tokens: int, n_heads: int = 4,
                  head_dim: int = 8) -> ProjectedTokens:
    shape = (n_heads, n_tokens, head_dim)
    return ProjectedTokens(rng.standard_normal(shape), rng.standard_normal(shape),
                           rng.standard_normal(shape))


def attention_scores(tokens: ProjectedTokens, rows=None) -> np.ndarray:
    """Scaled dot-product logits, (heads, rows, tokens)."""
    q = tokens.q if rows is None else tokens.q[:, rows]
    return np.matmul(q, tokens.k.transpose(0, 2, 1)) / np.sqrt(tokens.head_dim)


def _dense(mask) -> np.ndarray:
    if isinstance(mask, AttentionMask):
        return mask.dense()
    m = np.asarray(mask)
    if m.dtype != bool:
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("attention mask entries must be 0 or 1")
        m = m.astype(bool)
    return m


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def apply_mask(scores: np.ndarray, mask, mode: str = "neg_inf", rows=None) -> np.ndarray:
    """Turn logits into attention probabilities under ``mask``.

    ``mode`` selects where the binary mask enters:

    ``mul_logits``
        ``softmax(scores * M)``. A masked logit becomes 0, not -inf, so it
        still receives weight ``exp(0) / Z``.
    ``neg_inf``
        ``softmax(scores + log M)``. Rows with no permitted entry give zeros.
    ``mul_probs``
        ``softmax(scores) * M`` renormalized per row; empty rows give zeros.

    ``rows`` restricts the mask to the query rows ``scores`` was computed for.
    """
    if mode not in MASK_MODES:
        raise ValueError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")
    m = _dense(mask)
    if rows is not None:
        m = m[rows]
    if m.shape != scores.shape[-2:]:
        raise ValueError(f"mask shape {m.shape} does not match scores {scores.shape[-2:]}")

    if mode == "mul_logits":
        return _softmax(scores * m)

    if mode == "neg_inf":
        logits = np.where(m, scores, -np.inf)
        row_max = logits.max(axis=-1, keepdims=True)
        empty = ~m.any(axis=-1, keepdims=True)
        row_max = np.where(empty, 0.0, row_max)
        e = np.exp(logits - row_max)
        z = e.sum(axis=-1, keepdims=True)
        return np.where(empty, 0.0, e / np.where(empty, 1.0, z))

    p = _softmax(scores) * m
    z = p.sum(axis=-1, keepdims=True)
    empty = z == 0
    return np.where(empty, 0.0, p / np.where(empty, 1.0, z))


def masked_attention(tokens: ProjectedTokens, mask, mode: str = "neg_inf",
                     rows=None) -> np.ndarray:
    """Attention outputs (heads, rows, head_dim); all rows unless ``rows`` given."""
    m = _dense(mask)
    if m.shape != (tokens.n_tokens, tokens.n_tokens):
        raise ValueError(
            f"mask shape {m.shape} does not match {tokens.n_tokens} tokens"
        )
    probs = apply_mask(attention_scores(tokens, rows), m, mode, rows=rows)
    return np.matmul(probs, tokens.v)
