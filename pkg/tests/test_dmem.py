import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdma_kit.attention import ProjectedTokens, random_tokens
from mdma_kit.dmem import TextQuerySelection, extract_training_mask
from mdma_kit.harness.fixtures import dmem_fixture
from mdma_kit.layout import build_layout
from mdma_kit.tensor_io import seeded_rng
from oracles import naive_training_mask


def _grid(masks):
    return np.stack([m.grid for m in masks])


def test_constant_scores_give_empty_mask():
    lay = build_layout(3, 1, 1, 2, 3, 3, [(0, 2)])
    tok = random_tokens(seeded_rng(0), lay.total, n_heads=2, head_dim=4)
    k = tok.k.copy()
    k[:, lay.video_offset:] = k[:, lay.video_offset][:, None]
    masks = extract_training_mask(ProjectedTokens(tok.q, k, tok.v),
                                  TextQuerySelection(0, (0, 1)), lay)
    assert not _grid(masks).any()


def test_single_hot_token():
    lay = build_layout(1, 1, 1, 1, 2, 2, [(0, 1)])
    q = np.zeros((1, lay.total, 1))
    k = np.zeros((1, lay.total, 1))
    q[0, 0, 0] = 10.0
    k[0, lay.video_offset + 2, 0] = 1.0
    masks = extract_training_mask(ProjectedTokens(q, k, k), TextQuerySelection(0, (0,)), lay)
    assert _grid(masks).astype(int).tolist() == [[[0, 0], [1, 0]]]


def test_seed42_golden(goldens):
    lay, tok, sel = dmem_fixture(42)
    got = _grid(extract_training_mask(tok, sel, lay)).reshape(-1).astype(int).tolist()
    assert got == goldens["dmem_seed42"]
    masks = extract_training_mask(tok, sel, lay)
    assert [m.frame for m in masks] == [0, 1]
    assert masks[0].grid.shape == (4, 4)


def test_errors():
    lay, tok, _ = dmem_fixture()
    with pytest.raises(ValueError, match="empty"):
        extract_training_mask(tok, TextQuerySelection(0, ()), lay)
    with pytest.raises(ValueError, match="not a text token"):
        extract_training_mask(tok, TextQuerySelection(0, (lay.n_text,)), lay)
    other = build_layout(5, 1, 1, 2, 3, 3, [(1, 3)])
    with pytest.raises(ValueError, match="layout"):
        extract_training_mask(tok, TextQuerySelection(0, (1,)), other)


def _random_case(seed):
    rng = seeded_rng(seed)
    n_text = int(rng.integers(1, 6))
    L, H, W = (int(x) for x in rng.integers(1, 4, size=3))
    lay = build_layout(n_text, 1, 1, L, H, W, [(0, 1)])
    tok = random_tokens(rng, lay.total, n_heads=int(rng.integers(1, 4)),
                        head_dim=int(rng.integers(1, 5)))
    count = int(rng.integers(1, n_text + 1))
    sel = TextQuerySelection(0, tuple(sorted(rng.choice(n_text, count, replace=False).tolist())))
    return lay, tok, sel


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_matches_oracle(seed):
    lay, tok, sel = _random_case(seed)
    got = _grid(extract_training_mask(tok, sel, lay)).reshape(-1).astype(int).tolist()
    assert got == naive_training_mask(tok.q, tok.k, list(sel.text_token_indices),
                                      lay.video_offset)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.5, 3.0, 1000.0, 1e-3]))
def test_positive_scaling_invariance(seed, factor):
    lay, tok, sel = _random_case(seed)
    q = tok.q.copy()
    q[:, :lay.n_text] *= factor
    a = _grid(extract_training_mask(tok, sel, lay))
    b = _grid(extract_training_mask(ProjectedTokens(q, tok.k, tok.v), sel, lay))
    assert np.array_equal(a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_never_full_support(seed):
    lay, tok, sel = _random_case(seed)
    assert not _grid(extract_training_mask(tok, sel, lay)).all()
