import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdma_kit.layout import (
    LayoutError, SpatialMask, TokenLayout, build_layout, load_layout, object_video_tokens,
    save_layout, video_coordinate, video_token_index,
)


def test_build_layout_example():
    lay = build_layout(6, 2, 2, 1, 2, 2, [(1, 2), (4, 5)])
    assert lay.total == 14
    assert lay.motion_spans == ((0, 2), (2, 4))


def test_build_layout_small():
    assert build_layout(3, 1, 1, 2, 1, 1, [(0, 1)]).total == 6


@pytest.mark.parametrize("args, match", [
    ((6, 2, 2, 1, 2, 2, [(1, 3), (2, 4)]), "overlap"),
    ((6, 2, 2, 1, 2, 2, [(1, 2)]), "expected 2"),
    ((6, 2, 1, 1, 2, 2, [(5, 7)]), "out of range"),
    ((6, 2, 1, 1, 2, 2, [(3, 3)]), "out of range"),
    ((0, 2, 1, 1, 2, 2, [(0, 1)]), "n_text"),
    ((6, 2, 0, 1, 2, 2, []), "K must"),
])
def test_build_layout_errors(args, match):
    with pytest.raises(LayoutError, match=match):
        build_layout(*args)


@pytest.mark.parametrize("layout_args, coord, expected", [
    ((6, 2, 2, 1, 2, 2, [(1, 2), (4, 5)]), (0, 0, 0), 10),
    ((6, 2, 2, 1, 2, 2, [(1, 2), (4, 5)]), (0, 1, 1), 13),
    ((3, 1, 1, 2, 1, 1, [(0, 1)]), (1, 0, 0), 5),
])
def test_video_token_index(layout_args, coord, expected):
    assert video_token_index(build_layout(*layout_args), *coord) == expected


def test_video_token_index_out_of_range():
    lay = build_layout(3, 1, 1, 2, 1, 1, [(0, 1)])
    with pytest.raises(IndexError):
        video_token_index(lay, 2, 0, 0)


def test_object_video_tokens_examples():
    lay = build_layout(6, 2, 2, 1, 2, 2, [(1, 2), (4, 5)])
    left = np.array([[1, 0], [1, 0]])
    assert object_video_tokens(lay, [SpatialMask(0, left)]) == {10, 12}
    assert object_video_tokens(lay, [np.ones((2, 2))]) == set(range(10, 14))
    assert object_video_tokens(lay, [np.zeros((2, 2))]) == set()
    with pytest.raises(LayoutError):
        object_video_tokens(lay, [left, left])


def test_spatial_mask_rejects_non_binary():
    with pytest.raises(LayoutError):
        SpatialMask(0, np.array([[0, 2]]))


def test_layout_json_round_trip(tmp_path):
    lay = build_layout(6, 2, 2, 3, 2, 4, [(1, 2), (4, 6)])
    save_layout(tmp_path / "layout.json", lay)
    assert load_layout(tmp_path / "layout.json") == lay
    doc = lay.to_dict()
    doc["motion_spans"] = [[0, 1], [1, 4]]
    with pytest.raises(LayoutError):
        TokenLayout.from_dict(doc)


@st.composite
def layouts(draw):
    n_text = draw(st.integers(1, 10))
    K = draw(st.integers(1, min(3, (n_text + 1) // 2)))
    cuts = sorted(draw(st.lists(st.integers(0, n_text), min_size=2 * K, max_size=2 * K,
                                unique=True)))
    spans = [(cuts[2 * k], cuts[2 * k + 1]) for k in range(K)]
    return build_layout(n_text, draw(st.integers(1, 3)), K, draw(st.integers(1, 3)),
                        draw(st.integers(1, 3)), draw(st.integers(1, 3)), spans)


@settings(max_examples=50, deadline=None)
@given(layouts())
def test_segments_partition_and_bijection(lay):
    counts = {"text": 0, "motion": 0, "video": 0}
    for i in range(lay.total):
        flags = [lay.is_text(i), lay.is_motion(i), lay.is_video(i)]
        assert sum(flags) == 1
        counts[lay.segment(i)] += 1
    assert counts == {"text": lay.n_text, "motion": lay.n_motion, "video": lay.n_video}
    seen = set()
    for l in range(lay.frames):
        for r in range(lay.grid_h):
            for c in range(lay.grid_w):
                idx = video_token_index(lay, l, r, c)
                assert video_coordinate(lay, idx) == (l, r, c)
                seen.add(idx)
    assert seen == set(range(lay.video_offset, lay.total))
    covered = [i for a, b in lay.motion_spans for i in range(a, b)]
    assert covered == list(range(lay.n_motion))


def test_disjoint_objects_give_disjoint_token_sets():
    lay = build_layout(4, 1, 2, 2, 3, 3, [(0, 1), (2, 3)])
    rng = np.random.default_rng(0)
    a = rng.random((2, 3, 3)) > 0.5
    b = ~a
    ta, tb = object_video_tokens(lay, a), object_video_tokens(lay, b)
    assert ta.isdisjoint(tb)
    assert ta | tb == set(range(lay.video_offset, lay.total))
