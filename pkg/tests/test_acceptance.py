"""Exit criteria. Each test prints one PASS/FAIL line with its wall time."""
import contextlib
import json
import struct
import time

import numpy as np
import pytest

from mdma_kit.attention import ProjectedTokens, random_tokens
from mdma_kit.cli import main
from mdma_kit.config import RunConfig
from mdma_kit.dmem import TextQuerySelection, extract_training_mask
from mdma_kit.harness.fixtures import leak_fixture, two_column_layout
from mdma_kit.harness.metrics import flow_fidelity
from mdma_kit.harness.probe import leak_probe
from mdma_kit.harness.scenario import generate_scenario
from mdma_kit.harness.simulate import scenario_from_config, simulate
from mdma_kit.layout import build_layout, save_layout
from mdma_kit.masks import assemble
from mdma_kit.rmpm import (
    DynamicState, dynamic_update, propagate_all, propagate_object, tracks_array,
)
from mdma_kit.tensor_io import (
    TensorFormatError, decode_tensor, encode_tensor, read_tensor, seeded_rng, write_tensor,
)
from oracles import naive_propagate, naive_training_mask

pytestmark = pytest.mark.acceptance


@contextlib.contextmanager
def criterion(capsys, number, title, limit=None):
    start = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - start
        ok = limit is None or elapsed < limit
        if not ok:
            raise AssertionError(f"took {elapsed:.2f}s, limit {limit}s")
    finally:
        elapsed = time.perf_counter() - start
        budget = f" (limit {limit}s)" if limit else ""
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
                  f" in {elapsed:.2f}s{budget}")


def _random_layout(rng):
    K = int(rng.integers(1, 5))
    n_text = int(rng.integers(2 * K - 1, 17))
    cuts = np.sort(rng.choice(n_text + 1, size=2 * K, replace=False))
    spans = [(int(cuts[2 * k]), int(cuts[2 * k + 1])) for k in range(K)]
    return build_layout(n_text, int(rng.integers(1, 5)), K, int(rng.integers(1, 5)),
                        int(rng.integers(1, 7)), int(rng.integers(1, 7)), spans)


def test_1_mask_algebra(capsys):
    with criterion(capsys, 1, "mask algebra over 200 random layouts", 5):
        rng = seeded_rng(1)
        for _ in range(200):
            lay = _random_layout(rng)
            masks = rng.random((lay.n_objects, lay.frames, lay.grid_h, lay.grid_w)) < 0.4
            m = assemble(lay, masks)
            assert not m.block("m2m").any()
            for a, b in (("y2m", "m2y"), ("y2v", "v2y"), ("m2v", "v2m")):
                assert np.array_equal(m.block(a), m.block(b).T), (a, b)
            dense = m.dense()
            assert np.array_equal(dense, dense.T)
            # adding a second object's support to every object only opens entries
            grown = masks | np.roll(masks, 1, axis=0)
            assert not (dense & ~assemble(lay, grown).dense()).any()
            # dropping the last object: motion rows cover a subset of the video tokens
            if lay.n_objects > 1:
                fewer = build_layout(lay.n_text, lay.d_m, lay.n_objects - 1, lay.frames,
                                     lay.grid_h, lay.grid_w, lay.text_motion_spans[:-1])
                small = assemble(fewer, masks[:-1]).block("m2v").any(axis=0)
                full = m.block("m2v").any(axis=0)
                assert not (small & ~full).any()
                assert np.array_equal(full, masks.any(axis=0).reshape(-1))


def test_2_disentanglement(capsys):
    with criterion(capsys, 2, "neg_inf leak exactly 0, mul_logits leak > 0", 10):
        lay, masks, tok = leak_fixture(42)
        mask = assemble(lay, masks)
        worst = max(leak_probe(tok, mask, j, trials=50, seed=100 + j, mode="neg_inf")
                    for j in range(lay.n_objects))
        assert worst == 0.0
        gap = max(leak_probe(tok, mask, j, trials=50, seed=100 + j, mode="mul_logits")
                  for j in range(lay.n_objects))
        assert gap > 0.0


def test_3_rmpm_oracle_equivalence(capsys):
    with criterion(capsys, 3, "propagate_object equals naive oracle on 120 instances", 30):
        rng = seeded_rng(3)
        windows = set()
        for _ in range(120):
            L, H, W, C = (int(rng.integers(1, 9)) for _ in range(4))
            window = int(rng.integers(1, 4))
            windows.add(window)
            feats = rng.standard_normal((L, H * W, C))
            first = rng.random((H, W)) < rng.random()
            got = propagate_object(feats, first, window).masks.reshape(L, -1)
            assert got.astype(int).tolist() == naive_propagate(feats, first.reshape(-1), window)
        assert windows == {1, 2, 3}


def test_4_normalization_invariance(capsys):
    with criterion(capsys, 4, "frame scaling by 0.5, 3, 1000 leaves masks bit-identical"):
        rng = seeded_rng(4)
        for _ in range(30):
            feats = rng.standard_normal((6, 36, 6))
            first = rng.random((6, 6)) < 0.4
            base = propagate_object(feats, first, 2).masks
            for frame in range(6):
                for factor in (0.5, 3.0, 1000.0):
                    scaled = feats.copy()
                    scaled[frame] *= factor
                    assert np.array_equal(propagate_object(scaled, first, 2).masks, base)


def test_5_dynamic_efficiency(capsys):
    with criterion(capsys, 5, "dynamic RMPM <= 4 calls with tracks equal to full RMPM", 20):
        scn = generate_scenario(11, K=2, L=8, grid=(16, 16), steps=10, converge_step=3)
        state = DynamicState(alpha=0.05)
        for i, feats in enumerate(scn.features_per_step):
            tracks, state = dynamic_update(state, i + 1, feats, scn.first_masks, 2)
        full = propagate_all(scn.features_per_step[-1], scn.first_masks, 2)
        assert state.propagation_calls <= 4
        assert tracks_array(tracks).tobytes() == tracks_array(full).tobytes()


def _dmem_case(rng):
    n_text = int(rng.integers(1, 8))
    L, H, W = (int(x) for x in rng.integers(1, 5, size=3))
    lay = build_layout(n_text, 1, 1, L, H, W, [(0, 1)])
    tok = random_tokens(rng, lay.total, int(rng.integers(1, 4)), int(rng.integers(1, 6)))
    pick = rng.choice(n_text, int(rng.integers(1, n_text + 1)), replace=False)
    return lay, tok, TextQuerySelection(0, tuple(sorted(int(i) for i in pick)))


def _grid(masks):
    return np.stack([m.grid for m in masks])


def test_6_dmem_correctness(capsys):
    with criterion(capsys, 6, "training mask equals oracle, constant maps empty, scale-free", 5):
        rng = seeded_rng(6)
        for _ in range(100):
            lay, tok, sel = _dmem_case(rng)
            got = _grid(extract_training_mask(tok, sel, lay))
            expected = naive_training_mask(tok.q, tok.k, list(sel.text_token_indices),
                                           lay.video_offset)
            assert got.reshape(-1).astype(int).tolist() == expected
            q = tok.q.copy()
            q[:, :lay.n_text] *= float(rng.choice([0.5, 3.0, 1000.0]))
            scaled = _grid(extract_training_mask(ProjectedTokens(q, tok.k, tok.v), sel, lay))
            assert np.array_equal(scaled, got)
            k = tok.k.copy()
            k[:, lay.video_offset:] = k[:, lay.video_offset][:, None]
            flat = extract_training_mask(ProjectedTokens(tok.q, k, tok.v), sel, lay)
            assert not _grid(flat).any()


def test_7_flow_fidelity(capsys):
    with criterion(capsys, 7, "FF self = 1, bounded on 1000 pairs, reversal = 0.5", 5):
        rng = seeded_rng(7)
        for _ in range(1000):
            shape = (int(rng.integers(1, 6)), int(rng.integers(1, 6)))
            a = rng.standard_normal(shape + (2,)) * rng.uniform(0.01, 10)
            b = rng.standard_normal(shape + (2,)) * rng.uniform(0.01, 10)
            ma = rng.random(shape) < 0.6
            mb = rng.random(shape) < 0.6
            ma.flat[0] = mb.flat[0] = True
            assert 0.0 <= flow_fidelity(a, b, ma, mb) <= 1.0
            assert flow_fidelity(a, a, ma, ma) == 1.0
        v = rng.standard_normal(2)
        field = np.broadcast_to(v, (5, 5, 2))
        full = np.ones((5, 5), dtype=bool)
        assert flow_fidelity(field, -field, full, full) == 0.5


def test_8_end_to_end_tracking(capsys, fixtures_dir):
    with criterion(capsys, 8, "seed-11 scene tracked with per-frame IoU >= 0.7 at W=2", 60):
        cfg = RunConfig(seed=11, objects=2, frames=8, grid_h=16, grid_w=16, window=2)
        report = simulate(scenario_from_config(cfg), cfg)
        ious = np.array(report["final_iou"])
        assert ious.shape == (2, 8)
        assert ious.min() >= 0.7
        committed = json.loads((fixtures_dir / "simulate_seed11.json").read_text())
        assert report["final_iou"] == committed["final_iou"]


def _tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _all_subcommands(work, capsys):
    """Run every subcommand into ``work``; returns files plus captured stdout."""
    lay, masks = two_column_layout()
    save_layout(work / "layout.json", lay)
    write_tensor(work / "masks.tns", masks.astype(np.float32))
    tok = random_tokens(seeded_rng(9), lay.total, 2, 4)
    write_tensor(work / "qkv.tns", tok.stacked().astype(np.float32))
    feats = seeded_rng(10).standard_normal((lay.frames, lay.cells, 4))
    write_tensor(work / "feats.tns", feats.astype(np.float32))
    write_tensor(work / "first.tns", masks[:, 0].astype(np.float32))
    (work / "sched.json").write_text(json.dumps(["feats.tns", "feats.tns", "feats.tns"]))
    w = str(work)
    runs = [
        ["version"],
        ["build-mask", "--layout", f"{w}/layout.json", "--masks", f"{w}/masks.tns",
         "--out", f"{w}/mask.tns", "--render", f"{w}/mask.pgm"],
        ["attend", "--tokens", f"{w}/qkv.tns", "--mask", f"{w}/mask.tns", "--out", f"{w}/out.tns"],
        ["extract-train-mask", "--tokens", f"{w}/qkv.tns", "--select", "1,4", "--layout",
         f"{w}/layout.json", "--out", f"{w}/train.tns"],
        ["propagate", "--features", f"{w}/feats.tns", "--first-masks", f"{w}/first.tns",
         "--out", f"{w}/tracks.tns"],
        ["propagate", "--dynamic", "--schedule", f"{w}/sched.json", "--first-masks",
         f"{w}/first.tns", "--out", f"{w}/dyn.tns", "--report", f"{w}/dyn.json"],
        ["metrics", "--pred", f"{w}/tracks.tns", "--gt", f"{w}/masks.tns"],
        ["render", "--tensor", f"{w}/tracks.tns", "--index", "0,0", "--out", f"{w}/t.pgm"],
        ["simulate", "--seed", "11", "--frames", "4", "--grid", "12x12", "--steps", "4",
         "--report", f"{w}/report.json", "--render-dir", f"{w}/frames",
         "--export-dir", f"{w}/export"],
    ]
    stdout = []
    for argv in runs:
        assert main(argv) == 0, argv
        stdout.append(capsys.readouterr().out)
    return _tree_bytes(work), stdout


def test_9_determinism_and_format(capsys, tmp_path):
    with criterion(capsys, 9, "byte-identical reruns, exact round-trip, malformed rejected"):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir()
        b.mkdir()
        files_a, out_a = _all_subcommands(a, capsys)
        files_b, out_b = _all_subcommands(b, capsys)
        assert out_a == out_b
        assert files_a.keys() == files_b.keys()
        for name in files_a:
            assert files_a[name] == files_b[name], name

        rng = seeded_rng(99)
        for _ in range(50):
            shape = tuple(int(d) for d in rng.integers(1, 5, size=int(rng.integers(1, 6))))
            arr = rng.standard_normal(shape).astype(np.float32)
            blob = encode_tensor(arr)
            assert encode_tensor(decode_tensor(blob)) == blob
            write_tensor(tmp_path / "rt.tns", arr)
            assert (tmp_path / "rt.tns").read_bytes() == blob
            assert np.array_equal(read_tensor(tmp_path / "rt.tns"), arr)

        good = encode_tensor(np.ones((2, 3), dtype=np.float32))
        cases = {
            "bad magic": b"FMT2" + good[4:],
            "truncated payload": good[:-1],
            "trailing bytes": good + b"\0",
            "dim overflow": b"FMT1" + struct.pack("<I", 6) + good[8:],
        }
        for message, blob in cases.items():
            with pytest.raises(TensorFormatError, match=message):
                decode_tensor(blob)
