"""``mdma`` command line entry point.

Exit status: 0 on success, 2 on usage errors, 1 on validation or runtime
errors. Diagnostics go to stderr; data goes to the files named by flags or to
stdout.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attention import MASK_MODES, ProjectedTokens, masked_attention
from .config import RunConfig, load_config
from .dmem import TextQuerySelection, extract_training_mask
from .harness.metrics import flow_fidelity, mask_iou
from .harness.scenario import MotionSpec
from .harness.simulate import report_json, scenario_from_config, simulate
from .layout import LayoutError, load_layout, save_layout
from .masks import assemble
from .render import mask_heatmap, overlay_frame, to_gray, write_pgm
from .rmpm import DynamicState, dynamic_update, propagate_all, tracks_array
from .tensor_io import TensorFormatError, read_mask, read_tensor, write_tensor

SUBCOMMANDS = ("build-mask", "attend", "extract-train-mask", "propagate", "simulate",
               "metrics", "render", "version")


def _grid(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 16x16, got {text!r}")
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return h, w


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a fraction in [0, 1], got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _env_seed() -> int:
    raw = os.environ.get("MDMA_SEED")
    return int(raw) if raw not in (None, "") else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="run.json",
                        help="JSON file of option defaults; explicit flags win")

    p = sub.add_parser("version", parents=[common], help="print the tool version")

    p = sub.add_parser("build-mask", parents=[common], help="assemble an attention mask")
    p.add_argument("--layout", required=True, help="layout.json")
    p.add_argument("--masks", required=True, help="object masks tensor (K, L, H, W)")
    p.add_argument("--mode", choices=("inference", "training"), default="inference")
    p.add_argument("--out", required=True, help="output mask tensor (N, N)")
    p.add_argument("--render", metavar="out.pgm", help="also write a grayscale heatmap")
    p.add_argument("--literal-identity-v2v", action="store_true",
                   help="identity video-to-video block instead of all-ones")
    p.add_argument("--literal-t2v", action="store_true",
                   help="zero text-to-video rows for text outside every motion span")

    p = sub.add_parser("attend", parents=[common], help="masked multi-head attention")
    p.add_argument("--tokens", required=True, help="stacked q/k/v tensor (3, H, N, d)")
    p.add_argument("--mask", required=True, help="mask tensor (N, N)")
    p.add_argument("--mode", choices=MASK_MODES, default="neg_inf")
    p.add_argument("--out", required=True, help="output tensor (H, N, d)")

    p = sub.add_parser("extract-train-mask", parents=[common],
                       help="training-stage object mask from text/video attention")
    p.add_argument("--tokens", required=True,
                   help="q/k/v tensor; may contain {t} and {layer} placeholders")
    p.add_argument("--select", required=True, help="comma-separated text token indices")
    p.add_argument("--layout", required=True, help="layout.json")
    p.add_argument("--out", required=True, help="output mask tensor (L, H, W)")
    p.add_argument("--object", type=int, default=0, help="object index (default 0)")
    p.add_argument("--layer", type=int, help="value substituted for {layer} in --tokens")
    p.add_argument("--t", type=int, help="value substituted for {t} in --tokens")

    p = sub.add_parser("propagate", parents=[common], help="propagate first-frame masks")
    p.add_argument("--features", help="features tensor (L, cells, C)")
    p.add_argument("--first-masks", required=True, help="first-frame masks (K, H, W)")
    p.add_argument("--window", type=_positive, default=2, help="anchor window W (default 2)")
    p.add_argument("--out", required=True, help="output tracks tensor (K, L, H, W)")
    p.add_argument("--dynamic", action="store_true", help="early-freeze over a step schedule")
    p.add_argument("--alpha", type=_fraction, default=0.05,
                   help="freeze threshold as a fraction (default 0.05)")
    p.add_argument("--schedule", metavar="sched.json",
                   help="JSON list of per-step feature files, highest noise first")
    p.add_argument("--report", help="write a JSON run summary here instead of stdout")
    p.add_argument("--jobs", type=_positive, default=1, help="threads over objects")

    p = sub.add_parser("simulate", parents=[common], help="synthetic end-to-end run")
    p.add_argument("--seed", type=int, default=None, help="scenario seed (default $MDMA_SEED or 0)")
    p.add_argument("--objects", type=_positive, default=2)
    p.add_argument("--frames", type=_positive, default=8)
    p.add_argument("--grid", type=_grid, default=(16, 16), help="HxW latent grid")
    p.add_argument("--steps", type=_positive, default=10)
    p.add_argument("--alpha", type=_fraction, default=0.05)
    p.add_argument("--window", type=_positive, default=2)
    p.add_argument("--mode", choices=MASK_MODES, default="neg_inf")
    p.add_argument("--no-dynamic", dest="dynamic", action="store_false",
                   help="re-propagate at every step")
    p.add_argument("--channels", type=_positive, default=8)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--converge-step", type=int, default=3)
    p.add_argument("--leak-trials", type=_positive, default=1)
    p.add_argument("--heads", type=_positive, default=4)
    p.add_argument("--head-dim", type=_positive, default=8)
    p.add_argument("--literal-identity-v2v", action="store_true")
    p.add_argument("--literal-t2v", action="store_true")
    p.add_argument("--disjoint", action=argparse.BooleanOptionalAction, default=True,
                   help="reject overlapping initial blobs (default on)")
    p.add_argument("--specs", help="JSON list of per-object motion specs")
    p.add_argument("--report", help="report.json (stdout when omitted)")
    p.add_argument("--render-dir", help="directory for per-frame PGM overlays")
    p.add_argument("--export-dir", help="directory for scenario tensors and layout")
    p.add_argument("--jobs", type=_positive, default=1, help="threads over objects")

    p = sub.add_parser("metrics", parents=[common], help="IoU and flow fidelity")
    p.add_argument("--pred", required=True, help="predicted tracks (K, L, H, W)")
    p.add_argument("--gt", required=True, help="reference tracks (K, L, H, W)")
    p.add_argument("--flow-gen", help="flows for --pred (L-1, H, W, 2)")
    p.add_argument("--flow-ref", help="flows for --gt (L-1, H, W, 2)")
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("render", parents=[common], help="render a tensor slice as PGM")
    p.add_argument("--tensor", required=True)
    p.add_argument("--out", required=True, help="out.pgm")
    p.add_argument("--index", default="", help="comma-separated leading indices to reach 2-d")
    p.add_argument("--scale", type=_positive, default=1, help="pixel replication factor")
    return parser


def _config_path(argv: list[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse ``argv`` with defaults taken from ``--config`` when present."""
    path = _config_path(argv)
    command = next((a for a in argv if a in SUBCOMMANDS), None)
    if path and command:
        doc = load_config(path)
        if "grid" not in doc and "grid_h" in doc and "grid_w" in doc:
            doc["grid"] = (doc["grid_h"], doc["grid_w"])
        elif isinstance(doc.get("grid"), str):
            doc["grid"] = _grid(doc["grid"])
        subparser = parser._subparsers._group_actions[0].choices[command]
        values = {k.replace("-", "_"): v for k, v in doc.items()}
        for action in subparser._actions:
            if action.dest in values:
                action.required = False
        subparser.set_defaults(**{k: v for k, v in values.items()
                                  if k in {a.dest for a in subparser._actions}})
    return parser.parse_args(argv)


def _write_json(doc, path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_version(args) -> None:
    print(__version__)


def cmd_build_mask(args) -> None:
    layout = load_layout(args.layout)
    masks = read_mask(args.masks, ndim=4)
    mask = assemble(layout, masks, args.mode, literal_identity_v2v=args.literal_identity_v2v,
                    literal_t2v=args.literal_t2v)
    dense = mask.dense()
    write_tensor(args.out, dense)
    if args.render:
        write_pgm(args.render, mask_heatmap(dense))


def cmd_attend(args) -> None:
    tokens = ProjectedTokens.from_stacked(read_tensor(args.tokens))
    mask = read_mask(args.mask, ndim=2)
    write_tensor(args.out, masked_attention(tokens, mask, args.mode))


def cmd_extract_train_mask(args) -> None:
    path = args.tokens
    if "{t}" in path or "{layer}" in path:
        if ("{t}" in path and args.t is None) or ("{layer}" in path and args.layer is None):
            raise ValueError("--tokens has a {t}/{layer} placeholder without a value")
        path = path.format(t=args.t, layer=args.layer)
    tokens = ProjectedTokens.from_stacked(read_tensor(path))
    layout = load_layout(args.layout)
    try:
        indices = tuple(int(v) for v in args.select.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"--select must be comma-separated integers, got {args.select!r}")
    masks = extract_training_mask(tokens, TextQuerySelection(args.object, indices), layout)
    write_tensor(args.out, np.stack([m.grid for m in masks]))


def _load_schedule(path) -> list[Path]:
    doc = json.loads(Path(path).read_text())
    steps = doc["steps"] if isinstance(doc, dict) else doc
    base = Path(path).parent
    out = []
    for entry in steps:
        name = entry["features"] if isinstance(entry, dict) else entry
        out.append(base / name)
    if not out:
        raise ValueError(f"{path}: schedule lists no steps")
    return out


def cmd_propagate(args) -> None:
    first = read_mask(args.first_masks, ndim=3)
    if args.dynamic:
        if not args.schedule:
            raise ValueError("--dynamic requires --schedule")
        state = DynamicState(alpha=args.alpha)
        tracks = None
        schedule = _load_schedule(args.schedule)
        for i, feat_path in enumerate(schedule):
            if state.frozen:
                continue
            tracks, state = dynamic_update(state, i + 1, read_tensor(feat_path), first,
                                           args.window, jobs=args.jobs)
        summary = {"frozen": state.frozen, "frozen_step": state.frozen_step,
                   "propagation_calls": state.propagation_calls,
                   "mask_differences": list(state.differences),
                   "steps": len(schedule)}
    else:
        if not args.features:
            raise ValueError("--features is required unless --dynamic is given")
        tracks = propagate_all(read_tensor(args.features), first, args.window, jobs=args.jobs)
        summary = {"propagation_calls": 1}
    write_tensor(args.out, tracks_array(tracks))
    _write_json(summary, args.report)


def cmd_simulate(args) -> None:
    seed = args.seed if args.seed is not None else _env_seed()
    config = RunConfig(
        seed=seed, objects=args.objects, frames=args.frames, grid_h=args.grid[0],
        grid_w=args.grid[1], steps=args.steps, window=args.window, alpha=args.alpha,
        mode=args.mode, dynamic=args.dynamic, channels=args.channels, noise=args.noise,
        converge_step=args.converge_step, heads=args.heads, head_dim=args.head_dim,
        leak_trials=args.leak_trials, literal_identity_v2v=args.literal_identity_v2v,
        literal_t2v=args.literal_t2v, disjoint=args.disjoint,
    )
    specs = None
    if args.specs:
        specs = [MotionSpec.from_dict(d) for d in json.loads(Path(args.specs).read_text())]
    scenario = scenario_from_config(config, specs)
    final = {}

    def keep(i, tracks):
        final["tracks"] = tracks

    report = simulate(scenario, config, on_step=keep, jobs=args.jobs)
    text = report_json(report)
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    if args.render_dir:
        out = Path(args.render_dir)
        out.mkdir(parents=True, exist_ok=True)
        tracks = final["tracks"]
        for l in range(tracks.shape[1]):
            write_pgm(out / f"frame_{l:03d}.pgm",
                      overlay_frame(tracks[:, l], scenario.gt_masks[:, l]), scale=8)
    if args.export_dir:
        out = Path(args.export_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_layout(out / "layout.json", scenario.layout)
        write_tensor(out / "gt_masks.tns", scenario.gt_masks)
        write_tensor(out / "first_masks.tns", scenario.first_masks)
        write_tensor(out / "flows.tns", scenario.flows)
        names = []
        for i, feats in enumerate(scenario.features_per_step):
            name = f"features_step{i:03d}.tns"
            write_tensor(out / name, feats)
            names.append(name)
        (out / "schedule.json").write_text(json.dumps({"steps": names}, indent=2) + "\n")


def cmd_metrics(args) -> None:
    pred = read_mask(args.pred, ndim=4)
    gt = read_mask(args.gt, ndim=4)
    if pred.shape != gt.shape:
        raise ValueError(f"--pred shape {pred.shape} != --gt shape {gt.shape}")
    doc = {"iou": [[mask_iou(pred[k, l], gt[k, l]) for l in range(pred.shape[1])]
                   for k in range(pred.shape[0])]}
    if args.flow_gen or args.flow_ref:
        if not (args.flow_gen and args.flow_ref):
            raise ValueError("--flow-gen and --flow-ref must be given together")
        fg, fr = read_tensor(args.flow_gen), read_tensor(args.flow_ref)
        doc["ff"] = [flow_fidelity(fg, fr, pred[k, :-1], gt[k, :-1])
                     for k in range(pred.shape[0])]
    _write_json(doc, args.out)


def cmd_render(args) -> None:
    arr = read_tensor(args.tensor)
    if args.index:
        for i in (int(v) for v in args.index.split(",")):
            arr = arr[i]
    if arr.ndim != 2:
        raise ValueError(f"slice to render must be 2-d, got shape {arr.shape}")
    write_pgm(args.out, to_gray(arr), args.scale)


COMMANDS = {
    "version": cmd_version,
    "build-mask": cmd_build_mask,
    "attend": cmd_attend,
    "extract-train-mask": cmd_extract_train_mask,
    "propagate": cmd_propagate,
    "simulate": cmd_simulate,
    "metrics": cmd_metrics,
    "render": cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, ValueError) as exc:
        print(f"mdma: error: bad --config: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args)
    except (ValueError, LayoutError, TensorFormatError, OSError, MemoryError,
            KeyError, IndexError) as exc:
        print(f"mdma {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0
