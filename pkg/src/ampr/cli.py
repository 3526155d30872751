"""Command-line interface: refine, inspect, eval, synth, serve."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import synth as synth_mod
from .mask_io import load_bin_mask, load_prob_mask, save_bin_mask, save_gray, save_prob_mask
from .metrics import format_table, sequence_scores
from .pipeline import PipelineConfig, SequenceManifest, inspect_sequence, run_ampr
from .protocol import MockProtocolBackend, remote_segmenter_factory, serve_stdio, serve_tcp
from .segmenter import MockVideoSegmenter, parse_mock_spec, split_gt_by_id

log = logging.getLogger("ampr")

CONFIG_FLAGS = ("tau_bin", "tau_iou", "alpha", "beta", "m", "k", "kernel_radius",
                "max_steps", "seed", "prompt_mode", "expansion_probe")


def _setup_logging() -> None:
    level = os.environ.get("AMPR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--tau-bin", type=int, dest="tau_bin")
    parser.add_argument("--tau-iou", type=float, dest="tau_iou")
    parser.add_argument("--alpha", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--m", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--kernel-radius", type=int, dest="kernel_radius")
    parser.add_argument("--max-steps", type=int, dest="max_steps")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--prompt-mode", dest="prompt_mode",
                        choices=["points", "points+box", "points+rbox"])
    parser.add_argument("--expansion-probe", dest="expansion_probe",
                        choices=["requery", "coarse"])


def _config_from_args(args) -> PipelineConfig:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    for name in CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    return PipelineConfig.from_json(doc)


def mock_factory_from_manifest(manifest: SequenceManifest, mock_spec: str):
    if not manifest.gt_masks:
        raise SystemExit("mock segmenters need gt_masks in the manifest")
    id_masks = [load_prob_mask(p) for p in manifest.gt_masks]
    backend = MockVideoSegmenter(split_gt_by_id(id_masks), **parse_mock_spec(mock_spec))

    def factory(manifest_, target_id):
        return backend.session(target_id)

    factory.backend = backend
    return factory


def _segmenter_factory(args, manifest: SequenceManifest):
    spec = args.segmenter
    kind, _, rest = spec.partition(":")
    if kind == "mock":
        return mock_factory_from_manifest(manifest, rest)
    if kind in ("cmd", "tcp"):
        return remote_segmenter_factory(spec)
    raise SystemExit(f"--segmenter must be mock:<kind>, cmd:<command> or tcp:<host:port>, got {spec!r}")


def cmd_refine(args) -> int:
    config = _config_from_args(args)
    manifest = SequenceManifest.load(args.manifest)
    factory = _segmenter_factory(args, manifest)
    result = run_ampr(manifest, config, factory, workers=args.workers)
    out = Path(args.out)
    masks_dir = out / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    for t, m in enumerate(result.union):
        save_bin_mask(masks_dir / f"{t:04d}.png", m)
    for tid, masks in result.per_target.items():
        tdir = out / f"target_{tid:02d}"
        tdir.mkdir(exist_ok=True)
        for t, m in enumerate(masks):
            save_prob_mask(tdir / f"{t:04d}.png", m)
    with open(out / "result.json", "w") as fh:
        json.dump({"report": result.report, "timing": result.timing}, fh, indent=2)
    if "diagnostic" in result.report:
        log.warning("refine finished with diagnostic: %s", result.report["diagnostic"])
    print(f"wrote {len(result.union)} masks for {len(result.per_target)} target(s) to {out}")
    return 0


def cmd_inspect(args) -> int:
    config = _config_from_args(args)
    manifest = SequenceManifest.load(args.manifest)
    factory = None
    if args.segmenter:
        base = _segmenter_factory(args, manifest)
        factory = lambda tid: base(manifest, tid)
    coarse = [load_prob_mask(p) for p in manifest.coarse_masks]
    report = inspect_sequence(coarse, config, factory)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    pred_files = sorted(p.name for p in pred_dir.glob("*.png"))
    gt_files = sorted(p.name for p in gt_dir.glob("*.png"))
    if not pred_files:
        raise SystemExit(f"no .png masks under {pred_dir}")
    if pred_files != gt_files:
        raise SystemExit("prediction and ground-truth directories hold different frames")
    preds = [load_prob_mask(pred_dir / n) for n in pred_files]
    gts = [load_bin_mask(gt_dir / n) for n in gt_files]
    scores = sequence_scores(preds, gts, tau_bin=args.tau_bin)
    rows = [{"frame": f["frame"], "dice": f["dice"], "iou": f["iou"], "mae": f["mae"]}
            for f in scores["per_frame"]]
    rows.append({"frame": "mean", "dice": scores["mDice"], "iou": scores["mIoU"],
                 "mae": scores["mMAE"]})
    print(format_table(rows, ["frame", "dice", "iou", "mae"],
                       ["frame", "Dice", "IoU", "MAE"]))
    if args.out:
        Path(args.out).write_text(json.dumps(scores, indent=2))
    return 0


def cmd_synth(args) -> int:
    if args.list_suite:
        for case in synth_mod.standard_suite():
            print(f"{case.name}  seed={case.seed}  tags={','.join(case.tags)}")
        return 0
    if args.spec.startswith("suite:"):
        case = synth_mod.suite_case(args.spec.split(":", 1)[1])
        scene, degradation = case.scene, case.degradation
        seed = args.seed if args.seed is not None else case.seed
    else:
        with open(args.spec) as fh:
            doc = json.load(fh)
        scene = synth_mod.scene_from_json(doc["scene"])
        degradation = synth_mod.degradation_from_json(doc.get("degradation", {}))
        seed = args.seed if args.seed is not None else 0
    frames, gt = synth_mod.generate_scene(scene, seed)
    coarse = synth_mod.degrade(gt, degradation, seed)
    out = Path(args.out)
    for sub in ("frames", "gt", "coarse"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for t in range(scene.frame_count):
        save_gray(out / "frames" / f"{t:04d}.png", frames[t])
        id_mask = np.zeros((scene.height, scene.width), dtype=np.uint8)
        for i, per_target in enumerate(gt):
            id_mask[per_target[t] == 1] = i + 1
        save_gray(out / "gt" / f"{t:04d}.png", id_mask)
        save_prob_mask(out / "coarse" / f"{t:04d}.png", coarse[t])
    manifest = SequenceManifest(
        frames=[str(out / "frames" / f"{t:04d}.png") for t in range(scene.frame_count)],
        coarse_masks=[str(out / "coarse" / f"{t:04d}.png") for t in range(scene.frame_count)],
        gt_masks=[str(out / "gt" / f"{t:04d}.png") for t in range(scene.frame_count)],
        width=scene.width, height=scene.height)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest.to_json(relative_to=out), fh, indent=2)
    with open(out / "spec.json", "w") as fh:
        json.dump({"scene": synth_mod.scene_to_json(scene),
                   "degradation": synth_mod.degradation_to_json(degradation),
                   "seed": seed}, fh, indent=2)
    print(f"wrote {scene.frame_count} frames to {out}")
    return 0


def cmd_serve(args) -> int:
    manifest = SequenceManifest.load(args.manifest)
    kind, _, rest = args.segmenter.partition(":")
    if kind != "mock":
        raise SystemExit("serve supports mock segmenters only; wrap a real model "
                         "behind the same protocol instead")
    factory = mock_factory_from_manifest(manifest, rest)
    backend = MockProtocolBackend(factory.backend)
    if args.transport == "stdio":
        serve_stdio(backend)
    else:
        port = int(args.transport.split(":", 1)[1])
        serve_tcp(backend, "127.0.0.1", port,
                  ready_callback=lambda p: print(f"listening on 127.0.0.1:{p}", flush=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampr",
                                     description="Adaptive multi-prompt refinement engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="refine a sequence's coarse masks to final masks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--segmenter", required=True,
                   help="mock:<kind[:k=v,..]> | cmd:<command> | tcp:<host:port>")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("inspect", help="dump the step 1-3 analysis as JSON")
    p.add_argument("--manifest", required=True)
    p.add_argument("--segmenter", help="optional; enables the selection/refinement stages")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--tau-bin", type=int, default=127, dest="tau_bin")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic clip with ground truth")
    p.add_argument("--spec", help="spec JSON path or suite:<name>")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--list-suite", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="serve the wire protocol over a mock backend")
    p.add_argument("--manifest", required=True)
    p.add_argument("--segmenter", required=True, help="mock:<kind[:k=v,..]>")
    p.add_argument("--transport", default="stdio", help="stdio | tcp:<port>")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "synth" and not args.list_suite and not (args.spec and args.out):
        raise SystemExit("synth needs --spec and --out (or --list-suite)")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
