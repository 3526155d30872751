"""End-to-end orchestration: determination, selection and refinement per
target, final propagation, merge and report."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import json

import numpy as np
from PIL import Image

from .determination import (
    NoTargetError,
    estimate_target_count,
    preprocess_sequence,
    propagate_ids,
    select_anchor_frame,
)
from .mask_core import Box, binarize
from .mask_io import load_prob_mask
from .refinement import build_prompt_sets, expand_box, initial_box
from .segmenter import SegmenterSession
from .selection import score_frames, score_reference, select_topk

PROMPT_MODES = ("points", "points+box", "points+rbox")


@dataclass
class PipelineConfig:
    tau_bin: int = 127
    tau_iou: float = 0.5
    alpha: int = 5
    beta: float = 5e-4
    m: int = 5
    k: int = 3
    kernel_radius: int = 2
    max_steps: int = 64
    seed: int = 0
    prompt_mode: str = "points+rbox"
    connectivity: int = 8
    use_hungarian: bool = False
    expansion_probe: str = "requery"

    def __post_init__(self):
        if not 0 <= self.tau_bin <= 255:
            raise ValueError("tau_bin out of range")
        if not 0.0 < self.tau_iou < 1.0:
            raise ValueError("tau_iou out of range")
        if self.alpha < 1 or self.m < 1 or self.k < 1 or self.max_steps < 1:
            raise ValueError("alpha, m, k and max_steps must be >= 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta out of range")
        if self.kernel_radius < 0:
            raise ValueError("kernel_radius must be >= 0")
        if self.prompt_mode not in PROMPT_MODES:
            raise ValueError(f"prompt_mode must be one of {PROMPT_MODES}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class SequenceManifest:
    frames: list[str]
    coarse_masks: list[str]
    gt_masks: Optional[list[str]] = None
    width: int = 0
    height: int = 0

    def __post_init__(self):
        if len(self.frames) != len(self.coarse_masks):
            raise ValueError("frames and coarse_masks must align")
        if self.gt_masks is not None and len(self.gt_masks) != len(self.frames):
            raise ValueError("gt_masks must align with frames")
        if not self.frames:
            raise ValueError("empty manifest")

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def load(cls, path) -> "SequenceManifest":
        path = Path(path)
        with open(path) as fh:
            doc = json.load(fh)
        base = path.parent

        def resolve(entries):
            return [str((base / e)) if not Path(e).is_absolute() else e for e in entries]

        manifest = cls(frames=resolve(doc["frames"]),
                       coarse_masks=resolve(doc["coarse_masks"]),
                       gt_masks=resolve(doc["gt_masks"]) if doc.get("gt_masks") else None,
                       width=doc.get("width", 0), height=doc.get("height", 0))
        manifest.validate_files()
        return manifest

    def validate_files(self) -> None:
        sizes = set()
        for group in (self.frames, self.coarse_masks, self.gt_masks or []):
            for p in group:
                if not Path(p).exists():
                    raise FileNotFoundError(p)
        for p in list(self.coarse_masks) + (self.gt_masks or []):
            with Image.open(p) as img:
                sizes.add(img.size)
        if len(sizes) > 1:
            raise ValueError(f"masks have mixed dimensions: {sorted(sizes)}")
        if sizes:
            w, h = sizes.pop()
            if self.width and self.width != w or self.height and self.height != h:
                raise ValueError("manifest dimensions disagree with mask files")
            self.width, self.height = w, h

    def to_json(self, relative_to: Optional[Path] = None) -> dict:
        def rel(entries):
            if relative_to is None:
                return list(entries)
            return [str(Path(e).relative_to(relative_to)) for e in entries]

        doc = {"frames": rel(self.frames), "coarse_masks": rel(self.coarse_masks),
               "width": self.width, "height": self.height}
        if self.gt_masks:
            doc["gt_masks"] = rel(self.gt_masks)
        return doc


@dataclass
class PipelineResult:
    per_target: dict[int, list[np.ndarray]]
    union: list[np.ndarray]
    report: dict
    timing: dict = field(default_factory=dict)


SessionFactory = Callable[[int], SegmenterSession]


def _box_json(box: Optional[Box]):
    return None if box is None else list(box.as_tuple())


def _track_json(track) -> dict:
    return {
        "target_id": track.target_id,
        "anchor_frame": track.anchor_frame,
        "entries": {
            str(t): {
                "label": r.label,
                "area": r.area,
                "bbox": list(r.bbox.as_tuple()),
                "centroid": [r.centroid[0], r.centroid[1]],
            }
            for t, r in sorted(track.entries.items())
        },
    }


def _empty_result(num_frames: int, shape: tuple[int, int], config: PipelineConfig,
                  diagnostic: str, histogram=None) -> PipelineResult:
    empty = [np.zeros(shape, dtype=np.uint8) for _ in range(num_frames)]
    report = {
        "config": config.to_json(),
        "diagnostic": diagnostic,
        "histogram": {str(k): v for k, v in (histogram or {}).items()},
        "n_max": 0,
        "tracks": [],
    }
    return PipelineResult(per_target={}, union=empty, report=report)


def _prompt_stage(binmasks, tracks, track, config: PipelineConfig,
                  session: SegmenterSession, workers: int = 1) -> dict:
    """Steps 2 and 3 for one target: score frames, pick the top k, refine boxes."""
    scores = score_frames(binmasks, tracks, session, track.target_id,
                          m=config.m, tau_bin=config.tau_bin, seed=config.seed,
                          workers=workers)
    selected = select_topk(scores, config.k)
    boxes: list[Optional[Box]] = []
    traces = {}
    for fs in selected:
        if config.prompt_mode == "points":
            boxes.append(None)
            continue
        try:
            box0 = initial_box(fs.predicted, config.tau_bin)
        except ValueError:
            box0 = track.entries[fs.frame_index].bbox  # empty prediction fallback
        if config.prompt_mode == "points+box":
            boxes.append(box0)
            continue
        reference = score_reference(binmasks, tracks, track.target_id, fs.frame_index)
        rbox, dir_traces = expand_box(
            session, fs.frame_index, fs.points, box0,
            alpha=config.alpha, beta=config.beta, max_steps=config.max_steps,
            tau_bin=config.tau_bin, probe=config.expansion_probe,
            reference=reference)
        boxes.append(rbox)
        traces[fs.frame_index] = [tr.to_json() for tr in dir_traces]
    prompt_sets = build_prompt_sets(selected, boxes, config.prompt_mode)
    return {"scores": scores, "selected": selected, "prompt_sets": prompt_sets,
            "traces": traces}


def refine_sequence(coarse_masks: Sequence[np.ndarray], config: PipelineConfig,
                    session_factory: SessionFactory, workers: int = 1) -> PipelineResult:
    """Run the full refinement over in-memory coarse masks.

    session_factory(target_id) must return a segmenter session bound to the
    same sequence. Deterministic for a fixed (masks, config, backend).
    """
    t_start = time.perf_counter()
    shape = np.asarray(coarse_masks[0]).shape
    binmasks = preprocess_sequence(coarse_masks, config.tau_bin, config.kernel_radius)
    try:
        n_max, histogram = estimate_target_count(binmasks, config.connectivity)
    except NoTargetError as exc:
        return _empty_result(len(coarse_masks), shape, config, str(exc))
    anchor = select_anchor_frame(binmasks, n_max, config.connectivity)
    tracks = propagate_ids(binmasks, anchor, config.tau_iou, n_max=n_max,
                           connectivity=config.connectivity,
                           use_hungarian=config.use_hungarian)
    t_step1 = time.perf_counter()

    def process_target(track):
        session = session_factory(track.target_id)
        out = _prompt_stage(binmasks, tracks, track, config, session, workers=workers)
        out["masks"] = session.propagate_video(out["prompt_sets"])
        return out

    if workers > 1 and len(tracks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = dict(zip([t.target_id for t in tracks],
                               pool.map(process_target, tracks)))
    else:
        outputs = {t.target_id: process_target(t) for t in tracks}
    t_targets = time.perf_counter()

    per_target = {tid: outputs[tid]["masks"] for tid in sorted(outputs)}
    union = []
    overlap_flags = []
    for t in range(len(coarse_masks)):
        stack = [binarize(per_target[tid][t], config.tau_bin) for tid in sorted(per_target)]
        merged = np.zeros(shape, dtype=np.uint8)
        counts = np.zeros(shape, dtype=np.uint16)
        for m in stack:
            merged |= m
            counts += m
        union.append(merged)
        shared = int((counts > 1).sum())
        if shared:
            overlap_flags.append({"frame": t, "pixels": shared})

    report = _build_report(config, n_max, histogram, anchor, tracks, outputs)
    report["overlap_flags"] = overlap_flags
    t_end = time.perf_counter()
    timing = {"total_s": t_end - t_start, "step1_s": t_step1 - t_start,
              "targets_s": t_targets - t_step1}
    return PipelineResult(per_target=per_target, union=union, report=report, timing=timing)


def _build_report(config, n_max, histogram, anchor, tracks, outputs) -> dict:
    return {
        "config": config.to_json(),
        "n_max": n_max,
        "histogram": {str(k): v for k, v in sorted(histogram.items())},
        "anchor_frame": anchor,
        "tracks": [_track_json(tr) for tr in tracks],
        "frame_scores": {
            str(tid): [{"frame": s.frame_index, "score": s.score,
                        "points": [[p.x, p.y] for p in s.points]}
                       for s in outputs[tid]["scores"]]
            for tid in sorted(outputs)
        },
        "selected": {str(tid): [s.frame_index for s in outputs[tid]["selected"]]
                     for tid in sorted(outputs)},
        "prompt_sets": {
            str(tid): [{"frame": ps.frame_index,
                        "points": [[p.x, p.y] for p in ps.points],
                        "box": _box_json(ps.box)}
                       for ps in outputs[tid]["prompt_sets"]]
            for tid in sorted(outputs)
        },
        "expansion_traces": {str(tid): {str(f): tr for f, tr in outputs[tid]["traces"].items()}
                             for tid in sorted(outputs)},
    }


def inspect_sequence(coarse_masks: Sequence[np.ndarray], config: PipelineConfig,
                     session_factory: Optional[SessionFactory] = None) -> dict:
    """Steps 1-3 as a JSON-ready report, without final propagation. Steps 2
    and 3 run only when a session factory is supplied."""
    binmasks = preprocess_sequence(coarse_masks, config.tau_bin, config.kernel_radius)
    try:
        n_max, histogram = estimate_target_count(binmasks, config.connectivity)
    except NoTargetError as exc:
        return _empty_result(len(coarse_masks), np.asarray(coarse_masks[0]).shape,
                             config, str(exc)).report
    anchor = select_anchor_frame(binmasks, n_max, config.connectivity)
    tracks = propagate_ids(binmasks, anchor, config.tau_iou, n_max=n_max,
                           connectivity=config.connectivity,
                           use_hungarian=config.use_hungarian)
    outputs = {}
    if session_factory is not None:
        for track in tracks:
            session = session_factory(track.target_id)
            outputs[track.target_id] = _prompt_stage(binmasks, tracks, track, config, session)
    return _build_report(config, n_max, histogram, anchor, tracks, outputs)


def run_ampr(manifest: SequenceManifest, config: PipelineConfig,
             segmenter_factory: Callable[[SequenceManifest, int], SegmenterSession],
             workers: int = 1) -> PipelineResult:
    """Load the manifest's coarse masks and refine the sequence."""
    coarse = [load_prob_mask(p) for p in manifest.coarse_masks]
    return refine_sequence(coarse, config,
                           lambda tid: segmenter_factory(manifest, tid),
                           workers=workers)
