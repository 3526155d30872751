"""Ablation harnesses over the standard synthetic suite: top-k sweep, prompt
mode comparison, point-count sweep and prompt-frame strategy comparison. Each
run is a plain configuration of the same pipeline; the harness adds no
special code paths."""
from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .determination import preprocess_sequence, propagate_ids, select_anchor_frame
from .determination import estimate_target_count
from .metrics import sequence_scores
from .pipeline import PipelineConfig, refine_sequence
from .segmenter import MockVideoSegmenter, PromptSet
from .selection import sample_points, score_frames, select_topk
from .synth import SuiteCase, degrade, generate_scene, standard_suite


def suite_inputs(case: SuiteCase):
    _, gt = generate_scene(case.scene, case.seed)
    coarse = degrade(gt, case.degradation, case.seed)
    return gt, coarse


def gt_union(gt) -> list[np.ndarray]:
    out = []
    for t in range(len(gt[0])):
        u = np.zeros_like(gt[0][t])
        for frames in gt:
            u |= frames[t]
        out.append(u)
    return out


def evaluate_loaded(gt, coarse, config: PipelineConfig, mock_kind: str,
                    mock_params: Optional[dict] = None) -> dict:
    backend = MockVideoSegmenter(gt, kind=mock_kind, **(mock_params or {}))
    result = refine_sequence(coarse, config, lambda tid: backend.session(tid))
    scores = sequence_scores([m * 255 for m in result.union], gt_union(gt),
                             tau_bin=config.tau_bin)
    return {"mDice": scores["mDice"], "mIoU": scores["mIoU"], "mMAE": scores["mMAE"]}


def evaluate_case(case: SuiteCase, config: PipelineConfig, mock_kind: str,
                  mock_params: Optional[dict] = None) -> dict:
    gt, coarse = suite_inputs(case)
    return {"case": case.name,
            **evaluate_loaded(gt, coarse, config, mock_kind, mock_params)}


def _aggregate(rows: list[dict]) -> dict:
    n = len(rows)
    return {"mDice": sum(r["mDice"] for r in rows) / n,
            "mIoU": sum(r["mIoU"] for r in rows) / n,
            "mMAE": sum(r["mMAE"] for r in rows) / n}


def topk_sweep(cases: Sequence[SuiteCase], ks: Sequence[int] = (1, 3, 5, 7, 9),
               config: Optional[PipelineConfig] = None, mock_kind: str = "eroding",
               mock_params: Optional[dict] = None) -> dict:
    """Rerun the pipeline for each k; rows mirror a top-k ablation table."""
    config = config or PipelineConfig()
    mock_params = mock_params if mock_params is not None else {"erosion": 3}
    rows = []
    per_case = {}
    for k in ks:
        cfg = replace(config, k=k)
        case_rows = [evaluate_case(c, cfg, mock_kind, mock_params) for c in cases]
        per_case[f"Top-{k}"] = case_rows
        rows.append({"setting": f"Top-{k}", "k": k, **_aggregate(case_rows)})
    return {"sweep": "topk", "cases": [c.name for c in cases], "rows": rows,
            "per_case": per_case}


def prompt_mode_sweep(cases: Sequence[SuiteCase],
                      modes: Sequence[str] = ("points", "points+box", "points+rbox"),
                      config: Optional[PipelineConfig] = None,
                      mock_kind: str = "eroding",
                      mock_params: Optional[dict] = None) -> dict:
    """Prompt strategy comparison (points vs initial box vs refined box)."""
    config = config or PipelineConfig()
    mock_params = mock_params if mock_params is not None else {"erosion": 3}
    labels = {"points": f"{config.m}P", "points+box": f"box+{config.m}P",
              "points+rbox": f"rbox+{config.m}P"}
    rows = []
    per_case = {}
    for mode in modes:
        cfg = replace(config, prompt_mode=mode)
        case_rows = [evaluate_case(c, cfg, mock_kind, mock_params) for c in cases]
        per_case[labels[mode]] = case_rows
        rows.append({"setting": labels[mode], "prompt_mode": mode,
                     **_aggregate(case_rows)})
    return {"sweep": "prompt_mode", "cases": [c.name for c in cases], "rows": rows,
            "per_case": per_case}


def point_count_sweep(cases: Sequence[SuiteCase], ms: Sequence[int] = (1, 3, 5, 7, 9),
                      config: Optional[PipelineConfig] = None,
                      mock_kind: str = "eroding",
                      mock_params: Optional[dict] = None) -> dict:
    """Rerun the pipeline with different numbers of prompt points."""
    config = config or PipelineConfig()
    mock_params = mock_params if mock_params is not None else {"erosion": 3}
    rows = []
    for m in ms:
        cfg = replace(config, m=m)
        case_rows = [evaluate_case(c, cfg, mock_kind, mock_params) for c in cases]
        rows.append({"setting": f"{m}P", "m": m, **_aggregate(case_rows)})
    return {"sweep": "point_count", "cases": [c.name for c in cases], "rows": rows}


def frame_strategy_comparison(cases: Sequence[SuiteCase],
                              strategies: Sequence[str] = ("first", "random", "top1"),
                              config: Optional[PipelineConfig] = None,
                              mock_kind: str = "eroding",
                              mock_params: Optional[dict] = None) -> dict:
    """Compare prompting the first frame, a random frame and the top-1 frame,
    one point each, composed from the library pieces without pipeline changes."""
    config = config or PipelineConfig(m=1, prompt_mode="points")
    mock_params = mock_params if mock_params is not None else {"erosion": 3}
    rows = []
    for strategy in strategies:
        case_rows = []
        for case in cases:
            gt, coarse = suite_inputs(case)
            backend = MockVideoSegmenter(gt, kind=mock_kind, **(mock_params or {}))
            binmasks = preprocess_sequence(coarse, config.tau_bin, config.kernel_radius)
            n_max, _ = estimate_target_count(binmasks, config.connectivity)
            anchor = select_anchor_frame(binmasks, n_max, config.connectivity)
            tracks = propagate_ids(binmasks, anchor, config.tau_iou, n_max=n_max,
                                   connectivity=config.connectivity)
            unions = []
            per_target = []
            for track in tracks:
                session = backend.session(track.target_id)
                frames = track.frames()
                if strategy == "first":
                    frame = frames[0]
                elif strategy == "random":
                    rng = np.random.default_rng([config.seed, 7, track.target_id])
                    frame = int(rng.choice(frames))
                else:
                    scores = score_frames(binmasks, tracks, session, track.target_id,
                                          m=config.m, tau_bin=config.tau_bin,
                                          seed=config.seed)
                    frame = select_topk(scores, 1)[0].frame_index
                points = sample_points(track, frame, config.m, config.seed)
                masks = session.propagate_video(
                    [PromptSet(frame, track.target_id, points)])
                per_target.append(masks)
            for t in range(len(coarse)):
                u = np.zeros_like(binmasks[0])
                for masks in per_target:
                    u |= (masks[t] > config.tau_bin).astype(np.uint8)
                unions.append(u)
            s = sequence_scores([m * 255 for m in unions], gt_union(gt),
                                tau_bin=config.tau_bin)
            case_rows.append({"case": case.name, "mDice": s["mDice"],
                              "mIoU": s["mIoU"], "mMAE": s["mMAE"]})
        rows.append({"setting": strategy, **_aggregate(case_rows)})
    return {"sweep": "frame_strategy", "cases": [c.name for c in cases], "rows": rows}


def noisy_subset() -> list[SuiteCase]:
    return [c for c in standard_suite() if "noisy" in c.tags]
