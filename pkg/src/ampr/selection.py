"""Pivotal prompting frame selection: sample points per frame, query the
segmenter, score predictions against the refined coarse mask, keep the top k.

The score reference for a target on a frame is the refined mask minus the
regions claimed by *other* targets. Unclaimed noise regions stay in the
reference, so multi-region noisy frames score lower and drop out of the
ranking; in single-target clips the reference is simply the whole refined
mask.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .determination import TargetTrack
from .mask_core import binarize, overlap
from .segmenter import PointPrompt, SegmenterSession

_RNG_POINTS = 3


@dataclass
class FrameScore:
    frame_index: int
    target_id: int
    points: tuple[PointPrompt, ...]
    predicted: np.ndarray  # probability mask from the segmenter
    score: float


def sample_points(track: TargetTrack, frame_index: int, m: int, seed: int) -> tuple[PointPrompt, ...]:
    """Sample m points uniformly from the target's region pixels, without
    replacement when the region is large enough. Deterministic per
    (seed, frame, target)."""
    if frame_index not in track.entries:
        raise ValueError(f"target absent on frame {frame_index}")
    if m < 1:
        raise ValueError("m must be >= 1")
    region = track.entries[frame_index]
    rng = np.random.default_rng([seed, _RNG_POINTS, track.target_id, frame_index])
    offsets = region.pixel_offsets
    chosen = rng.choice(offsets, size=m, replace=offsets.size < m)
    w = region.shape[1]
    return tuple(PointPrompt(int(off % w), int(off // w)) for off in chosen)


def score_reference(binmasks, tracks: Sequence[TargetTrack], target_id: int,
                    frame_index: int) -> np.ndarray:
    """Refined mask with other targets' claimed pixels removed."""
    ref = binmasks[frame_index].copy()
    for tr in tracks:
        if tr.target_id == target_id:
            continue
        reg = tr.entries.get(frame_index)
        if reg is not None:
            ref.reshape(-1)[reg.pixel_offsets] = 0
    return ref


def score_frames(binmasks, tracks: Sequence[TargetTrack], session: SegmenterSession,
                 target_id: int, m: int, tau_bin: int, seed: int,
                 workers: int = 1) -> list[FrameScore]:
    """One FrameScore per frame where the target is present; absent frames are
    skipped. Results are ordered by frame index and independent of workers."""
    track = next((t for t in tracks if t.target_id == target_id), None)
    if track is None:
        raise ValueError(f"no track with id {target_id}")

    def score_one(t: int) -> FrameScore:
        points = sample_points(track, t, m, seed)
        try:
            predicted = session.segment_frame(t, list(points))
        except Exception as exc:
            raise RuntimeError(f"segmenter failed on frame {t}: {exc}") from exc
        ref = score_reference(binmasks, tracks, target_id, t)
        score = overlap(binarize(predicted, tau_bin), ref).iou
        return FrameScore(t, target_id, points, predicted, score)

    frames = track.frames()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score_one, frames))
    else:
        results = [score_one(t) for t in frames]
    return results


def select_topk(scores: Sequence[FrameScore], k: int) -> list[FrameScore]:
    """k highest-scoring frames, ties broken by the earlier frame; returns all
    of them (sorted by descending score) when fewer than k were scored."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not scores:
        raise ValueError("no scorable frames")
    ranked = sorted(scores, key=lambda s: (-s.score, s.frame_index))
    return ranked[:k]
