"""Prompt box refinement: start from the tight box around the single-frame
prediction and push each edge outward until the segmenter's response jumps.

Each direction moves its edge by ``alpha`` pixels per step (clamped at the
image border). After every step the segmenter is re-queried with the current
points and box; the normalized response-area change

    delta_m = |area(M_i) - area(M_{i-1})| / (W * H)

is compared against ``beta``. A direction stops on the step that triggers
``delta_m >= beta`` (that step's box is kept: the jump is new object evidence
inside the enlarged box), on reaching the border, or after ``max_steps``.
Directions run in the fixed order up, down, left, right, each continuing from
the previous direction's final box.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .mask_core import Box, binarize, min_enclosing_box
from .segmenter import PointPrompt, PromptSet, SegmenterSession
from .selection import FrameScore

DIRECTIONS = ("up", "down", "left", "right")


@dataclass
class ExpansionTrace:
    direction: str
    steps: list[tuple[Box, float]]
    stop_reason: str  # threshold_hit | image_boundary | max_steps

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "steps": [{"box": list(b.as_tuple()), "delta_m": d} for b, d in self.steps],
            "stop_reason": self.stop_reason,
        }


def initial_box(predicted, tau_bin: int) -> Box:
    """Tight box around the binarized prediction."""
    b = binarize(predicted, tau_bin)
    if not b.any():
        raise ValueError("no initial box: prediction is empty")
    return min_enclosing_box(b)


def _step_box(box: Box, direction: str, alpha: int, shape: tuple[int, int]) -> Optional[Box]:
    h, w = shape
    if direction == "up":
        ny = max(0, box.y0 - alpha)
        return None if ny == box.y0 else Box(box.x0, ny, box.x1, box.y1)
    if direction == "down":
        ny = min(h - 1, box.y1 + alpha)
        return None if ny == box.y1 else Box(box.x0, box.y0, box.x1, ny)
    if direction == "left":
        nx = max(0, box.x0 - alpha)
        return None if nx == box.x0 else Box(nx, box.y0, box.x1, box.y1)
    if direction == "right":
        nx = min(w - 1, box.x1 + alpha)
        return None if nx == box.x1 else Box(box.x0, box.y0, nx, box.y1)
    raise ValueError(direction)


def _at_border(box: Box, direction: str, shape: tuple[int, int]) -> bool:
    h, w = shape
    return {"up": box.y0 == 0, "down": box.y1 == h - 1,
            "left": box.x0 == 0, "right": box.x1 == w - 1}[direction]


def expand_box(session: SegmenterSession, frame_index: int,
               points: Sequence[PointPrompt], box0: Box,
               alpha: int, beta: float, max_steps: int, tau_bin: int = 127,
               probe: str = "requery",
               reference: Optional[np.ndarray] = None) -> tuple[Box, list[ExpansionTrace]]:
    """Expand box0 in all four directions; returns the final box and one trace
    per direction.

    probe="requery" re-queries the segmenter after every step (the default);
    probe="coarse" measures delta_m on ``reference`` content inside the newly
    exposed strip instead, issuing no segmenter calls during expansion.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0,1), got {beta}")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if probe not in ("requery", "coarse"):
        raise ValueError(f"unknown probe mode {probe!r}")
    if probe == "coarse" and reference is None:
        raise ValueError("coarse probe needs a reference mask")

    shape = session.frame_shape
    denom = float(shape[0] * shape[1])
    box = box0
    if probe == "requery":
        prev_area = int(binarize(session.segment_frame(frame_index, list(points), box), tau_bin).sum())

    traces = []
    for direction in DIRECTIONS:
        steps: list[tuple[Box, float]] = []
        stop = "max_steps"
        for _ in range(max_steps):
            nxt = _step_box(box, direction, alpha, shape)
            if nxt is None:
                stop = "image_boundary"
                break
            if probe == "requery":
                area = int(binarize(session.segment_frame(frame_index, list(points), nxt), tau_bin).sum())
                delta = abs(area - prev_area) / denom
                prev_area = area
            else:
                strip = np.zeros(shape, dtype=bool)
                strip[nxt.y0:nxt.y1 + 1, nxt.x0:nxt.x1 + 1] = True
                strip[box.y0:box.y1 + 1, box.x0:box.x1 + 1] = False
                delta = int((reference.astype(bool) & strip).sum()) / denom
            box = nxt
            steps.append((box, delta))
            if delta >= beta:
                stop = "threshold_hit"
                break
            if _at_border(box, direction, shape):
                stop = "image_boundary"
                break
        traces.append(ExpansionTrace(direction, steps, stop))
    return box, traces


def build_prompt_sets(selected: Sequence[FrameScore],
                      refined_boxes: Sequence[Optional[Box]],
                      prompt_mode: str = "points+rbox") -> list[PromptSet]:
    """One PromptSet per selected frame, ordered by frame index. refined_boxes
    aligns with ``selected``; entries are ignored in points mode."""
    if len(selected) != len(refined_boxes):
        raise ValueError(f"{len(selected)} selected frames but {len(refined_boxes)} boxes")
    if prompt_mode not in ("points", "points+box", "points+rbox"):
        raise ValueError(f"unknown prompt mode {prompt_mode!r}")
    sets = []
    for fs, box in zip(selected, refined_boxes):
        use_box = None if prompt_mode == "points" else box
        if prompt_mode != "points" and box is None:
            raise ValueError(f"missing box for frame {fs.frame_index}")
        sets.append(PromptSet(fs.frame_index, fs.target_id, tuple(fs.points), use_box))
    sets.sort(key=lambda p: p.frame_index)
    return sets
