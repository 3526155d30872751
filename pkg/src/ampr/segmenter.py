"""Promptable video segmenter interface plus deterministic mock backends.

The engine never links a real model; it talks to anything that provides
``segment_frame`` / ``propagate_video``. The mocks make every stage testable:

  gt-oracle  -- returns exact ground-truth components / sequences
  eroding    -- under-segments by a fixed erosion; a box releases the pixels
                of the true component that it covers
  noisy      -- jitters the ground truth boundary with a seeded RNG
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np
from scipy import ndimage

from .mask_core import Box, as_bin_mask, box_mask

_RNG_NOISY = 11


@dataclass(frozen=True)
class PointPrompt:
    x: int
    y: int
    polarity: str = "positive"

    def __post_init__(self):
        if self.polarity not in ("positive", "negative"):
            raise ValueError(f"bad polarity {self.polarity!r}")


@dataclass(frozen=True)
class PromptSet:
    frame_index: int
    target_id: int
    points: tuple[PointPrompt, ...]
    box: Optional[Box] = None

    def __post_init__(self):
        if not self.points and self.box is None:
            raise ValueError("prompt set needs points or a box")


class SegmenterSession(Protocol):
    """Handle bound to one video sequence and one target id."""

    @property
    def num_frames(self) -> int: ...

    @property
    def frame_shape(self) -> tuple[int, int]: ...

    def segment_frame(self, frame_index: int, points: Sequence[PointPrompt],
                      box: Optional[Box] = None) -> np.ndarray: ...

    def propagate_video(self, prompt_sets: Sequence[PromptSet]) -> list[np.ndarray]: ...


def _erode(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask.copy()
    k = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return ndimage.binary_erosion(mask.astype(bool), structure=k, border_value=0).astype(np.uint8)


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask.copy()
    k = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return ndimage.binary_dilation(mask.astype(bool), structure=k, border_value=0).astype(np.uint8)


def _to_prob(binmask: np.ndarray) -> np.ndarray:
    return (binmask * 255).astype(np.uint8)


def _validate_prompt_sets(prompt_sets: Sequence[PromptSet], num_frames: int) -> None:
    if not prompt_sets:
        raise ValueError("prompt_sets must be nonempty")
    frames = [p.frame_index for p in prompt_sets]
    if len(set(frames)) != len(frames):
        raise ValueError("prompt sets must target distinct frames")
    if len({p.target_id for p in prompt_sets}) != 1:
        raise ValueError("prompt sets must share one target id")
    for f in frames:
        if not 0 <= f < num_frames:
            raise ValueError(f"frame index {f} out of range 0..{num_frames - 1}")


class MockVideoSegmenter:
    """Deterministic segmenter over known ground truth.

    gt_targets[i][t] is target i's binary mask on frame t. Sessions are pure;
    the call counter is the only mutable state and is lock-protected.
    """

    KINDS = ("gt-oracle", "eroding", "noisy")

    def __init__(self, gt_targets: Sequence[Sequence[np.ndarray]], kind: str = "gt-oracle",
                 erosion: int = 2, jitter: int = 2, seed: int = 0,
                 dropout_frames: Sequence[int] = ()):
        if kind not in self.KINDS:
            raise ValueError(f"unknown mock kind {kind!r}")
        if not gt_targets or not gt_targets[0]:
            raise ValueError("gt_targets must hold at least one target and frame")
        self.kind = kind
        self.erosion = int(erosion)
        self.jitter = int(jitter)
        self.seed = int(seed)
        self.dropout_frames = frozenset(int(f) for f in dropout_frames)
        self.gt = [[as_bin_mask(m) for m in frames] for frames in gt_targets]
        lengths = {len(frames) for frames in self.gt}
        if len(lengths) != 1:
            raise ValueError("all targets must cover the same frames")
        self._num_frames = lengths.pop()
        self._shape = self.gt[0][0].shape
        self._lock = threading.Lock()
        self.segment_calls = 0
        self.propagate_calls = 0

    def session(self, target_id: int) -> "MockSession":
        return MockSession(self, target_id)

    # -- behaviour shared by sessions --

    def _hit_targets(self, frame_index: int, points: Sequence[PointPrompt]) -> list[int]:
        hits = []
        for i, frames in enumerate(self.gt):
            m = frames[frame_index]
            for p in points:
                if p.polarity == "positive" and m[p.y, p.x]:
                    hits.append(i)
                    break
        return hits

    def _identify_target(self, prompt_sets: Sequence[PromptSet]) -> Optional[int]:
        votes = np.zeros(len(self.gt), dtype=int)
        for ps in prompt_sets:
            for i, frames in enumerate(self.gt):
                m = frames[ps.frame_index]
                votes[i] += sum(1 for p in ps.points
                                if p.polarity == "positive" and m[p.y, p.x])
        if votes.max(initial=0) == 0:
            return None
        return int(votes.argmax())

    def _frame_response(self, gt_mask: np.ndarray, box: Optional[Box]) -> np.ndarray:
        if self.kind == "gt-oracle":
            return gt_mask.copy()
        if self.kind == "eroding":
            core = _erode(gt_mask, self.erosion)
            if box is None:
                return core
            released = gt_mask & box_mask(box, gt_mask.shape)
            return core | released
        raise AssertionError(self.kind)

    def _noisy_response(self, gt_mask: np.ndarray, frame_index: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, _RNG_NOISY, frame_index])
        r = int(rng.integers(-self.jitter, self.jitter + 1))
        return _dilate(gt_mask, r) if r >= 0 else _erode(gt_mask, -r)


class MockSession:
    def __init__(self, backend: MockVideoSegmenter, target_id: int):
        self._backend = backend
        self.target_id = target_id

    @property
    def num_frames(self) -> int:
        return self._backend._num_frames

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self._backend._shape

    @property
    def call_count(self) -> int:
        return self._backend.segment_calls

    def segment_frame(self, frame_index: int, points: Sequence[PointPrompt],
                      box: Optional[Box] = None) -> np.ndarray:
        b = self._backend
        if not 0 <= frame_index < b._num_frames:
            raise ValueError(f"frame index {frame_index} out of range")
        if not any(p.polarity == "positive" for p in points) and box is None:
            raise ValueError("need at least one positive point or a box")
        for p in points:
            if not (0 <= p.x < b._shape[1] and 0 <= p.y < b._shape[0]):
                raise ValueError(f"point ({p.x},{p.y}) out of bounds")
        with b._lock:
            b.segment_calls += 1
        if frame_index in b.dropout_frames:
            return np.zeros(b._shape, dtype=np.uint8)
        out = np.zeros(b._shape, dtype=np.uint8)
        for i in b._hit_targets(frame_index, points):
            gt_mask = b.gt[i][frame_index]
            if b.kind == "noisy":
                out |= b._noisy_response(gt_mask, frame_index)
            else:
                out |= b._frame_response(gt_mask, box)
        return _to_prob(out)

    def propagate_video(self, prompt_sets: Sequence[PromptSet]) -> list[np.ndarray]:
        b = self._backend
        _validate_prompt_sets(prompt_sets, b._num_frames)
        with b._lock:
            b.propagate_calls += 1
        target = b._identify_target(prompt_sets)
        empty = np.zeros(b._shape, dtype=np.uint8)
        if target is None:
            return [empty.copy() for _ in range(b._num_frames)]
        prompted = {ps.frame_index: ps for ps in prompt_sets}
        out = []
        for t in range(b._num_frames):
            if t in b.dropout_frames:
                out.append(empty.copy())
                continue
            gt_mask = b.gt[target][t]
            if b.kind == "gt-oracle":
                m = gt_mask.copy()
            elif b.kind == "eroding":
                ps = prompted.get(t)
                m = b._frame_response(gt_mask, ps.box if ps else None)
            else:
                m = b._noisy_response(gt_mask, t)
            out.append(_to_prob(m))
        return out


def parse_mock_spec(spec: str) -> dict:
    """Parse "kind[:key=value,...]" into MockVideoSegmenter kwargs."""
    kind, _, rest = spec.partition(":")
    if kind not in MockVideoSegmenter.KINDS:
        raise ValueError(f"unknown mock kind {kind!r} (choose from {MockVideoSegmenter.KINDS})")
    params: dict = {"kind": kind}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            key = key.strip()
            if key in ("erosion", "jitter", "seed"):
                params[key] = int(value)
            elif key == "dropout_frames":
                params[key] = [int(v) for v in value.split("+") if v]
            else:
                raise ValueError(f"unknown mock parameter {key!r}")
    return params


def split_gt_by_id(id_masks: Sequence[np.ndarray]) -> list[list[np.ndarray]]:
    """Turn per-frame id-valued masks (pixel == target id, 0 background) into
    per-target binary sequences, ordered by id."""
    ids = sorted({int(v) for m in id_masks for v in np.unique(m) if v != 0})
    if not ids:
        raise ValueError("ground truth contains no targets")
    return [[(np.asarray(m) == i).astype(np.uint8) for m in id_masks] for i in ids]
