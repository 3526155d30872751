"""Target determination: region-count voting, anchor selection, and IoU-based
identity propagation across frames."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .mask_core import Region, binarize, label_components, morph_close, overlap

try:
    from scipy.optimize import linear_sum_assignment
except ImportError:  # pragma: no cover
    linear_sum_assignment = None


class NoTargetError(ValueError):
    """Every frame of the sequence is empty after preprocessing."""


@dataclass
class TargetTrack:
    target_id: int
    anchor_frame: int
    entries: dict[int, Region] = field(default_factory=dict)

    def frames(self) -> list[int]:
        return sorted(self.entries)


def preprocess_sequence(masks, tau_bin: int, kernel_radius: int) -> list[np.ndarray]:
    """Binarize then morphologically close each frame's coarse mask."""
    if not masks:
        raise ValueError("empty sequence")
    shapes = {np.asarray(m).shape for m in masks}
    if len(shapes) != 1:
        raise ValueError(f"mixed mask dimensions in sequence: {sorted(shapes)}")
    return [morph_close(binarize(m, tau_bin), kernel_radius) for m in masks]


def estimate_target_count(binmasks, connectivity: int = 8) -> tuple[int, Counter]:
    """Modal per-frame region count. Zero-region frames vote into the histogram
    but never win; ties break toward the smaller count."""
    if not binmasks:
        raise ValueError("empty sequence")
    counts = [len(label_components(m, connectivity)) for m in binmasks]
    histogram = Counter(counts)
    candidates = [n for n in histogram if n > 0]
    if not candidates:
        raise NoTargetError("no camouflaged object detected")
    n_max = max(candidates, key=lambda n: (histogram[n], -n))
    return n_max, histogram


def select_anchor_frame(binmasks, n_max: int, connectivity: int = 8) -> int:
    """Among frames with exactly n_max regions, pick the one with the largest
    total foreground area; ties break toward the earlier frame."""
    best = None
    for t, m in enumerate(binmasks):
        if len(label_components(m, connectivity)) != n_max:
            continue
        area = int(m.sum())
        if best is None or area > best[0]:
            best = (area, t)
    if best is None:
        raise ValueError(f"no frame has {n_max} regions")
    return best[1]


def _claim(ids_in_order, refs, regions, tau_iou, use_hungarian):
    """Match live ids to a frame's regions; each region is consumed at most once."""
    matched: dict[int, Region] = {}
    if use_hungarian and linear_sum_assignment is not None and ids_in_order and regions:
        cost = np.ones((len(ids_in_order), len(regions)))
        for i, tid in enumerate(ids_in_order):
            for j, reg in enumerate(regions):
                cost[i, j] = 1.0 - overlap(refs[tid], reg).iou
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            if 1.0 - cost[i, j] > tau_iou:
                matched[ids_in_order[i]] = regions[j]
        return matched
    available = list(regions)
    for tid in ids_in_order:
        best = None
        for reg in available:
            iou = overlap(refs[tid], reg).iou
            if iou > tau_iou and (best is None or iou > best[0]):
                best = (iou, reg)
        if best is not None:
            matched[tid] = best[1]
            available.remove(best[1])
    return matched


def propagate_ids(binmasks, anchor: int, tau_iou: float, n_max: int | None = None,
                  connectivity: int = 8, use_hungarian: bool = False) -> list[TargetTrack]:
    """Assign ids on the anchor frame by descending area, then sweep forward and
    backward, greedily matching each id's most recent region by pixel IoU.

    Ids unmatched in a frame stay live and keep matching against their last
    known region (unbounded gap tolerance). Regions never claimed by an id are
    noise.
    """
    if not 0 <= anchor < len(binmasks):
        raise ValueError(f"anchor {anchor} out of range")
    if not 0.0 < tau_iou < 1.0:
        raise ValueError(f"tau_iou must be in (0,1), got {tau_iou}")
    per_frame = [label_components(m, connectivity) for m in binmasks]
    anchor_regions = per_frame[anchor]
    if n_max is None:
        n_max = len(anchor_regions)
    if len(anchor_regions) < n_max:
        raise ValueError(f"anchor frame has {len(anchor_regions)} regions, need {n_max}")
    # label_components is already sorted by descending area
    tracks = {i + 1: TargetTrack(target_id=i + 1, anchor_frame=anchor,
                                 entries={anchor: anchor_regions[i]})
              for i in range(n_max)}

    def sweep(frame_range):
        refs = {tid: tracks[tid].entries[anchor] for tid in tracks}
        for t in frame_range:
            order = sorted(tracks, key=lambda tid: (-refs[tid].area, tid))
            matched = _claim(order, refs, per_frame[t], tau_iou, use_hungarian)
            for tid, reg in matched.items():
                tracks[tid].entries[t] = reg
                refs[tid] = reg

    sweep(range(anchor + 1, len(binmasks)))
    sweep(range(anchor - 1, -1, -1))
    return [tracks[tid] for tid in sorted(tracks)]
