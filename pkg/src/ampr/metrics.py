"""Sequence evaluation: MAE plus per-frame Dice/IoU and their unweighted means.

Means are taken over frames, not pooled over pixels; frames where prediction
and ground truth are both empty count as Dice = IoU = 1.
"""
from __future__ import annotations

import numpy as np

from .mask_core import as_bin_mask, as_prob_mask, binarize, overlap


def mae(pred, gt) -> float:
    """Mean absolute error between a probability mask and a binary ground truth."""
    p = as_prob_mask(pred)
    g = as_bin_mask(gt)
    if p.shape != g.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {g.shape}")
    return float(np.abs(p.astype(np.float64) / 255.0 - g).mean())


def sequence_scores(preds, gts, tau_bin: int = 127) -> dict:
    """Per-frame Dice/IoU/MAE and their means for aligned mask sequences."""
    if len(preds) != len(gts):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(gts)} ground truths")
    if not preds:
        raise ValueError("empty sequences")
    per_frame = []
    for t, (p, g) in enumerate(zip(preds, gts)):
        gb = as_bin_mask(g)
        o = overlap(binarize(p, tau_bin), gb)
        per_frame.append({
            "frame": t,
            "dice": o.dice,
            "iou": o.iou,
            "mae": mae(p, gb),
        })
    n = len(per_frame)
    return {
        "mDice": sum(f["dice"] for f in per_frame) / n,
        "mIoU": sum(f["iou"] for f in per_frame) / n,
        "mMAE": sum(f["mae"] for f in per_frame) / n,
        "per_frame": per_frame,
    }


def format_table(rows: list[dict], columns: list[str], headers: list[str]) -> str:
    """Aligned-column text table; rows are dicts keyed by column names."""
    def fmt(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    cells = [headers] + [[fmt(r[c]) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
