"""Mask serialization: 8-bit single-channel PNG files and the text RLE wire form.

RLE form: "W H r0 r1 r2 ..." where runs alternate background/foreground in
row-major order, starting with background (r0 may be 0). Runs sum to W*H.
"""
from __future__ import annotations

import numpy as np
from PIL import Image

from .mask_core import as_bin_mask, as_prob_mask


def load_prob_mask(path) -> np.ndarray:
    img = Image.open(path).convert("L")
    return np.asarray(img, dtype=np.uint8)


def save_prob_mask(path, mask) -> None:
    Image.fromarray(as_prob_mask(mask), mode="L").save(path)


def load_bin_mask(path) -> np.ndarray:
    return (load_prob_mask(path) > 0).astype(np.uint8)


def save_bin_mask(path, mask) -> None:
    Image.fromarray(as_bin_mask(mask) * 255, mode="L").save(path)


def save_gray(path, image) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(path)


def rle_encode(mask) -> str:
    m = as_bin_mask(mask)
    h, w = m.shape
    flat = m.ravel()
    parts = [str(w), str(h)]
    runs = []
    changes = np.flatnonzero(np.diff(flat))
    edges = np.concatenate(([0], changes + 1, [flat.size]))
    lengths = np.diff(edges)
    if flat[0] == 1:
        runs.append(0)
    runs.extend(int(n) for n in lengths)
    parts.extend(str(n) for n in runs)
    return " ".join(parts)


def rle_decode(text: str) -> np.ndarray:
    fields = text.split()
    if len(fields) < 2:
        raise ValueError("RLE text must start with 'W H'")
    try:
        values = [int(f) for f in fields]
    except ValueError as exc:
        raise ValueError(f"bad RLE token: {exc}") from None
    w, h, runs = values[0], values[1], values[2:]
    if w < 1 or h < 1:
        raise ValueError(f"bad RLE dimensions {w}x{h}")
    if any(r < 0 for r in runs):
        raise ValueError("RLE run lengths must be >= 0")
    total = sum(runs)
    if total != w * h:
        raise ValueError(f"RLE runs sum to {total}, expected {w * h}")
    flat = np.zeros(w * h, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if value:
            flat[pos:pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(h, w)
