"""Pixel-level mask primitives shared by every pipeline stage.

Masks are plain numpy arrays, row-major:
  probability mask -- uint8, shape (H, W), values 0..255
  binary mask      -- uint8, shape (H, W), values {0, 1}
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Box:
    """Inclusive pixel box: (x0, y0) top-left, (x1, y1) bottom-right."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 <= self.x1 and 0 <= self.y0 <= self.y1):
            raise ValueError(f"invalid box {self!r}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, other: "Box") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class Region:
    """One connected component of a binary mask."""

    label: int
    area: int
    bbox: Box
    centroid: tuple[float, float]  # (x, y), sub-pixel
    pixel_offsets: np.ndarray       # sorted flat indices into the frame
    shape: tuple[int, int]          # (H, W) of the source frame

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape[0] * self.shape[1], dtype=np.uint8)
        m[self.pixel_offsets] = 1
        return m.reshape(self.shape)


class Overlap(NamedTuple):
    iou: float
    dice: float
    intersection: int
    union: int


def as_prob_mask(arr) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"probability mask must be 2-D and nonempty, got shape {a.shape}")
    if a.dtype != np.uint8:
        if a.min() < 0 or a.max() > 255:
            raise ValueError("probability mask values must lie in [0, 255]")
        a = a.astype(np.uint8)
    return a


def as_bin_mask(arr) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"binary mask must be 2-D and nonempty, got shape {a.shape}")
    a = a.astype(np.uint8, copy=False)
    if a.max(initial=0) > 1:
        raise ValueError("binary mask values must be 0 or 1")
    return a


def binarize(mask, tau_bin: int) -> np.ndarray:
    """Keep pixels strictly above tau_bin; pixels <= tau_bin become background."""
    if not 0 <= tau_bin <= 255:
        raise ValueError(f"tau_bin must be in [0, 255], got {tau_bin}")
    return (as_prob_mask(mask) > tau_bin).astype(np.uint8)


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def morph_close(mask, kernel_radius: int) -> np.ndarray:
    """Dilation then erosion with a square element; out-of-bounds reads as background."""
    if kernel_radius < 0:
        raise ValueError("kernel_radius must be >= 0")
    m = as_bin_mask(mask)
    if kernel_radius == 0:
        return m.copy()
    k = _square(kernel_radius)
    dilated = ndimage.binary_dilation(m.astype(bool), structure=k, border_value=0)
    closed = ndimage.binary_erosion(dilated, structure=k, border_value=0)
    return closed.astype(np.uint8)


def label_components(mask, connectivity: int = 8) -> list[Region]:
    """Connected components, labelled in raster order of each region's first pixel,
    returned sorted by descending area (ties by label)."""
    m = as_bin_mask(mask)
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=bool)
    elif connectivity == 4:
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labelled, n = ndimage.label(m, structure=structure)
    if n == 0:
        return []
    flat = labelled.ravel()
    h, w = m.shape
    regions = []
    first_seen = {}
    for raw in range(1, n + 1):
        offsets = np.flatnonzero(flat == raw)
        first_seen[raw] = offsets[0]
        ys, xs = np.divmod(offsets, w)
        bbox = Box(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
        regions.append((raw, offsets, bbox, (float(xs.mean()), float(ys.mean()))))
    # relabel by raster order of first pixel, independent of scipy's internal order
    order = sorted(first_seen, key=lambda r: first_seen[r])
    raster_label = {raw: i + 1 for i, raw in enumerate(order)}
    out = [
        Region(label=raster_label[raw], area=int(offsets.size), bbox=bbox,
               centroid=centroid, pixel_offsets=offsets, shape=(h, w))
        for raw, offsets, bbox, centroid in regions
    ]
    out.sort(key=lambda r: (-r.area, r.label))
    return out


MaskLike = Union[np.ndarray, Region, Box]


def _overlap_counts(a: MaskLike, b: MaskLike) -> tuple[int, int, int, int]:
    if isinstance(a, Box) and isinstance(b, Box):
        ix = max(0, min(a.x1, b.x1) - max(a.x0, b.x0) + 1)
        iy = max(0, min(a.y1, b.y1) - max(a.y0, b.y0) + 1)
        inter = ix * iy
        return inter, a.area, b.area, a.area + b.area - inter
    if isinstance(a, Region) and isinstance(b, Region):
        if a.shape != b.shape:
            raise ValueError(f"region shape mismatch: {a.shape} vs {b.shape}")
        inter = int(np.intersect1d(a.pixel_offsets, b.pixel_offsets,
                                   assume_unique=True).size)
        return inter, a.area, b.area, a.area + b.area - inter
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        ma, mb = as_bin_mask(a), as_bin_mask(b)
        if ma.shape != mb.shape:
            raise ValueError(f"mask shape mismatch: {ma.shape} vs {mb.shape}")
        inter = int(np.count_nonzero(ma & mb))
        na, nb = int(ma.sum()), int(mb.sum())
        return inter, na, nb, na + nb - inter
    raise TypeError(f"overlap operands must be the same kind, got {type(a)} and {type(b)}")


def overlap(a: MaskLike, b: MaskLike) -> Overlap:
    """IoU / Dice between two masks, regions or boxes of the same kind.

    Both empty -> iou = dice = 1.0; exactly one empty -> 0.0.
    """
    inter, na, nb, union = _overlap_counts(a, b)
    if na == 0 and nb == 0:
        return Overlap(1.0, 1.0, 0, 0)
    iou = inter / union if union else 0.0
    dice = 2 * inter / (na + nb)
    return Overlap(iou, dice, inter, union)


def min_enclosing_box(mask) -> Box:
    """Tightest box containing every foreground pixel."""
    m = as_bin_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        raise ValueError("no foreground")
    return Box(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def box_mask(box: Box, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    if box.x1 >= w or box.y1 >= h:
        raise ValueError(f"box {box} exceeds frame {w}x{h}")
    m = np.zeros((h, w), dtype=np.uint8)
    m[box.y0:box.y1 + 1, box.x0:box.x1 + 1] = 1
    return m
