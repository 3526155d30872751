"""Synthetic camouflage clips with exact ground truth, plus a coarse-mask
degradation model that emulates the error modes a refinement run has to
survive: boundary erosion/dilation, low-confidence halos, pseudo-target blobs,
dropped frames and attenuated confidence.

The standard suite at the bottom is a fixed, versioned list of twelve
(scene, degradation, seed) triples; trend and property tests reference its
cases by name so results stay reproducible.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

_RNG_TEXTURE = 21
_RNG_SHAPE = 22
_RNG_SHAKE = 23
_RNG_DEGRADE = 24


@dataclass(frozen=True)
class TargetSpec:
    shape: str                 # rect | ellipse | blob
    size: tuple[int, int]      # (height, width) of the shape's bounding box
    start: tuple[float, float]  # initial centre (y, x)
    velocity: tuple[float, float] = (0.0, 0.0)  # (dy, dx) per frame
    jitter: float = 0.0        # per-frame positional jitter sigma

    def __post_init__(self):
        if self.shape not in ("rect", "ellipse", "blob"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if min(self.size) < 3:
            raise ValueError("target size must be at least 3 px")


@dataclass(frozen=True)
class TextureSpec:
    bg_mean: float = 128.0
    bg_sigma: float = 28.0
    fg_delta: float = 4.0      # foreground mean offset; small = camouflaged
    fg_sigma: float = 28.0
    smoothing: float = 1.0     # gaussian smoothing of the noise field


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    frame_count: int
    targets: tuple[TargetSpec, ...]
    texture: TextureSpec = TextureSpec()
    occlusions: tuple[tuple[int, int, int], ...] = ()  # (target_idx, t0, t1) inclusive
    scene_cut: Optional[int] = None
    camera_shake: float = 0.0

    def __post_init__(self):
        if self.frame_count < 2:
            raise ValueError("frame_count must be >= 2")
        if self.width < 8 or self.height < 8:
            raise ValueError("scene too small")
        if not self.targets:
            raise ValueError("scene needs at least one target")
        for idx, t0, t1 in self.occlusions:
            if not (0 <= idx < len(self.targets) and 0 <= t0 <= t1 < self.frame_count):
                raise ValueError(f"bad occlusion ({idx},{t0},{t1})")


@dataclass(frozen=True)
class DegradationSpec:
    erode_range: tuple[int, int] = (0, 0)    # per-frame radius drawn from this range
    dilate_range: tuple[int, int] = (0, 0)
    blur_sigma: float = 0.0
    pseudo_prob: float = 0.0
    pseudo_size: tuple[int, int] = (3, 6)
    dropout_prob: float = 0.0
    attenuation: float = 1.0                  # scales the confidence ceiling

    def __post_init__(self):
        for p in (self.pseudo_prob, self.dropout_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must be in [0,1]")
        if self.erode_range[0] < 0 or self.dilate_range[0] < 0:
            raise ValueError("radii must be >= 0")
        if not 0.0 < self.attenuation <= 1.0:
            raise ValueError("attenuation must be in (0,1]")


def _shape_mask(shape: str, size: tuple[int, int], rng_shape: np.random.Generator) -> np.ndarray:
    """Unit shape stamp of the given size; blob outline is drawn once per target."""
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w]
    if shape == "rect":
        return np.ones((h, w), dtype=np.uint8)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    if shape == "ellipse":
        return (((yy - cy) / (h / 2.0)) ** 2 + ((xx - cx) / (w / 2.0)) ** 2 <= 1.0).astype(np.uint8)
    # blob: ellipse with a smooth random radial perturbation
    angles = np.arctan2(yy - cy, xx - cx)
    k = 3 + int(rng_shape.integers(0, 3))
    phase = rng_shape.uniform(0, 2 * np.pi)
    amp = rng_shape.uniform(0.12, 0.25)
    wobble = 1.0 + amp * np.sin(k * angles + phase)
    rr = ((yy - cy) / (h / 2.0)) ** 2 + ((xx - cx) / (w / 2.0)) ** 2
    return (rr <= wobble).astype(np.uint8)


def _stamp(canvas: np.ndarray, stamp: np.ndarray, center: tuple[int, int]) -> None:
    h, w = canvas.shape
    sh, sw = stamp.shape
    y0 = center[0] - sh // 2
    x0 = center[1] - sw // 2
    ys, xs = max(0, y0), max(0, x0)
    ye, xe = min(h, y0 + sh), min(w, x0 + sw)
    if ys >= ye or xs >= xe:
        return
    canvas[ys:ye, xs:xe] |= stamp[ys - y0:ye - y0, xs - x0:xe - x0]


def _texture(shape, spec: TextureSpec, rng: np.random.Generator, fg: bool) -> np.ndarray:
    mean = spec.bg_mean + (spec.fg_delta if fg else 0.0)
    sigma = spec.fg_sigma if fg else spec.bg_sigma
    field_ = rng.normal(mean, sigma, size=shape)
    if spec.smoothing > 0:
        field_ = ndimage.gaussian_filter(field_, spec.smoothing)
    return np.clip(field_, 0, 255)


def generate_scene(spec: SceneSpec, seed: int) -> tuple[list[np.ndarray], list[list[np.ndarray]]]:
    """Render frames and exact per-target ground-truth masks.

    Returns (frames, gt) with gt[target][frame] a {0,1} mask; occluded frames
    are empty for the occluded target.
    """
    shape = (spec.height, spec.width)
    occluded = {(idx, t) for idx, t0, t1 in spec.occlusions for t in range(t0, t1 + 1)}
    stamps = [_shape_mask(tg.shape, tg.size, np.random.default_rng([seed, _RNG_SHAPE, i]))
              for i, tg in enumerate(spec.targets)]
    frames: list[np.ndarray] = []
    gt: list[list[np.ndarray]] = [[] for _ in spec.targets]
    for t in range(spec.frame_count):
        shake_rng = np.random.default_rng([seed, _RNG_SHAKE, t])
        shake = (shake_rng.normal(0, spec.camera_shake, size=2)
                 if spec.camera_shake > 0 else np.zeros(2))
        # scene cut re-seeds the background texture stream
        tex_epoch = 1 if spec.scene_cut is not None and t >= spec.scene_cut else 0
        tex_rng = np.random.default_rng([seed, _RNG_TEXTURE, tex_epoch, t])
        frame = _texture(shape, spec.texture, tex_rng, fg=False)
        fg_tex = _texture(shape, spec.texture, tex_rng, fg=True)
        for i, tg in enumerate(spec.targets):
            mask = np.zeros(shape, dtype=np.uint8)
            if (i, t) not in occluded:
                jit_rng = np.random.default_rng([seed, _RNG_SHAPE, i, t])
                jitter = (jit_rng.normal(0, tg.jitter, size=2) if tg.jitter > 0 else np.zeros(2))
                cy = tg.start[0] + tg.velocity[0] * t + jitter[0] + shake[0]
                cx = tg.start[1] + tg.velocity[1] * t + jitter[1] + shake[1]
                half_h, half_w = tg.size[0] / 2.0, tg.size[1] / 2.0
                cy = float(np.clip(cy, half_h + 1, spec.height - half_h - 2))
                cx = float(np.clip(cx, half_w + 1, spec.width - half_w - 2))
                _stamp(mask, stamps[i], (round(cy), round(cx)))
            gt[i].append(mask)
            frame = np.where(mask, fg_tex, frame)
        frames.append(frame.astype(np.uint8))
    return frames, gt


def _place_pseudo(occupied: np.ndarray, size_range, rng) -> Optional[np.ndarray]:
    """Blob disjoint from occupied pixels (with a safety margin so closing
    cannot merge it into the target); None if no spot is found."""
    h, w = occupied.shape
    margin = 6
    keepout = ndimage.binary_dilation(occupied.astype(bool), iterations=margin)
    for _ in range(20):
        r = int(rng.integers(size_range[0], size_range[1] + 1))
        cy = int(rng.integers(r + 1, h - r - 1))
        cx = int(rng.integers(r + 1, w - r - 1))
        yy, xx = np.mgrid[0:h, 0:w]
        blob = ((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r)
        if not (blob & keepout).any():
            return blob.astype(np.uint8)
    return None


def degrade(gt: Sequence[Sequence[np.ndarray]], spec: DegradationSpec,
            seed: int) -> list[np.ndarray]:
    """Coarse probability masks from per-target ground truth; frame t depends
    only on (seed, t)."""
    frame_count = len(gt[0])
    out = []
    for t in range(frame_count):
        rng = np.random.default_rng([seed, _RNG_DEGRADE, t])
        union = np.zeros_like(gt[0][t])
        for frames in gt:
            union |= frames[t]
        if rng.random() < spec.dropout_prob:
            out.append(np.zeros(union.shape, dtype=np.uint8))
            continue
        mask = union.astype(bool)
        er = int(rng.integers(spec.erode_range[0], spec.erode_range[1] + 1))
        di = int(rng.integers(spec.dilate_range[0], spec.dilate_range[1] + 1))
        if er > 0 and mask.any():
            k = np.ones((2 * er + 1, 2 * er + 1), dtype=bool)
            mask = ndimage.binary_erosion(mask, structure=k, border_value=0)
        if di > 0 and mask.any():
            k = np.ones((2 * di + 1, 2 * di + 1), dtype=bool)
            mask = ndimage.binary_dilation(mask, structure=k, border_value=0)
        conf = mask.astype(np.float64) * 255.0
        if spec.blur_sigma > 0:
            conf = ndimage.gaussian_filter(conf, spec.blur_sigma)
        conf *= spec.attenuation
        if spec.pseudo_prob > 0 and rng.random() < spec.pseudo_prob:
            blob = _place_pseudo(union, spec.pseudo_size, rng)
            if blob is not None:
                blob_conf = blob.astype(np.float64) * 220.0
                if spec.blur_sigma > 0:
                    blob_conf = ndimage.gaussian_filter(blob_conf, spec.blur_sigma)
                conf = np.maximum(conf, blob_conf)
        out.append(np.clip(conf, 0, 255).astype(np.uint8))
    return out


def pseudo_frames(spec: DegradationSpec, gt, seed: int) -> list[int]:
    """Frames where the degradation stream actually inserted a pseudo blob."""
    frames = []
    for t in range(len(gt[0])):
        rng = np.random.default_rng([seed, _RNG_DEGRADE, t])
        union = np.zeros_like(gt[0][t])
        for fr in gt:
            union |= fr[t]
        if rng.random() < spec.dropout_prob:
            continue
        rng.integers(spec.erode_range[0], spec.erode_range[1] + 1)
        rng.integers(spec.dilate_range[0], spec.dilate_range[1] + 1)
        if spec.pseudo_prob > 0 and rng.random() < spec.pseudo_prob:
            if _place_pseudo(union, spec.pseudo_size, rng) is not None:
                frames.append(t)
    return frames


# --- JSON forms ---

def scene_to_json(spec: SceneSpec) -> dict:
    return asdict(spec)


def scene_from_json(doc: dict) -> SceneSpec:
    targets = tuple(TargetSpec(shape=t["shape"], size=tuple(t["size"]),
                               start=tuple(t["start"]),
                               velocity=tuple(t.get("velocity", (0.0, 0.0))),
                               jitter=float(t.get("jitter", 0.0)))
                    for t in doc["targets"])
    texture = TextureSpec(**doc.get("texture", {}))
    return SceneSpec(width=doc["width"], height=doc["height"],
                     frame_count=doc["frame_count"], targets=targets, texture=texture,
                     occlusions=tuple(tuple(o) for o in doc.get("occlusions", ())),
                     scene_cut=doc.get("scene_cut"),
                     camera_shake=float(doc.get("camera_shake", 0.0)))


def degradation_to_json(spec: DegradationSpec) -> dict:
    return asdict(spec)


def degradation_from_json(doc: dict) -> DegradationSpec:
    kwargs = dict(doc)
    for key in ("erode_range", "dilate_range", "pseudo_size"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return DegradationSpec(**kwargs)


# --- the standard suite ---

@dataclass(frozen=True)
class SuiteCase:
    name: str
    scene: SceneSpec
    degradation: DegradationSpec
    seed: int
    tags: tuple[str, ...] = ()


def _single(shape, size, start, velocity, jitter=0.0, **scene_kwargs):
    return SceneSpec(width=96, height=72, frame_count=14,
                     targets=(TargetSpec(shape, size, start, velocity, jitter),),
                     **scene_kwargs)


def standard_suite() -> list[SuiteCase]:
    """Twelve fixed cases; names and parameters are stable across releases."""
    mild = DegradationSpec(erode_range=(0, 1), blur_sigma=0.8)
    noisy = DegradationSpec(erode_range=(1, 2), dilate_range=(0, 1), blur_sigma=1.2,
                            attenuation=0.85)
    return [
        SuiteCase("rect_cruise", _single("rect", (16, 22), (30, 24), (0.0, 2.0)),
                  mild, seed=101, tags=("clean",)),
        SuiteCase("ellipse_drift", _single("ellipse", (20, 26), (34, 30), (0.8, 1.6)),
                  mild, seed=102, tags=("clean",)),
        SuiteCase("blob_wander", _single("blob", (22, 22), (36, 48), (0.0, 0.0), jitter=1.0),
                  noisy, seed=103, tags=("noisy",)),
        SuiteCase("rect_occlusion",
                  _single("rect", (14, 18), (30, 26), (0.0, 1.5), occlusions=((0, 6, 7),)),
                  mild, seed=104, tags=("occlusion",)),
        SuiteCase("two_targets_parallel",
                  SceneSpec(width=112, height=80, frame_count=14,
                            targets=(TargetSpec("ellipse", (18, 22), (20, 26), (0.0, 2.0)),
                                     TargetSpec("ellipse", (18, 22), (58, 26), (0.0, 2.0)))),
                  mild, seed=105, tags=("multi",)),
        SuiteCase("two_targets_crossing",
                  SceneSpec(width=128, height=80, frame_count=30,
                            targets=(TargetSpec("ellipse", (18, 24), (22, 20), (0.0, 3.0)),
                                     TargetSpec("ellipse", (18, 24), (56, 44), (0.0, 1.0)))),
                  mild, seed=106, tags=("multi", "crossing")),
        SuiteCase("pseudo_flicker",
                  _single("ellipse", (20, 24), (34, 30), (0.6, 1.4)),
                  DegradationSpec(erode_range=(0, 1), blur_sigma=0.8, pseudo_prob=0.30,
                                  pseudo_size=(3, 5)),
                  seed=107, tags=("pseudo", "noisy")),
        SuiteCase("pseudo_heavy",
                  _single("blob", (22, 24), (34, 34), (0.5, 1.0)),
                  DegradationSpec(erode_range=(0, 1), blur_sigma=0.8, pseudo_prob=0.42,
                                  pseudo_size=(3, 6)),
                  seed=106, tags=("pseudo", "noisy")),
        SuiteCase("dropout_frames",
                  _single("ellipse", (20, 24), (32, 28), (0.8, 1.8)),
                  DegradationSpec(erode_range=(0, 1), blur_sigma=0.8, dropout_prob=0.2),
                  seed=109, tags=("dropout",)),
        SuiteCase("camera_shake",
                  _single("ellipse", (20, 26), (34, 36), (0.0, 1.2), camera_shake=1.5),
                  mild, seed=110, tags=("shake",)),
        SuiteCase("scene_cut",
                  _single("blob", (20, 24), (34, 34), (0.4, 1.6), scene_cut=7),
                  mild, seed=111, tags=("cut",)),
        SuiteCase("big_ellipse_noisy",
                  _single("ellipse", (26, 34), (36, 40), (0.5, 1.0)),
                  DegradationSpec(erode_range=(1, 3), dilate_range=(0, 1), blur_sigma=1.5,
                                  attenuation=0.8),
                  seed=112, tags=("noisy",)),
    ]


def suite_case(name: str) -> SuiteCase:
    for case in standard_suite():
        if case.name == name:
            return case
    raise KeyError(f"no suite case named {name!r}")


def suite_to_json() -> str:
    return json.dumps([{"name": c.name, "seed": c.seed, "tags": list(c.tags),
                        "scene": scene_to_json(c.scene),
                        "degradation": degradation_to_json(c.degradation)}
                       for c in standard_suite()], indent=2)
