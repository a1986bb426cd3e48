"""Temporal-difference motion gating and red circle/square prompt overlays.

The mean absolute intensity difference between consecutive grayscale frames
(intensities in [0, 1]) gates static frames out of the pipeline. Remaining
frames get per-region visual prompts: circles for subtle motion, squares
for prominent motion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import BadThresholds, DimensionMismatch
from .frames import Frame

DEFAULT_PIXEL_THRESHOLD = 10.0 / 255.0
DEFAULT_MIN_AREA = 25
DILATION_RADIUS = 2

STROKE_RED = (255, 0, 0)  # RGB


@dataclass(frozen=True)
class MotionField:
    diffs: np.ndarray  # HxW absolute differences in [0, 1]
    proportion: float  # mean of diffs


@dataclass(frozen=True)
class MotionRegion:
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    mass: float  # sum of diffs inside region / (W*H)
    pixel_count: int


@dataclass(frozen=True)
class VisualPrompt:
    kind: str  # circle | square
    geometry: tuple  # (cx, cy, radius) or (x0, y0, x1, y1)
    stroke_width: int


@dataclass
class PromptedFrame:
    frame: Frame
    prompts: list[VisualPrompt]
    proportion: float
    rendered: np.ndarray  # HxWx3 uint8 RGB with overlays


def _check_dims(prev: np.ndarray, cur: np.ndarray) -> None:
    if prev.shape != cur.shape:
        raise DimensionMismatch(f"{prev.shape} vs {cur.shape}")


def motion_field(prev: np.ndarray, cur: np.ndarray) -> MotionField:
    prev = np.asarray(prev, dtype=np.float64)
    cur = np.asarray(cur, dtype=np.float64)
    _check_dims(prev, cur)
    diffs = np.abs(cur - prev)
    return MotionField(diffs=diffs, proportion=float(diffs.mean()))


def motion_proportion(prev: np.ndarray, cur: np.ndarray) -> float:
    """Sum of |F_t - F_{t-1}| over W*H, intensities in [0, 1]."""
    return motion_field(prev, cur).proportion


def gate(prev: np.ndarray, cur: np.ndarray, epsilon_motion: float = 7e-4) -> MotionField | None:
    """None when the frame is static (p strictly below epsilon); p == epsilon passes."""
    fld = motion_field(prev, cur)
    if fld.proportion < epsilon_motion:
        return None
    return fld


def motion_mask(fld: MotionField, pixel_threshold: float = DEFAULT_PIXEL_THRESHOLD) -> np.ndarray:
    """Binary mask of pixels whose diff meets the activation threshold."""
    return (fld.diffs >= pixel_threshold).astype(np.uint8)


def extract_regions(mask: np.ndarray, fld: MotionField,
                    min_area: int = DEFAULT_MIN_AREA) -> list[MotionRegion]:
    """Connected motion regions from a binary mask.

    One dilation pass (radius 2, square element) bridges small gaps, then
    4-connected components are labeled. Components smaller than min_area
    (pre-dilation pixel count) are dropped. Sorted by descending mass,
    ties by (y0, x0).
    """
    mask = np.asarray(mask, dtype=np.uint8)
    if mask.shape != fld.diffs.shape:
        raise DimensionMismatch(f"{mask.shape} vs {fld.diffs.shape}")
    if not mask.any():
        return []
    kernel = np.ones((2 * DILATION_RADIUS + 1, 2 * DILATION_RADIUS + 1), dtype=np.uint8)
    dilated = cv2.dilate(mask, kernel)
    n_labels, labels = cv2.connectedComponents(dilated, connectivity=4)
    h, w = mask.shape
    total = float(h * w)
    regions = []
    for lab in range(1, n_labels):
        component = labels == lab
        # original (undilated) pixels belonging to this component
        orig = component & (mask > 0)
        count = int(orig.sum())
        if count < min_area:
            continue
        ys, xs = np.nonzero(orig)
        bbox = (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
        mass = float(fld.diffs[orig].sum()) / total
        regions.append(MotionRegion(bbox=bbox, mass=mass, pixel_count=count))
    regions.sort(key=lambda r: (-r.mass, r.bbox[1], r.bbox[0]))
    return regions


def select_prompt(region_mass: float, epsilon_motion: float = 7e-4,
                  alpha_prompt: float = 1.2e-3) -> str | None:
    """Cue type by motion scale: none / circle (subtle) / square (prominent)."""
    if epsilon_motion >= alpha_prompt:
        raise BadThresholds(f"epsilon {epsilon_motion} >= alpha {alpha_prompt}")
    if region_mass <= epsilon_motion:
        return None
    if region_mass >= alpha_prompt:
        return "square"
    return "circle"


def stroke_width(w: int, h: int) -> int:
    return max(2, round(0.004 * min(w, h)))


def render_prompts(frame: Frame, color: np.ndarray, regions: list[MotionRegion],
                   kinds: list[str | None], proportion: float) -> PromptedFrame:
    """Overlay red prompts on a copy of the frame.

    Circles circumscribe the region bbox scaled by 1.2; squares expand the
    bbox by 10% per side. Geometry is clipped to the frame.
    """
    color = np.asarray(color)
    h, w = color.shape[:2]
    sw = stroke_width(w, h)
    rendered = color.copy()
    prompts: list[VisualPrompt] = []
    for region, kind in zip(regions, kinds):
        if kind is None:
            continue
        x0, y0, x1, y1 = region.bbox
        if kind == "circle":
            cx = (x0 + x1) / 2.0
            cy = (y0 + y1) / 2.0
            half_diag = math.hypot(x1 - x0 + 1, y1 - y0 + 1) / 2.0
            radius = max(1, int(round(1.2 * half_diag)))
            cv2.circle(rendered, (int(round(cx)), int(round(cy))), radius,
                       STROKE_RED, thickness=sw)
            prompts.append(VisualPrompt("circle", (int(round(cx)), int(round(cy)), radius), sw))
        elif kind == "square":
            bw = x1 - x0 + 1
            bh = y1 - y0 + 1
            ex0 = max(0, int(round(x0 - 0.1 * bw)))
            ey0 = max(0, int(round(y0 - 0.1 * bh)))
            ex1 = min(w - 1, int(round(x1 + 0.1 * bw)))
            ey1 = min(h - 1, int(round(y1 + 0.1 * bh)))
            cv2.rectangle(rendered, (ex0, ey0), (ex1, ey1), STROKE_RED, thickness=sw)
            prompts.append(VisualPrompt("square", (ex0, ey0, ex1, ey1), sw))
        else:
            raise ValueError(f"unknown prompt kind: {kind}")
    return PromptedFrame(frame=frame, prompts=prompts, proportion=proportion,
                         rendered=rendered)


def prompt_frame(frame: Frame, fld: MotionField,
                 epsilon_motion: float = 7e-4, alpha_prompt: float = 1.2e-3,
                 pixel_threshold: float = DEFAULT_PIXEL_THRESHOLD,
                 min_area: int = DEFAULT_MIN_AREA) -> PromptedFrame:
    """Full per-frame prompting: mask -> regions -> cue selection -> render."""
    mask = motion_mask(fld, pixel_threshold)
    regions = extract_regions(mask, fld, min_area)
    kinds = [select_prompt(r.mass, epsilon_motion, alpha_prompt) for r in regions]
    return render_prompts(frame, frame.load(), regions, kinds, fld.proportion)
