"""Frame handles: lazy-loading references to images on disk or in memory."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np


@dataclass
class Frame:
    """One video frame, identified by id, backed by a file or an array."""

    frame_id: str
    scene_id: str = "default"
    seq: int = 0
    path: Path | None = None
    image: np.ndarray | None = None  # HxWx3 uint8, RGB
    label: int | None = None  # ground truth when known: 0 normal, 1 abnormal

    def load(self) -> np.ndarray:
        if self.image is None:
            if self.path is None:
                raise ValueError(f"frame {self.frame_id} has neither image nor path")
            bgr = cv2.imread(str(self.path), cv2.IMREAD_COLOR)
            if bgr is None:
                raise OSError(f"cannot read image: {self.path}")
            self.image = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
        return self.image


def to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma grayscale (0.299/0.587/0.114), intensities scaled to [0, 1]."""
    rgb = np.asarray(rgb)
    if rgb.ndim == 2:
        gray = rgb.astype(np.float64)
    else:
        weights = np.array([0.299, 0.587, 0.114])
        gray = rgb[..., :3].astype(np.float64) @ weights
    if rgb.dtype == np.uint8:
        gray = gray / 255.0
    return np.clip(gray, 0.0, 1.0)


def encode_png(rgb: np.ndarray) -> bytes:
    """Deterministic PNG bytes for embedding requests and dumps."""
    ok, buf = cv2.imencode(".png", cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    if not ok:
        raise OSError("PNG encode failed")
    return bytes(buf)
