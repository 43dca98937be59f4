"""Frame primitives: 8-bit RGB rasters, sequences, and shared color math."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

Frame = np.ndarray
"""A picture: (height, width, 3) uint8 array, RGB channel order."""

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def ensure_frame(frame: Frame) -> Frame:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError(f"frame must have shape (h, w, 3), got {frame.shape}")
    if frame.dtype != np.uint8:
        raise ValueError(f"frame must be uint8, got {frame.dtype}")
    if frame.shape[0] < 2 or frame.shape[1] < 2:
        raise ValueError(f"frame must be at least 2x2, got {frame.shape[:2]}")
    return frame


def luma(frame: Frame) -> np.ndarray:
    """BT.601 luma plane of an RGB frame, as float64."""
    return ensure_frame(frame).astype(np.float64) @ _LUMA_WEIGHTS


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Round half up and clamp to the 8-bit sample range."""
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)


def rgb_to_ycbcr(frame: Frame) -> np.ndarray:
    """Full-range BT.601 RGB -> YCbCr, float64, nominally in [0, 255]."""
    rgb = np.asarray(frame).astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_ycbcr`; float64, not clamped."""
    y, cb, cr = ycc[..., 0], ycc[..., 1] - 128.0, ycc[..., 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


@dataclass(frozen=True)
class FrameSequence:
    """Frames in display order plus a rational frame rate.

    ``frames`` is a (t, h, w, 3) uint8 array; all frames share dimensions by
    construction.  ``fps`` must be positive.
    """

    frames: np.ndarray
    fps: Fraction = Fraction(25, 1)

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise ValueError(f"frames must have shape (t, h, w, 3), got {frames.shape}")
        if frames.dtype != np.uint8:
            raise ValueError(f"frames must be uint8, got {frames.dtype}")
        fps = Fraction(self.fps)
        if fps <= 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", fps)

    @classmethod
    def from_list(cls, frames, fps=Fraction(25, 1)) -> "FrameSequence":
        frames = [ensure_frame(f) for f in frames]
        if not frames:
            raise ValueError("empty sequence")
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise ValueError(f"inconsistent frame sizes: {sorted(shapes)}")
        return cls(np.stack(frames), Fraction(fps))

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __getitem__(self, index: int) -> Frame:
        return self.frames[index]

    def __iter__(self):
        return iter(self.frames)
