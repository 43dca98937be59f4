"""Deterministic synthetic fixtures shared across the test suite."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.ndimage import gaussian_filter

from animcodec.frames import FrameSequence, to_uint8
from animcodec.intra import decode_intra, encode_intra


def smooth_field(seed: int, shape, sigma: float = 8.0, low: float = 30.0, high: float = 225.0):
    """Band-limited random field scaled to [low, high], float64."""
    rng = np.random.default_rng(seed)
    f = gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    f = (f - f.min()) / max(f.max() - f.min(), 1e-12)
    return low + (high - low) * f


def natural_frame(seed: int, size: int = 256, sigma: float = 8.0):
    """A single natural-looking RGB frame: smooth texture per channel."""
    field = gaussian_filter(
        np.random.default_rng(seed).standard_normal((size, size, 3)), (sigma, sigma, 0), mode="wrap"
    )
    field = (field - field.min()) / (field.max() - field.min())
    return to_uint8(30.0 + 195.0 * field)


def drift_sequence(frames: int = 25, size: int = 256, step: int = 2, seed: int = 11, sigma: float = 10.0) -> FrameSequence:
    """Camera-pan: a window sliding over a larger smooth field, `step` px/frame."""
    rng = np.random.default_rng(seed)
    big = gaussian_filter(
        rng.standard_normal((size, size + frames * step, 3)), (sigma, sigma, 0), mode="wrap"
    )
    big = (big - big.min()) / (big.max() - big.min()) * 195.0 + 30.0
    stack = np.stack([to_uint8(big[:, t * step : t * step + size]) for t in range(frames)])
    return FrameSequence(stack, Fraction(25, 1))


def blob_sequence(frames: int = 25, size: int = 256, seed: int = 23) -> FrameSequence:
    """Talking-head-ish scene: static textured background plus swaying blobs."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    rng = np.random.default_rng(seed)
    tex = gaussian_filter(rng.standard_normal((size, size)), 18.0, mode="wrap")
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    out = []
    for t in range(frames):
        ph = 2.0 * np.pi * t / frames
        base = 40.0 + 60.0 * tex
        img = np.stack([base, base * 0.9 + 8.0, base * 1.05], axis=-1)
        blobs = [
            (size / 2 + 36 * np.sin(ph), size / 2 - 8 + 20 * np.cos(ph), 46, (160, 120, 90)),
            (96 + 14 * np.sin(2 * ph + 1), 170 + 10 * np.sin(ph), 24, (70, 130, 160)),
            (180 + 20 * np.cos(1.5 * ph), 80 + 16 * np.sin(ph + 2), 30, (150, 150, 60)),
        ]
        for cx, cy, r, color in blobs:
            g = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * r * r))
            for c in range(3):
                img[..., c] += color[c] * g
        out.append(to_uint8(img))
    return FrameSequence(np.stack(out), Fraction(25, 1))


def generation_stable_frame(seed: int = 3, qp: int = 30, size: int = 256):
    """A frame that re-encodes to itself at `qp` (a decode fixed point).

    Built by running one natural frame through two encode/decode generations;
    the result is byte-stable under further round trips at the same qp.
    """
    g1 = decode_intra(encode_intra(natural_frame(seed, size), qp))
    g2 = decode_intra(encode_intra(g1, qp))
    assert np.array_equal(g2, decode_intra(encode_intra(g2, qp)))
    return g2


def small_frames(seed: int, count: int, size: int = 64, sigma: float = 5.0):
    """Batch of small smooth frames for randomized oracle checks."""
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(count):
        f = gaussian_filter(rng.standard_normal((size, size, 3)), (sigma, sigma, 0), mode="wrap")
        f = (f - f.min()) / max(f.max() - f.min(), 1e-12)
        frames.append(to_uint8(20.0 + 215.0 * f))
    return frames
