"""Keypoint payload coding: IEEE binary16 quantization + DEFLATE.

Wire layout: ``uvarint(raw_byte_count) | DEFLATE stream``; the raw bytes are
the (m, 5) keypoint block as little-endian binary16, row-major and
keypoint-major (x, y, a, b, d per keypoint).  Each frame's keypoints are
compressed independently so any inter frame is decodable once its source
frame is.
"""

from __future__ import annotations

import logging
import zlib

import numpy as np

from .container import read_uvarint, write_uvarint
from .errors import DecodeError
from .motion import DET_FLOOR, KeypointSet, jacobian_floor

log = logging.getLogger(__name__)

BINARY16_MAX = 65504.0
_ZLIB_LEVEL = 6


def quantize_keypoints(kp: KeypointSet) -> np.ndarray:
    """Round-to-nearest-even binary16 block, shape (m, 5), dtype float16."""
    values = kp.values
    if np.max(np.abs(values)) > BINARY16_MAX:
        raise ValueError(f"keypoint magnitude exceeds binary16 range ({BINARY16_MAX:g})")
    return values.astype(np.float16)


def dequantize_block(block: np.ndarray) -> KeypointSet:
    """Lift a binary16 block back to float64 and re-check keypoint invariants.

    Positions are clamped to [-1, 1] and jacobians with |det| below the
    invertibility floor are re-regularized; both are logged.  Values coming
    out of :func:`quantize_keypoints` on valid keypoints pass through
    untouched.
    """
    values = np.asarray(block, dtype=np.float16).astype(np.float64)
    if values.ndim != 2 or values.shape[1] != 5:
        raise ValueError(f"keypoint block must be (m, 5), got {values.shape}")
    values = values.copy()
    pos = values[:, :2]
    if np.any(pos < -1.0) or np.any(pos > 1.0):
        log.warning("keypoint positions outside [-1, 1] clamped")
        np.clip(pos, -1.0, 1.0, out=pos)
    for k in range(values.shape[0]):
        a, b, d = values[k, 2:]
        a, b, d, changed = jacobian_floor(a, b, d)
        if changed:
            log.warning("near-singular jacobian of keypoint %d re-regularized (|det| < %g)", k, DET_FLOOR)
            values[k, 2:] = (a, b, d)
    return KeypointSet(values)


def encode_keypoints(block: np.ndarray) -> bytes:
    block = np.asarray(block)
    if block.dtype != np.float16:
        raise ValueError(f"keypoint block must be float16, got {block.dtype}")
    raw = block.astype("<f2").tobytes()
    return write_uvarint(len(raw)) + zlib.compress(raw, _ZLIB_LEVEL)


def decode_keypoints(data: bytes, num_keypoints: int) -> KeypointSet:
    raw_len, offset = read_uvarint(data, 0)
    try:
        raw = zlib.decompress(data[offset:])
    except zlib.error as exc:
        raise DecodeError(f"corrupt keypoint payload: {exc}") from exc
    if len(raw) != raw_len:
        raise DecodeError(f"keypoint payload length mismatch: got {len(raw)}, header says {raw_len}")
    if raw_len != num_keypoints * 5 * 2:
        raise DecodeError(
            f"element count mismatch: {raw_len // 2} values for {num_keypoints} keypoints"
        )
    block = np.frombuffer(raw, dtype="<f2").reshape(num_keypoints, 5)
    return dequantize_block(block)


def roundtrip_keypoints(kp: KeypointSet) -> KeypointSet:
    """The keypoints a decoder will see: quantize then dequantize.

    The encoder pushes every keypoint set through this before using it, so
    both sides of the link always work from identical values.
    """
    return dequantize_block(quantize_keypoints(kp))
