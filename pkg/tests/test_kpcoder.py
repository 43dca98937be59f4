import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from animcodec.errors import DecodeError
from animcodec.kpcoder import (
    decode_keypoints,
    dequantize_block,
    encode_keypoints,
    quantize_keypoints,
    roundtrip_keypoints,
)
from animcodec.motion import DET_FLOOR, KeypointSet, extract_keypoints


def _kp(rows):
    return KeypointSet(np.array(rows, dtype=np.float64))


def test_exact_binary16_codes():
    kp = _kp([[0.0, 1.0, 1.0, 0.0, 1.0]])
    block = quantize_keypoints(kp)
    bits = block.view(np.uint16)
    assert bits[0, 0] == 0x0000  # 0.0
    assert bits[0, 1] == 0x3C00  # 1.0
    assert float(block[0, 0]) == 0.0
    assert float(block[0, 1]) == 1.0


def test_point_one_rounds_to_nearest_half_float():
    kp = _kp([[0.1, 0.0, 1.0, 0.0, 1.0]])
    block = quantize_keypoints(kp)
    assert block.view(np.uint16)[0, 0] == 0x2E66
    decoded = float(block[0, 0])
    # nearest: closer than both binary16 neighbours, and within 2^-11 relative
    below = float(np.nextafter(np.float16(decoded), np.float16(-np.inf)))
    above = float(np.nextafter(np.float16(decoded), np.float16(np.inf)))
    assert abs(0.1 - decoded) <= min(abs(0.1 - below), abs(0.1 - above))
    assert abs(0.1 - decoded) <= 2**-11 * 0.1


def test_zero_block_compresses_small():
    kp = _kp([[0.0, 0.0, 1.0, 0.0, 1.0]] * 9)
    zero_block = np.zeros((9, 5), np.float16)
    assert len(encode_keypoints(zero_block)) < 20


def test_incompressible_block_stays_near_raw_size():
    rng = np.random.default_rng(8)
    block = rng.uniform(-1, 1, (9, 5)).astype(np.float16)
    data = encode_keypoints(block)
    assert len(data) <= 9 * 5 * 2 + 16


def test_round_trip_bit_exact_and_magnitude_guard():
    kp = extract_keypoints(helpers.natural_frame(3, size=64))
    block = quantize_keypoints(kp)
    back = decode_keypoints(encode_keypoints(block), len(kp))
    assert np.array_equal(quantize_keypoints(back), block)
    with pytest.raises(ValueError, match="binary16 range"):
        quantize_keypoints(_kp([[0.0, 0.0, 70000.0, 0.0, 1.0]]))


@settings(max_examples=50)
@given(seed=st.integers(0, 2**31 - 1), m=st.integers(1, 16))
def test_coding_is_lossless_past_quantization(seed, m):
    rng = np.random.default_rng(seed)
    rows = np.column_stack(
        [
            rng.uniform(-1, 1, m),
            rng.uniform(-1, 1, m),
            rng.uniform(0.5, 2.0, m),
            rng.uniform(-0.3, 0.3, m),
            rng.uniform(0.5, 2.0, m),
        ]
    )
    block = quantize_keypoints(_kp(rows))
    decoded = decode_keypoints(encode_keypoints(block), m)
    assert np.array_equal(quantize_keypoints(decoded), block)


def test_element_count_mismatch():
    block = np.zeros((9, 5), np.float16)
    data = encode_keypoints(block)
    with pytest.raises(DecodeError, match="element count mismatch"):
        decode_keypoints(data, 8)


def test_corrupt_stream():
    data = encode_keypoints(np.zeros((9, 5), np.float16))
    with pytest.raises(DecodeError, match="corrupt keypoint payload"):
        decode_keypoints(data[:1] + b"\x99" * 4, 9)


def test_near_singular_jacobian_is_reregularized(caplog):
    block = np.array([[0.0, 0.0, 1e-3, 0.0, 1e-3]], np.float16)
    with caplog.at_level(logging.WARNING, logger="animcodec.kpcoder"):
        kp = decode_keypoints(encode_keypoints(block), 1)
    assert any("re-regularized" in rec.message for rec in caplog.records)
    a, b, d = kp.jacobians[0]
    assert abs(a * d - b * b) >= DET_FLOOR * (1 - 1e-12)


def test_position_clamping(caplog):
    block = np.array([[1.5, -2.0, 1.0, 0.0, 1.0]], np.float16)
    with caplog.at_level(logging.WARNING, logger="animcodec.kpcoder"):
        kp = dequantize_block(block)
    assert kp.positions[0].tolist() == [1.0, -1.0]


def test_roundtrip_is_idempotent():
    kp = extract_keypoints(helpers.natural_frame(6, size=64))
    once = roundtrip_keypoints(kp)
    twice = roundtrip_keypoints(once)
    assert np.array_equal(once.values, twice.values)
