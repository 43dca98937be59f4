from fractions import Fraction

import numpy as np
import pytest

import helpers
from animcodec.errors import DecodeError
from animcodec.frames import FrameSequence
from animcodec.media_io import (
    load_sequence,
    preprocess,
    read_y4m,
    resize_bilinear,
    save_sequence,
    write_y4m,
)


def _small_seq(n=3, size=32, seed=2):
    frames = helpers.small_frames(seed, n, size=size)
    return FrameSequence.from_list(frames, Fraction(30000, 1001))


def test_y4m_round_trip_header_and_count(tmp_path):
    seq = _small_seq()
    path = tmp_path / "clip.y4m"
    write_y4m(path, seq)
    back = load_sequence(path)
    assert len(back) == 3
    assert back.fps == Fraction(30000, 1001)
    assert back.width == seq.width and back.height == seq.height
    # 4:2:0 chroma round trip is lossy but close
    assert np.mean(np.abs(back.frames.astype(int) - seq.frames.astype(int))) < 4.0


def test_y4m_444_round_trip_is_tight(tmp_path):
    seq = _small_seq()
    path = tmp_path / "clip444.y4m"
    write_y4m(path, seq, colorspace="444")
    back = read_y4m(path)
    assert np.max(np.abs(back.frames.astype(int) - seq.frames.astype(int))) <= 1


def test_y4m_truncated_frame(tmp_path):
    seq = _small_seq()
    path = tmp_path / "clip.y4m"
    write_y4m(path, seq)
    data = path.read_bytes()
    path.write_bytes(data[:-10])
    with pytest.raises(DecodeError, match="truncated frame payload"):
        read_y4m(path)


def test_y4m_header_errors(tmp_path):
    path = tmp_path / "bad.y4m"
    path.write_bytes(b"NOTY4M W4 H4\nFRAME\n" + b"\x00" * 24)
    with pytest.raises(DecodeError, match="signature"):
        read_y4m(path)
    path.write_bytes(b"YUV4MPEG2 W4 H4 F25:1\n")
    with pytest.raises(DecodeError, match="empty sequence"):
        read_y4m(path)


def test_image_dir_round_trip_bit_exact(tmp_path):
    seq = _small_seq(n=10)
    out = tmp_path / "frames"
    save_sequence(seq, out, format="image-dir")
    back = load_sequence(out, fps=30)
    assert len(back) == 10
    assert back.fps == Fraction(30)
    assert np.array_equal(back.frames, seq.frames)
    # default fps when none is given
    assert load_sequence(out).fps == Fraction(25)


def test_load_sequence_missing_input(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_sequence(tmp_path / "nope.y4m")


def test_preprocess_identity_and_idempotence():
    frame = helpers.natural_frame(4, size=256)
    out = preprocess(frame)
    assert np.array_equal(out, frame)
    assert np.array_equal(preprocess(out), out)


def test_preprocess_crop_only_for_wide_input():
    frame = helpers.natural_frame(6, size=320)[:256, :, :]  # 256 x 320
    out = preprocess(frame)
    assert out.shape == (256, 256, 3)
    assert np.array_equal(out, frame[:, 32 : 32 + 256])


def test_preprocess_2x_downscale_matches_box_filter_oracle():
    frame = helpers.natural_frame(8, size=512)
    out = preprocess(frame)
    blocks = frame.reshape(256, 2, 256, 2, 3).astype(np.float64)
    box = blocks.mean(axis=(1, 3))
    expected = np.clip(np.floor(box + 0.5), 0, 255).astype(np.uint8)
    assert np.array_equal(out, expected)


def test_resize_bilinear_identity():
    img = np.arange(48, dtype=np.float64).reshape(4, 4, 3)
    assert np.allclose(resize_bilinear(img, (4, 4)), img)
