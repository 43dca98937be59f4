"""Raw video ingest and export: Y4M (YUV4MPEG2) and numbered image directories.

Y4M pixels are treated as full-range BT.601 YCbCr (C420 chroma is upsampled
nearest-neighbour, downsampled by 2x2 mean on write).  Image directories hold
lexicographically ordered PNG or PPM files and round-trip bit-exactly.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DecodeError
from .frames import Frame, FrameSequence, ensure_frame, rgb_to_ycbcr, to_uint8, ycbcr_to_rgb

_IMAGE_SUFFIXES = {".png", ".ppm"}


def load_sequence(path, format: str | None = None, fps=None) -> FrameSequence:
    """Load a video from a .y4m file or a directory of PNG/PPM images.

    ``fps`` applies to image directories only (default 25/1); a y4m header is
    authoritative for its own rate.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such input: {p}")
    if format is None:
        if p.is_dir():
            format = "image-dir"
        elif p.suffix.lower() == ".y4m":
            format = "y4m"
        else:
            raise ValueError(f"cannot infer format of {p}; pass format='y4m' or 'image-dir'")
    if format == "y4m":
        return read_y4m(p)
    if format == "image-dir":
        return read_image_dir(p, fps=fps)
    raise ValueError(f"unknown format {format!r}")


def save_sequence(seq: FrameSequence, path, format: str | None = None) -> None:
    p = Path(path)
    if format is None:
        format = "y4m" if p.suffix.lower() == ".y4m" else "image-dir"
    if format == "y4m":
        write_y4m(p, seq)
    elif format == "image-dir":
        write_image_dir(p, seq)
    else:
        raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# Y4M


def read_y4m(path) -> FrameSequence:
    data = Path(path).read_bytes()
    end = data.find(b"\n")
    if end < 0:
        raise DecodeError("malformed y4m header: no newline")
    tokens = data[:end].split(b" ")
    if tokens[0] != b"YUV4MPEG2":
        raise DecodeError("malformed y4m header: bad signature")
    width = height = 0
    fps = Fraction(25, 1)
    colorspace = "420"
    for tok in tokens[1:]:
        if not tok:
            continue
        key, val = tok[:1], tok[1:]
        if key == b"W":
            width = int(val)
        elif key == b"H":
            height = int(val)
        elif key == b"F":
            num, den = val.split(b":")
            fps = Fraction(int(num), int(den))
        elif key == b"C":
            cs = val.decode("ascii")
            if cs.startswith("420"):
                colorspace = "420"
            elif cs == "444":
                colorspace = "444"
            else:
                raise DecodeError(f"unsupported y4m colorspace C{cs}")
    if width <= 0 or height <= 0:
        raise DecodeError("malformed y4m header: missing dimensions")
    if colorspace == "420" and (width % 2 or height % 2):
        raise DecodeError("y4m 4:2:0 requires even dimensions")

    y_size = width * height
    c_size = y_size if colorspace == "444" else (width // 2) * (height // 2)
    frames = []
    offset = end + 1
    while offset < len(data):
        line_end = data.find(b"\n", offset)
        if line_end < 0 or not data[offset:line_end].startswith(b"FRAME"):
            raise DecodeError("malformed y4m frame marker")
        offset = line_end + 1
        if offset + y_size + 2 * c_size > len(data):
            raise DecodeError("truncated frame payload")
        y = np.frombuffer(data, np.uint8, y_size, offset).reshape(height, width)
        offset += y_size
        if colorspace == "444":
            cb = np.frombuffer(data, np.uint8, c_size, offset).reshape(height, width)
            cr = np.frombuffer(data, np.uint8, c_size, offset + c_size).reshape(height, width)
        else:
            ch, cw = height // 2, width // 2
            cb = np.frombuffer(data, np.uint8, c_size, offset).reshape(ch, cw)
            cr = np.frombuffer(data, np.uint8, c_size, offset + c_size).reshape(ch, cw)
            cb = cb.repeat(2, axis=0).repeat(2, axis=1)
            cr = cr.repeat(2, axis=0).repeat(2, axis=1)
        offset += 2 * c_size
        ycc = np.stack([y, cb, cr], axis=-1).astype(np.float64)
        frames.append(to_uint8(ycbcr_to_rgb(ycc)))
    if not frames:
        raise DecodeError("empty sequence")
    return FrameSequence.from_list(frames, fps)


def write_y4m(path, seq: FrameSequence, colorspace: str = "420") -> None:
    if colorspace not in ("420", "444"):
        raise ValueError(f"unsupported colorspace {colorspace!r}")
    h, w = seq.height, seq.width
    if colorspace == "420" and (w % 2 or h % 2):
        raise ValueError("y4m 4:2:0 output requires even dimensions")
    tag = "C420jpeg" if colorspace == "420" else "C444"
    header = f"YUV4MPEG2 W{w} H{h} F{seq.fps.numerator}:{seq.fps.denominator} Ip A1:1 {tag}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for frame in seq:
            ycc = rgb_to_ycbcr(frame)
            y = to_uint8(ycc[..., 0])
            cb, cr = ycc[..., 1], ycc[..., 2]
            if colorspace == "420":
                cb = (cb[0::2, 0::2] + cb[1::2, 0::2] + cb[0::2, 1::2] + cb[1::2, 1::2]) / 4.0
                cr = (cr[0::2, 0::2] + cr[1::2, 0::2] + cr[0::2, 1::2] + cr[1::2, 1::2]) / 4.0
            fh.write(b"FRAME\n")
            fh.write(y.tobytes())
            fh.write(to_uint8(cb).tobytes())
            fh.write(to_uint8(cr).tobytes())


# ---------------------------------------------------------------------------
# Image directories


def read_image_dir(path, fps=None) -> FrameSequence:
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not files:
        raise DecodeError("empty sequence")
    frames = []
    for f in files:
        with Image.open(f) as img:
            frames.append(np.asarray(img.convert("RGB")))
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DecodeError(f"inconsistent frame sizes: {sorted(shapes)}")
    return FrameSequence.from_list(frames, Fraction(fps) if fps else Fraction(25, 1))


def write_image_dir(path, seq: FrameSequence, ext: str = "png") -> None:
    if f".{ext}" not in _IMAGE_SUFFIXES:
        raise ValueError(f"unsupported image extension {ext!r}")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq):
        Image.fromarray(frame, "RGB").save(out / f"frame_{i:06d}.{ext}")


# ---------------------------------------------------------------------------
# Preprocessing


def resize_bilinear(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Separable half-pixel-centered bilinear resample to (height, width).

    Operates on float64; sample positions outside the source clamp to the edge.
    """
    src = np.asarray(image, dtype=np.float64)
    out_h, out_w = size

    def axis_coords(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1.0)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    ry0, ry1, fy = axis_coords(out_h, src.shape[0])
    cx0, cx1, fx = axis_coords(out_w, src.shape[1])
    fy = fy.reshape(-1, *([1] * (src.ndim - 1)))
    rows = src[ry0] * (1.0 - fy) + src[ry1] * fy
    fx = fx.reshape(-1, *([1] * (src.ndim - 2)))
    return rows[:, cx0] * (1.0 - fx) + rows[:, cx1] * fx


def preprocess(frame: Frame, target: tuple[int, int] = (256, 256)) -> Frame:
    """Center-crop to the largest square, then bilinearly resample to target (w, h).

    Idempotent on frames already at the target size.
    """
    frame = ensure_frame(frame)
    h, w = frame.shape[:2]
    side = min(h, w)
    top, left = (h - side) // 2, (w - side) // 2
    crop = frame[top : top + side, left : left + side]
    tw, th = target
    if (side, side) == (th, tw):
        return crop.copy()
    return to_uint8(resize_bilinear(crop, (th, tw)))
