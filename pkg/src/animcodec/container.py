"""Bit-exact .dac stream container.

All integers little-endian; varints are unsigned LEB128.

Header (33 bytes)::

    magic           4 bytes  "DACv"
    version         u8       currently 1
    width, height   u16 each
    fps_num/fps_den u16 each
    num_keypoints   u8
    buffer_capacity u8
    intra_tag       u8       still-codec tag used for intra payloads
    sigma_heat      f32      saliency blur (pixels)
    sigma_w         f32      flow blending kernel width (normalized)
    beta            f32      background motion weight
    qp0             u8       initial / refresh starting QP
    psnr_threshold  f32      intra-refresh PSNR threshold (dB)

Records, concatenated after the header::

    tag u8: 0 = intra, 1 = inter
    intra: qp u8 | payload_len uvarint | payload bytes
    inter: source_slot u8 | data_len uvarint | coded keypoint bytes

``source_slot`` indexes the source FIFO from oldest (0) to newest.  The
header carries every extraction parameter so a decoder re-estimates source
keypoints bit-exactly from decoded intra frames; no keypoints are ever
transmitted for intra frames.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .errors import DecodeError

MAGIC = b"DACv"
VERSION = 1

_HEADER_FMT = "<4sBHHHHBBBfffBf"
HEADER_SIZE = struct.calcsize(_HEADER_FMT)

TAG_INTRA = 0
TAG_INTER = 1


def write_uvarint(value: int) -> bytes:
    if value < 0:
        raise ValueError("varint value must be non-negative")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def read_uvarint(data: bytes, offset: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if offset >= len(data):
            raise DecodeError("truncated varint")
        byte = data[offset]
        offset += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, offset
        shift += 7
        if shift > 63:
            raise DecodeError("varint too long")


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    fps_num: int = 25
    fps_den: int = 1
    num_keypoints: int = 9
    buffer_capacity: int = 5
    intra_tag: int = 0x01
    sigma_heat: float = 2.0
    sigma_w: float = 0.1
    beta: float = 1.0
    qp0: int = 32
    psnr_threshold: float = 30.0
    version: int = VERSION

    def __post_init__(self):
        for name in ("width", "height", "fps_num", "fps_den"):
            v = getattr(self, name)
            if not 1 <= v <= 0xFFFF:
                raise ValueError(f"{name} must be in [1, 65535], got {v}")
        for name in ("num_keypoints", "intra_tag", "qp0"):
            v = getattr(self, name)
            if not 0 <= v <= 0xFF:
                raise ValueError(f"{name} must fit in one byte, got {v}")
        if not 1 <= self.buffer_capacity <= 0xFF:
            raise ValueError("buffer_capacity must be in [1, 255]")

    def pack(self) -> bytes:
        return struct.pack(
            _HEADER_FMT,
            MAGIC,
            self.version,
            self.width,
            self.height,
            self.fps_num,
            self.fps_den,
            self.num_keypoints,
            self.buffer_capacity,
            self.intra_tag,
            self.sigma_heat,
            self.sigma_w,
            self.beta,
            self.qp0,
            self.psnr_threshold,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "StreamHeader":
        if len(data) < HEADER_SIZE:
            raise DecodeError("truncated stream header")
        magic, version, w, h, fn, fd, m, cap, tag, sh, sw, beta, qp0, thr = struct.unpack_from(
            _HEADER_FMT, data, 0
        )
        if magic != MAGIC:
            raise DecodeError(f"bad magic {magic!r}")
        if version != VERSION:
            raise DecodeError(f"unsupported stream version {version}")
        return cls(w, h, fn, fd, m, cap, tag, sh, sw, beta, qp0, thr, version)


@dataclass(frozen=True)
class IntraRecord:
    qp: int
    payload: bytes
    tag: int = field(default=TAG_INTRA, init=False, repr=False)

    def serialize(self) -> bytes:
        return bytes([TAG_INTRA, self.qp]) + write_uvarint(len(self.payload)) + self.payload


@dataclass(frozen=True)
class InterRecord:
    source_slot: int
    keypoint_data: bytes
    tag: int = field(default=TAG_INTER, init=False, repr=False)

    def serialize(self) -> bytes:
        return (
            bytes([TAG_INTER, self.source_slot])
            + write_uvarint(len(self.keypoint_data))
            + self.keypoint_data
        )


Record = Union[IntraRecord, InterRecord]


def record_size(record: Record) -> int:
    """Serialized size in bytes, including the per-record framing."""
    body = record.payload if isinstance(record, IntraRecord) else record.keypoint_data
    return 2 + len(write_uvarint(len(body))) + len(body)


def write_stream(header: StreamHeader, records: Iterable[Record]) -> bytes:
    out = bytearray(header.pack())
    for record in records:
        out += record.serialize()
    return bytes(out)


def read_stream(data: bytes) -> tuple[StreamHeader, Iterator[Record]]:
    """Parse the header and return it with a lazy record iterator.

    The iterator yields every record that is complete in ``data`` and raises
    :class:`DecodeError` if trailing bytes form only a partial record.
    """
    header = StreamHeader.unpack(data)

    def records() -> Iterator[Record]:
        offset = HEADER_SIZE
        while offset < len(data):
            if offset + 2 > len(data):
                raise DecodeError("truncated record")
            tag, arg = data[offset], data[offset + 1]
            length, body_start = read_uvarint(data, offset + 2)
            if body_start + length > len(data):
                raise DecodeError("truncated record")
            body = data[body_start : body_start + length]
            offset = body_start + length
            if tag == TAG_INTRA:
                yield IntraRecord(arg, body)
            elif tag == TAG_INTER:
                if arg >= header.buffer_capacity:
                    raise DecodeError(
                        f"slot out of range: {arg} >= buffer capacity {header.buffer_capacity}"
                    )
                yield InterRecord(arg, body)
            else:
                raise DecodeError(f"unknown record tag {tag}")

    return header, records()


def measure_rate(records: Iterable[Record], fps, frame_count: int) -> float:
    """Bitrate in kbps: record bytes (framing included, header excluded) * 8 * fps / frames / 1000."""
    if frame_count <= 0:
        raise ValueError("frame_count must be positive")
    total_bits = 8 * sum(record_size(r) for r in records)
    return total_bits * float(fps) / frame_count / 1000.0
