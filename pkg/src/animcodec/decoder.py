"""Decoder: mirror of the encoder's source-buffer state machine.

Intra records are decoded and pushed into the FIFO with keypoints
re-estimated from the decoded bytes (never transmitted); inter records fetch
the signalled slot and warp it with the received keypoints.  Inter
reconstructions never enter the buffer, so after every record the buffer is
byte-identical to the encoder's.  The best-slot search is not repeated here;
the encoder signals the slot explicitly.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .container import InterRecord, IntraRecord, Record, StreamHeader, read_stream
from .encoder import SourceBuffer, source_keypoints
from .errors import DecodeError
from .frames import Frame, FrameSequence
from .intra import decode_intra
from .kpcoder import decode_keypoints
from .motion import reconstruct


class Decoder:
    """Single-pass decoding state machine; one instance per stream."""

    def __init__(self, header: StreamHeader):
        self.header = header
        self.buffer = SourceBuffer(header.buffer_capacity)

    def decode_record(self, record: Record) -> Frame:
        header = self.header
        if isinstance(record, IntraRecord):
            frame = decode_intra(record.payload)
            if frame.shape[:2] != (header.height, header.width):
                raise DecodeError(
                    f"dimension mismatch: payload {frame.shape[:2]} vs header "
                    f"{(header.height, header.width)}"
                )
            self.buffer.push(
                frame, source_keypoints(frame, header.num_keypoints, header.sigma_heat)
            )
            return frame
        if isinstance(record, InterRecord):
            if record.source_slot >= len(self.buffer):
                raise DecodeError(
                    f"slot out of range: {record.source_slot} >= buffer occupancy {len(self.buffer)}"
                )
            kp = decode_keypoints(record.keypoint_data, header.num_keypoints)
            entry = self.buffer[record.source_slot]
            return reconstruct(entry.frame, entry.keypoints, kp, header.sigma_w, header.beta)
        raise DecodeError(f"unknown record type {type(record).__name__}")


def decode_sequence(data: bytes) -> FrameSequence:
    header, records = read_stream(data)
    decoder = Decoder(header)
    frames = [decoder.decode_record(record) for record in records]
    if frames:
        stack = np.stack(frames)
    else:
        stack = np.empty((0, header.height, header.width, 3), dtype=np.uint8)
    return FrameSequence(stack, Fraction(header.fps_num, header.fps_den))
