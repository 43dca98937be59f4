"""Encoder: open-loop keypoint coding with adaptive intra refresh.

Frame 0 is always intra at qp0.  For every later frame the encoder extracts
keypoints, reconstructs the frame from every buffered source, and keeps the
best PSNR.  Above the threshold it signals (slot, coded keypoints); otherwise
it refreshes: the frame is intra-coded, lowering QP one unit at a time from
qp0 until the decoded PSNR meets the threshold (or QP bottoms out), and the
decoded frame joins the FIFO source buffer.

The buffer only ever holds *decoded* frames, and their keypoints are
re-extracted from those decoded bytes and passed through the same 16-bit
quantization as transmitted keypoints — so the decoder, which repeats both
steps, stays byte-identical to the encoder's own simulation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .container import IntraRecord, InterRecord, Record, StreamHeader, measure_rate, record_size, write_stream
from .frames import Frame, FrameSequence, ensure_frame
from .intra import TAG_REFERENCE_DCT, check_qp, decode_intra, encode_intra
from .kpcoder import encode_keypoints, quantize_keypoints, roundtrip_keypoints
from .metrics import psnr
from .motion import KeypointSet, extract_keypoints, reconstruct

MODE_INTRA = "intra"
MODE_INTER = "inter"

STATS_FIELDS = ["frame", "mode", "slot", "qp", "bits", "psnr_db"]


@dataclass(frozen=True)
class EncoderConfig:
    qp0: int = 32
    psnr_threshold: float = 30.0  # dB; refresh when no source reconstructs above it
    buffer_capacity: int = 5
    qp_min: int = 0
    num_keypoints: int = 9
    sigma_heat: float = 2.0
    sigma_w: float = 0.1
    beta: float = 1.0
    intra_tag: int = TAG_REFERENCE_DCT

    def __post_init__(self):
        check_qp(self.qp0)
        check_qp(self.qp_min)
        if self.psnr_threshold <= 0:
            raise ValueError("psnr_threshold must be > 0")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")
        if self.num_keypoints < 1:
            raise ValueError("num_keypoints must be >= 1")

    def header(self, width: int, height: int, fps=Fraction(25, 1)) -> StreamHeader:
        fps = Fraction(fps)
        return StreamHeader(
            width=width,
            height=height,
            fps_num=fps.numerator,
            fps_den=fps.denominator,
            num_keypoints=self.num_keypoints,
            buffer_capacity=self.buffer_capacity,
            intra_tag=self.intra_tag,
            sigma_heat=self.sigma_heat,
            sigma_w=self.sigma_w,
            beta=self.beta,
            qp0=self.qp0,
            psnr_threshold=self.psnr_threshold,
        )

    @classmethod
    def from_header(cls, header: StreamHeader) -> "EncoderConfig":
        return cls(
            qp0=header.qp0,
            psnr_threshold=header.psnr_threshold,
            buffer_capacity=header.buffer_capacity,
            num_keypoints=header.num_keypoints,
            sigma_heat=header.sigma_heat,
            sigma_w=header.sigma_w,
            beta=header.beta,
            intra_tag=header.intra_tag,
        )


@dataclass(frozen=True)
class BufferEntry:
    frame: Frame
    keypoints: KeypointSet


class SourceBuffer:
    """FIFO of decoded source frames and their keypoints; slot 0 is oldest."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: list[BufferEntry] = []

    def push(self, frame: Frame, keypoints: KeypointSet) -> None:
        if len(self.entries) == self.capacity:
            self.entries.pop(0)
        self.entries.append(BufferEntry(frame, keypoints))

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, slot: int) -> BufferEntry:
        return self.entries[slot]


def source_keypoints(frame: Frame, num_keypoints: int, sigma_heat: float) -> KeypointSet:
    """Keypoints a buffered source carries: extracted from the decoded frame,
    then passed through the 16-bit pipeline like any transmitted keypoints."""
    return roundtrip_keypoints(extract_keypoints(frame, num_keypoints, sigma_heat))


def select_best_source(
    buffer: SourceBuffer,
    target: Frame,
    target_kp: KeypointSet,
    sigma_w: float = 0.1,
    beta: float = 1.0,
) -> tuple[int, Frame, float]:
    """Reconstruct the target from every buffered source; keep the best PSNR.

    Returns (slot, reconstruction, psnr_db).  Ties go to the newest entry.
    """
    if not len(buffer):
        raise ValueError("source buffer is empty")
    best = None
    for slot in range(len(buffer)):
        entry = buffer[slot]
        candidate = reconstruct(entry.frame, entry.keypoints, target_kp, sigma_w, beta)
        score = psnr(candidate, target)
        if best is None or score >= best[2]:
            best = (slot, candidate, score)
    return best


def refine_intra_qp(
    frame: Frame,
    psnr_threshold: float,
    qp0: int,
    qp_min: int = 0,
    tag: int = TAG_REFERENCE_DCT,
) -> tuple[int, bytes, Frame, bool]:
    """Walk QP down one unit at a time from qp0 until decoded PSNR meets the threshold.

    Returns (qp, payload, decoded_frame, constraint_met); if even qp_min falls
    short the qp_min result is returned with constraint_met False.
    """
    if psnr_threshold <= 0:
        raise ValueError("psnr_threshold must be > 0")
    qp = check_qp(qp0)
    qp_min = check_qp(qp_min)
    if qp < qp_min:
        raise ValueError(f"qp0 {qp} below qp_min {qp_min}")
    while True:
        payload = encode_intra(frame, qp, tag)
        decoded = decode_intra(payload)
        if psnr(frame, decoded) >= psnr_threshold:
            return qp, payload, decoded, True
        if qp == qp_min:
            return qp, payload, decoded, False
        qp -= 1


@dataclass(frozen=True)
class FrameStat:
    frame: int
    mode: str
    slot: int | None
    qp: int | None
    bits: int
    psnr_db: float
    intra_constraint_met: bool | None = None

    def csv_row(self) -> dict:
        return {
            "frame": self.frame,
            "mode": self.mode,
            "slot": "" if self.slot is None else self.slot,
            "qp": "" if self.qp is None else self.qp,
            "bits": self.bits,
            "psnr_db": f"{self.psnr_db:.4f}",
        }


@dataclass
class EncodeResult:
    header: StreamHeader
    records: list[Record]
    stats: list[FrameStat]
    reconstructions: np.ndarray  # (t, h, w, 3) uint8: the decoder's exact outputs
    stream: bytes
    rate_kbps: float


class Encoder:
    """Sequential encoding state machine; one instance per stream."""

    def __init__(self, cfg: EncoderConfig, width: int, height: int):
        self.cfg = cfg
        self.width = width
        self.height = height
        self.buffer = SourceBuffer(cfg.buffer_capacity)
        self.frame_index = 0

    def _push_source(self, decoded: Frame) -> None:
        kp = source_keypoints(decoded, self.cfg.num_keypoints, self.cfg.sigma_heat)
        self.buffer.push(decoded, kp)

    def encode_frame(self, frame: Frame) -> tuple[Record, Frame, FrameStat]:
        """Encode one frame, returning (record, reconstruction, stat).

        The reconstruction is byte-identical to what a decoder produces for
        the same record.
        """
        frame = ensure_frame(frame)
        if frame.shape[:2] != (self.height, self.width):
            raise ValueError(
                f"frame {frame.shape[:2]} does not match stream {(self.height, self.width)}"
            )
        cfg = self.cfg
        index = self.frame_index
        self.frame_index += 1

        if not len(self.buffer):  # first frame: plain intra at qp0
            payload = encode_intra(frame, cfg.qp0, cfg.intra_tag)
            decoded = decode_intra(payload)
            self._push_source(decoded)
            record = IntraRecord(cfg.qp0, payload)
            stat = FrameStat(index, MODE_INTRA, None, cfg.qp0, 8 * record_size(record), psnr(frame, decoded))
            return record, decoded, stat

        kp = extract_keypoints(frame, cfg.num_keypoints, cfg.sigma_heat)
        block = quantize_keypoints(kp)
        kp_sent = roundtrip_keypoints(kp)
        slot, recon, score = select_best_source(self.buffer, frame, kp_sent, cfg.sigma_w, cfg.beta)
        if score > cfg.psnr_threshold:
            record = InterRecord(slot, encode_keypoints(block))
            stat = FrameStat(index, MODE_INTER, slot, None, 8 * record_size(record), score)
            return record, recon, stat

        qp, payload, decoded, met = refine_intra_qp(
            frame, cfg.psnr_threshold, cfg.qp0, cfg.qp_min, cfg.intra_tag
        )
        self._push_source(decoded)
        record = IntraRecord(qp, payload)
        stat = FrameStat(
            index, MODE_INTRA, None, qp, 8 * record_size(record), psnr(frame, decoded), met
        )
        return record, decoded, stat


def encode_sequence(seq: FrameSequence, cfg: EncoderConfig | None = None) -> EncodeResult:
    cfg = cfg or EncoderConfig()
    if len(seq) == 0:
        raise ValueError("empty sequence")
    encoder = Encoder(cfg, seq.width, seq.height)
    records: list[Record] = []
    stats: list[FrameStat] = []
    recons = np.empty_like(seq.frames)
    for t, frame in enumerate(seq):
        record, recon, stat = encoder.encode_frame(frame)
        records.append(record)
        stats.append(stat)
        recons[t] = recon
    header = cfg.header(seq.width, seq.height, seq.fps)
    stream = write_stream(header, records)
    rate = measure_rate(records, seq.fps, len(seq))
    return EncodeResult(header, records, stats, recons, stream, rate)


def write_stats_csv(path, stats: list[FrameStat]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STATS_FIELDS)
        writer.writeheader()
        for stat in stats:
            writer.writerow(stat.csv_row())
