#!/usr/bin/env python3
"""Regenerate the committed golden bitstream used by the regression test.

Writes tests/data/golden.dac plus tests/data/golden.json (header fields,
record count, and sha256 of the stream and of the decoded frame bytes).
Run from the repository root after any intentional codec change, then commit
both files.
"""

import hashlib
import json
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from animcodec.decoder import decode_sequence  # noqa: E402
from animcodec.encoder import EncoderConfig, encode_sequence  # noqa: E402
from animcodec.frames import FrameSequence, to_uint8  # noqa: E402

GOLDEN_CONFIG = dict(qp0=34, psnr_threshold=29.0, buffer_capacity=3, num_keypoints=9)


def golden_clip(frames: int = 8, size: int = 64, step: int = 2, seed: int = 77) -> FrameSequence:
    rng = np.random.default_rng(seed)
    big = gaussian_filter(
        rng.standard_normal((size, size + frames * step, 3)), (6.0, 6.0, 0.0), mode="wrap"
    )
    big = (big - big.min()) / (big.max() - big.min()) * 200.0 + 25.0
    stack = np.stack([to_uint8(big[:, t * step : t * step + size]) for t in range(frames)])
    return FrameSequence(stack)


def main() -> int:
    out_dir = ROOT / "tests" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    seq = golden_clip()
    result = encode_sequence(seq, EncoderConfig(**GOLDEN_CONFIG))
    decoded = decode_sequence(result.stream)
    assert np.array_equal(decoded.frames, result.reconstructions)

    (out_dir / "golden.dac").write_bytes(result.stream)
    meta = {
        "stream_sha256": hashlib.sha256(result.stream).hexdigest(),
        "decoded_sha256": hashlib.sha256(decoded.frames.tobytes()).hexdigest(),
        "frames": len(seq),
        "width": seq.width,
        "height": seq.height,
        "records_intra": sum(1 for s in result.stats if s.mode == "intra"),
        "config": GOLDEN_CONFIG,
    }
    (out_dir / "golden.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {out_dir / 'golden.dac'} ({len(result.stream)} bytes)")
    print(json.dumps(meta, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
