"""Regression against the committed golden bitstream.

Regenerate with ``python scripts/make_golden.py`` after intentional codec
changes and commit both files.
"""

import hashlib
import json
from pathlib import Path

from animcodec.container import IntraRecord, read_stream
from animcodec.decoder import decode_sequence

DATA = Path(__file__).parent / "data"


def test_golden_stream_decodes_to_recorded_bytes():
    stream = (DATA / "golden.dac").read_bytes()
    meta = json.loads((DATA / "golden.json").read_text())
    assert hashlib.sha256(stream).hexdigest() == meta["stream_sha256"]

    header, records = read_stream(stream)
    records = list(records)
    assert header.width == meta["width"] and header.height == meta["height"]
    assert len(records) == meta["frames"]
    assert sum(1 for r in records if isinstance(r, IntraRecord)) == meta["records_intra"]

    decoded = decode_sequence(stream)
    assert len(decoded) == meta["frames"]
    assert hashlib.sha256(decoded.frames.tobytes()).hexdigest() == meta["decoded_sha256"]
