"""animcodec: keypoint-animation video codec with adaptive intra refresh.

Intra frames go through a pluggable still-image codec; inter frames are
coded as 16-bit keypoints that drive a dense first-order warp of a buffered
decoded source frame.  Includes the .dac container, an encoder/decoder pair
with a synchronized FIFO source buffer, and an objective evaluation harness
(PSNR/SSIM/MS-SSIM, Bjontegaard deltas, PCC/SROCC, RD convex hulls).
"""

from .container import (
    InterRecord,
    IntraRecord,
    StreamHeader,
    measure_rate,
    read_stream,
    write_stream,
)
from .decoder import Decoder, decode_sequence
from .encoder import (
    Encoder,
    EncoderConfig,
    EncodeResult,
    SourceBuffer,
    encode_sequence,
    refine_intra_qp,
    select_best_source,
    write_stats_csv,
)
from .errors import CodecError, DecodeError
from .frames import Frame, FrameSequence, luma
from .intra import TAG_REFERENCE_DCT, decode_intra, encode_intra, register_intra_codec
from .kpcoder import decode_keypoints, encode_keypoints, quantize_keypoints, roundtrip_keypoints
from .media_io import load_sequence, preprocess, save_sequence
from .metrics import (
    RDPoint,
    bd_metrics,
    ms_ssim,
    pareto_hull,
    pcc,
    psnr,
    read_rd_csv,
    srocc,
    ssim,
)
from .motion import (
    KeypointSet,
    MotionParams,
    dense_motion,
    extract_keypoints,
    reconstruct,
    warp,
)

__version__ = "0.1.0"
