"""Spectral-temporal hyperspectral video codec."""

from .bitstream import ANCHOR, INTRA, RESIDUAL, Bitstream, StreamHeader, Unit
from .coder import (
    CodecConfig,
    EncodeResult,
    TraceEntry,
    coding_order,
    decode,
    decode_video,
    encode,
    encode_video,
    schedule,
)
from .intra import ReferenceBuffer, intra_predict_channel, predict_block, select_reference
from .motion import (
    BACKWARD,
    FORWARD,
    MotionField,
    block_motion_estimator,
    block_search,
    compute_residual,
    estimate_motion,
    merge_predictions,
    motion_compensate,
)
from .transform import base_code_block, base_decode_block, qp_step

__all__ = [
    "ANCHOR", "INTRA", "RESIDUAL", "BACKWARD", "FORWARD",
    "Bitstream", "StreamHeader", "Unit", "CodecConfig", "EncodeResult", "TraceEntry",
    "ReferenceBuffer", "MotionField",
    "coding_order", "schedule", "encode", "encode_video", "decode", "decode_video",
    "intra_predict_channel", "predict_block", "select_reference",
    "block_motion_estimator", "block_search", "estimate_motion", "motion_compensate",
    "merge_predictions", "compute_residual",
    "base_code_block", "base_decode_block", "qp_step",
]
