"""Hyperspectral video encoder and decoder.

Channels 0-2 of every frame are anchors, coded on their own. The remaining
channels of even frames are predicted from the last three decoded channels of
the same frame. In odd frames they are first predicted by bidirectional motion
compensation from the decoded neighbours (motion estimated on the decoded
anchors), and the motion-compensated residual is then predicted from the last
three decoded residuals; the anchor residuals seed that buffer.

Frames are coded in the order 0, 2, 1, 4, 3, ... so both neighbours of an odd
frame are decoded first. A trailing odd frame without a successor uses the
forward prediction alone.

Samples are handled as 8-bit integers; residuals keep their signed range
[-255, 255]. The encoder runs the same reconstruction arithmetic as the
decoder, so their outputs agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import HyperCube, SpectralGrid
from ..exceptions import BitstreamError, DimensionMismatchError, ValidationError
from ..io import quantize8
from .bitstream import ANCHOR, INTRA, MODE_NAMES, RESIDUAL, Bitstream, StreamHeader, Unit
from .intra import BUFFER_DEPTH, ReferenceBuffer, code_plane, decode_plane, unpack_side_info
from .motion import FORWARD, MotionField, block_motion_estimator, estimate_motion, merge_predictions, motion_compensate
from .transform import SymbolReader, check_qp, deflate, inflate, round_half_away

N_ANCHORS = 3
PIXEL_BOUNDS = (0.0, 255.0)
RESIDUAL_BOUNDS = (-255.0, 255.0)
ANCHOR_LEVEL = 128.0

MOTION_ESTIMATORS = {"block": block_motion_estimator}
BASE_CODERS = ("dct",)


@dataclass(frozen=True)
class CodecConfig:
    """``qp`` 0 is lossless; 1-51 select the DCT quantizer step."""

    qp: int = 27
    block_size: int = 8
    motion_estimator: object = "block"
    base_coder: str = "dct"

    def __post_init__(self):
        check_qp(self.qp)
        b = self.block_size
        if isinstance(b, bool) or int(b) != b or b < 2 or b > 64 or (b & (b - 1)):
            raise ValidationError(f"block_size must be a power of two in [2, 64], got {b!r}")
        if not callable(self.motion_estimator) and self.motion_estimator not in MOTION_ESTIMATORS:
            raise ValidationError(f"unknown motion estimator {self.motion_estimator!r}")
        if self.base_coder not in BASE_CODERS:
            raise ValidationError(f"unknown base coder {self.base_coder!r}")

    def estimator(self):
        if callable(self.motion_estimator):
            return self.motion_estimator
        return MOTION_ESTIMATORS[self.motion_estimator]


@dataclass(frozen=True)
class TraceEntry:
    """One coded unit: its mode and the channels in the reference buffer (newest first)."""

    frame: int
    channel: int
    mode: str
    references: tuple = ()


def coding_order(n_frames: int) -> list:
    """0, 2, 1, 4, 3, ...; every odd frame right after its successor when there is one."""
    order = [0] if n_frames else []
    for t in range(2, n_frames, 2):
        order += [t, t - 1]
    if n_frames % 2 == 0 and n_frames >= 2:
        order.append(n_frames - 1)
    return order


def frame_mode(t: int, channel: int) -> int:
    if channel < N_ANCHORS:
        return ANCHOR
    return INTRA if t % 2 == 0 else RESIDUAL


def schedule(n_frames: int, n_channels: int) -> list:
    """``(frame, channel, mode)`` of every unit in stream order."""
    return [(t, c, frame_mode(t, c)) for t in coding_order(n_frames) for c in range(n_channels)]


def _padded(n, b):
    return -(-n // b) * b


def _pad(plane, h, w):
    ph, pw = h - plane.shape[0], w - plane.shape[1]
    return np.pad(plane, ((0, ph), (0, pw)), mode="edge") if ph or pw else plane


def _as_levels(video):
    if not video:
        raise ValidationError("video needs at least one frame")
    first = video[0]
    for cube in video:
        if not isinstance(cube, HyperCube):
            raise ValidationError("video frames must be HyperCube instances")
        if cube.samples.shape != first.samples.shape:
            raise DimensionMismatchError("all frames must share dimensions")
        if cube.grid != first.grid:
            raise ValidationError("all frames must share the spectral grid")
    if first.n_channels < N_ANCHORS + 1:
        raise ValidationError(f"need at least {N_ANCHORS + 1} channels, got {first.n_channels}")
    if first.n_channels > 255 or first.width > 65535 or first.height > 65535 or len(video) > 65535:
        raise ValidationError("video exceeds the container limits")
    if not first.grid.is_uniform():
        raise ValidationError("the container stores uniform spectral grids only")
    return [quantize8(c.samples).astype(np.float64) for c in video]


class _FrameState:
    """Decoded planes of one frame at padded size."""

    def __init__(self, n_channels):
        self.planes = [None] * n_channels

    def anchors(self):
        return np.stack(self.planes[:N_ANCHORS])


class _Engine:
    """Shared encode/decode walk over the schedule.

    ``code(unit_key, plane_or_None, refs, bounds, level)`` is provided by the
    subclass; it returns the reconstructed plane.
    """

    def __init__(self, header: StreamHeader, estimator):
        self.h = header
        self.estimator = estimator
        self.H = _padded(header.height, header.block_size)
        self.W = _padded(header.width, header.block_size)
        self.trace = []

    def run(self, source=None):
        h = self.h
        frames = {}
        for t in coding_order(h.frames):
            st = _FrameState(h.channels)
            frames[t] = st
            for c in range(N_ANCHORS):
                st.planes[c] = self._unit(t, c, ANCHOR, source, None, PIXEL_BOUNDS, ANCHOR_LEVEL)
            if t % 2 == 0:
                self._intra_frame(t, st, source)
            else:
                self._residual_frame(t, st, frames, source)
        return [frames[t] for t in range(h.frames)]

    def _unit(self, t, c, mode, source, buf, bounds, level=0.0):
        plane = None if source is None else source(t, c)
        refs = buf.planes if buf is not None else None
        labels = buf.labels if buf is not None else ()
        self.trace.append(TraceEntry(t, c, MODE_NAMES[mode], labels))
        return self.code((t, c, mode), plane, refs, bounds, level)

    def _intra_frame(self, t, st, source):
        buf = ReferenceBuffer(BUFFER_DEPTH)
        for c in range(N_ANCHORS):
            buf.push(c, st.planes[c])
        for c in range(N_ANCHORS, self.h.channels):
            st.planes[c] = self._unit(t, c, INTRA, source, buf, PIXEL_BOUNDS)
            buf.push(c, st.planes[c])

    def _residual_frame(self, t, st, frames, source):
        prev = frames[t - 1]
        nxt = frames.get(t + 1)
        if nxt is None:
            fw = MotionField(*self.estimator(prev.anchors(), st.anchors()), FORWARD)
        else:
            fw, bw = estimate_motion(prev.anchors(), st.anchors(), nxt.anchors(), self.estimator)

        def predict(c):
            p_fw, m_fw = motion_compensate(prev.planes[c], fw)
            if nxt is None:
                return round_half_away(p_fw)
            p_bw, m_bw = motion_compensate(nxt.planes[c], bw)
            return round_half_away(merge_predictions(p_fw, p_bw, m_fw, m_bw))

        buf = ReferenceBuffer(BUFFER_DEPTH)
        for c in range(N_ANCHORS):
            buf.push(c, st.planes[c] - predict(c))
        for c in range(N_ANCHORS, self.h.channels):
            pred = predict(c)
            res_src = None
            if source is not None:
                res_src = lambda _t, _c, p=pred, c=c: source(t, c) - p  # noqa: E731
            res = self._unit(t, c, RESIDUAL, res_src, buf, RESIDUAL_BOUNDS)
            st.planes[c] = np.clip(pred + res, *PIXEL_BOUNDS)
            buf.push(c, res)


class _EncoderEngine(_Engine):
    def __init__(self, header, estimator, qp):
        super().__init__(header, estimator)
        self.qp = qp
        self.units = []

    def code(self, key, plane, refs, bounds, level):
        t, c, mode = key
        side, symbols, recon = code_plane(plane, self.qp, self.h.block_size, bounds, refs, level)
        self.units.append(Unit(t, c, mode, deflate(side + symbols)))
        return recon


class _DecoderEngine(_Engine):
    def __init__(self, header, estimator, units):
        super().__init__(header, estimator)
        self._units = iter(units)
        self.n_blocks = (self.H // header.block_size) * (self.W // header.block_size)

    def code(self, key, plane, refs, bounds, level):
        unit = next(self._units, None)
        if unit is None:
            raise BitstreamError(f"stream ends before unit {key}")
        if (unit.frame, unit.channel, unit.mode) != key:
            raise BitstreamError(f"expected unit {key}, found {(unit.frame, unit.channel, unit.mode)}")
        data = inflate(unit.payload)
        side = None
        if refs:
            n_side = (self.n_blocks + 3) // 4
            side = unpack_side_info(data[:n_side], self.n_blocks)
            data = data[n_side:]
        reader = SymbolReader(data)
        recon = decode_plane(reader, side, (self.H, self.W), self.h.qp, self.h.block_size, bounds, refs, level)
        if not reader.at_end():
            raise BitstreamError(f"unit {key} has trailing data")
        return recon


def _to_cubes(states, header):
    grid = SpectralGrid.uniform(header.grid_start_nm, header.grid_step_nm, header.channels)
    h, w = header.height, header.width
    return [HyperCube(np.stack([p[:h, :w] for p in st.planes]) / 255.0, grid) for st in states]


@dataclass
class EncodeResult:
    bitstream: Bitstream
    reconstruction: list
    trace: list = field(default_factory=list)

    @property
    def size_bits(self) -> int:
        return self.bitstream.size_bits


def encode_video(video, cfg: CodecConfig = CodecConfig()) -> EncodeResult:
    """Encode and also return the encoder-side reconstruction and unit trace."""
    levels = _as_levels(video)
    first = video[0]
    grid = first.grid.as_array()
    step = float(grid[1] - grid[0]) if len(grid) > 1 else 1.0
    header = StreamHeader(first.width, first.height, first.n_channels, len(video), cfg.qp,
                          cfg.block_size, float(grid[0]), step)
    eng = _EncoderEngine(header, cfg.estimator(), cfg.qp)
    padded = [[_pad(ch, eng.H, eng.W) for ch in frame] for frame in levels]
    states = eng.run(lambda t, c: padded[t][c])
    bits = Bitstream(header, eng.units)
    return EncodeResult(bits, _to_cubes(states, header), eng.trace)


def encode(video, cfg: CodecConfig = CodecConfig()) -> Bitstream:
    return encode_video(video, cfg).bitstream


def decode_video(bits, motion_estimator=None):
    """Decode; returns ``(cubes, trace)``. ``bits`` may be raw bytes."""
    if not isinstance(bits, Bitstream):
        bits = Bitstream.from_bytes(bits)
    h = bits.header
    if h.channels < N_ANCHORS + 1 or h.frames < 1:
        raise BitstreamError("header describes an empty or too narrow video")
    cfg = CodecConfig(qp=h.qp, block_size=h.block_size, motion_estimator=motion_estimator or "block")
    eng = _DecoderEngine(h, cfg.estimator(), bits.units)
    states = eng.run()
    if next(eng._units, None) is not None:
        raise BitstreamError("stream has units beyond the schedule")
    return _to_cubes(states, h), eng.trace


def decode(bits, motion_estimator=None) -> list:
    return decode_video(bits, motion_estimator)[0]
