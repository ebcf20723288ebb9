"""Container format: fixed header followed by length-prefixed coded units.

All integers are little-endian. Header: magic ``HSVC``, u16 version, u16
width, u16 height, u8 channels, u16 frames, u8 qp, u8 block size, then the
spectral grid as two f64 (first wavelength and step in nm). Each unit is u16
frame, u8 channel, u8 mode, u32 payload length and the payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..exceptions import BitstreamError, VersionMismatchError

MAGIC = b"HSVC"
VERSION = 1

ANCHOR = 0
INTRA = 1
RESIDUAL = 2
MODE_NAMES = {ANCHOR: "anchor", INTRA: "intra", RESIDUAL: "residual"}

_HEADER = struct.Struct("<4sHHHBHBBdd")
_UNIT = struct.Struct("<HBBI")


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    channels: int
    frames: int
    qp: int
    block_size: int
    grid_start_nm: float
    grid_step_nm: float
    version: int = VERSION


@dataclass(frozen=True)
class Unit:
    frame: int
    channel: int
    mode: int
    payload: bytes

    @property
    def mode_name(self) -> str:
        return MODE_NAMES[self.mode]


@dataclass
class Bitstream:
    header: StreamHeader
    units: list = field(default_factory=list)

    def to_bytes(self) -> bytes:
        h = self.header
        out = [_HEADER.pack(MAGIC, h.version, h.width, h.height, h.channels, h.frames, h.qp,
                            h.block_size, h.grid_start_nm, h.grid_step_nm)]
        for u in self.units:
            out.append(_UNIT.pack(u.frame, u.channel, u.mode, len(u.payload)))
            out.append(u.payload)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        data = bytes(data)
        if len(data) < _HEADER.size:
            raise BitstreamError("stream shorter than its header")
        magic, version, w, h, c, t, qp, bs, g0, gs = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise VersionMismatchError(f"stream version {version}, decoder supports {VERSION}")
        header = StreamHeader(w, h, c, t, qp, bs, g0, gs, version)
        units = []
        pos = _HEADER.size
        while pos < len(data):
            if pos + _UNIT.size > len(data):
                raise BitstreamError("truncated unit header")
            frame, channel, mode, n = _UNIT.unpack_from(data, pos)
            pos += _UNIT.size
            if mode not in MODE_NAMES:
                raise BitstreamError(f"unknown unit mode {mode}")
            if pos + n > len(data):
                raise BitstreamError("truncated unit payload")
            units.append(Unit(frame, channel, mode, data[pos:pos + n]))
            pos += n
        return cls(header, units)

    @property
    def size_bits(self) -> int:
        return 8 * len(self.to_bytes())

    def write(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "Bitstream":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
