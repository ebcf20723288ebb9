"""Block transform coder used as the base coder for every coded plane.

Values are handled in 8-bit units. For ``qp >= 1`` a block goes through an
orthonormal 2D DCT-II, uniform quantization with step ``2**((qp - 4) / 6)``
and a zigzag scan. ``qp == 0`` is the lossless path: the integer samples are
scanned directly with quantization step 1. Coefficients are serialized as
zigzag-mapped varints and each coded unit is compressed with raw DEFLATE.
"""

from __future__ import annotations

import zlib
from functools import lru_cache

import numpy as np
from scipy.fft import dctn, idctn

from ..exceptions import BitstreamError, ValidationError

QP_MAX = 51
LOSSLESS_QP = 0


def check_qp(qp) -> int:
    if isinstance(qp, bool) or int(qp) != qp or not 0 <= qp <= QP_MAX:
        raise ValidationError(f"qp must be an integer in [0, {QP_MAX}], got {qp!r}")
    return int(qp)


def qp_step(qp: int) -> float:
    """Quantization step in 8-bit units; 1 on the lossless path."""
    qp = check_qp(qp)
    if qp == LOSSLESS_QP:
        return 1.0
    return 2.0 ** ((qp - 4) / 6.0)


@lru_cache(maxsize=None)
def zigzag_order(n: int) -> np.ndarray:
    """Flat indices of an ``n x n`` block in JPEG zigzag order."""
    idx = sorted(
        ((y, x) for y in range(n) for x in range(n)),
        key=lambda p: (p[0] + p[1], p[0] if (p[0] + p[1]) % 2 else p[1]),
    )
    order = np.array([y * n + x for y, x in idx], dtype=np.intp)
    order.setflags(write=False)
    return order


def round_half_away(v):
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize_block(block, qp) -> np.ndarray:
    """Integer levels of one square block, in zigzag order."""
    block = np.asarray(block, dtype=np.float64)
    n = block.shape[0]
    if block.shape != (n, n):
        raise ValidationError(f"block must be square, got {block.shape}")
    if check_qp(qp) == LOSSLESS_QP:
        levels = round_half_away(block)
    else:
        levels = round_half_away(dctn(block, type=2, norm="ortho") / qp_step(qp))
    return levels.ravel()[zigzag_order(n)].astype(np.int64)


def dequantize_block(levels, qp, n) -> np.ndarray:
    """Inverse of :func:`quantize_block` up to quantization error."""
    flat = np.zeros(n * n)
    lv = np.asarray(levels, dtype=np.float64)
    flat[zigzag_order(n)[: len(lv)]] = lv
    coef = flat.reshape(n, n)
    if check_qp(qp) == LOSSLESS_QP:
        return coef
    return idctn(coef * qp_step(qp), type=2, norm="ortho")


def _zz(v: int) -> int:
    return 2 * v if v >= 0 else -2 * v - 1


def _unzz(u: int) -> int:
    return (u >> 1) ^ -(u & 1)


def put_varint(buf: bytearray, u: int):
    while u >= 0x80:
        buf.append((u & 0x7F) | 0x80)
        u >>= 7
    buf.append(u)


def put_signed(buf: bytearray, v: int):
    put_varint(buf, _zz(int(v)))


class SymbolReader:
    """Sequential varint reader over a decompressed payload."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def varint(self) -> int:
        shift = 0
        out = 0
        while True:
            if self.pos >= len(self.data):
                raise BitstreamError("truncated varint")
            b = self.data[self.pos]
            self.pos += 1
            out |= (b & 0x7F) << shift
            if b < 0x80:
                return out
            shift += 7
            if shift > 70:
                raise BitstreamError("varint too long")

    def signed(self) -> int:
        return _unzz(self.varint())

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise BitstreamError("truncated payload")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def at_end(self) -> bool:
        return self.pos == len(self.data)


def put_levels(buf: bytearray, levels):
    """Count of levels up to the last nonzero one, then the levels."""
    nz = np.flatnonzero(levels)
    count = int(nz[-1]) + 1 if nz.size else 0
    put_varint(buf, count)
    for v in levels[:count].tolist():
        put_signed(buf, v)


def get_levels(reader: SymbolReader, n: int) -> list:
    count = reader.varint()
    if count > n * n:
        raise BitstreamError(f"block claims {count} coefficients, at most {n * n} allowed")
    return [reader.signed() for _ in range(count)]


def deflate(data: bytes) -> bytes:
    c = zlib.compressobj(9, zlib.DEFLATED, -15)
    return c.compress(bytes(data)) + c.flush()


def inflate(data: bytes) -> bytes:
    try:
        d = zlib.decompressobj(-15)
        out = d.decompress(data) + d.flush()
    except zlib.error as exc:
        raise BitstreamError(f"corrupt DEFLATE payload: {exc}") from None
    if d.unused_data or not d.eof:
        raise BitstreamError("DEFLATE payload has trailing or missing data")
    return out


def base_code_block(block, qp) -> bytes:
    """Code one square block on its own as a DEFLATE-compressed unit."""
    buf = bytearray()
    put_levels(buf, quantize_block(block, qp))
    return deflate(buf)


def base_decode_block(data: bytes, qp, block_size) -> np.ndarray:
    """Reconstruction of a block coded by :func:`base_code_block`."""
    reader = SymbolReader(inflate(data))
    levels = get_levels(reader, block_size)
    if not reader.at_end():
        raise BitstreamError("trailing symbols after block")
    return dequantize_block(levels, qp, block_size)
