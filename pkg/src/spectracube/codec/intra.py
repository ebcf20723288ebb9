"""Pel-recursive inter-band prediction and block-wise plane coding.

A plane is coded in square blocks in raster order. For each block the
reference plane with the highest sample correlation on the causal border (the
reconstructed row above and column left of the block) is selected; then every
pixel of the block is predicted in raster order from a least-squares line fit
to the border pairs plus the pairs already predicted inside the block.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .._validation import check_image
from ..exceptions import BitstreamError, ValidationError
from .transform import SymbolReader, dequantize_block, get_levels, put_levels, quantize_block, round_half_away

BUFFER_DEPTH = 3
_VAR_EPS = 1e-9


class ReferenceBuffer:
    """The last decoded planes of one frame, newest first, at most three deep."""

    def __init__(self, depth=BUFFER_DEPTH):
        self._items = deque(maxlen=depth)

    def push(self, label, plane):
        self._items.appendleft((label, plane))

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self._items)

    @property
    def planes(self) -> list:
        return [plane for _, plane in self._items]

    def __len__(self):
        return len(self._items)


def _border(h, w, y0, x0, s):
    ys, xs = [], []
    if y0 > 0:
        for x in range(max(0, x0 - 1), min(w, x0 + s)):
            ys.append(y0 - 1)
            xs.append(x)
    if x0 > 0:
        for y in range(y0, min(h, y0 + s)):
            ys.append(y)
            xs.append(x0 - 1)
    return np.array(ys, dtype=np.intp), np.array(xs, dtype=np.intp)


def _correlation(r, b):
    if r.size < 2:
        return 0.0
    rc = r - r.mean()
    bc = b - b.mean()
    den = math.sqrt(float(rc @ rc) * float(bc @ bc))
    return float(rc @ bc) / den if den > 0 else 0.0


def select_reference(recon, refs, y0, x0, s) -> int:
    """Index of the reference best correlated with ``recon`` on the block border.

    Ties, and blocks without a border, pick the newest reference (index 0).
    """
    h, w = recon.shape
    ys, xs = _border(h, w, y0, x0, s)
    b = recon[ys, xs]
    scores = [_correlation(ref[ys, xs], b) for ref in refs]
    return int(np.argmax(scores))


def predict_block(recon, refs, y0, x0, s, bounds=None, k=None):
    """Predict the ``s x s`` block at ``(y0, x0)``; returns ``(prediction, ref index)``.

    ``recon`` supplies the causal border; ``k`` forces the reference (the
    decoder passes the signalled index). With ``bounds = (lo, hi)`` every
    prediction is rounded and clipped before it joins the context, as in the
    coder. Fallbacks: no context pairs gives ``b = r``; a constant reference
    context gives ``b = r + mean(b - r)``.
    """
    h, w = recon.shape
    if k is None:
        k = select_reference(recon, refs, y0, x0, s)
    ref = refs[k]
    ys, xs = _border(h, w, y0, x0, s)
    rb = ref[ys, xs]
    bb = recon[ys, xs]
    n = float(rb.size)
    sr, sb = float(rb.sum()), float(bb.sum())
    srr, srb = float(rb @ rb), float(rb @ bb)
    rblock = ref[y0:y0 + s, x0:x0 + s].tolist()
    out = np.empty((s, s))
    for i in range(s):
        row = rblock[i]
        for j in range(s):
            r = row[j]
            if n == 0:
                p = r
            else:
                var = srr - sr * sr / n
                if var > _VAR_EPS * n:
                    a = (srb - sr * sb / n) / var
                    p = a * r + (sb - a * sr) / n
                else:
                    p = r + (sb - sr) / n
            if bounds is not None:
                p = min(max(math.copysign(math.floor(abs(p) + 0.5), p), bounds[0]), bounds[1])
            out[i, j] = p
            n += 1.0
            sr += r
            sb += p
            srr += r * r
            srb += r * p
    return out, k


def intra_predict_channel(channel, refs, block_size=8, bounds=None):
    """Open-loop prediction of a whole plane, using ``channel`` itself as the border.

    Returns the prediction and the per-block reference indices (raster order).
    """
    channel = check_image(channel, "channel")
    refs = [check_image(r, "reference") for r in (refs.planes if isinstance(refs, ReferenceBuffer) else refs)]
    if not 1 <= len(refs) <= BUFFER_DEPTH:
        raise ValidationError(f"need 1 to {BUFFER_DEPTH} reference planes, got {len(refs)}")
    if any(r.shape != channel.shape for r in refs):
        raise ValidationError("reference planes must match the channel shape")
    h, w = channel.shape
    if h % block_size or w % block_size:
        raise ValidationError(f"plane {h}x{w} is not a multiple of block size {block_size}")
    pred = np.empty_like(channel)
    side = []
    for y0 in range(0, h, block_size):
        for x0 in range(0, w, block_size):
            p, k = predict_block(channel, refs, y0, x0, block_size, bounds)
            pred[y0:y0 + block_size, x0:x0 + block_size] = p
            side.append(k)
    return pred, np.array(side, dtype=np.int64)


def pack_side_info(indices) -> bytes:
    """Two bits per block, four blocks per byte, first block in the low bits."""
    out = bytearray((len(indices) + 3) // 4)
    for i, k in enumerate(indices):
        out[i // 4] |= (int(k) & 3) << (2 * (i % 4))
    return bytes(out)


def unpack_side_info(data: bytes, count: int) -> list:
    if len(data) != (count + 3) // 4:
        raise BitstreamError("side information has the wrong length")
    return [(data[i // 4] >> (2 * (i % 4))) & 3 for i in range(count)]


def _blocks(h, w, s):
    return [(y0, x0) for y0 in range(0, h, s) for x0 in range(0, w, s)]


def _reconstruct_block(pred, levels, qp, s, bounds):
    rec = round_half_away(pred + dequantize_block(levels, qp, s))
    return np.clip(rec, bounds[0], bounds[1])


def code_plane(plane, qp, block_size, bounds, refs=None, level=0.0):
    """Code one integer-valued plane; returns ``(side_bytes, symbol_bytes, recon)``.

    With ``refs`` the blocks are predicted by :func:`predict_block`; without,
    every block is predicted by the constant ``level``.
    """
    h, w = plane.shape
    s = block_size
    recon = np.zeros((h, w))
    buf = bytearray()
    side = []
    for y0, x0 in _blocks(h, w, s):
        if refs:
            pred, k = predict_block(recon, refs, y0, x0, s, bounds)
            side.append(k)
        else:
            pred = np.full((s, s), float(level))
        levels = quantize_block(plane[y0:y0 + s, x0:x0 + s] - pred, qp)
        put_levels(buf, levels)
        recon[y0:y0 + s, x0:x0 + s] = _reconstruct_block(pred, levels, qp, s, bounds)
    return pack_side_info(side) if refs else b"", bytes(buf), recon


def decode_plane(reader: SymbolReader, side, shape, qp, block_size, bounds, refs=None, level=0.0):
    """Inverse of :func:`code_plane`; ``side`` holds the unpacked reference indices."""
    h, w = shape
    s = block_size
    recon = np.zeros((h, w))
    for n, (y0, x0) in enumerate(_blocks(h, w, s)):
        if refs:
            if side[n] >= len(refs):
                raise BitstreamError(f"block {n} signals reference {side[n]} of {len(refs)}")
            pred, _ = predict_block(recon, refs, y0, x0, s, bounds, k=side[n])
        else:
            pred = np.full((s, s), float(level))
        levels = get_levels(reader, s)
        recon[y0:y0 + s, x0:x0 + s] = _reconstruct_block(pred, levels, qp, s, bounds)
    return recon
