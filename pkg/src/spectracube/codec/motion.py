"""Block motion estimation, bilinear motion compensation and bidirectional merging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .._validation import check_image, check_same_shape
from ..core import Mask
from ..exceptions import ValidationError
from ..geometry import bilinear_sample

FORWARD = "forward"
BACKWARD = "backward"

ME_BLOCK = 16
ME_RADIUS = 24


@dataclass(frozen=True, eq=False)
class MotionField:
    """Per-pixel displacement: the prediction at ``(y, x)`` is read at ``(y + dy, x + dx)``."""

    dx: np.ndarray
    dy: np.ndarray
    direction: str = FORWARD

    def __post_init__(self):
        dx = np.asarray(self.dx, dtype=np.float64)
        dy = np.asarray(self.dy, dtype=np.float64)
        if dx.ndim != 2 or dx.shape != dy.shape:
            raise ValidationError("motion components must be 2D arrays of equal shape")
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
            raise ValidationError("motion field must be finite")
        if self.direction not in (FORWARD, BACKWARD):
            raise ValidationError(f"unknown direction {self.direction!r}")
        dx.setflags(write=False)
        dy.setflags(write=False)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @property
    def shape(self):
        return self.dx.shape

    @classmethod
    def zeros(cls, shape, direction=FORWARD):
        return cls(np.zeros(shape), np.zeros(shape), direction)


def luma(frames) -> np.ndarray:
    """Mean of the three anchor channels, shape ``(H, W)``."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValidationError(f"expected 3 anchor channels (3, H, W), got {arr.shape}")
    return arr.mean(axis=0)


def block_search(ref, cur, block=ME_BLOCK, radius=ME_RADIUS):
    """Integer full search; returns block-constant ``(dx, dy)`` maps.

    For each ``block x block`` tile of ``cur`` the displacement minimizing the
    sum of absolute differences against ``ref`` is kept, among displacements
    whose block lies fully inside ``ref``. Ties go to the smaller
    ``dx**2 + dy**2``, then the smaller ``dy``, then the smaller ``dx``.
    """
    ref = check_image(ref, "ref")
    cur = check_image(cur, "cur")
    check_same_shape(ref, cur, names=("ref", "cur"))
    h, w = cur.shape
    dx = np.zeros((h, w))
    dy = np.zeros((h, w))
    for y0 in range(0, h, block):
        for x0 in range(0, w, block):
            bh, bw = min(block, h - y0), min(block, w - x0)
            tile = cur[y0:y0 + bh, x0:x0 + bw]
            ylo, yhi = max(0, y0 - radius), min(h - bh, y0 + radius)
            xlo, xhi = max(0, x0 - radius), min(w - bw, x0 + radius)
            win = sliding_window_view(ref[ylo:yhi + bh, xlo:xhi + bw], (bh, bw))
            sad = np.abs(win - tile).sum(axis=(2, 3))
            vy, vx = np.mgrid[ylo - y0:yhi - y0 + 1, xlo - x0:xhi - x0 + 1]
            order = np.lexsort((vx.ravel(), vy.ravel(), (vx * vx + vy * vy).ravel(), sad.ravel()))
            best = order[0]
            dx[y0:y0 + bh, x0:x0 + bw] = vx.ravel()[best]
            dy[y0:y0 + bh, x0:x0 + bw] = vy.ravel()[best]
    return dx, dy


def block_motion_estimator(ref_rgb, cur_rgb, block=ME_BLOCK, radius=ME_RADIUS):
    """Default estimator: full-search block matching on the anchor luma."""
    return block_search(luma(ref_rgb), luma(cur_rgb), block, radius)


def estimate_motion(rgb_prev, rgb_cur, rgb_next, estimator=None):
    """Forward (towards ``t-1``) and backward (towards ``t+1``) fields for frame ``t``.

    ``estimator(ref_rgb, cur_rgb)`` must return ``(dx, dy)``; the default is
    :func:`block_motion_estimator`. Its output is used as is.
    """
    est = estimator or block_motion_estimator
    fw = MotionField(*est(rgb_prev, rgb_cur), FORWARD)
    bw = MotionField(*est(rgb_next, rgb_cur), BACKWARD)
    if fw.shape != bw.shape:
        raise ValidationError("forward and backward fields differ in shape")
    return fw, bw


def motion_compensate(channel, field: MotionField):
    """Bilinear pull of ``channel`` along ``field``; returns ``(prediction, Mask)``.

    Sample positions outside the image use edge-clamped values and are marked
    invalid in the mask.
    """
    img = check_image(channel, "channel")
    if img.shape != field.shape:
        raise ValidationError(f"channel {img.shape} vs field {field.shape}")
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + field.dx
    sy = ys + field.dy
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    return bilinear_sample(img, sx, sy), Mask(valid)


def merge_predictions(p_fw, p_bw, m_fw: Mask, m_bw: Mask) -> np.ndarray:
    """Average both predictions unless exactly one of them is valid."""
    p_fw = check_image(p_fw, "p_fw")
    p_bw = check_image(p_bw, "p_bw")
    check_same_shape(p_fw, p_bw, m_fw.valid, m_bw.valid, names=("p_fw", "p_bw", "m_fw", "m_bw"))
    out = 0.5 * (p_fw + p_bw)
    only_fw = m_fw.valid & ~m_bw.valid
    only_bw = m_bw.valid & ~m_fw.valid
    out[only_fw] = p_fw[only_fw]
    out[only_bw] = p_bw[only_bw]
    return out


def compute_residual(original, prediction) -> np.ndarray:
    original = check_image(original, "original")
    prediction = check_image(prediction, "prediction")
    check_same_shape(original, prediction, names=("original", "prediction"))
    return original - prediction
