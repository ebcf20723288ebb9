"""Non-local cross-spectral reconstruction of occluded pixels.

A warped peripheral channel (the *distorted* image) has holes where the view
was occluded. A fully valid *reference* image from another spectral band guides
the fill: for every missing pixel the most similar reference blocks are found,
a per-pixel affine model ``distorted = alpha * reference + beta`` is fitted on
the known distorted samples at those matches, and the model is evaluated at the
missing pixel. Pixels are filled in rounds so that fresh values feed later
fits. The temporal variant additionally searches the previous frame.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image, check_mask, check_same_shape
from .core import Mask
from .exceptions import (
    DegenerateDataError,
    InsufficientDataError,
    OutOfBoundsBlockError,
    ValidationError,
)

# Sum of squared reference deviations below this counts as zero variance.
_VAR_EPS = 1e-20

CURRENT_ONLY = "current_only"
CURRENT_AND_PREVIOUS = "current_and_previous"


@dataclass(frozen=True)
class MatchConfig:
    block_radius: int = 3
    search_radius: int = 15
    n_matches: int = 16
    batch_fraction: float = 0.1

    def __post_init__(self):
        if self.block_radius < 1:
            raise ValidationError("block_radius must be >= 1")
        if self.search_radius < 1:
            raise ValidationError("search_radius must be >= 1")
        if self.n_matches < 2:
            raise ValidationError("n_matches must be >= 2")
        if not 0 < self.batch_fraction <= 1:
            raise ValidationError("batch_fraction must lie in (0, 1]")

    @property
    def block_size(self) -> int:
        return 2 * self.block_radius + 1


CONFIG_ALIASES = {"b": "n_matches", "B": "n_matches"}


def parse_match_config(text: str, base: MatchConfig | None = None) -> MatchConfig:
    """Parse ``key=value`` lines (``#`` starts a comment) into a MatchConfig."""
    types = {f.name: f.type for f in fields(MatchConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = CONFIG_ALIASES.get(key, key)
        if key not in types:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        updates[key] = float(value) if key == "batch_fraction" else int(value)
    return replace(base or MatchConfig(), **updates)


def read_match_config(path, base: MatchConfig | None = None) -> MatchConfig:
    return parse_match_config(Path(path).read_text(encoding="utf-8"), base)


class PixelModel(NamedTuple):
    alpha: float
    beta: float

    def predict(self, r):
        return self.alpha * r + self.beta


def _fit_rows(R, D, K):
    """Vectorized least squares over rows; returns ``(alpha, beta, n_known, var)``."""
    n = K.sum(axis=1)
    safe_n = np.maximum(n, 1)
    rm = np.where(K, R, 0.0).sum(axis=1) / safe_n
    dm = np.where(K, D, 0.0).sum(axis=1) / safe_n
    rc = np.where(K, R - rm[:, None], 0.0)
    dc = np.where(K, D - dm[:, None], 0.0)
    var = (rc * rc).sum(axis=1)
    cov = (rc * dc).sum(axis=1)
    alpha = np.divide(cov, var, out=np.zeros_like(var), where=var > _VAR_EPS)
    beta = dm - alpha * rm
    return alpha, beta, n, var


def fit_model(ref_vec, dist_vec, missing=None) -> PixelModel:
    """Ordinary least squares ``dist ~ alpha * ref + beta`` over known pairs.

    ``missing`` flags entries of ``dist_vec`` to ignore; NaN entries are also
    treated as missing.
    """
    r = np.asarray(ref_vec, dtype=np.float64).ravel()
    d = np.asarray(dist_vec, dtype=np.float64).ravel()
    if r.shape != d.shape:
        raise ValidationError("reference and distorted vectors differ in length")
    known = np.isfinite(d) & np.isfinite(r)
    if missing is not None:
        known &= ~np.asarray(missing, dtype=bool).ravel()
    if known.sum() < 2:
        raise InsufficientDataError(f"need >= 2 known pairs, got {int(known.sum())}")
    alpha, beta, _, var = _fit_rows(r[None], np.where(known, d, 0.0)[None], known[None])
    if var[0] <= _VAR_EPS:
        raise DegenerateDataError("reference entries have zero variance")
    return PixelModel(float(alpha[0]), float(beta[0]))


def _check_block(img, y, x, r, what):
    h, w = img.shape
    if not (r <= y < h - r and r <= x < w - r):
        raise OutOfBoundsBlockError(f"{what} block at ({y}, {x}) with radius {r} leaves the {h}x{w} image")


def block_distance(ref, x, y, t_d=0, ref_prev=None, block_radius=3) -> float:
    """L2 distance between the block at ``x`` (current frame) and at ``y`` in frame ``t - t_d``.

    ``x`` and ``y`` are ``(row, col)`` centers; both blocks must lie fully inside.
    """
    ref = check_image(ref, "reference")
    if t_d not in (0, 1):
        raise ValidationError("t_d must be 0 or 1")
    other = ref
    if t_d == 1:
        if ref_prev is None:
            raise ValidationError("t_d=1 requires the previous reference frame")
        other = check_image(ref_prev, "previous reference")
        check_same_shape(ref, other)
    r = block_radius
    _check_block(ref, *x, r, "first")
    _check_block(other, *y, r, "second")
    a = ref[x[0] - r:x[0] + r + 1, x[1] - r:x[1] + r + 1]
    b = other[y[0] - r:y[0] + r + 1, y[1] - r:y[1] + r + 1]
    return float(np.sqrt(((a - b) ** 2).sum()))


class _Matcher:
    """Block matcher over one (reference, optional previous reference) pair."""

    def __init__(self, ref, cfg: MatchConfig, ref_prev=None, prev_allowed=None):
        self.cfg = cfg
        self.ref = ref
        self.ref_prev = ref_prev
        self.prev_allowed = prev_allowed
        r = cfg.block_radius
        self.padded = np.pad(ref, r, mode="edge")
        self.h, self.w = ref.shape

    def _frame_candidates(self, img, y, x, target, omask, allowed):
        cfg = self.cfg
        r, R = cfg.block_radius, cfg.search_radius
        y_lo, y_hi = max(r, y - R), min(self.h - 1 - r, y + R)
        x_lo, x_hi = max(r, x - R), min(self.w - 1 - r, x + R)
        if y_lo > y_hi or x_lo > x_hi:
            e = np.empty(0)
            return e, e.astype(np.intp), e.astype(np.intp)
        region = img[y_lo - r:y_hi + r + 1, x_lo - r:x_hi + r + 1]
        win = sliding_window_view(region, (2 * r + 1, 2 * r + 1))
        diff = (win - target) * omask
        d2 = np.einsum("ijkl,ijkl->ij", diff, diff)
        cy, cx = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
        keep = np.ones(d2.shape, dtype=bool)
        if allowed is not None:
            keep &= allowed[y_lo:y_hi + 1, x_lo:x_hi + 1]
        return d2[keep], cy[keep], cx[keep]

    def match(self, y, x, temporal: bool):
        """Return ``(ys, xs, tds, d2)`` of the best matches, self first."""
        cfg = self.cfg
        r = cfg.block_radius
        k = 2 * r + 1
        target = self.padded[y:y + k, x:x + k]
        oy = np.arange(y - r, y + r + 1)
        ox = np.arange(x - r, x + r + 1)
        omask = (((oy >= 0) & (oy < self.h))[:, None] & ((ox >= 0) & (ox < self.w))[None, :]).astype(np.float64)
        d_s, y_s, x_s = self._frame_candidates(self.ref, y, x, target, omask, None)
        not_self = ~((y_s == y) & (x_s == x))
        d_s, y_s, x_s = d_s[not_self], y_s[not_self], x_s[not_self]
        t_s = np.zeros(len(d_s), dtype=np.intp)
        if temporal and self.ref_prev is not None:
            d_p, y_p, x_p = self._frame_candidates(self.ref_prev, y, x, target, omask, self.prev_allowed)
            d_s = np.concatenate([d_s, d_p])
            y_s = np.concatenate([y_s, y_p])
            x_s = np.concatenate([x_s, x_p])
            t_s = np.concatenate([t_s, np.ones(len(d_p), dtype=np.intp)])
        order = np.lexsort((x_s, y_s, t_s, d_s))[:cfg.n_matches - 1]
        ys = np.concatenate([[y], y_s[order]]).astype(np.intp)
        xs = np.concatenate([[x], x_s[order]]).astype(np.intp)
        tds = np.concatenate([[0], t_s[order]]).astype(np.intp)
        d2 = np.concatenate([[0.0], d_s[order]])
        return ys, xs, tds, d2


def best_matches(ref_t, ref_prev, x, cfg: MatchConfig = MatchConfig(), frame_scope=CURRENT_ONLY):
    """Best ``cfg.n_matches`` block matches for center ``x = (row, col)``.

    Returns a list of ``((row, col), t_d)`` ordered by distance with ties broken
    by ``(t_d, row, col)``; the pixel itself always comes first.
    """
    ref_t = check_image(ref_t, "reference")
    _check_block(ref_t, x[0], x[1], cfg.block_radius, "query")
    if frame_scope not in (CURRENT_ONLY, CURRENT_AND_PREVIOUS):
        raise ValidationError(f"unknown frame scope {frame_scope!r}")
    temporal = frame_scope == CURRENT_AND_PREVIOUS
    if temporal:
        if ref_prev is None:
            raise ValidationError("frame scope includes the previous frame but none was given")
        ref_prev = check_image(ref_prev, "previous reference")
        check_same_shape(ref_t, ref_prev)
    m = _Matcher(ref_t, cfg, ref_prev if temporal else None)
    ys, xs, tds, _ = m.match(int(x[0]), int(x[1]), temporal)
    return [((int(a), int(b)), int(t)) for a, b, t in zip(ys, xs, tds)]


def _as_missing(missing, shape, name="missing") -> np.ndarray:
    if isinstance(missing, Mask):
        arr = missing.invalid
    else:
        arr = check_mask(missing, shape, name)
    if arr.shape != tuple(shape):
        raise ValidationError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def _blocks_identical(a, b, r):
    neq = np.pad((a != b).astype(np.int64), r)
    k = 2 * r + 1
    return sliding_window_view(neq, (k, k)).sum(axis=(2, 3)) == 0


@dataclass
class ReconstructionInfo:
    rounds: int
    reconstructed: int
    fallbacks: int


def _reconstruct(reference, distorted, missing, cfg, reference_prev=None, distorted_prev=None,
                 missing_prev=None, n_jobs=1):
    ref = check_image(reference, "reference")
    dist = check_image(distorted, "distorted", allow_nan=True)
    check_same_shape(ref, dist, names=("reference", "distorted"))
    miss = _as_missing(missing, ref.shape).copy()
    h, w = ref.shape
    temporal = reference_prev is not None
    prev_allowed = None
    dist_prev = None
    if temporal:
        ref_prev = check_image(reference_prev, "previous reference")
        dist_prev = check_image(distorted_prev, "previous distorted", allow_nan=True)
        check_same_shape(ref, ref_prev, dist_prev)
        miss_prev = _as_missing(missing_prev, ref.shape, "missing_prev")
        # reconstructed pixels of t-1 never enter the candidate set
        prev_allowed = ~miss_prev
        # a temporal candidate that repeats the spatial pair at the same spot adds nothing
        same = _blocks_identical(ref, ref_prev, cfg.block_radius) & ~miss & (dist_prev == dist)
        prev_allowed &= ~same
        matcher = _Matcher(ref, cfg, ref_prev, prev_allowed)
    else:
        matcher = _Matcher(ref, cfg)

    out = np.where(miss, 0.0, dist)
    todo = np.flatnonzero(miss.ravel())
    info = ReconstructionInfo(0, 0, 0)
    if todo.size == 0:
        return np.clip(out, 0.0, 1.0), info

    known0 = ~miss
    rr, dd = ref[known0], dist[known0]
    denom = float((rr * rr).sum())
    gain = float((rr * dd).sum()) / denom if denom > 0 else 1.0

    B = cfg.n_matches
    n = todo.size
    MY = np.zeros((n, B), dtype=np.intp)
    MX = np.zeros((n, B), dtype=np.intp)
    MT = np.zeros((n, B), dtype=np.intp)
    valid = np.zeros((n, B), dtype=bool)

    def work(idx_range):
        for i in idx_range:
            y, x = divmod(int(todo[i]), w)
            ys, xs, tds, _ = matcher.match(y, x, temporal)
            m = len(ys)
            MY[i, :m], MX[i, :m], MT[i, :m] = ys, xs, tds
            valid[i, :m] = True

    chunks = np.array_split(np.arange(n), max(1, min(n, int(n_jobs) * 4)))
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=int(n_jobs)) as pool:
            list(pool.map(work, chunks))
    else:
        for c in chunks:
            work(c)

    is_prev = MT == 1
    R = np.where(is_prev, ref_prev[MY, MX] if temporal else 0.0, ref[MY, MX])
    Dprev = dist_prev[MY, MX] if temporal else None

    remaining = np.arange(n)
    while remaining.size:
        sub_y, sub_x = MY[remaining], MX[remaining]
        sub_prev = is_prev[remaining]
        sub_valid = valid[remaining]
        known = sub_valid & (sub_prev | ~miss[sub_y, sub_x])
        known[:, 0] = False
        counts = known[:, 1:].sum(axis=1)
        k = max(1, math.ceil(cfg.batch_fraction * remaining.size))
        # most known entries first; ties in raster order
        order = np.lexsort((todo[remaining], -counts))[:k]
        sel = remaining[order]
        K = known[order]
        D = np.where(is_prev[sel], Dprev[sel] if temporal else 0.0, out[MY[sel], MX[sel]])
        Rs = R[sel]
        alpha, beta, nk, var = _fit_rows(Rs, D, K)
        r1 = Rs[:, 0]
        pred = alpha * r1 + beta
        mean_known = np.where(K, D, 0.0).sum(axis=1) / np.maximum(nk, 1)
        pred = np.where(nk == 1, mean_known, pred)
        pred = np.where(nk == 0, gain * r1, pred)
        info.fallbacks += int(np.count_nonzero((nk < 2) | (var <= _VAR_EPS)))
        ty, tx = np.divmod(todo[sel], w)
        out[ty, tx] = np.clip(pred, 0.0, 1.0)
        miss[ty, tx] = False
        info.rounds += 1
        info.reconstructed += sel.size
        remaining = np.setdiff1d(remaining, sel, assume_unique=True)
    return np.clip(out, 0.0, 1.0), info


def reconstruct_nocs(reference, distorted, missing, cfg: MatchConfig = MatchConfig(), n_jobs=1,
                     return_info=False):
    """Fill the ``missing`` pixels of ``distorted`` guided by ``reference``.

    ``missing`` is a boolean array (True = missing) or a :class:`Mask`
    (whose invalid pixels are the missing ones). Known pixels are returned
    unchanged (clipped to [0, 1]).
    """
    out, info = _reconstruct(reference, distorted, missing, cfg, n_jobs=n_jobs)
    return (out, info) if return_info else out


def reconstruct_tnocs(reference_t, reference_prev, distorted_t, distorted_prev, missing_t,
                      missing_prev_original, cfg: MatchConfig = MatchConfig(), n_jobs=1,
                      return_info=False):
    """Temporal variant of :func:`reconstruct_nocs` that also searches frame ``t - 1``.

    Only pixels of ``distorted_prev`` that were *not* originally missing
    (per ``missing_prev_original``) may serve as temporal matches.
    """
    out, info = _reconstruct(
        reference_t, distorted_t, missing_t, cfg,
        reference_prev=reference_prev, distorted_prev=distorted_prev,
        missing_prev=missing_prev_original, n_jobs=n_jobs,
    )
    return (out, info) if return_info else out


class NonLocalCrossSpectral(BaseEstimator):
    """Estimator wrapper: ``fit`` on the reference view, ``transform`` fills holes.

    Parameters
    ----------
    block_radius, search_radius, n_matches, batch_fraction
        See :class:`MatchConfig`.
    n_jobs : int
        Threads for the block-matching stage; results do not depend on it.
    """

    def __init__(self, block_radius=3, search_radius=15, n_matches=16, batch_fraction=0.1, n_jobs=1):
        self.block_radius = block_radius
        self.search_radius = search_radius
        self.n_matches = n_matches
        self.batch_fraction = batch_fraction
        self.n_jobs = n_jobs

    def _config(self):
        return MatchConfig(self.block_radius, self.search_radius, self.n_matches, self.batch_fraction)

    def fit(self, reference, y=None):
        self.config_ = self._config()
        self.reference_ = check_image(reference, "reference")
        return self

    def transform(self, distorted, missing):
        check_is_fitted(self, "reference_")
        out, self.info_ = _reconstruct(self.reference_, distorted, missing, self.config_, n_jobs=self.n_jobs)
        return out

    def fit_transform(self, reference, distorted, missing):
        return self.fit(reference).transform(distorted, missing)


class TemporalNonLocalCrossSpectral(NonLocalCrossSpectral):
    """Temporal variant; ``fit`` takes the current and previous reference frames."""

    def fit(self, reference, reference_prev=None, y=None):
        if reference_prev is None:
            raise ValidationError("the temporal reconstructor needs the previous reference frame")
        super().fit(reference)
        self.reference_prev_ = check_image(reference_prev, "previous reference")
        return self

    def transform(self, distorted, missing, distorted_prev=None, missing_prev=None):
        check_is_fitted(self, "reference_prev_")
        if distorted_prev is None or missing_prev is None:
            raise ValidationError("previous distorted frame and its original mask are required")
        out, self.info_ = _reconstruct(
            self.reference_, distorted, missing, self.config_,
            reference_prev=self.reference_prev_, distorted_prev=distorted_prev,
            missing_prev=missing_prev, n_jobs=self.n_jobs,
        )
        return out

    def fit_transform(self, reference, reference_prev, distorted, missing, distorted_prev, missing_prev):
        return self.fit(reference, reference_prev).transform(distorted, missing, distorted_prev, missing_prev)
