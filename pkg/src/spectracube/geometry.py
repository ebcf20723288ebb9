"""Homographies for texture extraction, depth to disparity, and forward view warping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image
from .core import ArrayGeometry, DepthMap, DisparityMap, HyperCube, Mask
from .exceptions import (
    DimensionMismatchError,
    QuadOutOfBoundsError,
    SingularConfigurationError,
    ValidationError,
    ZeroBaselineError,
)

_SNAP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective matrix normalized so that ``h33 == 1``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValidationError("homography must be a finite 3x3 matrix")
        if abs(m[2, 2]) < 1e-300:
            raise SingularConfigurationError("h33 is zero; cannot normalize")
        m = m / m[2, 2]
        m[2, 2] = 1.0
        if abs(np.linalg.det(m)) <= 1e-12:
            raise SingularConfigurationError("homography is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, points) -> np.ndarray:
        """Map an ``(n, 2)`` array of (x, y) points."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        hom = np.column_stack([pts, np.ones(len(pts))]) @ self.matrix.T
        return hom[:, :2] / hom[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


@dataclass(frozen=True, eq=False)
class Quad:
    """Four (x, y) source points ordered top-left, bottom-left, bottom-right, top-right."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (4, 2) or not np.all(np.isfinite(pts)):
            raise ValidationError("quad needs four finite (x, y) points")
        _check_no_three_collinear(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def rectangle(cls, x0, y0, w, h) -> "Quad":
        return cls([(x0, y0), (x0, y0 + h), (x0 + w, y0 + h), (x0 + w, y0)])


def _check_no_three_collinear(pts):
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-300)
    for i in range(4):
        a, b, c = (pts[j] for j in range(4) if j != i)
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cross) <= 1e-10 * scale * scale:
            raise SingularConfigurationError("three quad points are collinear")


def destination_corners(W, H) -> np.ndarray:
    return np.array([(0.0, 0.0), (0.0, H), (W, H), (W, 0.0)])


def _normalizer(pts):
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = np.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def dlt(src, dst) -> np.ndarray:
    """Normalized direct linear transform: matrix mapping ``src`` points onto ``dst``."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    Ts, Td = _normalizer(src), _normalizer(dst)
    s = np.column_stack([src, np.ones(len(src))]) @ Ts.T
    d = np.column_stack([dst, np.ones(len(dst))]) @ Td.T
    rows = []
    for (x, y, _), (u, v, _) in zip(s, d):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, sv, vt = np.linalg.svd(np.asarray(rows))
    # sv[7] is the smallest singular value that must stay nonzero (8 dof)
    if sv[7] <= 1e-12 * sv[0]:
        raise SingularConfigurationError("point configuration does not determine a homography")
    Hn = vt[-1].reshape(3, 3)
    return np.linalg.inv(Td) @ Hn @ Ts


def estimate_homography(quad: Quad, W: float, H: float) -> Homography:
    """Homography taking the texture corners ``(0,0),(0,H),(W,H),(W,0)`` to ``quad``."""
    if not (W >= 1 and H >= 1):
        raise ValidationError("texture size must be at least 1x1")
    if not isinstance(quad, Quad):
        quad = Quad(quad)
    m = dlt(destination_corners(W, H), quad.points)
    if abs(m[2, 2]) < 1e-12 * np.abs(m).max():
        raise SingularConfigurationError("h33 vanishes for this configuration")
    return Homography(m)


def _snap(coords):
    r = np.round(coords)
    return np.where(np.abs(coords - r) <= _SNAP_TOL, r, coords)


def bilinear_sample(img, xs, ys) -> np.ndarray:
    """Bilinear lookup at real coordinates with edge-clamped extension."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2:]
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[..., y0, x0] * (1 - fx) + img[..., y0, x1] * fx
    bot = img[..., y1, x0] * (1 - fx) + img[..., y1, x1] * fx
    return top * (1 - fy) + bot * fy


def extract_texture(cube: HyperCube, quad: Quad, W: int, H: int) -> HyperCube:
    """Rectify the quad region of every channel into a ``W x H`` texture."""
    if not isinstance(quad, Quad):
        quad = Quad(quad)
    pts = quad.points
    if np.any(pts < -_SNAP_TOL) or np.any(pts[:, 0] > cube.width + _SNAP_TOL) or np.any(
        pts[:, 1] > cube.height + _SNAP_TOL
    ):
        raise QuadOutOfBoundsError("quad lies outside the source image")
    hom = estimate_homography(quad, W, H)
    us, vs = np.meshgrid(np.arange(W, dtype=np.float64), np.arange(H, dtype=np.float64))
    src = hom.apply(np.column_stack([us.ravel(), vs.ravel()]))
    xs = _snap(src[:, 0]).reshape(H, W)
    ys = _snap(src[:, 1]).reshape(H, W)
    out = bilinear_sample(cube.samples, xs, ys)
    return HyperCube(np.clip(out, 0.0, 1.0), cube.grid)


class TextureExtractor(BaseEstimator, TransformerMixin):
    """Estimate the quad homography once in ``fit``; warp cubes in ``transform``."""

    def __init__(self, quad=None, width=64, height=64):
        self.quad = quad
        self.width = width
        self.height = height

    def fit(self, X=None, y=None):
        if self.quad is None:
            raise ValidationError("TextureExtractor needs a quad")
        self.quad_ = self.quad if isinstance(self.quad, Quad) else Quad(self.quad)
        self.homography_ = estimate_homography(self.quad_, self.width, self.height)
        return self

    def transform(self, X):
        check_is_fitted(self, "homography_")
        return extract_texture(X, self.quad_, self.width, self.height)


def disparity_scale(depth_m, geom: ArrayGeometry) -> np.ndarray:
    """``b * f / (p * s)`` in pixels for one baseline unit, depth given in meters."""
    intr = geom.intrinsics
    p_mm = np.asarray(depth_m, dtype=np.float64) * 1000.0
    return (geom.baseline_mm * intr.focal_mm) / (p_mm * intr.pixel_pitch_mm)


def depth_to_disparity(depth: DepthMap, geom: ArrayGeometry, cam_src: int, cam_dst: int) -> DisparityMap:
    """Per-axis disparity from ``cam_src`` to ``cam_dst``.

    A camera displaced along +x sees the scene shifted along -x, hence the
    negative sign on the grid offsets.
    """
    rs, cs = geom.position(cam_src)
    rd, cd = geom.position(cam_dst)
    if (rs, cs) == (rd, cd):
        raise ZeroBaselineError(f"cameras {cam_src} and {cam_dst} coincide")
    k = disparity_scale(depth.depth, geom)
    return DisparityMap(-(cd - cs) * k, -(rd - rs) * k)


def round_half_away(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.intp)


def forward_warp(values, depth, dx, dy):
    """Z-buffered forward warp with nearest-integer landing.

    Collisions keep the smaller depth; equal depths keep the lexicographically
    smaller source ``(y, x)``. Returns ``(warped, valid)``.
    """
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + round_half_away(dx)
    ty = ys + round_half_away(dy)
    inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    src = np.flatnonzero(inside.ravel())
    target = (ty.ravel() * w + tx.ravel())[src]
    d = np.asarray(depth, dtype=np.float64).ravel()[src]
    order = np.lexsort((xs.ravel()[src], ys.ravel()[src], d))
    target_sorted = target[order]
    uniq, first = np.unique(target_sorted, return_index=True)
    winners = src[order[first]]
    out = np.zeros(h * w)
    valid = np.zeros(h * w, dtype=bool)
    out[uniq] = values.ravel()[winners]
    valid[uniq] = True
    return out.reshape(h, w), valid.reshape(h, w)


def warp_view(channel, depth_src: DepthMap, geom: ArrayGeometry, cam_src: int, cam_dst: int):
    """Forward-warp one channel of ``cam_src`` into ``cam_dst``.

    Returns the warped image (zeros where nothing landed) and its validity Mask.
    Warping a camera onto itself is the identity with a fully valid mask.
    """
    img = check_image(channel, "channel")
    if img.shape != depth_src.depth.shape:
        raise DimensionMismatchError(f"channel {img.shape} vs depth {depth_src.depth.shape}")
    if geom.position(cam_src) == geom.position(cam_dst):
        return img.copy(), Mask(np.ones(img.shape, dtype=bool))
    disp = depth_to_disparity(depth_src, geom, cam_src, cam_dst)
    warped, valid = forward_warp(img, depth_src.depth, disp.dx, disp.dy)
    return warped, Mask(valid)


def warp_cube(cube: HyperCube, depth_src: DepthMap, geom, cam_src, cam_dst):
    """Warp all channels with the shared geometry; returns ``(array, Mask)``."""
    if cube.samples.shape[1:] != depth_src.depth.shape:
        raise DimensionMismatchError(f"cube {cube.samples.shape[1:]} vs depth {depth_src.depth.shape}")
    if geom.position(cam_src) == geom.position(cam_dst):
        return cube.samples.copy(), Mask(np.ones(depth_src.depth.shape, dtype=bool))
    disp = depth_to_disparity(depth_src, geom, cam_src, cam_dst)
    planes, valid = [], None
    for ch in cube.samples:
        w, valid = forward_warp(ch, depth_src.depth, disp.dx, disp.dy)
        planes.append(w)
    return np.stack(planes), Mask(valid)
