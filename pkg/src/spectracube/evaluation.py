"""PSNR and Bjontegaard-Delta metrics for rate-distortion curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import HyperCube
from .exceptions import DimensionMismatchError, EmptyOverlapError, NonMonotoneCurveError, ValidationError

#: Returned by :func:`psnr` for identical inputs; never enters curve fits.
PSNR_INF = math.inf


@dataclass(frozen=True)
class RDPoint:
    rate: float
    psnr: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError("rate must be positive")
        if not math.isfinite(self.psnr):
            raise ValidationError("PSNR of a curve point must be finite")


def _as_array(x):
    if isinstance(x, HyperCube):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def mse(a, b) -> float:
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak: float = 1.0) -> float:
    """Pooled PSNR in dB over all samples; :data:`PSNR_INF` when the inputs match."""
    if not peak > 0:
        raise ValidationError("peak must be positive")
    err = mse(a, b)
    if err == 0:
        return PSNR_INF
    return 10.0 * math.log10(peak * peak / err)


def _curve(points):
    pts = [p if isinstance(p, RDPoint) else RDPoint(*p) for p in points]
    if len(pts) < 4:
        raise ValidationError("Bjontegaard metrics need at least four points per curve")
    pts.sort(key=lambda p: p.rate)
    rate = np.array([p.rate for p in pts])
    q = np.array([p.psnr for p in pts])
    if np.any(np.diff(rate) <= 0) or np.any(np.diff(q) <= 0):
        raise NonMonotoneCurveError("curve must be strictly increasing in rate and PSNR")
    return np.log10(rate), q


def _avg_gap(xa, ya, xb, yb):
    """Mean of ``fit_b - fit_a`` over the overlap of the x ranges (cubic fits)."""
    lo = max(xa.min(), xb.min())
    hi = min(xa.max(), xb.max())
    if not hi > lo:
        raise EmptyOverlapError("curves do not overlap")
    pa = np.polyint(np.polyfit(xa, ya, 3))
    pb = np.polyint(np.polyfit(xb, yb, 3))
    ia = np.polyval(pa, hi) - np.polyval(pa, lo)
    ib = np.polyval(pb, hi) - np.polyval(pb, lo)
    return (ib - ia) / (hi - lo)


def bd_metrics(curve_a, curve_b):
    """Bjontegaard delta of ``curve_b`` against anchor ``curve_a``.

    Each curve is a sequence of :class:`RDPoint` or ``(rate, psnr)`` pairs.
    Returns ``(bd_rate_percent, bd_psnr_db)``; negative rate and positive PSNR
    mean ``curve_b`` is better.
    """
    la, qa = _curve(curve_a)
    lb, qb = _curve(curve_b)
    d_log_rate = _avg_gap(qa, la, qb, lb)
    bd_rate = (10.0 ** d_log_rate - 1.0) * 100.0
    bd_psnr = _avg_gap(la, qa, lb, qb)
    return float(bd_rate), float(bd_psnr)


def bd_rate(curve_a, curve_b) -> float:
    return bd_metrics(curve_a, curve_b)[0]


def bd_psnr(curve_a, curve_b) -> float:
    return bd_metrics(curve_a, curve_b)[1]


def finite_points(points):
    """Drop points whose PSNR is the infinite sentinel."""
    return [p for p in points if math.isfinite(p[1] if not isinstance(p, RDPoint) else p.psnr)]


def aggregate_bd(pairs, sizes=None):
    """Average BD metrics over scenes.

    ``pairs`` is a list of ``(curve_a, curve_b)``. Returns a dict with the plain
    per-scene mean and a mean weighted by ``sizes`` (default: total anchor rate
    of each scene, so large videos count more).
    """
    vals = np.array([bd_metrics(a, b) for a, b in pairs])
    if sizes is None:
        sizes = [sum(p[0] if not isinstance(p, RDPoint) else p.rate for p in a) for a, _ in pairs]
    wts = np.asarray(sizes, dtype=np.float64)
    return {
        "mean": (float(vals[:, 0].mean()), float(vals[:, 1].mean())),
        "weighted": tuple(float(v) for v in (wts @ vals) / wts.sum()),
    }


def rd_curves_svg(curves: dict, path=None, width=480, height=320) -> str:
    """Polyline plot of named RD curves (log10 rate vs PSNR) as SVG text."""
    margin = 48
    data = {name: _curve(pts) for name, pts in curves.items()}
    xs = np.concatenate([d[0] for d in data.values()])
    ys = np.concatenate([d[1] for d in data.values()])
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">log10 rate [bits]</text>',
        f'<text x="14" y="{height / 2:.1f}" transform="rotate(-90 14 {height / 2:.1f})" '
        f'text-anchor="middle">PSNR [dB]</text>',
    ]
    for i, (name, (lx, q)) in enumerate(data.items()):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(lx, q))
        c = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" points="{pts}"/>')
        out.append(f'<text x="{width - margin}" y="{margin + 16 * i}" fill="{c}" text-anchor="end">{name}</text>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(svg, encoding="utf-8")
    return svg
