"""Illuminants, spectral filter banks and CIE 1931 RGB rendering."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import constants
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import DEFAULT_GRID, FilterBank, HyperCube, SpectralGrid, Spectrum, check_grid_match
from .exceptions import GridMismatchError, ValidationError

PLANCK_T_RANGE = (1000.0, 20000.0)

# CIE 1931 2 degree standard observer, 400..700 nm in 10 nm steps (x-bar, y-bar, z-bar).
CIE1931_CMF = np.array([
    [0.014310, 0.000396, 0.067850],
    [0.043510, 0.001210, 0.207400],
    [0.134380, 0.004000, 0.645600],
    [0.283900, 0.011600, 1.385600],
    [0.348280, 0.023000, 1.747060],
    [0.336200, 0.038000, 1.772110],
    [0.290800, 0.060000, 1.669200],
    [0.195360, 0.090980, 1.287640],
    [0.095640, 0.139020, 0.812950],
    [0.032010, 0.208020, 0.465180],
    [0.004900, 0.323000, 0.272000],
    [0.009300, 0.503000, 0.158200],
    [0.063270, 0.710000, 0.078250],
    [0.165500, 0.862000, 0.042160],
    [0.290400, 0.954000, 0.020300],
    [0.433450, 0.994950, 0.008750],
    [0.594500, 0.995000, 0.003900],
    [0.762100, 0.952000, 0.002100],
    [0.916300, 0.870000, 0.001650],
    [1.026300, 0.757000, 0.001100],
    [1.062200, 0.631000, 0.000800],
    [1.002600, 0.503000, 0.000340],
    [0.854450, 0.381000, 0.000190],
    [0.642400, 0.265000, 0.000050],
    [0.447900, 0.175000, 0.000020],
    [0.283500, 0.107000, 0.000000],
    [0.164900, 0.061000, 0.000000],
    [0.087400, 0.032000, 0.000000],
    [0.046770, 0.017000, 0.000000],
    [0.022700, 0.008210, 0.000000],
    [0.011359, 0.004102, 0.000000],
])

# linear sRGB from XYZ (D65 primaries)
XYZ_TO_SRGB = np.array([
    [3.2406, -1.5372, -0.4986],
    [-0.9689, 1.8758, 0.0415],
    [0.0557, -0.2040, 1.0570],
])

BANDPASS_CENTERS_NM = (425, 450, 500, 550, 600, 650)
BANDPASS_WIDTH_NM = 50.0


@dataclass(frozen=True, eq=False)
class Illuminant:
    color_temperature_K: float
    spectrum: Spectrum

    @property
    def values(self) -> np.ndarray:
        return self.spectrum.values


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Linear RGB image, ``rgb`` has shape ``(3, height, width)`` in [0, 1]."""

    rgb: np.ndarray

    @property
    def height(self):
        return self.rgb.shape[1]

    @property
    def width(self):
        return self.rgb.shape[2]


def planck_radiance(wavelength_nm, T):
    """Black-body spectral radiance B(lambda, T) in W sr^-1 m^-3."""
    lam = np.asarray(wavelength_nm, dtype=np.float64) * 1e-9
    h, c, k = constants.h, constants.c, constants.k
    return (2.0 * h * c**2 / lam**5) / np.expm1(h * c / (lam * k * T))


def planck_spectrum(T: float, grid: SpectralGrid = DEFAULT_GRID) -> Illuminant:
    """Planck illuminant on ``grid`` normalized to a maximum of exactly 1."""
    lo, hi = PLANCK_T_RANGE
    if not lo <= T <= hi:
        raise ValidationError(f"color temperature {T} K outside [{lo:g}, {hi:g}] K")
    b = planck_radiance(grid.as_array(), T)
    return Illuminant(float(T), Spectrum(b / b.max(), grid))


def _cmf_for(grid: SpectralGrid) -> np.ndarray:
    if len(grid) != len(DEFAULT_GRID):
        raise GridMismatchError("CIE rendering requires the default 400-700 nm grid")
    check_grid_match(grid, DEFAULT_GRID)
    return CIE1931_CMF


def builtin_filter_bank(grid: SpectralGrid = DEFAULT_GRID) -> FilterBank:
    """Six 50 nm rectangular bandpasses plus CIE-derived R, G, B rows."""
    cmf = _cmf_for(grid)
    wl = grid.as_array()
    rows = []
    half = BANDPASS_WIDTH_NM / 2
    for c in BANDPASS_CENTERS_NM:
        inside = (wl >= c - half - 1e-9) & (wl <= c + half + 1e-9)
        rows.append((f"bp{c}", inside.astype(np.float64)))
    # x-bar carries the red lobe, y-bar green, z-bar blue
    for name, col in (("R", 0), ("G", 1), ("B", 2)):
        curve = cmf[:, col]
        rows.append((name, curve / curve.max()))
    return FilterBank.from_rows(rows, grid)


def load_filter_bank(path, grid: SpectralGrid | None = None) -> FilterBank:
    """Read a filter bank CSV.

    The header holds the wavelengths, optionally preceded by a ``name`` column;
    every further row is one filter with transmissions in [0, 1].
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValidationError(f"{path}: need a header and at least one filter row")
    header = rows[0]
    named = header[0].strip().lower() == "name"
    wl = tuple(float(v) for v in (header[1:] if named else header))
    file_grid = SpectralGrid(wl)
    if grid is not None:
        check_grid_match(grid, file_grid)
    names, mat = [], []
    for i, r in enumerate(rows[1:]):
        if named:
            names.append(r[0].strip())
            r = r[1:]
        else:
            names.append(f"f{i}")
        mat.append([float(v) for v in r])
    return FilterBank(tuple(names), np.array(mat), grid or file_grid)


def save_filter_bank(bank: FilterBank, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name"] + [f"{v:g}" for v in bank.grid])
        for name, row in zip(bank.names, bank.matrix):
            w.writerow([name] + [repr(float(v)) for v in row])


def filter_weights(bank: FilterBank) -> np.ndarray:
    """Rows of the bank divided by their sums (all-zero rows stay zero)."""
    sums = bank.matrix.sum(axis=1, keepdims=True)
    return np.divide(bank.matrix, sums, out=np.zeros_like(bank.matrix), where=sums > 0)


def apply_filters(cube: HyperCube, bank: FilterBank, clip=True) -> np.ndarray:
    """Simulate one camera per filter; returns ``(n_filters, height, width)``."""
    check_grid_match(cube.grid, bank.grid)
    out = np.tensordot(filter_weights(bank), cube.samples, axes=(1, 0))
    return np.clip(out, 0.0, 1.0) if clip else out


def _xyz(samples: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    cmf = _cmf_for(grid)
    return np.tensordot(cmf.T, samples, axes=(1, 0)) / cmf[:, 1].sum()


def render_rgb(cube: HyperCube, white_balance=True, clip=True) -> RgbImage:
    """Render a cube to linear sRGB through the CIE 1931 observer.

    With ``white_balance`` the channels are scaled so that an equal-energy
    spectrum maps to a neutral grey of the same luminance.
    """
    rgb = np.tensordot(XYZ_TO_SRGB, _xyz(cube.samples, cube.grid), axes=(1, 0))
    if white_balance:
        rgb = rgb / equal_energy_rgb()[:, None, None]
    if clip:
        rgb = np.clip(rgb, 0.0, 1.0)
    return RgbImage(rgb)


def equal_energy_rgb() -> np.ndarray:
    xyz = CIE1931_CMF.sum(axis=0) / CIE1931_CMF[:, 1].sum()
    return XYZ_TO_SRGB @ xyz


class FilterBankProjector(BaseEstimator, TransformerMixin):
    """Transformer that maps cubes to simulated multispectral camera channels.

    Parameters
    ----------
    bank : FilterBank or None
        Filters to apply; ``None`` selects :func:`builtin_filter_bank`.
    clip : bool
        Clip outputs to [0, 1].
    """

    def __init__(self, bank=None, clip=True):
        self.bank = bank
        self.clip = clip

    def fit(self, X=None, y=None):
        self.bank_ = self.bank if self.bank is not None else builtin_filter_bank()
        return self

    def transform(self, X):
        check_is_fitted(self, "bank_")
        if isinstance(X, HyperCube):
            return apply_filters(X, self.bank_, clip=self.clip)
        return [apply_filters(c, self.bank_, clip=self.clip) for c in X]
