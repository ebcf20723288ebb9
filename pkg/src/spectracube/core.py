"""Domain types and constants shared across the package.

All types are immutable once constructed; their arrays are flagged read-only so
they can be shared between threads without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._validation import check_mask, check_unit_range, readonly
from .exceptions import DimensionMismatchError, GridMismatchError, ValidationError

DEFAULT_WAVELENGTHS = tuple(float(w) for w in range(400, 701, 10))


@dataclass(frozen=True)
class SpectralGrid:
    """Ordered sample wavelengths in nm (default: 400-700 nm in 10 nm steps)."""

    wavelengths: tuple = DEFAULT_WAVELENGTHS

    def __post_init__(self):
        wl = tuple(float(w) for w in self.wavelengths)
        if len(wl) == 0:
            raise ValidationError("spectral grid is empty")
        if any(b <= a for a, b in zip(wl, wl[1:])):
            raise ValidationError("wavelengths must be strictly increasing")
        object.__setattr__(self, "wavelengths", wl)

    @classmethod
    def uniform(cls, start=400.0, step=10.0, count=31) -> "SpectralGrid":
        return cls(tuple(start + step * i for i in range(count)))

    def __len__(self):
        return len(self.wavelengths)

    def __iter__(self):
        return iter(self.wavelengths)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.wavelengths, dtype=np.float64)

    def is_uniform(self, tol=1e-9) -> bool:
        if len(self) < 2:
            return True
        d = np.diff(self.as_array())
        return bool(np.all(np.abs(d - d[0]) <= tol))

    def index(self, wavelength: float) -> int:
        for i, w in enumerate(self.wavelengths):
            if abs(w - wavelength) < 1e-9:
                return i
        raise KeyError(f"{wavelength} nm not on grid")


DEFAULT_GRID = SpectralGrid()


def _check_grid_match(a: SpectralGrid, b: SpectralGrid):
    if len(a) != len(b) or not np.allclose(a.as_array(), b.as_array(), atol=1e-9, rtol=0):
        raise GridMismatchError("spectral grids differ")


@dataclass(frozen=True, eq=False)
class HyperCube:
    """One frame of a hyperspectral datacube.

    ``samples`` has shape ``(channels, height, width)`` and holds normalized
    intensities in [0, 1]; channel ``i`` belongs to ``grid.wavelengths[i]``.
    """

    samples: np.ndarray
    grid: SpectralGrid = DEFAULT_GRID

    def __post_init__(self):
        if isinstance(self.samples, (list, tuple)):
            shapes = {np.shape(c) for c in self.samples}
            if len(shapes) > 1:
                raise DimensionMismatchError(f"channels have differing shapes {sorted(shapes)}")
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionMismatchError(f"samples must be (channels, height, width), got {arr.shape}")
        if arr.shape[0] != len(self.grid):
            raise DimensionMismatchError(
                f"{arr.shape[0]} channels but grid has {len(self.grid)} wavelengths"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("cube samples must be finite")
        check_unit_range(arr, "cube samples")
        object.__setattr__(self, "samples", readonly(arr))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    @property
    def shape(self):
        return self.samples.shape

    def channel(self, i: int) -> np.ndarray:
        return self.samples[i]

    def pixel(self, y: int, x: int) -> np.ndarray:
        return self.samples[:, y, x]

    def with_samples(self, samples) -> "HyperCube":
        return HyperCube(samples, self.grid)

    def __eq__(self, other):
        if not isinstance(other, HyperCube):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.samples, other.samples)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel physical depth in meters."""

    depth: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.depth, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"depth map must be 2D, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValidationError("depth values must be finite and strictly positive")
        object.__setattr__(self, "depth", readonly(arr))

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-axis signed disparity in pixels.

    Adding ``(dx, dy)`` to a source pixel coordinate gives the destination coordinate.
    """

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        dx = np.asarray(self.dx, dtype=np.float64)
        dy = np.asarray(self.dy, dtype=np.float64)
        if dx.shape != dy.shape or dx.ndim != 2:
            raise DimensionMismatchError("dx and dy must be 2D arrays of equal shape")
        object.__setattr__(self, "dx", readonly(dx))
        object.__setattr__(self, "dy", readonly(dy))

    @property
    def height(self):
        return self.dx.shape[0]

    @property
    def width(self):
        return self.dx.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.dx, self.dy)


@dataclass(frozen=True, eq=False)
class Mask:
    """Validity raster; ``True`` marks a valid pixel."""

    valid: np.ndarray

    def __post_init__(self):
        arr = check_mask(self.valid).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "valid", arr)

    @property
    def height(self):
        return self.valid.shape[0]

    @property
    def width(self):
        return self.valid.shape[1]

    @property
    def invalid(self) -> np.ndarray:
        return ~self.valid

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return np.array_equal(self.valid, other.valid)

    __hash__ = None


@dataclass(frozen=True)
class CameraIntrinsics:
    sensor_width_mm: float = 7.2
    sensor_height_mm: float = 5.4
    res_x: int = 1600
    res_y: int = 1200
    focal_mm: float = 6.0

    def __post_init__(self):
        if min(self.sensor_width_mm, self.sensor_height_mm, self.focal_mm) <= 0:
            raise ValidationError("sensor size and focal length must be positive")
        if self.res_x < 1 or self.res_y < 1:
            raise ValidationError("resolution must be positive")
        if abs(self.sensor_width_mm / self.res_x - self.sensor_height_mm / self.res_y) > 1e-9:
            raise ValidationError("pixels must be square")

    @property
    def pixel_pitch_mm(self) -> float:
        return self.sensor_width_mm / self.res_x


@dataclass(frozen=True)
class ArrayGeometry:
    """A rows x cols camera grid with uniform baseline.

    Camera ``k`` sits at row ``k // cols`` and column ``k % cols``; columns grow
    along the image x axis and rows along the image y axis.
    """

    rows: int = 3
    cols: int = 3
    baseline_mm: float = 40.0
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("camera grid must be at least 1x1")
        if not self.baseline_mm > 0:
            raise ValidationError("baseline must be positive")

    @property
    def n_cameras(self) -> int:
        return self.rows * self.cols

    @property
    def center(self) -> int:
        return (self.rows // 2) * self.cols + self.cols // 2

    def position(self, camera: int):
        if not 0 <= camera < self.n_cameras:
            raise ValidationError(f"camera index {camera} outside 0..{self.n_cameras - 1}")
        return divmod(camera, self.cols)


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray
    grid: SpectralGrid = DEFAULT_GRID

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (len(self.grid),):
            raise GridMismatchError(f"spectrum length {arr.shape} does not match grid ({len(self.grid)})")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("spectrum values must be finite and nonnegative")
        object.__setattr__(self, "values", readonly(arr))

    def __mul__(self, other: "Spectrum") -> "Spectrum":
        _check_grid_match(self.grid, other.grid)
        return Spectrum(self.values * other.values, self.grid)


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Stack of named transmission curves; row ``i`` is filter ``names[i]``."""

    names: tuple
    matrix: np.ndarray
    grid: SpectralGrid = DEFAULT_GRID

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if mat.shape != (len(names), len(self.grid)):
            raise GridMismatchError(
                f"filter matrix shape {mat.shape} does not match {len(names)} names x {len(self.grid)} wavelengths"
            )
        if not np.all(np.isfinite(mat)):
            raise ValidationError("filter values must be finite")
        check_unit_range(mat, "filter transmissions")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "matrix", readonly(mat))

    @classmethod
    def from_rows(cls, rows: Sequence, grid: SpectralGrid = DEFAULT_GRID) -> "FilterBank":
        names, vals = zip(*rows)
        return cls(names, np.vstack(vals), grid)

    def __len__(self):
        return len(self.names)

    def row(self, name: str) -> np.ndarray:
        return self.matrix[self.names.index(name)]


def check_grid_match(a: SpectralGrid, b: SpectralGrid):
    _check_grid_match(a, b)
