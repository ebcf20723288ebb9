"""Dataset layout, 8-bit channel stacks, PFM depth maps and metric tables.

On-disk layout::

    <root>/<scene>/cam<k>/frame<tt>/ch<nnn>.png
    <root>/<scene>/cam<k>/frame<tt>/depth.pfm

Channel files hold 8-bit grayscale values ``v`` which map to ``v / 255``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import DEFAULT_GRID, DepthMap, HyperCube, SpectralGrid
from .exceptions import (
    DimensionMismatchError,
    MissingFileError,
    PFMFormatError,
    UnsupportedBitDepthError,
    ValidationError,
)

_CHANNEL_RE = re.compile(r"^ch(\d+(?:\.\d+)?)\.png$")
METRICS_HEADER = ("label", "rate_bits", "psnr_db")


def channel_filename(wavelength: float) -> str:
    if abs(wavelength - round(wavelength)) < 1e-9:
        return f"ch{int(round(wavelength)):03d}.png"
    return f"ch{wavelength:07.3f}.png"


@dataclass(frozen=True)
class DatasetLayout:
    root: Path
    n_cameras: int = 9
    n_frames: int = 30

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    def _check(self, camera, frame):
        if not 0 <= camera < self.n_cameras:
            raise ValidationError(f"camera {camera} outside 0..{self.n_cameras - 1}")
        if not 0 <= frame < self.n_frames:
            raise ValidationError(f"frame {frame} outside 0..{self.n_frames - 1}")

    def camera_dir(self, scene: str, camera: int) -> Path:
        self._check(camera, 0)
        return self.root / scene / f"cam{camera}"

    def frame_dir(self, scene: str, camera: int, frame: int) -> Path:
        self._check(camera, frame)
        return self.root / scene / f"cam{camera}" / f"frame{frame:02d}"

    def channel_path(self, scene, camera, frame, wavelength) -> Path:
        return self.frame_dir(scene, camera, frame) / channel_filename(wavelength)

    def depth_path(self, scene, camera, frame) -> Path:
        return self.frame_dir(scene, camera, frame) / "depth.pfm"


def quantize8(values) -> np.ndarray:
    """Map [0, 1] reals to bytes, rounding half away from zero."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(v + 0.5).astype(np.uint8)


def read_png8(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    with Image.open(path) as img:
        if img.mode != "L":
            raise UnsupportedBitDepthError(f"{path}: expected 8-bit grayscale, got mode {img.mode!r}")
        return np.asarray(img, dtype=np.uint8).copy()


def write_png8(values, path):
    """Write a [0, 1] image as an 8-bit grayscale PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(quantize8(values), mode="L").save(path, format="PNG")


def read_cube_dir(directory, grid: SpectralGrid | None = None) -> HyperCube:
    """Read one frame directory of ``ch*.png`` files.

    With ``grid`` given, exactly those wavelengths are loaded; otherwise every
    channel file found is used, sorted by wavelength.
    """
    directory = Path(directory)
    if grid is None:
        if not directory.is_dir():
            raise MissingFileError(directory)
        found = []
        for p in directory.iterdir():
            m = _CHANNEL_RE.match(p.name)
            if m:
                found.append(float(m.group(1)))
        if not found:
            raise MissingFileError(directory / "ch*.png")
        grid = SpectralGrid(tuple(sorted(found)))
    planes = []
    for wl in grid:
        p = directory / channel_filename(wl)
        if not p.is_file():
            raise MissingFileError(p, wavelength=wl)
        planes.append(read_png8(p))
    shapes = {pl.shape for pl in planes}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"channel images in {directory} have differing sizes {sorted(shapes)}")
    return HyperCube(np.stack(planes).astype(np.float64) / 255.0, grid)


def write_cube_dir(cube: HyperCube, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for wl, plane in zip(cube.grid, cube.samples):
        write_png8(plane, directory / channel_filename(wl))


def read_cube(layout: DatasetLayout, scene: str, camera: int, frame: int,
              grid: SpectralGrid = DEFAULT_GRID) -> HyperCube:
    return read_cube_dir(layout.frame_dir(scene, camera, frame), grid)


def write_cube(cube: HyperCube, layout: DatasetLayout, scene: str, camera: int, frame: int):
    write_cube_dir(cube, layout.frame_dir(scene, camera, frame))


def write_pfm(values, path):
    """Write a single-channel little-endian PFM (scale -1, rows bottom to top)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError("PFM writer expects a 2D array")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = arr.shape
    payload = np.flipud(arr).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(payload)


def read_pfm(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    with open(path, "rb") as fh:
        data = fh.read()
    # header tokens: magic, width, height, scale
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PFMFormatError(f"{path}: truncated header")
        tokens.append(data[start:pos].decode("ascii", errors="replace"))
    pos += 1  # single whitespace byte before the raster
    magic, ws, hs, ss = tokens
    if magic == "PF":
        raise PFMFormatError(f"{path}: color PFM not supported for depth")
    if magic != "Pf":
        raise PFMFormatError(f"{path}: bad magic {magic!r}")
    try:
        w, h, scale = int(ws), int(hs), float(ss)
    except ValueError as exc:
        raise PFMFormatError(f"{path}: malformed header") from exc
    if w <= 0 or h <= 0 or scale == 0 or not math.isfinite(scale):
        raise PFMFormatError(f"{path}: malformed header")
    dtype = "<f4" if scale < 0 else ">f4"
    n = w * h
    if len(data) - pos < 4 * n:
        raise PFMFormatError(f"{path}: truncated raster")
    arr = np.frombuffer(data, dtype=dtype, count=n, offset=pos).reshape(h, w)
    return np.flipud(arr).astype(np.float64)


def read_depth(path) -> DepthMap:
    arr = read_pfm(path)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValidationError(f"{path}: depth values must be finite and strictly positive")
    return DepthMap(arr)


def write_depth(depth: DepthMap, path):
    write_pfm(depth.depth, path)


def write_metrics_csv(rows, path):
    """Write ``(label, rate_bits, psnr_db)`` rows with six decimals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for label, rate, psnr_db in rows:
            writer.writerow([label, _fmt(rate), _fmt(psnr_db)])


def _fmt(v) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


def read_metrics_csv(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != METRICS_HEADER:
            raise ValidationError(f"{path}: expected header {','.join(METRICS_HEADER)}")
        return [(r[0], float(r[1]), float(r[2])) for r in reader if r]


def append_metrics_csv(rows, path):
    path = Path(path)
    existing = read_metrics_csv(path) if path.is_file() else []
    write_metrics_csv(existing + list(rows), path)
