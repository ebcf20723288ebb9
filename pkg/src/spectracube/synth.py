"""Procedural layered scenes with exact depth, disparity and occlusions.

A scene is a stack of fronto-parallel rectangles (plus an optional infinite
background plane), each at a fixed depth and translating by a constant number of
pixels per frame. Every layer carries procedural textures that blend three
smooth reflectance spectra; the illuminant is a Planck spectrum. Each camera of
the array sees the layers shifted by their analytic disparity, so depth,
occlusion and motion are known exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import DEFAULT_GRID, ArrayGeometry, CameraIntrinsics, DepthMap, HyperCube, SpectralGrid
from .exceptions import ValidationError
from .geometry import disparity_scale, round_half_away
from .io import write_cube, write_depth
from .spectra import planck_spectrum

MAX_DIM = 256


@dataclass(frozen=True)
class Layer:
    """One fronto-parallel layer.

    ``rect`` is ``(x0, y0, w, h)`` in center-camera pixels at frame 0, or
    ``None`` for an infinite background plane. ``motion`` is the translation in
    pixels per frame.
    """

    rect: tuple | None
    depth_m: float
    motion: tuple = (0, 0)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 64
    height: int = 64
    n_frames: int = 2
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    illuminant_K: float = 6400.0
    layers: tuple = (Layer(None, 20.0),)
    seed: int = 0
    texture_contrast: float = 1.0
    subpixel: bool = False

    def __post_init__(self):
        if not (1 <= self.width <= MAX_DIM and 1 <= self.height <= MAX_DIM):
            raise ValidationError(f"scene dims must lie within 1..{MAX_DIM}")
        if self.n_frames < 1:
            raise ValidationError("need at least one frame")
        if not self.layers:
            raise ValidationError("scene needs at least one layer")
        depths = [float(layer.depth_m) for layer in self.layers]
        if any(d <= 0 for d in depths):
            raise ValidationError("layer depths must be positive")
        if len(set(depths)) != len(depths):
            raise ValidationError("layer depths must be distinct")
        if not 0 <= self.texture_contrast <= 1:
            raise ValidationError("texture_contrast must lie in [0, 1]")


@dataclass
class SceneVideo:
    """Generated views: ``cubes[cam][t]``, ``depths[cam][t]`` and ``labels[cam][t]``.

    ``labels`` holds the index of the visible layer per pixel.
    """

    spec: SceneSpec
    cubes: list
    depths: list
    labels: list

    def view(self, camera, frame):
        return self.cubes[camera][frame], self.depths[camera][frame]


def _gaussian_mixture(rng, wl):
    k = int(rng.integers(1, 4))
    centers = rng.uniform(wl[0], wl[-1], k)
    widths = rng.uniform(30.0, 120.0, k)
    amps = rng.uniform(0.2, 1.0, k)
    s = (amps[:, None] * np.exp(-0.5 * ((wl[None, :] - centers[:, None]) / widths[:, None]) ** 2)).sum(axis=0)
    return 0.05 + 0.9 * s / s.max()


class _Texture:
    """Quasi-periodic pattern in [0, 1] from a few random plane waves."""

    def __init__(self, rng, contrast, n=4):
        self.freq = rng.uniform(0.15, 0.9, n)
        theta = rng.uniform(0, np.pi, n)
        self.cos = np.cos(theta)
        self.sin = np.sin(theta)
        self.phase = rng.uniform(0, 2 * np.pi, n)
        self.amp = rng.uniform(0.5, 1.0, n)
        self.contrast = contrast

    def __call__(self, u, v):
        acc = np.zeros(np.broadcast(u, v).shape)
        for f, c, s, p, a in zip(self.freq, self.cos, self.sin, self.phase, self.amp):
            acc += a * np.sin(f * (u * c + v * s) + p)
        return 0.5 + 0.5 * self.contrast * acc / self.amp.sum()


class _Material:
    # Three smooth spectra blended by two independent textures, so that two
    # filtered bands are not globally affine within one layer.
    def __init__(self, rng, wl, contrast):
        self.spectra = [_gaussian_mixture(rng, wl) for _ in range(3)]
        self.tex1 = _Texture(rng, contrast)
        self.tex2 = _Texture(rng, contrast)

    def reflectance(self, u, v):
        w1 = self.tex1(u, v)[None]
        w2 = self.tex2(u, v)[None]
        a, b, c = (s[:, None, None] for s in self.spectra)
        return w1 * a + (1 - w1) * (w2 * b + (1 - w2) * c)


def _camera_shift(spec: SceneSpec, layer: Layer, camera: int):
    geom = spec.geometry
    rc, cc = geom.position(geom.center)
    r, c = geom.position(camera)
    k = float(disparity_scale(layer.depth_m, geom))
    sx, sy = -(c - cc) * k, -(r - rc) * k
    if not spec.subpixel:
        sx, sy = int(round_half_away(sx)), int(round_half_away(sy))
    return sx, sy


def render_view(spec: SceneSpec, camera: int, frame: int, grid: SpectralGrid = DEFAULT_GRID, materials=None):
    """Render one camera/frame; returns ``(cube, depth, labels)``."""
    if materials is None:
        materials = _materials(spec, grid)
    light = planck_spectrum(spec.illuminant_K, grid).values
    h, w = spec.height, spec.width
    ys, xs = np.mgrid[0:h, 0:w]
    order = sorted(range(len(spec.layers)), key=lambda i: -spec.layers[i].depth_m)
    samples = np.zeros((len(grid), h, w))
    depth = np.full((h, w), np.inf)
    labels = np.full((h, w), -1, dtype=np.int64)
    for i in order:
        layer = spec.layers[i]
        sx, sy = _camera_shift(spec, layer, camera)
        mx, my = layer.motion
        u = xs - sx - frame * mx
        v = ys - sy - frame * my
        if layer.rect is not None:
            x0, y0, rw, rh = layer.rect
            u = u - x0
            v = v - y0
            cover = (u >= 0) & (u < rw) & (v >= 0) & (v < rh)
        else:
            cover = np.ones((h, w), dtype=bool)
        if not cover.any():
            continue
        refl = materials[i].reflectance(u, v)
        samples[:, cover] = (light[:, None, None] * refl)[:, cover]
        depth[cover] = layer.depth_m
        labels[cover] = i
    if np.any(labels < 0):
        raise ValidationError("layers leave pixels uncovered; add a background layer (rect=None)")
    return HyperCube(np.clip(samples, 0.0, 1.0), grid), DepthMap(depth), labels


def _materials(spec, grid):
    rng = np.random.default_rng(spec.seed)
    wl = grid.as_array()
    return [_Material(rng, wl, spec.texture_contrast) for _ in spec.layers]


def generate(spec: SceneSpec, cameras=None, grid: SpectralGrid = DEFAULT_GRID) -> SceneVideo:
    """Render every camera (or the given subset) for every frame."""
    materials = _materials(spec, grid)
    n_cam = spec.geometry.n_cameras
    cams = range(n_cam) if cameras is None else cameras
    cubes = [[] for _ in range(n_cam)]
    depths = [[] for _ in range(n_cam)]
    labels = [[] for _ in range(n_cam)]
    for cam in cams:
        for t in range(spec.n_frames):
            cube, depth, lab = render_view(spec, cam, t, grid, materials)
            cubes[cam].append(cube)
            depths[cam].append(depth)
            labels[cam].append(lab)
    return SceneVideo(spec, cubes, depths, labels)


def random_scene_spec(rng, max_dim=128, n_layers=None, n_frames=2, geometry=None,
                      max_motion=0, min_dim=24) -> SceneSpec:
    """Random background plus 1-3 rectangles, for property tests."""
    rng = np.random.default_rng(rng)
    w = int(rng.integers(min_dim, max_dim + 1))
    h = int(rng.integers(min_dim, max_dim + 1))
    n_layers = int(rng.integers(2, 5)) if n_layers is None else n_layers
    geometry = geometry or ArrayGeometry(baseline_mm=40.0)
    depths = np.sort(rng.choice(np.arange(30, 400), size=n_layers, replace=False))[::-1] / 10.0
    layers = [Layer(None, float(depths[0]))]
    for d in depths[1:]:
        rw = int(rng.integers(4, max(5, w // 2)))
        rh = int(rng.integers(4, max(5, h // 2)))
        x0 = int(rng.integers(0, max(1, w - rw)))
        y0 = int(rng.integers(0, max(1, h - rh)))
        motion = tuple(int(m) for m in rng.integers(-max_motion, max_motion + 1, 2))
        layers.append(Layer((x0, y0, rw, rh), float(d), motion))
    return SceneSpec(w, h, n_frames, geometry, 6400.0, tuple(layers), int(rng.integers(0, 2**31)))


_SCALAR_KEYS = {
    "width": int, "height": int, "frames": int, "seed": int,
    "illuminant_K": float, "baseline_mm": float, "focal_mm": float,
    "sensor_width_mm": float, "sensor_height_mm": float, "res_x": int, "res_y": int,
    "rows": int, "cols": int, "texture_contrast": float, "subpixel": int,
}


def parse_scene_spec(text: str, seed: int | None = None) -> SceneSpec:
    """Parse the key/value + layer table text format.

    Example::

        width = 64
        height = 48
        frames = 2
        illuminant_K = 6400
        # layer  x0 y0 w  h   depth_m  dx dy   ('-' for an infinite plane)
        layer    -  -  -  -   20.0     0  0
        layer    10 12 16 16  2.5      3  0
    """
    vals = {}
    layers = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("layer"):
            parts = line.split()[1:]
            if len(parts) not in (5, 7):
                raise ValidationError(f"line {lineno}: layer needs x0 y0 w h depth [dx dy]")
            if parts[0] == "-":
                rect = None
            else:
                rect = tuple(int(p) for p in parts[:4])
            motion = (int(parts[5]), int(parts[6])) if len(parts) == 7 else (0, 0)
            layers.append(Layer(rect, float(parts[4]), motion))
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key=value or a layer row")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SCALAR_KEYS:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        vals[key] = _SCALAR_KEYS[key](value)
    base = CameraIntrinsics()
    intr = CameraIntrinsics(
        vals.get("sensor_width_mm", base.sensor_width_mm),
        vals.get("sensor_height_mm", base.sensor_height_mm),
        vals.get("res_x", base.res_x),
        vals.get("res_y", base.res_y),
        vals.get("focal_mm", base.focal_mm),
    )
    geom = ArrayGeometry(vals.get("rows", 3), vals.get("cols", 3), vals.get("baseline_mm", 40.0), intr)
    spec = SceneSpec(
        width=vals.get("width", 64),
        height=vals.get("height", 64),
        n_frames=vals.get("frames", 2),
        geometry=geom,
        illuminant_K=vals.get("illuminant_K", 6400.0),
        layers=tuple(layers) if layers else (Layer(None, 20.0),),
        seed=vals.get("seed", 0),
        texture_contrast=vals.get("texture_contrast", 1.0),
        subpixel=bool(vals.get("subpixel", 0)),
    )
    if seed is not None:
        spec = replace(spec, seed=seed)
    return spec


def read_scene_spec(path, seed: int | None = None) -> SceneSpec:
    return parse_scene_spec(Path(path).read_text(encoding="utf-8"), seed)


def write_scene(video: SceneVideo, layout, scene: str):
    """Write all generated views through the dataset layout."""
    for cam, frames in enumerate(video.cubes):
        for t, cube in enumerate(frames):
            write_cube(cube, layout, scene, cam, t)
            write_depth(video.depths[cam][t], layout.depth_path(scene, cam, t))


def occluder_sequence_spec(seed, width=112, height=80, n_frames=2, n_occluders=2, depth_range=(2.0, 3.0),
                           speed=10, baseline_mm=40.0) -> SceneSpec:
    """Distant textured plane behind near vertical bars sliding sideways.

    Laid out for a right-hand horizontal neighbour of the center camera (camera
    5 seen from camera 4 on the default array). Each bar gets its own slot that
    also holds its shadow, the background it hides from the neighbour, over all
    frames, so shadows never touch other bars and the neighbour sees every bar
    inside its frame. Shadows are as wide as their bar and wider than the
    default matching block; bars move by ``speed`` pixels per frame in a random
    horizontal direction.
    """
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry(baseline_mm=baseline_mm)
    bg_depth = float(rng.uniform(20.0, 30.0))
    layers = [Layer(None, bg_depth)]
    depths = sorted(rng.uniform(*depth_range, n_occluders))[::-1]
    slot = width // n_occluders
    span = abs(speed) * (n_frames - 1)
    k_bg = float(disparity_scale(bg_depth, geom))
    for i, d in enumerate(depths):
        k = float(disparity_scale(d, geom))
        w = int(rng.integers(8, 14))
        lo = max(i * slot + int(np.ceil(k - k_bg)) + 2, int(np.ceil(k)) + 1)
        hi = (i + 1) * slot - w - span - 1
        if hi < lo:
            raise ValidationError("frame too narrow for the requested occluders")
        x_min = int(rng.integers(lo, hi + 1))
        direction = int(rng.choice([-1, 1]))
        x0 = x_min if direction > 0 else x_min + span
        y0 = int(rng.integers(4, height // 4))
        h = int(rng.integers(height // 2, height - y0 - 3))
        layers.append(Layer((x0, y0, w, h), float(d), (direction * abs(speed), 0)))
    return SceneSpec(width, height, n_frames, geom, 6400.0, tuple(layers), int(seed))
