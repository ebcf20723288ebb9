"""Hyperspectral video toolkit: camera-array simulation, occlusion filling and coding."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DEFAULT_GRID,
    ArrayGeometry,
    CameraIntrinsics,
    DepthMap,
    DisparityMap,
    FilterBank,
    HyperCube,
    Mask,
    SpectralGrid,
    Spectrum,
)
from .evaluation import RDPoint, bd_metrics, bd_psnr, bd_rate, psnr  # noqa: E402
from .exceptions import SpectraCubeError, ValidationError  # noqa: E402
from .geometry import Homography, Quad, estimate_homography, extract_texture, warp_cube, warp_view  # noqa: E402
from .reconstruct import MatchConfig, reconstruct_nocs, reconstruct_tnocs  # noqa: E402
from .spectra import apply_filters, builtin_filter_bank, planck_spectrum, render_rgb  # noqa: E402

__all__ = [
    "DEFAULT_GRID", "ArrayGeometry", "CameraIntrinsics", "DepthMap", "DisparityMap", "FilterBank",
    "HyperCube", "Mask", "SpectralGrid", "Spectrum", "RDPoint", "bd_metrics", "bd_psnr", "bd_rate",
    "psnr", "SpectraCubeError", "ValidationError", "Homography", "Quad", "estimate_homography",
    "extract_texture", "warp_cube", "warp_view", "MatchConfig", "reconstruct_nocs",
    "reconstruct_tnocs", "apply_filters", "builtin_filter_bank", "planck_spectrum", "render_rgb",
]
