"""End-to-end helpers that chain synthesis, filtering, warping and reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FilterBank
from .evaluation import psnr
from .geometry import warp_view
from .reconstruct import MatchConfig, reconstruct_nocs, reconstruct_tnocs
from .spectra import apply_filters, builtin_filter_bank


@dataclass
class CrossSpectralCase:
    """One frame of the center-view reconstruction problem.

    ``reference`` is the center camera seen through the reference filter,
    ``distorted`` the peripheral camera seen through the target filter and
    warped to the center, ``missing`` its holes and ``truth`` the center camera
    seen through the target filter.
    """

    reference: np.ndarray
    distorted: np.ndarray
    missing: np.ndarray
    truth: np.ndarray


def _filter_index(bank: FilterBank, name):
    return bank.names.index(name) if isinstance(name, str) else int(name)


def cross_spectral_case(cubes, depths, geometry, peripheral, frame, reference_filter="bp550",
                        target_filter="bp450", bank: FilterBank | None = None) -> CrossSpectralCase:
    """Build the reconstruction problem for one frame.

    ``cubes[cam][t]`` / ``depths[cam][t]`` follow :class:`~spectracube.synth.SceneVideo`.
    """
    bank = bank or builtin_filter_bank()
    center = geometry.center
    ri = _filter_index(bank, reference_filter)
    ti = _filter_index(bank, target_filter)
    center_bands = apply_filters(cubes[center][frame], bank)
    periph_bands = apply_filters(cubes[peripheral][frame], bank)
    warped, mask = warp_view(periph_bands[ti], depths[peripheral][frame], geometry, peripheral, center)
    return CrossSpectralCase(center_bands[ri], warped, mask.invalid, center_bands[ti])


def compare_nocs_tnocs(cubes, depths, geometry, peripheral, frame, cfg: MatchConfig = MatchConfig(),
                       reference_filter="bp550", target_filter="bp450", bank=None, n_jobs=1):
    """Reconstruct ``frame`` with both methods; returns a dict of outputs and PSNRs."""
    cur = cross_spectral_case(cubes, depths, geometry, peripheral, frame, reference_filter, target_filter, bank)
    prev = cross_spectral_case(cubes, depths, geometry, peripheral, frame - 1, reference_filter, target_filter, bank)
    nocs = reconstruct_nocs(cur.reference, cur.distorted, cur.missing, cfg, n_jobs=n_jobs)
    tnocs = reconstruct_tnocs(cur.reference, prev.reference, cur.distorted, prev.distorted,
                              cur.missing, prev.missing, cfg, n_jobs=n_jobs)
    return {
        "case": cur,
        "nocs": nocs,
        "tnocs": tnocs,
        "psnr_nocs": psnr(nocs, cur.truth),
        "psnr_tnocs": psnr(tnocs, cur.truth),
    }
