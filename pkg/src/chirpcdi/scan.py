"""A-scan / B-scan acquisition over synthetic phantoms."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .detection import DetectorModel, count_interferogram
from .interferometry import EnvelopeResult, Interferogram, Michelson, SampleResponse, envelope, mirror_response
from .qpm import Spectrum, UndefinedWidthError, nm_from_omega

# photons/s at the detector per unit ideal intensity; with the default onion
# membranes and SPDC/SSPD this puts ~500 expected counts per 500 ms at a peak
DEFAULT_FLUX_SCALE = 5000.0
DEFAULT_MEMBRANE_REFLECTANCE = 0.5
# Expected counts at the brightest sample. Below ~100 envelope peaks of the
# onion membranes stop being found reliably. Depth errors shrink as
# 1/sqrt(counts): std ~0.065 um at 100 counts, ~0.028 um at the ~450 the
# defaults give, so one-z-step accuracy on every interface needs the latter.
PEAK_SNR_THRESHOLD_COUNTS = 100.0
DEPTH_STEP_ACCURACY_COUNTS = 450.0


class MergeWarning(UserWarning):
    pass


def _count(span: float, step: float) -> tuple[int, bool]:
    q = span / step
    n = int(math.floor(q + 1e-9))
    return n, abs(q - round(q)) > 1e-9


@dataclass(frozen=True)
class ScanProtocol:
    z_range_um: float = 70.0
    z_step_um: float = 0.1
    dwell_s: float = 0.5
    x_range_um: float = 800.0
    x_step_um: float = 5.0
    z_start_um: float = 0.0
    x_start_um: float = 0.0

    def __post_init__(self):
        if not (self.z_step_um > 0 and self.x_step_um > 0 and self.dwell_s > 0):
            raise ValueError("steps and dwell must be positive")
        if self.z_range_um < self.z_step_um or self.x_range_um < self.x_step_um:
            raise ValueError("scan ranges must be at least one step")

    @property
    def n_z(self) -> int:
        # inclusive endpoints: 70 um at 100 nm -> 701 samples
        return _count(self.z_range_um, self.z_step_um)[0] + 1

    @property
    def n_x(self) -> int:
        return _count(self.x_range_um, self.x_step_um)[0]

    @property
    def z_grid_um(self) -> np.ndarray:
        return np.round(self.z_start_um + self.z_step_um * np.arange(self.n_z), 10)

    @property
    def x_positions_um(self) -> np.ndarray:
        return np.round(self.x_start_um + self.x_step_um * np.arange(self.n_x), 10)

    @property
    def a_scan_duration_s(self) -> float:
        return self.n_z * self.dwell_s

    def notices(self) -> list[str]:
        out = []
        if _count(self.z_range_um, self.z_step_um)[1]:
            out.append(f"z range not a multiple of the step; using {self.n_z} points")
        if _count(self.x_range_um, self.x_step_um)[1]:
            out.append(f"x range not a multiple of the step; using {self.n_x} columns")
        return out


def onion_protocol(dwell_s: float = 0.5) -> ScanProtocol:
    """70 um at 100 nm in z, 800 um at 5 um in x."""
    return ScanProtocol(70.0, 0.1, dwell_s, 800.0, 5.0)


@dataclass(frozen=True)
class SamplePhantom:
    name: str
    response_at: Callable[[float], SampleResponse]
    description: dict = field(default_factory=dict)


def layered_phantom(depths_um: Sequence[float], reflectances: Sequence[float], name: str = "layers") -> SamplePhantom:
    response = SampleResponse(depths_um, reflectances, name)
    return SamplePhantom(name, lambda x: response, {"depths_um": list(depths_um), "reflectances": list(reflectances)})


def mirror_phantom(depth_um: float = 35.0, reflectance: float = 1.0) -> SamplePhantom:
    response = mirror_response(depth_um, reflectance)
    return SamplePhantom("mirror", lambda x: response, {"depth_um": depth_um})


@dataclass(frozen=True)
class Cell:
    top_um: float
    bottom_um: float
    x_start_um: float
    x_end_um: float

    def __post_init__(self):
        if not (0 <= self.top_um < self.bottom_um):
            raise ValueError("cell needs 0 <= top < bottom")
        if not self.x_start_um < self.x_end_um:
            raise ValueError("cell needs x_start < x_end")

    def offset(self, x: float, undulation_um: float) -> float:
        t = (x - self.x_start_um) / (self.x_end_um - self.x_start_um)
        return undulation_um * math.sin(math.pi * t)


def onion_phantom(
    cells: Sequence[Cell],
    membrane_reflectance: float = DEFAULT_MEMBRANE_REFLECTANCE,
    undulation_um: float = 1.5,
    name: str = "onion",
) -> SamplePhantom:
    """Cells as membrane pairs; each cell bows by up to ``undulation_um`` across its width.

    A column at ``x`` sees the top and bottom membranes of every cell whose
    half-open extent ``[x_start, x_end)`` contains ``x``. Interfaces at the same
    depth are merged into one with the summed reflectance.
    """
    cells = list(cells)

    def response_at(x: float) -> SampleResponse:
        found = []
        for cell in cells:
            if cell.x_start_um <= x < cell.x_end_um:
                u = cell.offset(x, undulation_um)
                found += [(cell.top_um + u, membrane_reflectance), (cell.bottom_um + u, membrane_reflectance)]
        found.sort()
        merged: list[list[float]] = []
        for depth, r in found:
            if merged and abs(depth - merged[-1][0]) < 1e-9:
                warnings.warn(f"merging coincident interfaces at {depth:.4g} um", MergeWarning, stacklevel=2)
                merged[-1][1] = max(-1.0, min(1.0, merged[-1][1] + r))
            else:
                merged.append([depth, r])
        depths = [m[0] for m in merged]
        refl = [m[1] for m in merged]
        return SampleResponse(depths, refl, f"{name}@{x:g}")

    desc = {
        "cells": [vars(c) for c in cells],
        "membrane_reflectance": membrane_reflectance,
        "undulation_um": undulation_um,
    }
    return SamplePhantom(name, response_at, desc)


def default_onion_phantom() -> SamplePhantom:
    """Three side-by-side cells, 30, 45 and 60 um thick, inside the 70 x 800 um field."""
    cells = [
        Cell(20.0, 50.0, 20.0, 270.0),
        Cell(12.0, 57.0, 270.0, 540.0),
        Cell(5.0, 65.0, 540.0, 790.0),
    ]
    return onion_phantom(cells)


@dataclass(frozen=True)
class AScan:
    interferogram: Interferogram
    envelope: EnvelopeResult
    duration_s: float
    ideal: Interferogram | None = field(default=None, repr=False)


def _band_nm(mich: Michelson, rel: float = 1e-2) -> tuple[float, float] | None:
    m = mich.measure
    if not np.any(m > 0):
        return None
    # per-unit-omega density, so bins of uneven width compare fairly
    dens = m / np.gradient(mich.omega) if m.size > 1 else m
    keep = dens >= rel * dens.max()
    lam = nm_from_omega(mich.omega[keep])
    return float(lam.min()), float(lam.max())


def _acquire(
    mich: Michelson,
    detector: DetectorModel,
    sample: SampleResponse,
    protocol: ScanProtocol,
    seed: int,
    flux_scale: float,
    scan_index: int,
) -> AScan:
    ideal = mich.ideal(sample)
    counts = count_interferogram(ideal, detector, flux_scale, protocol.dwell_s, seed, scan_index)
    env = envelope(counts, center_wavelength_nm=mich.center_wavelength_nm, band_nm=_band_nm(mich))
    return AScan(counts, env, protocol.a_scan_duration_s, ideal)


def a_scan(
    source: Spectrum,
    detector: DetectorModel,
    sample: SampleResponse,
    protocol: ScanProtocol,
    seed: int,
    flux_scale: float = DEFAULT_FLUX_SCALE,
    scan_index: int = 0,
    reference_reflectance: float = 1.0,
) -> AScan:
    """Counts over the protocol's z grid at one transverse position, plus the envelope."""
    mich = Michelson(source, detector.qe, protocol.z_grid_um, reference_reflectance)
    return _acquire(mich, detector, sample, protocol, seed, flux_scale, scan_index)


@dataclass(frozen=True)
class BScan:
    x_positions_um: np.ndarray
    z_grid_um: np.ndarray
    image: np.ndarray  # (n_z, n_x): rows are depth, columns transverse position
    column_fwhm_um: np.ndarray
    column_peaks_um: list[np.ndarray]
    column_has_signal: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


def b_scan(
    source: Spectrum,
    detector: DetectorModel,
    phantom: SamplePhantom,
    protocol: ScanProtocol,
    seed: int,
    flux_scale: float = DEFAULT_FLUX_SCALE,
    workers: int = 1,
    reference_reflectance: float = 1.0,
) -> BScan:
    """One A-scan per x position; column ``j`` uses the RNG substream ``(seed, j)``."""
    mich = Michelson(source, detector.qe, protocol.z_grid_um, reference_reflectance)
    xs = protocol.x_positions_um

    def column(j: int) -> AScan:
        return _acquire(mich, detector, phantom.response_at(float(xs[j])), protocol, seed, flux_scale, j)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scans = list(pool.map(column, range(xs.size)))
    else:
        scans = [column(j) for j in range(xs.size)]
    image = np.column_stack([s.envelope.envelope for s in scans]) if scans else np.zeros((protocol.n_z, 0))
    fwhm = np.array([s.envelope.fwhm_of_main_peak if s.envelope.fwhm_of_main_peak is not None else np.nan for s in scans])
    has_signal = np.array([phantom.response_at(float(x)).n_interfaces > 0 for x in xs], dtype=bool)
    meta = {
        "phantom": phantom.name,
        "source": source.label,
        "detector": detector.name,
        "seed": int(seed),
        "flux_scale": flux_scale,
        "protocol": vars(protocol) | {"n_z": protocol.n_z, "n_x": protocol.n_x},
        "a_scan_duration_s": protocol.a_scan_duration_s,
        "notices": protocol.notices(),
    }
    return BScan(xs, protocol.z_grid_um, image, fwhm, [s.envelope.peak_positions_um for s in scans], has_signal, meta)


TRANSVERSE_CONVENTIONS = ("lambda-f/D", "gaussian-4/pi")


def transverse_resolution_estimate(
    beam_diameter_mm: float,
    focal_length_mm: float,
    center_wavelength_nm: float,
    convention: str = "lambda-f/D",
) -> float:
    """Focal spot size in um.

    ``lambda-f/D`` gives ~10.6 um for a 2.5 mm beam, 25 mm lens and 1064 nm;
    ``gaussian-4/pi`` (the 1/e^2 waist diameter ``4*lambda*f/(pi*D)``) gives ~13.5 um.
    """
    if min(beam_diameter_mm, focal_length_mm) <= 0 or center_wavelength_nm < 0:
        raise ValueError("inputs must be positive")
    base = (center_wavelength_nm * 1e-3) * focal_length_mm / beam_diameter_mm
    if convention == "lambda-f/D":
        return base
    if convention == "gaussian-4/pi":
        return 4.0 / math.pi * base
    raise ValueError(f"convention must be one of {TRANSVERSE_CONVENTIONS}")


def column_depths(bscan: BScan, j: int, n: int) -> np.ndarray:
    """Positions of the ``n`` tallest envelope peaks in column ``j``, sorted by depth."""
    z = bscan.z_grid_um
    col = bscan.image[:, j]
    peaks = bscan.column_peaks_um[j]
    if peaks.size == 0:
        raise UndefinedWidthError("column has no envelope peaks")
    idx = np.searchsorted(z, peaks)
    heights = col[np.clip(idx, 0, z.size - 1)]
    top = np.argsort(heights)[::-1][:n]
    return np.sort(peaks[top])
