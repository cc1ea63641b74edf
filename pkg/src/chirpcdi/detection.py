"""Photon-counting detectors: quantum-efficiency curves, dark counts and shot noise.

Counts are drawn by inverting the Poisson CDF at one uniform deviate per grid
point. The deviate for point ``i`` of scan ``s`` is the ``i``-th output of a
Philox stream keyed by ``(seed, s)``, so a trace does not depend on how points
or scans are scheduled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import poisson

from .interferometry import Interferogram
from .qpm import Spectrum

QE_KINDS = ("flat", "exponential-decay", "tabulated")


class NoSignalWarning(UserWarning):
    pass


class ClampWarning(UserWarning):
    pass


@dataclass(frozen=True)
class QeCurve:
    kind: str
    params: dict = field(default_factory=dict)
    support_nm: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        if self.kind not in QE_KINDS:
            raise ValueError(f"QE kind must be one of {QE_KINDS}")
        if self.kind == "tabulated":
            wl = np.asarray(self.params["wavelength_nm"], dtype=float)
            qe = np.asarray(self.params["qe"], dtype=float)
            if wl.shape != qe.shape or wl.size < 2 or np.any(np.diff(wl) <= 0):
                raise ValueError("tabulated QE needs >= 2 increasing wavelengths with matching values")
            if np.any(qe < 0) or np.any(qe > 1):
                raise ValueError("QE values must lie in [0, 1]")

    def efficiency(self, wavelength_nm):
        lam = np.asarray(wavelength_nm, dtype=float)
        lo, hi = self.support_nm
        if self.kind == "flat":
            eta = np.full(lam.shape, float(self.params["qe"]))
        elif self.kind == "exponential-decay":
            p = self.params
            eta = p["qe0"] * np.exp(-(lam - p["lambda_ref_nm"]) / p["decay_nm"])
        else:
            eta = np.interp(lam, self.params["wavelength_nm"], self.params["qe"], left=0.0, right=0.0)
        eta = np.where((lam >= lo) & (lam <= hi), np.clip(eta, 0.0, 1.0), 0.0)
        return float(eta) if eta.ndim == 0 else eta


def flat_qe(qe: float, support_nm=(0.0, math.inf)) -> QeCurve:
    return QeCurve("flat", {"qe": float(qe)}, tuple(support_nm))


def exponential_qe(qe_a: float, lambda_a_nm: float, qe_b: float, lambda_b_nm: float, support_nm) -> QeCurve:
    """Exponential decay through two calibration points."""
    decay = (lambda_b_nm - lambda_a_nm) / math.log(qe_a / qe_b)
    return QeCurve("exponential-decay", {"qe0": qe_a, "lambda_ref_nm": lambda_a_nm, "decay_nm": decay}, tuple(support_nm))


def tabulated_qe(wavelength_nm, qe) -> QeCurve:
    wl = [float(v) for v in wavelength_nm]
    return QeCurve("tabulated", {"wavelength_nm": wl, "qe": [float(v) for v in qe]}, (wl[0], wl[-1]))


def load_qe_csv(path: str | Path) -> QeCurve:
    """Two-column CSV (wavelength_nm, qe) with an optional header row."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, b = line.split(",")[:2]
        try:
            rows.append((float(a), float(b)))
        except ValueError:
            if rows:
                raise
    wl, qe = zip(*rows)
    return tabulated_qe(wl, qe)


@dataclass(frozen=True)
class DetectorModel:
    name: str
    qe: QeCurve
    dark_rate: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        if self.dark_rate < 0 or self.dead_time < 0:
            raise ValueError("dark rate and dead time must be non-negative")

    @property
    def support_nm(self) -> tuple[float, float]:
        return self.qe.support_nm


# Stand-in curves: the SSPD passes through 12% at 900 nm and 5% at 1200 nm; the
# Si SPAD is flat at 40% up to 1000 nm and falls linearly to zero at 1100 nm.
SSPD_QE = exponential_qe(0.12, 900.0, 0.05, 1200.0, (700.0, 1500.0))
SPAD_QE = tabulated_qe([400.0, 1000.0, 1100.0], [0.40, 0.40, 0.0])

DETECTOR_PRESETS = {
    "sspd": DetectorModel("sspd", SSPD_QE, dark_rate=10.0),
    "spad": DetectorModel("spad", SPAD_QE, dark_rate=50.0),
    "ideal": DetectorModel("ideal", flat_qe(1.0), dark_rate=0.0),
}


def detector_preset(name: str) -> DetectorModel:
    try:
        return DETECTOR_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown detector preset {name!r}; choose from {sorted(DETECTOR_PRESETS)}") from None


def effective_rate(photon_flux: Spectrum, detector: DetectorModel) -> float:
    """Detected count rate for a flux density given in photons/s/nm.

    ``photon_flux.density`` is read as photons/s per nm at the spectrum's
    wavelength samples.
    """
    lam = photon_flux.wavelength_nm
    order = np.argsort(lam)
    lam, flux = lam[order], photon_flux.density[order]
    eta = detector.qe.efficiency(lam)
    signal = float(np.trapezoid(flux * eta, lam)) if lam.size > 1 else 0.0
    if not signal > 0:
        warnings.warn("source and detector supports do not overlap; dark counts only", NoSignalWarning, stacklevel=2)
        signal = 0.0
    return signal + detector.dark_rate


def band_averaged_qe(source: Spectrum, qe: QeCurve) -> float:
    """Spectrum-weighted mean QE, integrating over angular frequency."""
    order = np.argsort(source.omega)
    w, s = source.omega[order], source.density[order]
    area = np.trapezoid(s, w)
    return float(np.trapezoid(s * qe.efficiency(source.wavelength_nm[order]), w) / area) if area > 0 else 0.0


@dataclass(frozen=True)
class CountRecord:
    counts: int
    window: float
    expected_rate: float


def stream(seed: int, *indices: int) -> np.random.Generator:
    """Counter-based generator for the substream addressed by ``(seed, *indices)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))


def poisson_from_uniform(mean, u):
    """Inverse-CDF Poisson draw; one uniform per sample keeps streams aligned."""
    mean = np.asarray(mean, dtype=float)
    u = np.asarray(u, dtype=float)
    k = np.where(mean > 0, poisson.ppf(u, np.where(mean > 0, mean, 1.0)), 0.0)
    return np.maximum(np.nan_to_num(k, nan=0.0), 0.0).astype(np.int64)


def dead_time_factor(rate, dead_time: float):
    return 1.0 / (1.0 + np.asarray(rate, dtype=float) * dead_time)


def sample_counts(rate: float, window: float, rng: np.random.Generator, dead_time: float = 0.0) -> CountRecord:
    if rate < 0 or not window > 0:
        raise ValueError("need rate >= 0 and window > 0")
    observed = rate * float(dead_time_factor(rate, dead_time)) if dead_time > 0 else rate
    k = int(poisson_from_uniform(observed * window, rng.random()))
    return CountRecord(k, window, observed)


def count_interferogram(
    ideal: Interferogram,
    detector: DetectorModel,
    flux_scale: float,
    window: float,
    seed: int,
    scan_index: int = 0,
    band_qe: float | None = None,
) -> Interferogram:
    """Poisson photon counts for each displacement of an ideal trace.

    ``rate(x) = flux_scale * value(x) * band_qe + dark_rate``, where
    ``flux_scale`` is photons/s reaching the detector per unit of ideal
    intensity and ``band_qe`` defaults to the QE average recorded on the trace.
    """
    if ideal.kind != "ideal-intensity":
        raise ValueError("count_interferogram needs an ideal-intensity trace")
    if flux_scale < 0 or not window > 0:
        raise ValueError("need flux_scale >= 0 and window > 0")
    values = np.asarray(ideal.values, dtype=float)
    flags = list(ideal.flags)
    n_neg = int(np.sum(values < 0))
    if n_neg:
        warnings.warn(f"{n_neg} negative ideal samples clamped to zero", ClampWarning, stacklevel=2)
        values = np.maximum(values, 0.0)
        flags.append(f"clamped:{n_neg}")
    if "no-signal" in flags:
        warnings.warn("source and detector supports do not overlap; dark counts only", NoSignalWarning, stacklevel=2)
    eta = ideal.band_qe if band_qe is None else band_qe
    rate = flux_scale * values * eta + detector.dark_rate
    if detector.dead_time > 0:
        rate = rate * dead_time_factor(rate, detector.dead_time)
    mean = rate * window
    u = stream(seed, scan_index).random(values.size)
    counts = poisson_from_uniform(mean, u)
    return replace(
        ideal,
        values=counts,
        kind="photon-counts",
        window_s=float(window),
        flags=tuple(flags),
        expected=mean,
    )
