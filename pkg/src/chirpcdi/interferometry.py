"""Low-coherence Michelson interferograms, envelopes and Fourier spectrum estimates.

Convention: ``x`` is the reference-arm position and a sample interface at
one-way optical depth ``d`` produces fringes centred at ``x = d``. The round
trip doubles the optical path, so every fringe term carries the phase
``2*omega*(x - d)/c`` and the fringe period in ``x`` is ``lambda/2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, hilbert

from .material import C_UM_PER_S
from .qpm import Spectrum, UndefinedWidthError, half_max_support, nm_from_omega, omega_from_nm, wavelength_grid_nm

KINDS = ("ideal-intensity", "photon-counts")


class SamplingError(ValueError):
    pass


class PassivityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SampleResponse:
    """Interfaces as (one-way optical depth in um, amplitude reflectance)."""

    depths_um: np.ndarray
    reflectances: np.ndarray
    name: str = ""

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.depths_um, dtype=float))
        r = np.atleast_1d(np.asarray(self.reflectances, dtype=float))
        object.__setattr__(self, "depths_um", d)
        object.__setattr__(self, "reflectances", r)
        if d.shape != r.shape:
            raise ValueError("depths and reflectances must have the same length")
        if np.any(d < 0) or np.any(np.diff(d) <= 0):
            raise ValueError("interface depths must be non-negative and strictly increasing")
        if np.any(np.abs(r) > 1):
            raise ValueError("amplitude reflectances must lie in [-1, 1]")
        if float(np.sum(r * r)) > 1.0 + 1e-12:
            warnings.warn(f"sum of power reflectances {np.sum(r * r):.3f} exceeds 1", PassivityWarning, stacklevel=2)

    @property
    def n_interfaces(self) -> int:
        return int(self.depths_um.size)

    def shifted(self, delta_um: float) -> "SampleResponse":
        return SampleResponse(self.depths_um + delta_um, self.reflectances, self.name)


def empty_response() -> SampleResponse:
    return SampleResponse(np.zeros(0), np.zeros(0), "empty")


def mirror_response(depth_um: float = 0.0, reflectance: float = 1.0) -> SampleResponse:
    return SampleResponse([depth_um], [reflectance], "mirror")


def pellicle_response(n: float, thickness_um: float, front_depth_um: float = 0.0) -> SampleResponse:
    """Thin film in air at normal incidence.

    Front face reflects ``(1-n)/(1+n)``; the back face ``(n-1)/(n+1)`` is seen
    through the front face twice, i.e. scaled by ``1 - r1**2``. The back face
    sits ``n*L`` deeper in optical path.
    """
    if not n > 1 or not thickness_um > 0:
        raise ValueError("pellicle needs n > 1 and thickness > 0")
    r1 = (1.0 - n) / (1.0 + n)
    r2 = (n - 1.0) / (n + 1.0) * (1.0 - r1 * r1)
    return SampleResponse(
        [front_depth_um, front_depth_um + n * thickness_um], [r1, r2], f"pellicle n={n:g} L={thickness_um:g}um"
    )


@dataclass(frozen=True)
class Interferogram:
    displacement_um: np.ndarray
    values: np.ndarray
    window_s: float = 0.0
    kind: str = "ideal-intensity"
    center_wavelength_nm: float | None = None
    band_qe: float = 1.0
    flags: tuple[str, ...] = ()
    expected: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        x = np.asarray(self.displacement_um, dtype=float)
        v = np.asarray(self.values)
        object.__setattr__(self, "displacement_um", x)
        object.__setattr__(self, "values", v)
        if self.kind not in KINDS:
            raise ValueError(f"interferogram kind must be one of {KINDS}")
        if x.shape != v.shape:
            raise ValueError("displacement grid and values must have the same length")
        if self.kind == "photon-counts" and (not np.issubdtype(v.dtype, np.integer) or np.any(v < 0)):
            raise ValueError("photon-count interferograms hold non-negative integers")

    @property
    def step_um(self) -> float:
        x = self.displacement_um
        if x.size < 2:
            raise SamplingError("need at least two samples")
        d = np.diff(x)
        step = (x[-1] - x[0]) / (x.size - 1)
        if not step > 0 or np.max(np.abs(d - step)) > 1e-6 * step:
            raise SamplingError("displacement grid is not uniform")
        return float(step)


class Michelson:
    """Fringe synthesis for one source, detector QE and displacement grid.

    The QE-weighted spectrum is normalised to unit area, so a trace is in units
    of the detected reference-arm intensity and its DC level is
    ``R_ref + sum(r_i**2)`` plus inter-interface cross terms. The
    spectrum-weighted mean QE is kept in :attr:`band_qe` for photon counting.
    """

    def __init__(self, source: Spectrum, detector_qe=None, displacement_um=None, reference_reflectance: float = 1.0):
        if displacement_um is None:
            displacement_um = np.round(np.arange(701) * 0.1, 10)
        self.displacement_um = np.asarray(displacement_um, dtype=float)
        self.reference_reflectance = float(reference_reflectance)
        order = np.argsort(source.omega)
        omega = source.omega[order]
        density = source.density[order]
        if omega.size == 1:
            weights = np.ones(1)
        else:
            weights = np.zeros_like(omega)
            dw = np.diff(omega)
            weights[:-1] += 0.5 * dw
            weights[1:] += 0.5 * dw
        eta = np.ones_like(omega) if detector_qe is None else np.asarray(detector_qe.efficiency(nm_from_omega(omega)))
        area = float(np.sum(density * weights))
        if not area > 0:
            raise ValueError("source spectrum has no power")
        s = density / area
        self.band_qe = float(np.sum(s * eta * weights))
        self.no_signal = not self.band_qe > 0
        measure = np.zeros_like(s) if self.no_signal else s * eta * weights / self.band_qe
        self.omega = omega
        self.measure = measure
        self.center_wavelength_nm = (
            float(nm_from_omega(np.sum(measure * omega))) if not self.no_signal else float(nm_from_omega(np.sum(s * weights * omega)))
        )
        self._k2 = 2.0 * omega / C_UM_PER_S
        self._fringe = np.exp(1j * np.outer(self.displacement_um, self._k2))

    def coherence(self, tau_um) -> np.ndarray:
        """Re of the normalised coherence function at round-trip delay 2*tau."""
        tau = np.atleast_1d(np.asarray(tau_um, dtype=float))
        return (np.cos(np.outer(tau, self._k2)) * self.measure).sum(axis=1)

    def ideal(self, sample: SampleResponse) -> Interferogram:
        r, d = sample.reflectances, sample.depths_um
        flags = []
        dc = self.reference_reflectance + float(np.sum(r * r))
        if sample.n_interfaces == 0:
            flags.append("dc-only")
            values = np.full(self.displacement_um.shape, dc)
        else:
            for i in range(r.size):
                for j in range(i + 1, r.size):
                    dc += 2.0 * r[i] * r[j] * float(self.coherence(d[j] - d[i])[0])
            phasor = self.measure * (np.exp(-1j * np.outer(d, self._k2)) * r[:, None]).sum(axis=0)
            ac = 2.0 * math.sqrt(self.reference_reflectance) * (self._fringe * phasor).sum(axis=1).real
            values = dc + ac
        if self.no_signal:
            flags.append("no-signal")
        if np.any(values < 0):
            values = np.maximum(values, 0.0)
            flags.append("clamped")
        return Interferogram(
            self.displacement_um,
            values,
            kind="ideal-intensity",
            center_wavelength_nm=self.center_wavelength_nm,
            band_qe=self.band_qe,
            flags=tuple(flags),
        )


def ideal_interferogram(
    source: Spectrum,
    detector_qe,
    sample: SampleResponse,
    displacement_um,
    reference_reflectance: float = 1.0,
) -> Interferogram:
    """Two-beam low-coherence trace of ``sample`` seen by a detector with ``detector_qe``.

    ``detector_qe`` is anything with an ``efficiency(wavelength_nm)`` method, or
    ``None`` for a flat response.
    """
    return Michelson(source, detector_qe, displacement_um, reference_reflectance).ideal(sample)


# --------------------------------------------------------------------------- #
# envelopes


@dataclass(frozen=True)
class EnvelopeResult:
    displacement_um: np.ndarray
    envelope: np.ndarray
    peak_positions_um: np.ndarray
    peak_heights: np.ndarray
    fwhm_of_main_peak: float | None
    half_max_intervals: list[tuple[float, float]]

    @property
    def fwhm_um(self) -> float:
        if self.fwhm_of_main_peak is None:
            raise UndefinedWidthError("envelope is flat; no peak to measure")
        return self.fwhm_of_main_peak

    @property
    def main_peak_um(self) -> float:
        if self.peak_heights.size == 0:
            raise UndefinedWidthError("envelope has no peak")
        return float(self.peak_positions_um[int(np.argmax(self.peak_heights))])


def _dominant_wavelength_nm(x: np.ndarray, ac: np.ndarray, step: float) -> float:
    spec = np.abs(np.fft.rfft(ac))
    f = np.fft.rfftfreq(ac.size, d=step)
    k = int(np.argmax(spec[1:])) + 1
    return 2.0 / f[k] * 1e3


def _analytic(ac: np.ndarray, step: float, band_nm: tuple[float, float] | None) -> np.ndarray:
    if band_nm is None:
        return hilbert(ac)
    n = ac.size
    spec = np.fft.fft(ac)
    f = np.fft.fftfreq(n, d=step)
    # fringe frequency is 2/lambda cycles per um of displacement
    f_lo, f_hi = 2.0e3 / max(band_nm), 2.0e3 / min(band_nm)
    keep = (f >= f_lo) & (f <= f_hi)
    return np.fft.ifft(np.where(keep, 2.0 * spec, 0.0))


def _refine_peaks(x: np.ndarray, y: np.ndarray, idx: np.ndarray, level: float = 0.5):
    """Least-squares parabola through the contiguous samples above ``level`` of each peak.

    Symmetric peaks give an unbiased vertex and the fit averages shot noise
    over several samples. Peaks too narrow
    or on the record edge stay on the grid.
    """
    runs = []
    for i in idx:
        cut = level * y[i]
        lo = i
        # grow downhill only, so the fit never climbs a neighbouring lobe
        while lo > 0 and cut <= y[lo - 1] <= y[lo]:
            lo -= 1
        hi = i
        while hi < y.size - 1 and cut <= y[hi + 1] <= y[hi]:
            hi += 1
        runs.append((lo, hi))
    pos, height = [], []
    for k, i in enumerate(idx):
        p, h = float(x[i]), float(y[i])
        if 0 < i < y.size - 1:
            lo, hi = min(runs[k][0], i - 1), max(runs[k][1], i + 1)
            xs = x[lo : hi + 1] - x[i]
            a, b, c = np.polyfit(xs, y[lo : hi + 1], 2)
            if a < 0:
                shift = -b / (2.0 * a)
                if abs(shift) <= 0.5 * (xs[-1] - xs[0]):
                    p, h = p + shift, c - b * b / (4.0 * a)
        pos.append(p)
        height.append(h)
    return np.array(pos), np.array(height)


def envelope(
    interferogram: Interferogram,
    prominence: float = 0.1,
    min_samples_per_fringe: float = 4.0,
    center_wavelength_nm: float | None = None,
    band_nm: tuple[float, float] | None = None,
) -> EnvelopeResult:
    """Fringe envelope as the magnitude of the analytic signal of the DC-removed trace.

    ``band_nm`` optionally restricts the analytic signal to fringe frequencies
    of that wavelength band, which rejects shot noise outside the source band.
    Peaks need ``prominence`` times the maximum envelope.
    """
    x = interferogram.displacement_um
    step = interferogram.step_um
    ac = np.asarray(interferogram.values, dtype=float)
    ac = ac - ac.mean()
    if not np.any(ac):
        env = np.zeros_like(ac)
        return EnvelopeResult(x, env, np.zeros(0), np.zeros(0), None, [])
    lam = center_wavelength_nm or interferogram.center_wavelength_nm or _dominant_wavelength_nm(x, ac, step)
    required = lam * 1e-3 / 2.0 / min_samples_per_fringe
    if step > required * (1 + 1e-9):
        raise SamplingError(
            f"step {step:g} um undersamples {lam:.0f} nm fringes; need step <= {required:.4g} um"
        )
    env = np.abs(_analytic(ac, step, band_nm))
    top = float(env.max())
    idx, _ = find_peaks(env, prominence=prominence * top)
    imax = int(np.argmax(env))
    if imax not in idx:
        idx = np.sort(np.append(idx, imax))
    intervals, runs, _ = half_max_support(x, env, 0.5 * top)
    main = next(k for k, (i0, i1) in enumerate(runs) if i0 <= imax <= i1)
    lo, hi = intervals[main]
    positions, heights = _refine_peaks(x, env, idx)
    return EnvelopeResult(x, env, positions, heights, float(hi - lo), intervals)


# --------------------------------------------------------------------------- #
# Fourier-transform spectroscopy


def estimate_spectrum(
    interferogram: Interferogram,
    wavelengths_nm=None,
    window: str = "none",
    zero_pad: int = 16,
    label: str = "estimate",
) -> Spectrum:
    """Spectral density (peak-1) from the magnitude of the fringe Fourier transform.

    A fringe at spatial frequency ``f`` cycles/um of displacement comes from
    ``lambda = 2/f``, i.e. ``omega = pi*c*f``. The transform of the trace is
    proportional to the detected spectral density itself (Wiener-Khinchin),
    so the magnitude, not its square, is returned.
    """
    step = interferogram.step_um
    wl = wavelength_grid_nm() if wavelengths_nm is None else np.asarray(wavelengths_nm, dtype=float)
    ac = np.asarray(interferogram.values, dtype=float)
    ac = ac - ac.mean()
    n = ac.size
    notes = []
    edge = max(n // 20, 1)
    peak = np.max(np.abs(ac)) if n else 0.0
    if peak > 0 and max(np.max(np.abs(ac[:edge])), np.max(np.abs(ac[-edge:]))) > 0.01 * peak:
        notes.append("leakage: fringes reach the record edges; record may be too short")
    if window == "hann":
        ac = ac * np.hanning(n)
    elif window != "none":
        raise ValueError("window must be 'none' or 'hann'")
    nfft = 1 << int(math.ceil(math.log2(max(n * zero_pad, 2))))
    mag = np.abs(np.fft.rfft(ac, nfft))
    f = np.fft.rfftfreq(nfft, d=step)
    f_target = 2.0e3 / wl
    density = np.interp(f_target, f, mag, left=0.0, right=0.0)
    peak = density.max()
    if peak > 0:
        density = density / peak
    return Spectrum(omega_from_nm(wl), density, "peak-1", label, tuple(notes))
