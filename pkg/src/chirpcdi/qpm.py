"""SPDC power spectral density of a poled structure, temperature sweeps and chirp design.

The singles spectrum is

    S(omega_s) ~ | integral_0^L d(z) exp(-j dk(omega_s) z) dz |^2

with the collinear phase mismatch

    dk = [n(w_p) w_p - n(w_s) w_s - n(w_p - w_s)(w_p - w_s)] / c .

Because ``d(z)`` is piecewise constant the integral is a finite sum of exact
segment terms; nothing here is quadrature.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .grating import GratingError, GratingRealization, GratingSpec, realize
from .material import (
    C_UM_PER_S,
    DispersionModel,
    ThermalExpansion,
    default_material,
    refractive_index,
)

NORMALIZATIONS = ("raw", "peak-1", "unit-area")
SERIES_THRESHOLD = 1e-6
SEGMENT_BLOCK = 512


class DomainError(ValueError):
    pass


class UndefinedWidthError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


def omega_from_nm(wavelength_nm):
    return 2.0 * math.pi * C_UM_PER_S / (np.asarray(wavelength_nm, dtype=float) * 1e-3)


def nm_from_omega(omega):
    return 2.0 * math.pi * C_UM_PER_S / np.asarray(omega, dtype=float) * 1e3


def wavelength_grid_nm(start: float = 700.0, stop: float = 1500.0, step: float = 0.5) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, n)


def temperature_grid_c(start: float = 25.0, stop: float = 200.0, step: float = 2.5) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, n)


@dataclass(frozen=True)
class PumpConfig:
    vacuum_wavelength_nm: float = 532.0
    power_tag: str = "2 W cw"

    def __post_init__(self):
        if not self.vacuum_wavelength_nm > 0:
            raise ValueError("pump wavelength must be positive")

    @property
    def omega(self) -> float:
        return float(omega_from_nm(self.vacuum_wavelength_nm))


@dataclass(frozen=True)
class Spectrum:
    omega: np.ndarray
    density: np.ndarray
    normalization: str = "raw"
    label: str = ""
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        density = np.atleast_1d(np.asarray(self.density, dtype=float))
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "density", density)
        if omega.shape != density.shape:
            raise ValueError("omega grid and density must have the same length")
        if omega.size > 1:
            d = np.diff(omega)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("omega grid must be strictly monotone")
        if np.any(density < 0) or np.isnan(density).any():
            raise ValueError("spectral density must be non-negative")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")

    @property
    def wavelength_nm(self) -> np.ndarray:
        return nm_from_omega(self.omega)

    @classmethod
    def from_wavelength_nm(cls, wavelength_nm, density, **kwargs) -> "Spectrum":
        return cls(omega_from_nm(wavelength_nm), density, **kwargs)


def normalize(spectrum: Spectrum, kind: str = "peak-1") -> Spectrum:
    density = spectrum.density
    if kind == "peak-1":
        peak = density.max()
        density = density / peak if peak > 0 else density.copy()
    elif kind == "unit-area":
        area = abs(np.trapezoid(density, spectrum.omega))
        density = density / area if area > 0 else density.copy()
    elif kind != "raw":
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    return Spectrum(spectrum.omega, density, kind, spectrum.label, spectrum.notes)


def gaussian_spectrum(center_nm: float, fwhm_nm: float, wavelengths_nm=None, label: str = "") -> Spectrum:
    """Spectrum Gaussian in angular frequency, FWHM given as its wavelength equivalent.

    The frequency width is ``2*pi*c*fwhm/center**2``, so the coherence envelope
    FWHM is exactly ``(2 ln2 / pi) * center**2 / fwhm``.
    """
    if wavelengths_nm is None:
        wavelengths_nm = wavelength_grid_nm()
    w = omega_from_nm(wavelengths_nm)
    w0 = float(omega_from_nm(center_nm))
    dw = 2.0 * math.pi * C_UM_PER_S * (fwhm_nm * 1e-3) / (center_nm * 1e-3) ** 2
    density = np.exp(-4.0 * math.log(2.0) * ((w - w0) / dw) ** 2)
    return Spectrum(w, density, "peak-1", label or f"gaussian {center_nm:g}/{fwhm_nm:g} nm")


# --------------------------------------------------------------------------- #
# phase mismatch and the grating integral


def phase_mismatch(dispersion: DispersionModel, pump: PumpConfig, omega_s, temperature: float):
    """Delta k in rad/um.

    Signal and idler are rebuilt symmetrically about ``w_p/2`` so that swapping
    them gives a bit-identical result.
    """
    omega_p = pump.omega
    ws = np.asarray(omega_s, dtype=float)
    if np.any(ws <= 0) or np.any(ws >= omega_p):
        raise DomainError("signal frequency must satisfy 0 < omega_s < omega_p")
    half = 0.5 * omega_p
    detune = np.abs(ws - half)
    w_hi = half + detune
    w_lo = half - detune
    n_p = refractive_index(dispersion, omega_p, temperature)
    k_pair = refractive_index(dispersion, w_hi, temperature) * w_hi + refractive_index(dispersion, w_lo, temperature) * w_lo
    dk = (n_p * omega_p - k_pair) / C_UM_PER_S
    return float(dk) if np.ndim(dk) == 0 else dk


def _sinc(x: np.ndarray) -> np.ndarray:
    """sin(x)/x, with the two-term series where the quotient would cancel."""
    small = np.abs(x) < 0.5 * SERIES_THRESHOLD
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def _neumaier(total: np.ndarray, comp: np.ndarray, term: np.ndarray):
    t = total + term
    big = np.abs(total) >= np.abs(term)
    comp = comp + np.where(big, (total - t) + term, (term - t) + total)
    return t, comp


def qpm_integral(grating: GratingRealization, delta_k):
    """Exact value of the integral of d(z) exp(-j dk z) over the structure (um).

    Each constant-sign segment [a, a+w] contributes
    ``s * w * sinc(dk*w/2) * exp(-j dk (a + w/2))``; segment blocks are
    accumulated with Neumaier compensation in a fixed order.
    """
    dk = np.asarray(delta_k, dtype=float)
    flat = np.atleast_1d(dk).reshape(-1)
    re = np.zeros(flat.shape)
    im = np.zeros(flat.shape)
    re_c = np.zeros(flat.shape)
    im_c = np.zeros(flat.shape)
    starts, widths = grating.starts_um, grating.widths_um
    signs = grating.signs.astype(float)
    col = flat[:, None]
    for lo in range(0, widths.size, SEGMENT_BLOCK):
        sl = slice(lo, lo + SEGMENT_BLOCK)
        w = widths[sl]
        mid = starts[sl] + 0.5 * w
        amp = (signs[sl] * w) * _sinc(0.5 * col * w)
        phase = col * mid
        re, re_c = _neumaier(re, re_c, (amp * np.cos(phase)).sum(axis=1))
        im, im_c = _neumaier(im, im_c, -(amp * np.sin(phase)).sum(axis=1))
    out = (re + re_c) + 1j * (im + im_c)
    return complex(out[0]) if dk.ndim == 0 else out.reshape(dk.shape)


def spdc_spectrum(
    dispersion: DispersionModel,
    pump: PumpConfig,
    grating: GratingSpec | GratingRealization,
    omega_grid,
    temperature: float,
    normalization: str = "raw",
    label: str = "",
) -> Spectrum:
    structure = grating if isinstance(grating, GratingRealization) else realize(grating, temperature)
    omega = np.asarray(omega_grid, dtype=float)
    dk = phase_mismatch(dispersion, pump, omega, temperature)
    density = np.abs(qpm_integral(structure, dk)) ** 2
    if not label and isinstance(grating, GratingSpec):
        label = f"spdc {grating.name or 'custom'} @ {temperature:g} C"
    return normalize(Spectrum(omega, density, "raw", label), normalization)


# --------------------------------------------------------------------------- #
# temperature sweeps


@dataclass(frozen=True)
class BrightnessMap:
    temperatures_c: np.ndarray
    wavelengths_nm: np.ndarray
    values: np.ndarray
    normalization: str = "global max = 1"
    label: str = ""


def temperature_sweep(
    dispersion: DispersionModel,
    pump: PumpConfig,
    grating_spec: GratingSpec,
    temperatures_c=None,
    wavelengths_nm=None,
    workers: int = 1,
) -> BrightnessMap:
    """Spectra at every temperature, stacked row-wise and scaled by one global max."""
    temps = temperature_grid_c() if temperatures_c is None else np.asarray(temperatures_c, dtype=float)
    wl = wavelength_grid_nm() if wavelengths_nm is None else np.asarray(wavelengths_nm, dtype=float)
    omega = omega_from_nm(wl)

    def row(t):
        return spdc_spectrum(dispersion, pump, grating_spec, omega, float(t)).density

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, temps))
    else:
        rows = [row(t) for t in temps]
    values = np.vstack(rows) if rows else np.zeros((0, wl.size))
    peak = values.max() if values.size else 0.0
    if peak > 0:
        values = values / peak
    return BrightnessMap(temps, wl, values, label=grating_spec.name)


# --------------------------------------------------------------------------- #
# widths


@dataclass(frozen=True)
class FwhmResult:
    width_omega: float
    width_nm: float
    center_nm: float
    peak_nm: float
    multimodal: bool
    intervals_omega: list[tuple[float, float]]
    truncated: bool = False

    @property
    def n_intervals(self) -> int:
        return len(self.intervals_omega)

    @property
    def intervals_nm(self) -> list[tuple[float, float]]:
        return [tuple(sorted((float(nm_from_omega(a)), float(nm_from_omega(b))))) for a, b in self.intervals_omega]


def _crossing(x0, y0, x1, y1, level):
    if y1 == y0:
        return x0
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def half_max_support(x: np.ndarray, y: np.ndarray, level: float):
    """Contiguous intervals where ``y >= level``, edges linearly interpolated.

    ``x`` must be increasing. Returns ``(intervals, index_runs, touches_edge)``.
    """
    above = y >= level
    edges = np.diff(np.concatenate(([0], above.astype(np.int8), [0])))
    run_starts = np.flatnonzero(edges == 1)
    run_stops = np.flatnonzero(edges == -1) - 1
    intervals, touches = [], False
    for i0, i1 in zip(run_starts, run_stops):
        if i0 == 0:
            left = x[0]
            touches = True
        else:
            left = _crossing(x[i0 - 1], y[i0 - 1], x[i0], y[i0], level)
        if i1 == x.size - 1:
            right = x[-1]
            touches = True
        else:
            right = _crossing(x[i1], y[i1], x[i1 + 1], y[i1 + 1], level)
        intervals.append((float(left), float(right)))
    return intervals, list(zip(run_starts.tolist(), run_stops.tolist())), touches


def spectral_fwhm(spectrum: Spectrum) -> FwhmResult:
    """FWHM of the highest peak; multimodal spectra are flagged, not merged."""
    omega, density = spectrum.omega, spectrum.density
    if omega.size > 1 and omega[1] < omega[0]:
        omega, density = omega[::-1], density[::-1]
    peak = float(density.max()) if density.size else 0.0
    if not peak > 0:
        raise UndefinedWidthError("spectrum is identically zero; FWHM undefined")
    imax = int(np.argmax(density))
    intervals, runs, _ = half_max_support(omega, density, 0.5 * peak)
    main = next(k for k, (i0, i1) in enumerate(runs) if i0 <= imax <= i1)
    lo, hi = intervals[main]
    i0, i1 = runs[main]
    truncated = i0 == 0 or i1 == omega.size - 1
    lam_lo, lam_hi = float(nm_from_omega(hi)), float(nm_from_omega(lo))
    return FwhmResult(
        width_omega=hi - lo,
        width_nm=lam_hi - lam_lo,
        center_nm=0.5 * (lam_lo + lam_hi),
        peak_nm=float(nm_from_omega(omega[imax])),
        multimodal=len(intervals) > 1,
        intervals_omega=intervals,
        truncated=truncated,
    )


# --------------------------------------------------------------------------- #
# inverse design


@dataclass(frozen=True)
class DesignObjective:
    target_center_nm: float
    target_fwhm_nm: float
    temperature_c: float = 80.0
    center_weight: float = 1.0
    fwhm_weight: float = 1.0


@dataclass(frozen=True)
class DesignResult:
    spec: GratingSpec
    center_nm: float
    fwhm_nm: float
    objective: float
    n_evaluations: int
    grid_best: tuple[float, float]
    history: list[tuple[float, float, float]] = field(default_factory=list, repr=False)


def spectrum_metrics(
    dispersion: DispersionModel,
    pump: PumpConfig,
    spec: GratingSpec,
    temperature: float,
    wavelengths_nm,
) -> tuple[float, float]:
    """(center_nm, fwhm_nm) of the highest spectral peak."""
    s = spdc_spectrum(dispersion, pump, spec, omega_from_nm(wavelengths_nm), temperature)
    r = spectral_fwhm(s)
    return r.center_nm, r.width_nm


def design_search(
    dispersion: DispersionModel,
    pump: PumpConfig,
    objective: DesignObjective,
    b1_bounds_um: tuple[float, float],
    zeta_bounds_per_um: tuple[float, float],
    n_periods: int = 2515,
    expansion: ThermalExpansion | None = None,
    wavelengths_nm=None,
    grid_shape: tuple[int, int] = (7, 7),
    max_evaluations: int = 120,
    workers: int = 1,
) -> DesignResult:
    """Coarse (b1, zeta) grid scan, then bounded Nelder-Mead from the best node.

    Minimizes ``wc*(center - target_center)**2 + wf*(fwhm - target_fwhm)**2``
    in nm^2. Deterministic for a fixed configuration.
    """
    if expansion is None:
        expansion = default_material().expansion
    wl = wavelength_grid_nm(700.0, 1700.0, 1.0) if wavelengths_nm is None else np.asarray(wavelengths_nm, float)
    (b_lo, b_hi), (z_lo, z_hi) = map(lambda b: (float(b[0]), float(b[1])), (b1_bounds_um, zeta_bounds_per_um))
    if not (0 < b_lo <= b_hi and z_lo <= z_hi):
        raise ValueError("bounds must be ordered with positive b1")
    # the most feasible corner is (smallest b1, smallest zeta)
    if not 1.0 / b_lo - (n_periods - 1) * z_lo > 0:
        raise InfeasibleError("no grating in the bounds has all periods positive")

    lows = np.array([b_lo, z_lo])
    spans = np.array([b_hi - b_lo, z_hi - z_lo])
    free = spans > 0
    history: list[tuple[float, float, float]] = []
    cache: dict[tuple[float, float], float] = {}

    def params(u_free):
        u = np.zeros(2)
        u[free] = u_free
        return lows + u * spans

    def cost(b1, zeta):
        key = (float(b1), float(zeta))
        if key in cache:
            return cache[key]
        try:
            spec = GratingSpec(key[0], key[1], n_periods, expansion)
            center, width = spectrum_metrics(dispersion, pump, spec, objective.temperature_c, wl)
            value = objective.center_weight * (center - objective.target_center_nm) ** 2 + objective.fwhm_weight * (
                width - objective.target_fwhm_nm
            ) ** 2
        except (GratingError, UndefinedWidthError):
            value = math.inf
        cache[key] = value
        return value

    def traced_cost(b1, zeta):
        value = cost(b1, zeta)
        history.append((float(b1), float(zeta), value))
        return value

    nb = grid_shape[0] if spans[0] > 0 else 1
    nz = grid_shape[1] if spans[1] > 0 else 1
    nodes = [(b, z) for b in np.linspace(b_lo, b_hi, nb) for z in np.linspace(z_lo, z_hi, nz)]
    nodes = [(b, z) for b, z in nodes if 1.0 / b - (n_periods - 1) * z > 0]
    if not nodes:
        raise InfeasibleError("no feasible grid node in the bounds")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda bz: cost(*bz), nodes))
    else:
        values = [cost(*bz) for bz in nodes]
    history.extend((float(b), float(z), v) for (b, z), v in zip(nodes, values))
    best = int(np.argmin(values))
    grid_best = nodes[best]
    best_x, best_f = np.array(grid_best), values[best]

    if np.any(free) and math.isfinite(best_f):
        u0 = ((np.array(grid_best) - lows) / np.where(free, spans, 1.0))[free]
        cell = np.array([1.0 / max(nb - 1, 1), 1.0 / max(nz - 1, 1)])[free]
        simplex = [u0]
        for k in range(u0.size):
            step = np.zeros_like(u0)
            step[k] = cell[k] if u0[k] + cell[k] <= 1.0 else -cell[k]
            simplex.append(u0 + step)
        res = minimize(
            lambda u: traced_cost(*params(np.clip(u, 0.0, 1.0))),
            u0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * u0.size,
            options={
                "initial_simplex": np.array(simplex),
                "maxfev": max_evaluations,
                "xatol": 1e-4,
                "fatol": 1e-2,
            },
        )
        if res.fun < best_f:
            best_x, best_f = params(np.clip(res.x, 0.0, 1.0)), float(res.fun)

    spec = GratingSpec(float(best_x[0]), float(best_x[1]), n_periods, expansion, name="design")
    center, width = spectrum_metrics(dispersion, pump, spec, objective.temperature_c, wl)
    return DesignResult(spec, center, width, float(best_f), len(cache), grid_best, history)
