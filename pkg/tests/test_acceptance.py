"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line, echoed in the pytest terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import time

import numpy as np
import pytest

from chirpcdi import detection as det
from chirpcdi import grating as g
from chirpcdi import interferometry as itf
from chirpcdi import qpm, scan
from chirpcdi.material import default_material

from _report import record
from oracles import coherence_fwhm_um, trapezoid_qpm

SLT = default_material()
PUMP = qpm.PumpConfig()
WIDE_NM = qpm.wavelength_grid_nm(700.0, 1700.0, 0.5)


def verdict(number, title, ok, detail, t0, limit_s):
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < limit_s
    record(number, title, ok, detail + ("" if elapsed < limit_s else f"; over the {limit_s:g} s budget"), elapsed)
    assert ok, detail


def spdc(name, t, wl=WIDE_NM):
    return qpm.spdc_spectrum(SLT.dispersion, PUMP, g.preset(name), qpm.omega_from_nm(wl), t, "peak-1")


def mirror_fwhm(source, detector):
    x = np.round(np.arange(0.0, 70.0 + 1e-9, 0.05), 10)
    trace = itf.ideal_interferogram(source, detector.qe, itf.mirror_response(35.0), x)
    return itf.envelope(trace).fwhm_um


def test_01_closed_form_matches_quadrature():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 51))
        b1 = rng.uniform(3.0, 10.0)
        zeta = rng.uniform(0.0, 0.9 / (b1 * max(n - 1, 1)))
        r = g.realize(g.GratingSpec(b1, zeta, n), rng.uniform(25.0, 150.0))
        dk = rng.uniform(0.2, 1.5) * 2 * math.pi / b1
        exact = qpm.qpm_integral(r, dk)
        ref = trapezoid_qpm(r.starts_um, r.widths_um, r.signs, dk, h_max=3e-5)
        worst = max(worst, abs(exact - ref) / abs(ref))
    verdict(1, "closed form vs dense trapezoid", worst <= 1e-9, f"max relative error {worst:.2e} over 20 gratings", t0, 10)


def test_02_degeneracy_symmetry():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        spec = g.GratingSpec(rng.uniform(7.3, 8.1), rng.uniform(0.0, 6.5e-6), int(rng.integers(100, 2516)), SLT.expansion)
        t = rng.uniform(25.0, 150.0)
        ws = qpm.omega_from_nm(np.sort(rng.uniform(760.0, 1400.0, 64)))
        a = qpm.spdc_spectrum(SLT.dispersion, PUMP, spec, ws, t).density
        b = qpm.spdc_spectrum(SLT.dispersion, PUMP, spec, PUMP.omega - ws, t).density
        worst = max(worst, float(np.max(np.abs(a - b)) / a.max()))
    verdict(2, "signal/idler symmetry", worst <= 1e-12, f"max relative asymmetry {worst:.1e} over 50 configs", t0, 30)


def test_03_preset_geometry():
    t0 = time.perf_counter()
    lengths = g.period_lengths(g.preset("max"))
    total_mm = lengths.sum() / 1000.0
    unchirped = g.realize(g.preset("unchirped")).total_length_um
    ok = 19.9 <= total_mm <= 20.3 and 8.4 <= lengths[-1] <= 8.6 and unchirped == pytest.approx(2515 * 7.95, rel=1e-15)
    verdict(3, "preset geometry", ok,
            f"max total {total_mm:.4f} mm, b_N {lengths[-1]:.4f} um, unchirped {unchirped:.4f} um", t0, 1)


def test_04_bandwidth_ordering():
    t0 = time.perf_counter()
    rows, ok = [], True
    for t in (25.0, 50.0, 80.0):
        w = {name: qpm.spectral_fwhm(spdc(name, t)).width_nm for name in ("unchirped", "medium", "max")}
        ok &= w["max"] > w["medium"] > w["unchirped"] and w["max"] >= 10 * w["unchirped"]
        rows.append(f"{t:g}C {w['unchirped']:.1f}/{w['medium']:.1f}/{w['max']:.1f}")
    verdict(4, "bandwidth grows with chirp", ok, "FWHM nm unchirped/medium/max: " + ", ".join(rows), t0, 120)


def test_05_unchirped_two_bands():
    t0 = time.perf_counter()
    r = qpm.spectral_fwhm(spdc("unchirped", 80.0))
    bands = ", ".join(f"{a:.1f}-{b:.1f}" for a, b in r.intervals_nm)
    verdict(5, "unchirped splits into two bands", r.n_intervals == 2, f"80 C half-max bands nm: {bands}", t0, 60)


def test_06_gaussian_coherence_length():
    t0 = time.perf_counter()
    src = qpm.gaussian_spectrum(930.0, 70.0, np.arange(600.0, 1300.0, 0.1), "sld930")
    got = mirror_fwhm(src, det.detector_preset("ideal"))
    want = coherence_fwhm_um(930.0, 70.0)
    verdict(6, "Gaussian coherence length", abs(got / want - 1) <= 0.02,
            f"envelope FWHM {got:.3f} um vs analytic {want:.3f} um (measured non-Gaussian SLD: 6.3 um)", t0, 30)


def test_07_resolution_ordering():
    t0 = time.perf_counter()
    source = spdc("max", 80.0)
    sld = qpm.gaussian_spectrum(930.0, 70.0, np.arange(600.0, 1300.0, 0.1), "sld930")
    a = mirror_fwhm(source, det.detector_preset("sspd"))
    b = mirror_fwhm(source, det.detector_preset("spad"))
    c = mirror_fwhm(sld, det.detector_preset("sspd"))
    verdict(7, "axial resolution ordering", a < b < c,
            f"SPDC/SSPD {a:.2f} < SPDC/SPAD {b:.2f} < SLD/SSPD {c:.2f} um", t0, 120)


def test_08_pellicle():
    t0 = time.perf_counter()
    x = np.round(np.arange(20.0, 45.0 + 1e-9, 0.05), 10)
    pel = itf.pellicle_response(1.5, 2.0, 30.0)
    sspd = det.detector_preset("sspd")
    env = itf.envelope(itf.ideal_interferogram(spdc("max", 80.0), sspd.qe, pel, x))
    top = np.sort(env.peak_positions_um[np.argsort(env.peak_heights)[::-1][:2]])
    sep = float(top[1] - top[0]) if top.size == 2 else float("nan")
    sld = qpm.gaussian_spectrum(930.0, 70.0, np.arange(600.0, 1300.0, 0.1))
    env_sld = itf.envelope(itf.ideal_interferogram(sld, sspd.qe, pel, x))
    ok = abs(sep - 3.0) <= 0.1 and len(env.half_max_intervals) == 2 and len(env_sld.half_max_intervals) == 1
    verdict(8, "pellicle resolved by SPDC only", ok,
            f"SPDC peak separation {sep:.3f} um, SLD half-max intervals {len(env_sld.half_max_intervals)}", t0, 60)


def test_09_spectrum_round_trip():
    t0 = time.perf_counter()
    truth = qpm.gaussian_spectrum(1064.0, 60.0, np.arange(800.0, 1400.0, 0.1))
    x = np.round(np.arange(-80.0, 80.0 + 1e-9, 0.05), 10)
    trace = itf.ideal_interferogram(truth, None, itf.mirror_response(0.0), x)
    est = qpm.spectral_fwhm(itf.estimate_spectrum(trace, np.arange(800.0, 1400.0, 0.05)))
    ref = qpm.spectral_fwhm(truth)
    dc, dw = est.center_nm - ref.center_nm, est.width_nm / ref.width_nm - 1
    verdict(9, "spectrum estimation round trip", abs(dc) <= 1.0 and abs(dw) <= 0.03,
            f"center off by {dc:+.3f} nm, FWHM off by {100 * dw:+.2f} %", t0, 30)


def test_10_poisson_and_determinism():
    t0 = time.perf_counter()
    rng = det.stream(31337, 0)
    k = np.array([det.sample_counts(2000.0, 0.5, rng).counts for _ in range(10_000)], dtype=float)
    ratio = k.var(ddof=1) / k.mean()
    z = (k.mean() - 1000.0) / math.sqrt(1000.0 / k.size)
    src = spdc("max", 80.0, qpm.wavelength_grid_nm())
    images = [
        scan.b_scan(src, det.detector_preset("sspd"), scan.default_onion_phantom(), scan.onion_protocol(), 42,
                    workers=w).image.tobytes()
        for w in (1, 2, 4)
    ]
    same = images[0] == images[1] == images[2]
    ok = 0.9 <= ratio <= 1.1 and abs(z) <= 3 and same
    verdict(10, "Poisson statistics and determinism", ok,
            f"var/mean {ratio:.4f}, mean z-score {z:+.2f}, B-scans identical at 1/2/4 threads: {same}", t0, 60)


def test_11_bscan_protocol():
    t0 = time.perf_counter()
    proto = scan.onion_protocol()
    phantom = scan.default_onion_phantom()
    sspd = det.detector_preset("sspd")
    src = spdc("max", 80.0, qpm.wavelength_grid_nm())
    sld = qpm.gaussian_spectrum(930.0, 70.0, qpm.wavelength_grid_nm(), "sld930")
    seed = 0
    b = scan.b_scan(src, sspd, phantom, proto, seed)
    b_sld = scan.b_scan(sld, sspd, phantom, proto, seed)

    mich = itf.Michelson(src, sspd.qe, proto.z_grid_um)
    worst, weakest = 0.0, math.inf
    for j, x in enumerate(b.x_positions_um):
        truth = phantom.response_at(float(x)).depths_um
        if truth.size == 0:
            continue
        ideal = mich.ideal(phantom.response_at(float(x)))
        peak_counts = (scan.DEFAULT_FLUX_SCALE * ideal.values.max() * ideal.band_qe + sspd.dark_rate) * proto.dwell_s
        weakest = min(weakest, peak_counts)
        got = scan.column_depths(b, j, truth.size)
        worst = max(worst, float(np.max(np.abs(got - truth))) if got.size == truth.size else math.inf)
    sig = b.column_has_signal
    wider = bool(np.all(b_sld.column_fwhm_um[sig] > b.column_fwhm_um[sig]))
    ok = b.shape == (701, 160) and weakest >= scan.PEAK_SNR_THRESHOLD_COUNTS and worst <= proto.z_step_um and wider
    verdict(11, "B-scan protocol fidelity", ok,
            f"image {b.shape[1]}x{b.shape[0]}, min peak expected counts {weakest:.0f}, worst depth error "
            f"{worst:.3f} um, SLD columns wider: {wider} (median {np.nanmedian(b_sld.column_fwhm_um[sig]):.2f} vs "
            f"{np.nanmedian(b.column_fwhm_um[sig]):.2f} um), A-scan {proto.a_scan_duration_s:g} s", t0, 600)


def test_12_design_self_consistency():
    t0 = time.perf_counter()
    wl = qpm.wavelength_grid_nm(700.0, 1700.0, 1.0)
    center, width = qpm.spectrum_metrics(SLT.dispersion, PUMP, g.preset("max"), 80.0, wl)
    res = qpm.design_search(SLT.dispersion, PUMP, qpm.DesignObjective(center, width, 80.0), (7.3, 7.7), (5e-6, 7e-6),
                            grid_shape=(6, 6))
    dc, dw = res.center_nm - center, res.fwhm_nm / width - 1
    verdict(12, "design search recovers its own target", abs(dc) <= 1.0 and abs(dw) <= 0.02,
            f"target {center:.2f}/{width:.2f} nm, got b1 {res.spec.b1_um:.4f} um zeta {res.spec.zeta_per_um:.3e}/um "
            f"({dc:+.3f} nm, {100 * dw:+.3f} %), {res.n_evaluations} evaluations", t0, 300)
