import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chirpcdi import interferometry as itf
from chirpcdi import qpm
from chirpcdi.material import C_UM_PER_S

from oracles import coherence_fwhm_um


def grid(start=0.0, stop=70.0, step=0.1):
    return np.round(np.arange(start, stop + step / 2, step), 10)


def test_gaussian_mirror_envelope_matches_analytic(sld930):
    trace = itf.ideal_interferogram(sld930, None, itf.mirror_response(35.0), grid(0, 70, 0.05))
    env = itf.envelope(trace)
    assert env.fwhm_um == pytest.approx(coherence_fwhm_um(930.0, 70.0), rel=0.01)
    assert env.main_peak_um == pytest.approx(35.0, abs=0.01)


def test_trace_against_direct_quadrature(sld930):
    # independent evaluation of R + r^2 + 2 r sqrt(R) * integral S cos(2 w (x-d)/c) / integral S
    x = grid(30, 40, 0.1)
    r, d, R = 0.4, 35.0, 0.8
    trace = itf.ideal_interferogram(sld930, None, itf.mirror_response(d, r), x, R)
    w = np.sort(sld930.omega)
    s = sld930.density[np.argsort(sld930.omega)]
    norm = np.trapezoid(s, w)
    direct = [R + r * r + 2 * r * math.sqrt(R) * np.trapezoid(s * np.cos(2 * w * (xi - d) / C_UM_PER_S), w) / norm for xi in x]
    assert np.allclose(trace.values, direct, rtol=1e-12, atol=1e-12)


def test_dc_level_far_from_interfaces(sld930):
    trace = itf.ideal_interferogram(sld930, None, itf.mirror_response(60.0, 0.5), grid())
    assert np.allclose(trace.values[:200], 1.25, atol=1e-6)


def test_empty_sample_is_flat_and_flagged(sld930):
    trace = itf.ideal_interferogram(sld930, None, itf.empty_response(), grid())
    assert "dc-only" in trace.flags
    env = itf.envelope(trace)
    assert env.fwhm_of_main_peak is None
    with pytest.raises(qpm.UndefinedWidthError):
        env.fwhm_um


def test_pellicle_geometry_and_reflectances():
    p = itf.pellicle_response(1.5, 2.0, 30.0)
    assert np.allclose(p.depths_um, [30.0, 33.0])
    assert p.reflectances[0] == pytest.approx(-0.2)
    assert p.reflectances[1] == pytest.approx(0.2 * 0.96)


def test_sample_validation():
    with pytest.raises(ValueError):
        itf.SampleResponse([2.0, 1.0], [0.1, 0.1])
    with pytest.raises(ValueError):
        itf.SampleResponse([1.0], [1.5])
    with pytest.warns(itf.PassivityWarning):
        itf.SampleResponse([1.0, 2.0], [0.9, 0.9])


def test_undersampled_grid_is_rejected(sld930):
    trace = itf.ideal_interferogram(sld930, None, itf.mirror_response(35.0), grid(0, 70, 0.2))
    with pytest.raises(itf.SamplingError, match="need step"):
        itf.envelope(trace)


def test_nonuniform_grid_is_rejected(sld930):
    x = np.sort(np.concatenate([grid(0, 10, 0.1), [10.03]]))
    trace = itf.ideal_interferogram(sld930, None, itf.mirror_response(5.0), x)
    with pytest.raises(itf.SamplingError, match="uniform"):
        trace.step_um


@settings(max_examples=20, deadline=None)
@given(st.integers(-100, 100))
def test_shift_equivariance(k):
    src = qpm.gaussian_spectrum(1000.0, 100.0, np.arange(800.0, 1250.0, 1.0))
    m = itf.Michelson(src, None, grid(0, 70, 0.1))
    a = m.ideal(itf.mirror_response(30.0, 0.5)).values
    b = m.ideal(itf.mirror_response(30.0 + 0.1 * k, 0.5)).values
    if k >= 0:
        assert np.allclose(a[: a.size - k], b[k:], atol=1e-9)
    else:
        assert np.allclose(a[-k:], b[: b.size + k], atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(10.0, 60.0), st.floats(0.05, 1.0))
def test_envelope_peak_tracks_depth(d, r):
    src = qpm.gaussian_spectrum(1000.0, 100.0, np.arange(800.0, 1250.0, 1.0))
    trace = itf.ideal_interferogram(src, None, itf.mirror_response(d, r), grid())
    env = itf.envelope(trace, band_nm=(800.0, 1250.0))
    assert env.main_peak_um == pytest.approx(d, abs=0.02)


def test_envelope_fwhm_scale_invariant_in_reflectance(sld930):
    widths = []
    for r in (0.05, 0.3, 1.0):
        trace = itf.ideal_interferogram(sld930, None, itf.mirror_response(35.0, r), grid())
        widths.append(itf.envelope(trace).fwhm_um)
    assert np.ptp(widths) < 1e-6


def test_spectrum_round_trip(sld930):
    x = grid(-60.0, 60.0, 0.05)
    trace = itf.ideal_interferogram(sld930, None, itf.mirror_response(0.0), x)
    est = itf.estimate_spectrum(trace, np.arange(700.0, 1200.0, 0.1))
    r = qpm.spectral_fwhm(est)
    ref = qpm.spectral_fwhm(sld930)
    assert r.center_nm == pytest.approx(ref.center_nm, abs=1.0)
    assert r.width_nm == pytest.approx(ref.width_nm, rel=0.03)


def test_two_line_round_trip_amplitude_ratio():
    lines = qpm.Spectrum.from_wavelength_nm([1100.0, 900.0], [0.5, 1.0])
    x = grid(0.0, 200.0, 0.05)
    trace = itf.ideal_interferogram(lines, None, itf.mirror_response(100.0), x)
    est = itf.estimate_spectrum(trace, np.arange(800.0, 1200.0, 0.05), window="hann")
    wl = est.wavelength_nm
    p900 = est.density[np.abs(wl - 900) < 5].max()
    p1100 = est.density[np.abs(wl - 1100) < 5].max()
    assert wl[np.argmax(est.density)] == pytest.approx(900.0, abs=0.5)
    assert p1100 / p900 == pytest.approx(0.5, rel=0.05)
