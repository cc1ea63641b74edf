import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from chirpcdi import detection as det
from chirpcdi import interferometry as itf
from chirpcdi import qpm


def test_sspd_curve_passes_through_calibration_points():
    q = det.SSPD_QE
    assert q.efficiency(900.0) == pytest.approx(0.12, rel=1e-12)
    assert q.efficiency(1200.0) == pytest.approx(0.05, rel=1e-12)
    assert q.efficiency(1600.0) == 0.0
    assert q.efficiency(650.0) == 0.0


def test_spad_cuts_off_in_the_infrared():
    q = det.SPAD_QE
    assert q.efficiency(800.0) == pytest.approx(0.4)
    assert q.efficiency(1050.0) == pytest.approx(0.2)
    assert q.efficiency(1150.0) == 0.0


def test_qe_csv(tmp_path):
    p = tmp_path / "qe.csv"
    p.write_text("wavelength_nm,qe\n500,0.1\n900,0.3\n")
    q = det.load_qe_csv(p)
    assert q.efficiency(700.0) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        det.tabulated_qe([500, 400], [0.1, 0.2])
    with pytest.raises(ValueError):
        det.tabulated_qe([500, 600], [0.1, 1.2])


def test_preset_lookup():
    assert det.detector_preset("ideal").dark_rate == 0.0
    with pytest.raises(KeyError, match="sspd"):
        det.detector_preset("pmt")


def test_effective_rate_flat_spectrum():
    wl = np.linspace(800.0, 1000.0, 201)
    flux = qpm.Spectrum.from_wavelength_nm(wl, np.full(wl.size, 10.0))
    d = det.DetectorModel("flat", det.flat_qe(0.5), dark_rate=3.0)
    assert det.effective_rate(flux, d) == pytest.approx(0.5 * 10.0 * 200.0 + 3.0)


def test_no_overlap_gives_dark_counts_and_warns():
    wl = np.linspace(1200.0, 1300.0, 11)
    flux = qpm.Spectrum.from_wavelength_nm(wl, np.ones(wl.size))
    with pytest.warns(det.NoSignalWarning):
        assert det.effective_rate(flux, det.detector_preset("spad")) == 50.0


def test_poisson_moments():
    rng = det.stream(12345, 0)
    k = np.array([det.sample_counts(2000.0, 0.5, rng).counts for _ in range(10_000)])
    assert 0.9 <= k.var(ddof=1) / k.mean() <= 1.1
    assert abs(k.mean() - 1000.0) <= 3 * np.sqrt(1000.0 / k.size)


def test_inverse_cdf_distribution_chi_square():
    u = det.stream(7, 3).random(20_000)
    k = det.poisson_from_uniform(np.full(u.size, 4.0), u)
    edges = np.arange(0, 13)
    observed = np.array([np.sum(k == e) for e in edges[:-1]] + [np.sum(k >= 12)])
    probs = np.append(stats.poisson.pmf(edges[:-1], 4.0), stats.poisson.sf(11, 4.0))
    chi2, p = stats.chisquare(observed, probs * u.size)
    assert p > 1e-3


def test_streams_are_keyed_and_reproducible():
    a = det.stream(1, 0).random(5)
    assert np.array_equal(a, det.stream(1, 0).random(5))
    assert not np.array_equal(a, det.stream(1, 1).random(5))
    assert not np.array_equal(a, det.stream(2, 0).random(5))


def test_dead_time_reduces_rate():
    assert det.dead_time_factor(1e6, 1e-7) == pytest.approx(1 / 1.1)
    rec = det.sample_counts(1e6, 1.0, det.stream(0), dead_time=1e-7)
    assert rec.expected_rate == pytest.approx(1e6 / 1.1)


def _trace(values):
    return itf.Interferogram(np.arange(len(values)) * 0.1, np.asarray(values, float), band_qe=0.5)


def test_count_interferogram_mean_and_type():
    ideal = _trace(np.full(50, 2.0))
    d = det.DetectorModel("x", det.flat_qe(1.0), dark_rate=10.0)
    c = det.count_interferogram(ideal, d, 100.0, 0.5, seed=1)
    assert c.kind == "photon-counts" and c.values.dtype.kind == "i"
    assert np.allclose(c.expected, (100.0 * 2.0 * 0.5 + 10.0) * 0.5)


def test_negative_ideal_values_are_clamped_with_warning():
    ideal = itf.Interferogram(np.arange(3) * 0.1, np.array([1.0, -0.1, 1.0]))
    with pytest.warns(det.ClampWarning):
        c = det.count_interferogram(ideal, det.detector_preset("ideal"), 10.0, 1.0, 0)
    assert any(f.startswith("clamped") for f in c.flags)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 500))
def test_counts_depend_only_on_seed_and_index(seed, idx):
    ideal = _trace(np.linspace(0.5, 2.0, 40))
    d = det.detector_preset("sspd")
    a = det.count_interferogram(ideal, d, 300.0, 0.5, seed, idx)
    b = det.count_interferogram(ideal, d, 300.0, 0.5, seed, idx)
    assert np.array_equal(a.values, b.values)
