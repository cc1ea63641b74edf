import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chirpcdi import grating as g
from chirpcdi.material import ThermalExpansion


def test_unchirped_periods_are_exact():
    spec = g.preset("unchirped")
    assert np.all(g.period_lengths(spec) == 7.95)
    r = g.realize(spec)
    assert r.n_segments == 2 * 2515
    assert r.total_length_um == pytest.approx(2515 * 7.95, rel=1e-13)


def test_max_preset_geometry():
    lengths = g.period_lengths(g.preset("max"))
    # independent sum of 1/(1/b1 - (k-1)zeta)
    oracle = sum(1.0 / (1 / 7.5 - k * 6.24e-6) for k in range(2515))
    assert lengths.sum() == pytest.approx(oracle, rel=1e-12)
    assert lengths.sum() == pytest.approx(20067.67, abs=0.01)
    assert lengths[-1] == pytest.approx(8.5001, abs=1e-4)


def test_all_presets_are_about_two_centimetres():
    for name in g.PRESET_PARAMETERS:
        assert 19_900 < g.realize(g.preset(name)).total_length_um < 20_300


def test_nonpositive_period_names_first_offender():
    with pytest.raises(g.GratingError, match="period 11 "):
        g.GratingSpec(1.0, 0.1, 20)
    with pytest.raises(g.GratingError):
        g.GratingSpec(-1.0, 0.0, 5)
    with pytest.raises(g.GratingError):
        g.GratingSpec(7.0, 0.0, 0)


def test_segments_alternate_and_tile():
    r = g.realize(g.GratingSpec(5.0, 1e-3, 7))
    assert list(r.signs[:4]) == [1, -1, 1, -1]
    ends = r.starts_um + r.widths_um
    assert np.allclose(ends[:-1], r.starts_um[1:], rtol=0, atol=1e-12)
    assert not r.widths_um.flags.writeable


def test_thermal_expansion_scales_uniformly():
    exp = ThermalExpansion(1.6e-5, 7e-9)
    spec = g.GratingSpec(7.5, 6.24e-6, 100, exp)
    cold, hot = g.period_lengths(spec, 25.0), g.period_lengths(spec, 80.0)
    assert np.allclose(hot / cold, 1 + 1.6e-5 * 55 + 7e-9 * 55**2, rtol=1e-14)


def test_starting_positions_empty_and_prefix():
    assert g.starting_positions([]).size == 0
    assert list(g.starting_positions([1.0, 2.0, 3.0])) == [0.0, 1.0, 3.0]


def test_unknown_preset():
    with pytest.raises(KeyError, match="unchirped"):
        g.preset("huge")


@settings(max_examples=50, deadline=None)
@given(st.floats(3.0, 12.0), st.floats(0.0, 1e-4), st.integers(1, 300))
def test_lengths_monotone_in_chirp(b1, zeta, n):
    try:
        spec = g.GratingSpec(b1, zeta, n)
    except g.GratingError:
        return
    lengths = g.period_lengths(spec)
    assert lengths[0] == pytest.approx(b1, rel=1e-15)
    assert np.all(np.diff(lengths) >= 0)
    assert np.all(lengths > 0)
