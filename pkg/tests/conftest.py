import numpy as np
import pytest

from chirpcdi import grating, material, qpm


@pytest.fixture(scope="session")
def slt():
    return material.default_material()


@pytest.fixture(scope="session")
def pump():
    return qpm.PumpConfig()


@pytest.fixture(scope="session")
def spdc_max_80(slt, pump):
    wl = qpm.wavelength_grid_nm()
    return qpm.spdc_spectrum(slt.dispersion, pump, grating.preset("max"), qpm.omega_from_nm(wl), 80.0, "peak-1", "max@80")


@pytest.fixture(scope="session")
def sld930():
    return qpm.gaussian_spectrum(930.0, 70.0, np.arange(600.0, 1300.0, 0.25), "sld930")


def pytest_terminal_summary(terminalreporter):
    from _report import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
