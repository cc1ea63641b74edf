"""Mirror-sample envelope FWHM for each source/detector pairing, plus spectral widths."""

from dataclasses import dataclass

import numpy as np

from chirpcdi import detection, interferometry as itf, qpm
from chirpcdi.grating import preset
from chirpcdi.material import default_material


@dataclass
class Config:
    temperature_c: float = 80.0
    step_um: float = 0.05


def envelope_fwhm(source, detector, step):
    x = np.round(np.arange(0.0, 70.0 + 1e-9, step), 10)
    return itf.envelope(itf.ideal_interferogram(source, detector.qe, itf.mirror_response(35.0), x)).fwhm_um


def main(cfg: Config) -> None:
    mat = default_material()
    wl = qpm.wavelength_grid_nm(700.0, 1700.0, 0.5)
    sources = {
        name: qpm.spdc_spectrum(mat.dispersion, qpm.PumpConfig(), preset(name), qpm.omega_from_nm(wl), cfg.temperature_c,
                                "peak-1")
        for name in ("unchirped", "medium", "max")
    }
    sources["sld930"] = qpm.gaussian_spectrum(930.0, 70.0, np.arange(600.0, 1300.0, 0.1))
    print(f"{'source':10s} {'FWHM nm':>8s} {'sspd um':>8s} {'spad um':>8s} {'ideal um':>9s}")
    for name, s in sources.items():
        widths = [envelope_fwhm(s, detection.detector_preset(d), cfg.step_um) for d in ("sspd", "spad", "ideal")]
        print(f"{name:10s} {qpm.spectral_fwhm(s).width_nm:8.1f} " + " ".join(f"{w:8.2f}" for w in widths))


if __name__ == "__main__":
    main(Config())
