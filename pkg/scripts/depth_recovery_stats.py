"""How often every onion interface lands within one z-step, over many seeds and flux levels."""

import argparse
from dataclasses import dataclass, field

import numpy as np

from chirpcdi import detection, qpm, scan
from chirpcdi.grating import preset
from chirpcdi.material import default_material


@dataclass
class Config:
    seeds: int = 20
    flux_scales: list[float] = field(default_factory=lambda: [scan.DEFAULT_FLUX_SCALE])


def errors(bscan, phantom):
    out = []
    for j, x in enumerate(bscan.x_positions_um):
        truth = phantom.response_at(float(x)).depths_um
        if truth.size:
            got = scan.column_depths(bscan, j, truth.size)
            out.extend(got - truth if got.size == truth.size else [np.inf])
    return np.array(out)


def main(cfg: Config) -> None:
    wl = qpm.wavelength_grid_nm()
    src = qpm.spdc_spectrum(default_material().dispersion, qpm.PumpConfig(), preset("max"), qpm.omega_from_nm(wl), 80.0,
                            "peak-1")
    phantom, proto, sspd = scan.default_onion_phantom(), scan.onion_protocol(), detection.detector_preset("sspd")
    for flux in cfg.flux_scales:
        worst, pooled = [], []
        for seed in range(cfg.seeds):
            e = errors(scan.b_scan(src, sspd, phantom, proto, seed, flux), phantom)
            worst.append(np.abs(e).max())
            pooled.append(e)
        e = np.concatenate(pooled)
        ok = np.mean(np.array(worst) <= proto.z_step_um)
        print(f"flux {flux:g}: error std {e.std():.4f} um, worst {max(worst):.3f} um, "
              f"images with every interface within one step: {100 * ok:.0f} %")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--flux", type=float, nargs="*", default=[scan.DEFAULT_FLUX_SCALE])
    a = ap.parse_args()
    main(Config(a.seeds, a.flux))
