"""Inverse design: find a chirped grating matching the max preset's spectrum at 80 C."""

from dataclasses import dataclass

from chirpcdi import qpm
from chirpcdi.grating import preset
from chirpcdi.material import default_material


@dataclass
class Config:
    temperature_c: float = 80.0
    b1_bounds_um: tuple[float, float] = (7.3, 7.7)
    zeta_bounds_per_um: tuple[float, float] = (5e-6, 7e-6)
    grid_shape: tuple[int, int] = (6, 6)


def main(cfg: Config) -> None:
    mat, pump = default_material(), qpm.PumpConfig()
    wl = qpm.wavelength_grid_nm(700.0, 1700.0, 1.0)
    center, width = qpm.spectrum_metrics(mat.dispersion, pump, preset("max"), cfg.temperature_c, wl)
    res = qpm.design_search(mat.dispersion, pump, qpm.DesignObjective(center, width, cfg.temperature_c),
                            cfg.b1_bounds_um, cfg.zeta_bounds_per_um, grid_shape=cfg.grid_shape)
    print(f"target center {center:.2f} nm, FWHM {width:.2f} nm")
    print(f"found b1 {res.spec.b1_um:.5f} um, zeta {res.spec.zeta_per_um:.4e} /um -> "
          f"{res.center_nm:.2f} nm, {res.fwhm_nm:.2f} nm after {res.n_evaluations} evaluations")


if __name__ == "__main__":
    main(Config())
