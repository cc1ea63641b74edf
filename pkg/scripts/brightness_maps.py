"""Temperature-tuning brightness maps for the three grating presets."""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chirpcdi import io, qpm
from chirpcdi.grating import preset
from chirpcdi.material import default_material


@dataclass
class Config:
    out: Path = Path("out/brightness")
    t_start_c: float = 25.0
    t_stop_c: float = 200.0
    t_step_c: float = 2.5
    workers: int = 1


def main(cfg: Config) -> None:
    mat = default_material()
    temps = np.arange(cfg.t_start_c, cfg.t_stop_c + 1e-9, cfg.t_step_c)
    for name in ("unchirped", "medium", "max"):
        bmap = qpm.temperature_sweep(mat.dispersion, qpm.PumpConfig(), preset(name), temps, workers=cfg.workers)
        for f in io.write_brightness_map(cfg.out / name, bmap):
            print(f)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Config.out)
    ap.add_argument("--workers", type=int, default=1)
    a = ap.parse_args()
    main(Config(out=a.out, workers=a.workers))
