"""Batch front end: ``chirpcdi run <config.toml>`` and ``chirpcdi presets``.

A run writes its artifacts into the output directory and then a
``manifest.json`` holding the config echo, resolved presets, a sha256 per
artifact, timings and every warning raised along the way. On failure the
partial artifacts are removed and the manifest records the error.
"""

from __future__ import annotations

import argparse
import difflib
import os
import sys
import time
import traceback
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import io
from .detection import DETECTOR_PRESETS, DetectorModel, detector_preset, load_qe_csv
from .grating import PRESET_N_PERIODS, PRESET_PARAMETERS, GratingError, GratingSpec, preset
from .interferometry import pellicle_response, mirror_response
from .material import Material, default_material, default_material_path, load_material
from .qpm import (
    DesignObjective,
    PumpConfig,
    Spectrum,
    design_search,
    gaussian_spectrum,
    normalize,
    omega_from_nm,
    spdc_spectrum,
    spectral_fwhm,
    temperature_sweep,
    wavelength_grid_nm,
)
from .scan import (
    DEFAULT_FLUX_SCALE,
    ScanProtocol,
    a_scan,
    b_scan,
    default_onion_phantom,
    mirror_phantom,
)

EXPERIMENTS = ("spectrum", "sweep", "ascan", "bscan", "pellicle", "design")
COUNTS_EXPERIMENTS = ("ascan", "bscan", "pellicle")
SOURCE_KINDS = ("spdc", "gaussian-sld", "tabulated")
SOURCE_PRESETS = {"sld930": {"kind": "gaussian-sld", "center_nm": 930.0, "fwhm_nm": 70.0}}
THREADS_ENV = "CHIRPCDI_THREADS"

# allowed keys per table; "" is the top level
SCHEMA: dict[str, set[str]] = {
    "": {"experiment", "material", "seed", "output_dir", "temperature_c", "pump_wavelength_nm",
         "grating", "source", "detector", "grid", "sweep", "protocol", "sample", "design"},
    "grating": {"preset", "b1_um", "zeta_per_um", "n_periods"},
    "source": {"kind", "preset", "center_nm", "fwhm_nm", "path", "temperature_c"},
    "detector": {"preset", "qe_csv", "dark_rate", "dead_time"},
    "grid": {"wavelength_start_nm", "wavelength_stop_nm", "wavelength_step_nm", "normalization"},
    "sweep": {"temperature_start_c", "temperature_stop_c", "temperature_step_c"},
    "protocol": {"z_range_um", "z_step_um", "dwell_s", "x_range_um", "x_step_um", "z_start_um", "x_start_um",
                 "flux_scale", "reference_reflectance"},
    "sample": {"kind", "depth_um", "reflectance", "n", "thickness_um", "front_depth_um"},
    "design": {"target_center_nm", "target_fwhm_nm", "b1_bounds_um", "zeta_bounds_per_um", "grid_shape",
               "max_evaluations", "center_weight", "fwhm_weight"},
}
_ALL_KEYS = sorted(set().union(*SCHEMA.values()))


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    material: Material
    grating: GratingSpec
    source: dict
    detector: DetectorModel
    seed: int | None = None
    output_dir: Path = Path("out")
    temperature_c: float = 80.0
    pump: PumpConfig = field(default_factory=PumpConfig)
    grid: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    protocol: ScanProtocol = field(default_factory=ScanProtocol)
    flux_scale: float = DEFAULT_FLUX_SCALE
    reference_reflectance: float = 1.0
    sample: dict = field(default_factory=dict)
    design: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def wavelengths_nm(self) -> np.ndarray:
        g = self.grid
        return wavelength_grid_nm(
            g.get("wavelength_start_nm", 700.0), g.get("wavelength_stop_nm", 1500.0), g.get("wavelength_step_nm", 0.5)
        )


def _check_keys(table: dict, section: str) -> None:
    allowed = SCHEMA[section]
    for key in table:
        if key not in allowed:
            hint = difflib.get_close_matches(key, sorted(allowed), n=1) or difflib.get_close_matches(key, _ALL_KEYS, n=1)
            where = f"[{section}]" if section else "top level"
            msg = f"unknown key {key!r} at {where}"
            raise ConfigError(msg + (f"; did you mean {hint[0]!r}?" if hint else ""))


def _number(table: dict, key: str, section: str, positive: bool = False, default=None) -> float | None:
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{section}.{key} must be > 0, got {v!r}")
    return float(v)


def _resolve_path(value: str, base: Path) -> Path:
    p = Path(value)
    p = p if p.is_absolute() else base / p
    if not p.exists():
        raise ConfigError(f"referenced file {value!r} does not exist")
    return p


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Strict parse: unknown keys, wrong types and broken invariants are errors."""
    base = Path(base_dir)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    _check_keys(raw, "")
    for section in SCHEMA:
        if section and section in raw:
            if not isinstance(raw[section], dict):
                raise ConfigError(f"{section!r} must be a table")
            _check_keys(raw[section], section)

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")

    if "material" in raw:
        try:
            material = load_material(_resolve_path(raw["material"], base))
        except ValueError as exc:
            raise ConfigError(f"material: {exc}") from None
    else:
        material = default_material()

    g = raw.get("grating", {"preset": "max"})
    if "preset" in g:
        if set(g) - {"preset"}:
            raise ConfigError("grating: give either preset or b1_um/zeta_per_um/n_periods, not both")
        if g["preset"] not in PRESET_PARAMETERS:
            raise ConfigError(f"grating.preset must be one of {sorted(PRESET_PARAMETERS)}, got {g['preset']!r}")
        grating = preset(g["preset"], material.expansion)
    else:
        missing = {"b1_um", "zeta_per_um"} - set(g)
        if missing:
            raise ConfigError(f"grating: missing {sorted(missing)}")
        n = g.get("n_periods", PRESET_N_PERIODS)
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigError(f"grating.n_periods must be an integer, got {n!r}")
        try:
            grating = GratingSpec(
                _number(g, "b1_um", "grating"), _number(g, "zeta_per_um", "grating"), n, material.expansion, "custom"
            )
        except GratingError as exc:
            raise ConfigError(f"grating: {exc}") from None

    s = dict(raw.get("source", {"kind": "spdc"}))
    if "preset" in s:
        if s["preset"] not in SOURCE_PRESETS:
            raise ConfigError(f"source.preset must be one of {sorted(SOURCE_PRESETS)}, got {s['preset']!r}")
        s = {**SOURCE_PRESETS[s["preset"]], **{k: v for k, v in s.items() if k != "preset"}, "preset": s["preset"]}
    kind = s.get("kind")
    if kind not in SOURCE_KINDS:
        raise ConfigError(f"source.kind must be one of {SOURCE_KINDS}, got {kind!r}")
    if kind == "gaussian-sld":
        for key in ("center_nm", "fwhm_nm"):
            if _number(s, key, "source", positive=True) is None:
                raise ConfigError(f"source.{key} is required for gaussian-sld")
    if kind == "tabulated":
        if "path" not in s:
            raise ConfigError("source.path is required for a tabulated source")
        s["path"] = str(_resolve_path(s["path"], base))

    d = raw.get("detector", {"preset": "sspd"})
    if "preset" in d and "qe_csv" in d:
        raise ConfigError("detector: give either preset or qe_csv")
    if "qe_csv" in d:
        qe = load_qe_csv(_resolve_path(d["qe_csv"], base))
        detector = DetectorModel("custom", qe, _number(d, "dark_rate", "detector", default=0.0),
                                 _number(d, "dead_time", "detector", default=0.0))
    else:
        name = d.get("preset", "sspd")
        if name not in DETECTOR_PRESETS:
            raise ConfigError(f"detector.preset must be one of {sorted(DETECTOR_PRESETS)}, got {name!r}")
        detector = detector_preset(name)
        if "dark_rate" in d or "dead_time" in d:
            detector = DetectorModel(name, detector.qe, _number(d, "dark_rate", "detector", default=detector.dark_rate),
                                     _number(d, "dead_time", "detector", default=detector.dead_time))

    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64):
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")

    p = raw.get("protocol", {})
    proto_keys = {k: _number(p, k, "protocol") for k in p if k not in ("flux_scale", "reference_reflectance")}
    try:
        protocol = ScanProtocol(**proto_keys)
    except ValueError as exc:
        raise ConfigError(f"protocol: {exc}") from None

    grid = raw.get("grid", {})
    for key in ("wavelength_start_nm", "wavelength_stop_nm", "wavelength_step_nm"):
        _number(grid, key, "grid", positive=True)
    if grid.get("normalization", "peak-1") not in ("raw", "peak-1", "unit-area"):
        raise ConfigError("grid.normalization must be raw, peak-1 or unit-area")

    sample = raw.get("sample", {})
    if sample.get("kind", "default") not in ("default", "mirror", "pellicle", "onion"):
        raise ConfigError("sample.kind must be mirror, pellicle or onion")

    design = raw.get("design", {})
    if experiment == "design":
        for key in ("target_center_nm", "target_fwhm_nm", "b1_bounds_um", "zeta_bounds_per_um"):
            if key not in design:
                raise ConfigError(f"design.{key} is required")

    cfg = RunConfig(
        experiment=experiment,
        material=material,
        grating=grating,
        source=s,
        detector=detector,
        seed=seed,
        output_dir=Path(raw.get("output_dir", "out")),
        temperature_c=_number(raw, "temperature_c", "top", default=80.0),
        pump=PumpConfig(_number(raw, "pump_wavelength_nm", "top", positive=True, default=532.0)),
        grid=grid,
        sweep=raw.get("sweep", {}),
        protocol=protocol,
        flux_scale=_number(p, "flux_scale", "protocol", default=DEFAULT_FLUX_SCALE),
        reference_reflectance=_number(p, "reference_reflectance", "protocol", default=1.0),
        sample=sample,
        design=design,
        raw=raw,
    )
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent)


# --------------------------------------------------------------------------- #


def build_source(cfg: RunConfig, wavelengths_nm=None) -> Spectrum:
    wl = cfg.wavelengths_nm() if wavelengths_nm is None else wavelengths_nm
    s = cfg.source
    if s["kind"] == "spdc":
        t = float(s.get("temperature_c", cfg.temperature_c))
        return spdc_spectrum(cfg.material.dispersion, cfg.pump, cfg.grating, omega_from_nm(wl), t, "peak-1",
                             f"spdc {cfg.grating.name or 'custom'} @ {t:g} C")
    if s["kind"] == "gaussian-sld":
        return gaussian_spectrum(float(s["center_nm"]), float(s["fwhm_nm"]), wl, s.get("preset", ""))
    _, data = io.read_csv(s["path"])
    return normalize(Spectrum.from_wavelength_nm(data[:, 0], data[:, 1], label=Path(s["path"]).stem), "peak-1")


def resolved_presets(cfg: RunConfig) -> dict:
    g = cfg.grating
    return {
        "material": {"name": cfg.material.name, "path": str(cfg.material.source_path or default_material_path())},
        "grating": {"name": g.name, "b1_um": g.b1_um, "zeta_per_um": g.zeta_per_um, "n_periods": g.n_periods},
        "source": cfg.source,
        "detector": {"name": cfg.detector.name, "qe": asdict(cfg.detector.qe), "dark_rate": cfg.detector.dark_rate,
                     "dead_time": cfg.detector.dead_time},
        "pump_wavelength_nm": cfg.pump.vacuum_wavelength_nm,
        "protocol": asdict(cfg.protocol),
        "flux_scale": cfg.flux_scale,
    }


def _sample(cfg: RunConfig):
    smp = cfg.sample
    kind = smp.get("kind", "pellicle" if cfg.experiment == "pellicle" else "mirror")
    if kind == "pellicle":
        return pellicle_response(smp.get("n", 1.5), smp.get("thickness_um", 2.0), smp.get("front_depth_um", 30.0))
    if kind == "mirror":
        return mirror_response(smp.get("depth_um", 35.0), smp.get("reflectance", 1.0))
    raise ConfigError(f"sample kind {kind!r} is not valid for {cfg.experiment}")


def execute(cfg: RunConfig, out: Path, workers: int) -> tuple[list[Path], dict]:
    """Run the experiment; returns written files and a result summary."""
    exp = cfg.experiment
    if exp in COUNTS_EXPERIMENTS and cfg.seed is None:
        raise ConfigError(f"seed is required for the {exp} experiment")
    if exp == "spectrum":
        spec = build_source(cfg)
        spec = normalize(spec, cfg.grid.get("normalization", "peak-1"))
        files = io.write_spectrum(out / "spectrum.csv", spec)
        r = spectral_fwhm(spec)
        return files, {"center_nm": r.center_nm, "fwhm_nm": r.width_nm, "peak_nm": r.peak_nm,
                       "n_half_max_intervals": r.n_intervals, "truncated": r.truncated}
    if exp == "sweep":
        sw = cfg.sweep
        temps = np.arange(
            sw.get("temperature_start_c", 25.0),
            sw.get("temperature_stop_c", 200.0) + 1e-9,
            sw.get("temperature_step_c", 2.5),
        )
        bmap = temperature_sweep(cfg.material.dispersion, cfg.pump, cfg.grating, temps, cfg.wavelengths_nm(), workers)
        return io.write_brightness_map(out / "sweep", bmap), {"shape": list(bmap.values.shape)}
    if exp in ("ascan", "pellicle"):
        a = a_scan(build_source(cfg), cfg.detector, _sample(cfg), cfg.protocol, cfg.seed, cfg.flux_scale,
                   reference_reflectance=cfg.reference_reflectance)
        files = io.write_envelope(out / exp, a.interferogram, a.envelope)
        pk = np.sort(a.envelope.peak_positions_um[np.argsort(a.envelope.peak_heights)[::-1][:2]])
        summary = {"fwhm_um": a.envelope.fwhm_of_main_peak, "peaks_um": pk,
                   "n_half_max_intervals": len(a.envelope.half_max_intervals), "duration_s": a.duration_s}
        if exp == "pellicle" and pk.size == 2:
            summary["separation_um"] = float(pk[1] - pk[0])
        return files, summary
    if exp == "bscan":
        kind = cfg.sample.get("kind", "onion")
        phantom = default_onion_phantom() if kind == "onion" else mirror_phantom(cfg.sample.get("depth_um", 35.0))
        b = b_scan(build_source(cfg), cfg.detector, phantom, cfg.protocol, cfg.seed, cfg.flux_scale, workers,
                   cfg.reference_reflectance)
        files = io.write_bscan(out / "bscan", b, {"presets": resolved_presets(cfg)})
        fw = b.column_fwhm_um[b.column_has_signal]
        return files, {"shape_rows_z_cols_x": list(b.shape), "median_column_fwhm_um": float(np.nanmedian(fw)) if fw.size else None,
                       "a_scan_duration_s": b.metadata["a_scan_duration_s"]}
    d = cfg.design
    objective = DesignObjective(d["target_center_nm"], d["target_fwhm_nm"], cfg.temperature_c,
                                d.get("center_weight", 1.0), d.get("fwhm_weight", 1.0))
    res = design_search(cfg.material.dispersion, cfg.pump, objective, tuple(d["b1_bounds_um"]),
                        tuple(d["zeta_bounds_per_um"]), cfg.grating.n_periods, cfg.material.expansion,
                        grid_shape=tuple(d.get("grid_shape", (7, 7))),
                        max_evaluations=d.get("max_evaluations", 120), workers=workers)
    wl = wavelength_grid_nm(700.0, 1700.0, 1.0)
    spec = spdc_spectrum(cfg.material.dispersion, cfg.pump, res.spec, omega_from_nm(wl), cfg.temperature_c, "peak-1")
    summary = {"b1_um": res.spec.b1_um, "zeta_per_um": res.spec.zeta_per_um, "center_nm": res.center_nm,
               "fwhm_nm": res.fwhm_nm, "objective": res.objective, "n_evaluations": res.n_evaluations,
               "grid_best": list(res.grid_best)}
    files = io.write_spectrum(out / "design_spectrum.csv", spec)
    files.append(io.write_json(out / "design.json", summary))
    return files, summary


def resolve_threads(cli_value: int | None) -> int:
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def run(cfg: RunConfig, out: Path | None = None, threads: int = 1) -> dict:
    """Execute and write the manifest last. Returns the manifest dict."""
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": io.CODE_VERSION,
        "experiment": cfg.experiment,
        "config": cfg.raw,
        "seed": cfg.seed,
        "threads": threads,
        "presets": resolved_presets(cfg),
    }
    t0 = time.perf_counter()
    before = _snapshot(out)
    files: list[Path] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            files, summary = execute(cfg, out, threads)
            manifest["status"] = "ok"
            manifest["result"] = summary
        except Exception as exc:
            for name, stamp in _snapshot(out).items():
                if before.get(name) != stamp:
                    (out / name).unlink()
            files = []
            manifest["status"] = "failed"
            manifest["error"] = {"type": type(exc).__name__, "message": str(exc),
                                 "traceback": traceback.format_exc(limit=3)}
    manifest["warnings"] = [{"category": w.category.__name__, "message": str(w.message)} for w in caught]
    manifest["protocol_notices"] = cfg.protocol.notices() if cfg.experiment == "bscan" else []
    manifest["files"] = [{"path": f.name, "sha256": io.sha256_file(f), "bytes": f.stat().st_size} for f in files]
    manifest["timings_s"] = {"total": time.perf_counter() - t0}
    io.write_json(out / "manifest.json", manifest)
    return manifest


def _snapshot(out: Path) -> dict[str, tuple[int, int]]:
    return {f.name: (f.stat().st_mtime_ns, f.stat().st_size) for f in out.iterdir() if f.is_file()}


def _cmd_presets() -> int:
    print("gratings (b1_um, zeta_per_um, n_periods):")
    for name, (b1, z) in PRESET_PARAMETERS.items():
        print(f"  {name:10s} {b1:g}  {z:g}  {PRESET_N_PERIODS}")
    print("detectors:")
    for name, det in DETECTOR_PRESETS.items():
        print(f"  {name:10s} qe={det.qe.kind} support_nm={det.support_nm} dark_rate={det.dark_rate:g}/s")
    print("sources:")
    print("  spdc       down-converted light from the configured grating")
    for name, p in SOURCE_PRESETS.items():
        print(f"  {name:10s} {p['kind']} center_nm={p['center_nm']:g} fwhm_nm={p['fwhm_nm']:g}")
    print("  tabulated  CSV with wavelength_nm,density columns")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="chirpcdi", description="Chirped-QPM SPDC coherence-domain imaging simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a run configuration")
    p_run.add_argument("config")
    p_run.add_argument("--out", type=Path)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--threads", type=int, help=f"worker threads (also {THREADS_ENV}); never changes results")
    sub.add_parser("presets", help="list grating, detector and source presets")
    args = parser.parse_args(argv)

    if args.command == "presets":
        return _cmd_presets()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be in [0, 2**64)")
            cfg.seed = args.seed
            cfg.raw = {**cfg.raw, "seed": args.seed}
        threads = resolve_threads(args.threads)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.output_dir)
    manifest = run(cfg, out, threads)
    for w in manifest["warnings"]:
        print(f"warning: {w['category']}: {w['message']}", file=sys.stderr)
    if manifest["status"] != "ok":
        print(f"error: {manifest['error']['type']}: {manifest['error']['message']}", file=sys.stderr)
        return 1
    for f in manifest["files"]:
        print(f"{f['sha256'][:12]}  {out / f['path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
