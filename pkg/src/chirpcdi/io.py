"""Artifact writers: CSV, 16-bit PGM and JSON sidecars, all written atomically.

Floats are written with ``repr`` so every value reads back bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .interferometry import EnvelopeResult, Interferogram
from .qpm import BrightnessMap, Spectrum
from .scan import BScan

CODE_VERSION = "chirpcdi 0.1.0"


def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
    return header, data


def pgm_bytes(values: np.ndarray) -> bytes:
    """Binary P5 graymap, maxval 65535, linear from 0 to the array maximum.

    Rows of ``values`` become image rows. Negative values map to 0.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ValueError("graymap needs a 2-D array")
    top = float(np.nanmax(v)) if v.size else 0.0
    scaled = np.zeros_like(v) if not top > 0 else np.clip(v / top, 0.0, 1.0) * 65535.0
    gray = np.rint(np.nan_to_num(scaled)).astype(">u2")
    rows, cols = v.shape
    return f"P5\n{cols} {rows}\n65535\n".encode("ascii") + gray.tobytes()


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a P5 graymap")
    cols, rows = (int(t) for t in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(rows, cols)


def write_json(path: str | Path, obj) -> Path:
    return atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


# --------------------------------------------------------------------------- #


def write_spectrum(path, spectrum: Spectrum) -> list[Path]:
    lam = spectrum.wavelength_nm
    order = np.argsort(lam)
    rows = zip(lam[order], spectrum.density[order])
    return [atomic_write_text(path, csv_text(["wavelength_nm", "density"], rows))]


def write_brightness_map(stem, bmap: BrightnessMap) -> list[Path]:
    """``<stem>.csv`` (temperatures down, wavelengths across) and ``<stem>.pgm``."""
    stem = Path(stem)
    header = ["temperature_c"] + [fmt(w) for w in bmap.wavelengths_nm]
    rows = ([t, *row] for t, row in zip(bmap.temperatures_c, bmap.values))
    csv = atomic_write_text(stem.with_suffix(".csv"), csv_text(header, rows))
    pgm = atomic_write_bytes(stem.with_suffix(".pgm"), pgm_bytes(bmap.values))
    return [csv, pgm]


def write_interferogram(path, trace: Interferogram) -> list[Path]:
    rows = zip(trace.displacement_um, trace.values)
    return [atomic_write_text(path, csv_text(["displacement_um", "value"], rows))]


def write_envelope(stem, trace: Interferogram, env: EnvelopeResult) -> list[Path]:
    stem = Path(stem)
    rows = zip(trace.displacement_um, trace.values, env.envelope)
    csv = atomic_write_text(stem.with_suffix(".csv"), csv_text(["displacement_um", "value", "envelope"], rows))
    meta = {
        "kind": trace.kind,
        "window_s": trace.window_s,
        "flags": list(trace.flags),
        "peak_positions_um": env.peak_positions_um,
        "peak_heights": env.peak_heights,
        "fwhm_of_main_peak_um": env.fwhm_of_main_peak,
        "half_max_intervals_um": [list(iv) for iv in env.half_max_intervals],
    }
    side = write_json(stem.with_suffix(".json"), meta)
    return [csv, side]


def write_bscan(stem, bscan: BScan, extra: dict | None = None) -> list[Path]:
    """Long CSV (x_um, z_um, value), graymap with rows = z and a JSON sidecar."""
    stem = Path(stem)
    img = bscan.image
    xs, zs = np.meshgrid(bscan.x_positions_um, bscan.z_grid_um)
    rows = zip(xs.T.ravel(), zs.T.ravel(), img.T.ravel())
    csv = atomic_write_text(stem.with_suffix(".csv"), csv_text(["x_um", "z_um", "value"], rows))
    pgm = atomic_write_bytes(stem.with_suffix(".pgm"), pgm_bytes(img))
    meta = dict(bscan.metadata)
    meta.update(extra or {})
    meta["code_version"] = CODE_VERSION
    meta["shape_rows_z_cols_x"] = list(img.shape)
    meta["column_fwhm_um"] = bscan.column_fwhm_um
    side = write_json(stem.with_suffix(".json"), meta)
    return [csv, pgm, side]
