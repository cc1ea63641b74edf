"""Temperature-dependent refractive index and thermal expansion of the poled medium.

Dispersion is data, not code: a model is one of three kinds

* ``constant``  -- a single index, useful for algorithmic tests,
* ``sellmeier`` -- the temperature-dependent Sellmeier form used for
  stoichiometric lithium tantalate (coefficients ``A``..``H``, ``b``, ``c``),
* ``tabulated`` -- n(lambda, T) on a rectangular grid, bilinear in between.

Queries outside the declared validity box raise :class:`RangeError`; nothing is
extrapolated.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

C_UM_PER_S = 2.99792458e14
REFERENCE_TEMPERATURE_C = 25.0

KINDS = ("constant", "sellmeier", "tabulated")
SELLMEIER_KEYS = ("A", "B", "C", "D", "E", "F", "G", "H", "b", "c")
MATERIAL_FILE_KEYS = {
    "name",
    "kind",
    "coefficients",
    "valid_wavelength_um",
    "valid_temperature_c",
    "alpha",
    "beta",
    "table",
}


class RangeError(ValueError):
    """A query fell outside a model's validity range."""

    def __init__(self, axis: str, value, bounds: tuple[float, float]):
        self.axis = axis
        self.value = value
        self.bounds = bounds
        super().__init__(f"{axis} = {value} outside valid range [{bounds[0]}, {bounds[1]}]")


class MaterialFileError(ValueError):
    pass


def omega_to_wavelength_um(omega):
    return 2.0 * math.pi * C_UM_PER_S / np.asarray(omega, dtype=float)


def wavelength_um_to_omega(wavelength_um):
    return 2.0 * math.pi * C_UM_PER_S / np.asarray(wavelength_um, dtype=float)


def _check_range(axis: str, values: np.ndarray, bounds: tuple[float, float]) -> None:
    lo, hi = bounds
    if values.size == 0:
        return
    vmin, vmax = float(np.min(values)), float(np.max(values))
    if not (vmin >= lo and vmax <= hi) or np.isnan(values).any():
        bad = vmin if vmin < lo or math.isnan(vmin) else vmax
        raise RangeError(axis, bad, bounds)


@dataclass(frozen=True)
class ThermalExpansion:
    """Length scale factor ``1 + alpha*dT + beta*dT**2`` about 25 C."""

    alpha: float = 0.0
    beta: float = 0.0
    valid_temperature_c: tuple[float, float] = (-273.15, 1000.0)
    reference_temperature: float = REFERENCE_TEMPERATURE_C


def thermal_scale(expansion: ThermalExpansion, temperature: float) -> float:
    _check_range("temperature_c", np.asarray([temperature], dtype=float), expansion.valid_temperature_c)
    dt = temperature - expansion.reference_temperature
    return 1.0 + expansion.alpha * dt + expansion.beta * dt * dt


@dataclass(frozen=True)
class DispersionModel:
    kind: str
    coefficients: Mapping[str, float] = field(default_factory=dict)
    valid_wavelength_um: tuple[float, float] = (0.0, math.inf)
    valid_temperature_c: tuple[float, float] = (-273.15, math.inf)
    # tabulated only: (wavelengths_um, temperatures_c, index[n_wl, n_temp])
    table: tuple | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dispersion kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "constant":
            if "n" not in self.coefficients or self.coefficients["n"] < 1.0:
                raise ValueError("constant dispersion needs coefficient n >= 1")
        elif self.kind == "sellmeier":
            missing = [k for k in SELLMEIER_KEYS if k not in self.coefficients]
            if missing:
                raise ValueError(f"sellmeier dispersion missing coefficients {missing}")
        elif self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated dispersion needs a table")
            wl, temps, n = self.table
            if n.shape != (wl.size, temps.size):
                raise ValueError("table shape must be (n_wavelengths, n_temperatures)")
            if wl.size > 1 and np.any(np.diff(wl) <= 0) or temps.size > 1 and np.any(np.diff(temps) <= 0):
                raise ValueError("table axes must be strictly increasing")


def constant_model(n: float) -> DispersionModel:
    return DispersionModel("constant", {"n": float(n)}, name=f"constant n={n}")


def tabulated_model(
    wavelengths_um: Sequence[float],
    temperatures_c: Sequence[float],
    index,
    name: str = "tabulated",
) -> DispersionModel:
    """Build a gridded model. ``index`` has shape (n_wavelengths, n_temperatures)."""
    wl = np.asarray(wavelengths_um, dtype=float)
    temps = np.asarray(temperatures_c, dtype=float)
    n = np.asarray(index, dtype=float).reshape(wl.size, temps.size)
    return DispersionModel(
        "tabulated",
        valid_wavelength_um=(float(wl[0]), float(wl[-1])),
        valid_temperature_c=(float(temps[0]), float(temps[-1])),
        table=(wl, temps, n),
        name=name,
    )


def _sellmeier(coef: Mapping[str, float], lam_um: np.ndarray, temperature: float) -> np.ndarray:
    tk2 = (temperature + 273.15) ** 2
    lam2 = lam_um * lam_um
    n2 = (
        coef["A"]
        + (coef["B"] + coef["b"] * tk2) / (lam2 - (coef["C"] + coef["c"] * tk2) ** 2)
        + coef["E"] / (lam2 - coef["F"] ** 2)
        + coef["G"] / (lam2 - coef["H"] ** 2)
        + coef["D"] * lam2
    )
    return np.sqrt(n2)


def _interp_axis(axis: np.ndarray, x: np.ndarray):
    """Lower bracket index and fractional weight; exact (weight 0) at nodes."""
    if axis.size == 1:
        return np.zeros(x.shape, dtype=int), np.zeros(x.shape)
    i = np.clip(np.searchsorted(axis, x, side="right") - 1, 0, axis.size - 2)
    t = (x - axis[i]) / (axis[i + 1] - axis[i])
    return i, t


def _tabulated(table, lam_um: np.ndarray, temperature: float) -> np.ndarray:
    wl, temps, n = table
    i, t = _interp_axis(wl, lam_um)
    j, u = _interp_axis(temps, np.asarray([temperature], dtype=float))
    j, u = int(j[0]), float(u[0])
    j1 = min(j + 1, temps.size - 1)
    i1 = np.minimum(i + 1, wl.size - 1)
    lo = n[i, j] * (1 - t) + n[i1, j] * t
    if u == 0.0:
        return lo
    hi = n[i, j1] * (1 - t) + n[i1, j1] * t
    return lo * (1 - u) + hi * u


def refractive_index(model: DispersionModel, omega, temperature: float):
    """n(omega, T) for angular frequency ``omega`` in rad/s (scalar or array)."""
    omega_arr = np.asarray(omega, dtype=float)
    _check_range("temperature_c", np.asarray([temperature], dtype=float), model.valid_temperature_c)
    if model.kind == "constant":
        n = np.full(omega_arr.shape, model.coefficients["n"])
    else:
        lam = omega_to_wavelength_um(omega_arr)
        _check_range("wavelength_um", np.atleast_1d(lam), model.valid_wavelength_um)
        if model.kind == "sellmeier":
            n = _sellmeier(model.coefficients, lam, temperature)
        else:
            n = _tabulated(model.table, np.atleast_1d(lam), temperature).reshape(lam.shape)
    return float(n) if n.ndim == 0 else n


@dataclass(frozen=True)
class Material:
    name: str
    dispersion: DispersionModel
    expansion: ThermalExpansion
    source_path: str = ""


def _pair(raw, field_name: str) -> tuple[float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise MaterialFileError(f"{field_name} must be a two-element list [lo, hi]")
    lo, hi = float(raw[0]), float(raw[1])
    if not lo < hi:
        raise MaterialFileError(f"{field_name} must satisfy lo < hi")
    return lo, hi


def parse_material(text: str, source: str = "<string>") -> Material:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise MaterialFileError(f"{source}: {exc}") from exc
    unknown = set(raw) - MATERIAL_FILE_KEYS
    if unknown:
        raise MaterialFileError(f"{source}: unknown material fields {sorted(unknown)}")
    if "kind" not in raw:
        raise MaterialFileError(f"{source}: missing field 'kind'")
    kind = raw["kind"]
    name = str(raw.get("name", Path(source).stem))
    t_range = _pair(raw.get("valid_temperature_c", [-273.15, 1000.0]), "valid_temperature_c")
    expansion = ThermalExpansion(
        alpha=float(raw.get("alpha", 0.0)),
        beta=float(raw.get("beta", 0.0)),
        valid_temperature_c=t_range,
    )
    coefficients = {k: float(v) for k, v in raw.get("coefficients", {}).items()}
    allowed = {"sellmeier": set(SELLMEIER_KEYS), "constant": {"n"}}.get(kind, set())
    if set(coefficients) - allowed:
        raise MaterialFileError(f"{source}: unknown {kind} coefficients {sorted(set(coefficients) - allowed)}")
    try:
        if kind == "tabulated":
            table = raw.get("table")
            if not table or not {"wavelength_um", "temperature_c", "index"} <= set(table):
                raise MaterialFileError(
                    f"{source}: tabulated material needs [table] with wavelength_um, temperature_c, index"
                )
            model = tabulated_model(table["wavelength_um"], table["temperature_c"], table["index"], name=name)
        else:
            wl_range = _pair(raw.get("valid_wavelength_um", [0.0, math.inf]), "valid_wavelength_um")
            model = DispersionModel(kind, coefficients, wl_range, t_range, name=name)
    except ValueError as exc:
        if isinstance(exc, MaterialFileError):
            raise
        raise MaterialFileError(f"{source}: {exc}") from exc
    return Material(name=name, dispersion=model, expansion=expansion, source_path=source)


def load_material(path: str | Path) -> Material:
    path = Path(path)
    return parse_material(path.read_text(), source=str(path))


DEFAULT_MATERIAL_FILE = "slt_bruner.toml"


@lru_cache(maxsize=None)
def default_material() -> Material:
    """Shipped SLT stand-in (literature Sellmeier set)."""
    ref = resources.files("chirpcdi") / "data" / DEFAULT_MATERIAL_FILE
    return parse_material(ref.read_text(), source=f"chirpcdi/data/{DEFAULT_MATERIAL_FILE}")


def default_material_path() -> Path:
    return Path(str(resources.files("chirpcdi") / "data" / DEFAULT_MATERIAL_FILE))
