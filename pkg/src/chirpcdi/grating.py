"""Linearly chirped periodic poling: period lengths, positions and segment layout.

Period ``k`` (1-based) has spatial frequency ``1/b_k = 1/b_1 - (k-1)*zeta`` at the
25 C fabrication temperature. Each period is a +1 half followed by a -1 half of
equal width. Temperature stretches every realized period by the same thermal
scale factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .material import ThermalExpansion, default_material, thermal_scale


class GratingError(ValueError):
    pass


@dataclass(frozen=True)
class GratingSpec:
    b1_um: float
    zeta_per_um: float
    n_periods: int
    expansion: ThermalExpansion = field(default_factory=ThermalExpansion)
    name: str = ""

    def __post_init__(self):
        if not self.b1_um > 0:
            raise GratingError(f"b1_um must be positive, got {self.b1_um}")
        if int(self.n_periods) != self.n_periods or self.n_periods < 1:
            raise GratingError(f"n_periods must be an integer >= 1, got {self.n_periods}")
        last = 1.0 / self.b1_um - (self.n_periods - 1) * self.zeta_per_um
        if not last > 0:
            k = _first_nonpositive(self.b1_um, self.zeta_per_um, self.n_periods)
            raise GratingError(
                f"period {k} has non-positive length: 1/b1 - (k-1)*zeta = "
                f"{1.0 / self.b1_um - (k - 1) * self.zeta_per_um:.6g} <= 0"
            )


def _first_nonpositive(b1: float, zeta: float, n: int) -> int:
    inv = 1.0 / b1 - np.arange(n) * zeta
    return int(np.argmax(inv <= 0)) + 1


@dataclass(frozen=True)
class GratingRealization:
    starts_um: np.ndarray
    widths_um: np.ndarray
    signs: np.ndarray
    temperature: float

    @property
    def total_length_um(self) -> float:
        # correctly rounded, so N equal periods of b sum to exactly N*b
        return math.fsum(self.widths_um.tolist())

    @property
    def n_segments(self) -> int:
        return int(self.widths_um.size)

    def segments(self) -> list[tuple[float, float, int]]:
        return [(float(a), float(w), int(s)) for a, w, s in zip(self.starts_um, self.widths_um, self.signs)]

    def scaled(self, factor: float) -> "GratingRealization":
        """Uniform dilation of the whole structure."""
        return GratingRealization(self.starts_um * factor, self.widths_um * factor, self.signs, self.temperature)


def period_lengths(spec: GratingSpec, temperature: float = 25.0) -> np.ndarray:
    # b1 / (1 - (k-1)*zeta*b1) equals 1/(1/b1 - (k-1)*zeta) and is exactly b1 when zeta = 0
    denom = 1.0 - np.arange(spec.n_periods) * (spec.zeta_per_um * spec.b1_um)
    if np.any(denom <= 0):
        raise GratingError(f"period {int(np.argmax(denom <= 0)) + 1} has non-positive length")
    lengths = spec.b1_um / denom
    return lengths * thermal_scale(spec.expansion, temperature)


def starting_positions(lengths) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size == 0:
        return np.zeros(0)
    if np.any(lengths <= 0):
        raise GratingError("period lengths must be positive")
    # compensated running sum keeps far domain walls on their exact positions
    starts = np.empty_like(lengths)
    total = comp = 0.0
    for k, w in enumerate(lengths.tolist()):
        starts[k] = total + comp
        t = total + w
        comp += (total - t) + w if abs(total) >= abs(w) else (w - t) + total
        total = t
    return starts


def realize(spec: GratingSpec, temperature: float = 25.0) -> GratingRealization:
    lengths = period_lengths(spec, temperature)
    half = lengths / 2.0
    period_starts = starting_positions(lengths)
    n = lengths.size
    starts = np.empty(2 * n)
    starts[0::2] = period_starts
    starts[1::2] = period_starts + half
    widths = np.repeat(half, 2)
    signs = np.tile(np.array([1, -1], dtype=np.int8), n)
    for arr in (starts, widths, signs):
        arr.setflags(write=False)
    return GratingRealization(starts, widths, signs, float(temperature))


# (b1 [um], zeta [1/um]) of the three fabricated structures; N = 2515 each.
PRESET_PARAMETERS = {
    "unchirped": (7.95, 0.0),
    "medium": (7.85, 1.26e-6),
    "max": (7.5, 6.24e-6),
}
PRESET_N_PERIODS = 2515


def preset(name: str, expansion: ThermalExpansion | None = None) -> GratingSpec:
    """Named preset. Uses the shipped material's expansion unless one is given."""
    if name not in PRESET_PARAMETERS:
        raise KeyError(f"unknown grating preset {name!r}; choose from {sorted(PRESET_PARAMETERS)}")
    if expansion is None:
        expansion = default_material().expansion
    b1, zeta = PRESET_PARAMETERS[name]
    return GratingSpec(b1, zeta, PRESET_N_PERIODS, expansion, name=name)
