"""Conversion between physical microresonator parameters and normalized units.

Normalized runs measure time in units of the pulse duration t_s (signal
width 1/t_s), so a normalized delay u corresponds to u * t_s seconds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal

from ringecho.core import ValidationError, build_comb_array, convert_rates, make_time_grid
from ringecho.metrics import centroid, delay_time, detect_echoes, dominant_window, efficiency
from ringecho.propagation import gaussian_pulse, propagate

SPEED_OF_LIGHT = 299_792_458.0
Q_TOLERANCE = 1e-6

Scheme = Literal["CRC", "SCISSOR"]


class QualityMismatchWarning(UserWarning):
    """Quoted Q and linewidth disagree under Q = w0 / (2 gamma)."""


@dataclass(frozen=True)
class PhysicalCavity:
    """One ring in SI units (rates in rad/s, lengths in m)."""

    omega0: float
    fsr: float
    wavelength: float | None = None
    diameter: float | None = None
    quality: float | None = None
    linewidth: float | None = None

    def __post_init__(self) -> None:
        for name in ("omega0", "fsr", "wavelength", "diameter", "quality", "linewidth"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive and finite, got {value!r}")

    @property
    def quality_mismatch(self) -> float | None:
        """Relative gap between the quoted Q and w0 / (2 gamma), if both are given."""
        if self.quality is None or self.linewidth is None:
            return None
        return abs(self.omega0 / (2.0 * self.linewidth) - self.quality) / self.quality

    @property
    def quality_consistent(self) -> bool:
        mismatch = self.quality_mismatch
        return mismatch is None or mismatch <= Q_TOLERANCE


# 90 um ring at 1.5 um: w0 = 1.26e15 rad/s, FSR 4.96e12 rad/s, gamma 1e7 rad/s, Q 1.25e8
REFERENCE_CAVITY = PhysicalCavity(omega0=1.26e15, fsr=4.96e12, wavelength=1.5e-6,
                                  diameter=90e-6, quality=1.25e8, linewidth=1e7)


@dataclass(frozen=True)
class NormalizedSeed:
    """Normalized comb parameters plus the time scale that undoes them."""

    spacing: float
    linewidth: float | None
    time_scale: float
    count: int
    quality_consistent: bool

    @property
    def spacing_phys(self) -> float:
        return self.spacing / self.time_scale

    def to_physical_rate(self, rate: float) -> float:
        return rate / self.time_scale

    def to_physical_time(self, t: float) -> float:
        return t * self.time_scale

    def to_normalized_rate(self, rate: float) -> float:
        return rate * self.time_scale


def to_normalized(cavity: PhysicalCavity, count: int, pulse_duration: float,
                  width_ratio: float) -> NormalizedSeed:
    """Normalize with signal width 1/t_s and comb spacing width/``width_ratio``.

    Raises if the comb (count - 1) * spacing would not fit inside one FSR.
    A Q / linewidth disagreement is flagged (warning + seed flag), not fixed.
    """
    if count < 2:
        raise ValidationError("count must be >= 2")
    if not (pulse_duration > 0 and width_ratio > 0):
        raise ValidationError("pulse duration and width ratio must be positive")
    spacing_phys = 1.0 / pulse_duration / width_ratio
    if spacing_phys * (count - 1) > cavity.fsr * (1 + 1e-12):
        raise ValidationError(
            f"comb span {spacing_phys * (count - 1):.3e} rad/s exceeds the FSR {cavity.fsr:.3e}")
    if not cavity.quality_consistent:
        warnings.warn(f"quoted Q differs from w0/(2 gamma) by {cavity.quality_mismatch:.1%}",
                      QualityMismatchWarning, stacklevel=2)
    gamma = None if cavity.linewidth is None else cavity.linewidth * pulse_duration
    return NormalizedSeed(1.0 / width_ratio, gamma, pulse_duration, count,
                          cavity.quality_consistent)


def max_spacing(cavity: PhysicalCavity, count: int) -> float:
    """Widest comb spacing that keeps ``count`` lines within one FSR."""
    if count < 2:
        raise ValidationError("count must be >= 2")
    return cavity.fsr / (count - 1)


def diameter_step(cavity: PhysicalCavity, spacing_phys: float) -> float:
    """Diameter decrement per comb line, D * spacing / w0."""
    if cavity.diameter is None:
        raise ValidationError("cavity diameter not given")
    return cavity.diameter * spacing_phys / cavity.omega0


def fiber_transit(count: int, pitch: float = 100e-6, index: float = 1.5) -> float:
    """Waveguide transit time across the array, (count - 1) * pitch * index / c."""
    return (count - 1) * pitch * index / SPEED_OF_LIGHT


# normalized scenario constants for the delay tables
TABLE_COUNT = 61
TABLE_SPACING = 0.1
TABLE_FINESSE = 500.0
CRC_COUPLING = 0.05
SCISSOR_COUPLING = 7.5
SCISSOR_LINEWIDTH = 1e-4


@dataclass(frozen=True)
class TableRow:
    quality: float
    pulse_duration: float
    finesse: float | None = None


@dataclass(frozen=True)
class TableEntry:
    quality: float
    pulse_duration: float
    scheme: str
    finesse: float
    efficiency: float
    delay_norm: float
    delay: float
    window: tuple[float, float]
    fiber_transit: float

    CSV_HEADER = ("Q", "t_s", "scheme", "F", "eta", "t_delay", "t_delay_norm",
                  "window_lo", "window_hi", "fiber_transit")

    def csv_row(self) -> list:
        return [self.quality, self.pulse_duration, self.scheme, self.finesse, self.efficiency,
                self.delay, self.delay_norm, self.window[0], self.window[1], self.fiber_transit]


@lru_cache(maxsize=32)
def normalized_run(scheme: Scheme, finesse: float = TABLE_FINESSE) -> tuple[float, float, tuple[float, float]]:
    """(efficiency, delay, window) of the normalized table scenario.

    CRC: 61-line comb at spacing 0.1, coupling 0.05, the given finesse;
    efficiency is the first-echo fraction.  SCISSOR: 61 equal cavities with
    coupling 7.5 and linewidth 1e-4; efficiency uses the dominant burst.
    Quoted parameters follow the ``linewidth`` rate convention.
    """
    if scheme == "CRC":
        quoted_gamma = TABLE_SPACING / (2.0 * finesse)
        kappa, gamma = convert_rates(CRC_COUPLING, quoted_gamma, "linewidth")
        spec = build_comb_array(TABLE_COUNT, TABLE_SPACING, gamma, kappa)
        grid = make_time_grid(4.0, 2, TABLE_SPACING, spec=spec, support=(-10.0, 10.0))
        pulse = gaussian_pulse(grid)
        out = propagate(spec, pulse)
        report = detect_echoes(out, TABLE_SPACING, 1, reference=pulse)
        return (report.first_echo_efficiency, delay_time(pulse, out),
                report.echoes[0].window)
    if scheme == "SCISSOR":
        kappa, gamma = convert_rates(SCISSOR_COUPLING, SCISSOR_LINEWIDTH, "linewidth")
        spec = build_comb_array(TABLE_COUNT, 0.0, gamma, kappa)
        grid = make_time_grid(4.0, 0, 0.0, spec=spec, support=(-10.0, 10.0))
        pulse = gaussian_pulse(grid)
        out = propagate(spec, pulse)
        window = dominant_window(out)
        return efficiency(pulse, out, window), centroid(out, window) - centroid(pulse), window
    raise ValidationError(f"unknown scheme {scheme!r}")


def table_delays(rows: Iterable[TableRow], scheme: Scheme) -> list[TableEntry]:
    """Physical delays for each (Q, t_s[, F]) row from simulated normalized runs.

    The finesse defaults to 500.  Q labels the row; the comb parameters are
    fixed in normalized units, so the physical delay is the normalized delay
    times t_s.
    """
    entries = []
    for row in rows:
        if row.pulse_duration <= 0:
            raise ValidationError("pulse duration must be positive")
        finesse = TABLE_FINESSE if row.finesse is None else float(row.finesse)
        eta, delay_norm, window = normalized_run(scheme, finesse)
        entries.append(TableEntry(row.quality, row.pulse_duration, scheme, finesse, eta,
                                  delay_norm, delay_norm * row.pulse_duration, window,
                                  fiber_transit(TABLE_COUNT)))
    return entries


TABLE1_ROWS = (TableRow(1e8, 1.2e-12), TableRow(1e8, 32e-12),
               TableRow(1e10, 0.12e-9), TableRow(1e10, 3.2e-9))
TABLE2_ROWS = (TableRow(1e8, 1.6e-9, 10.0), TableRow(1e8, 5.33e-9, 3.0),
               TableRow(1e10, 0.16e-6, 10.0), TableRow(1e10, 0.533e-6, 3.0))
