"""Domain types, grids and array construction shared by every engine.

Units are normalized so the input spectral width is 1; times are in units of
its inverse and every frequency is a detuning from the carrier (rotating
frame), so the carrier phase never appears.

Cavity rates are stored exactly as they enter the cavity equation

    db/dt = -(i*detuning + coupling/2 + linewidth) * b + sqrt(coupling) * a_in

i.e. ``coupling`` is the energy coupling rate into the waveguide and
``linewidth`` is the intrinsic field decay rate.  :func:`convert_rates` maps
figure-style quoted parameters onto these rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.typing import NDArray

DEFAULT_SAMPLE_CAP = 2**26

RateConvention = Literal["equation", "linewidth"]


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class ResourceError(RuntimeError):
    """Raised when a requested grid exceeds the configured sample cap."""


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value!r}")


def _check_nonnegative(**values: float) -> None:
    _check_finite(**values)
    for name, value in values.items():
        if value < 0:
            raise ValidationError(f"{name} must be >= 0, got {value!r}")


def convert_rates(coupling: float, linewidth: float,
                  convention: RateConvention = "equation") -> tuple[float, float]:
    """Map quoted (coupling, linewidth) onto cavity-equation rates.

    ``"equation"`` returns the values unchanged.  ``"linewidth"`` treats the
    quoted coupling as the coupling-limited half-width (field rate) and the
    quoted linewidth as the intrinsic energy decay rate, so that Q = w0/gamma
    and a per-cavity on-resonance group delay of 2/coupling.  In equation
    rates that is (2*coupling, linewidth/2).
    """
    _check_nonnegative(coupling=coupling, linewidth=linewidth)
    if convention == "equation":
        return float(coupling), float(linewidth)
    if convention == "linewidth":
        return 2.0 * coupling, 0.5 * linewidth
    raise ValidationError(f"unknown rate convention {convention!r}")


@dataclass(frozen=True)
class CavityParams:
    """One side-coupled single-mode resonator.

    Parameters
    ----------
    detuning : float
        Resonance offset from the carrier.
    linewidth : float
        Intrinsic field decay rate (>= 0).
    coupling : float
        Energy coupling rate to the waveguide (>= 0).
    index : int
        Position label along the waveguide.
    """

    detuning: float
    linewidth: float
    coupling: float
    index: int = 0

    def __post_init__(self) -> None:
        _check_finite(detuning=self.detuning)
        _check_nonnegative(linewidth=self.linewidth, coupling=self.coupling)
        if self.coupling + 2.0 * self.linewidth <= 0.0:
            raise ValidationError("a decoupled lossless cavity (coupling = linewidth = 0) is not allowed")
        if self.index < 0:
            raise ValidationError(f"index must be >= 0, got {self.index}")

    @property
    def loaded_halfwidth(self) -> float:
        return 0.5 * self.coupling + self.linewidth


@dataclass(frozen=True)
class ArraySpec:
    """Ordered cavities along one waveguide plus comb descriptors."""

    cavities: tuple[CavityParams, ...]
    comb_spacing: float = 0.0
    propagation_delay: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "cavities", tuple(self.cavities))
        _check_nonnegative(comb_spacing=self.comb_spacing,
                           propagation_delay=self.propagation_delay)

    @property
    def count(self) -> int:
        return len(self.cavities)

    @property
    def detunings(self) -> NDArray[np.float64]:
        return np.array([c.detuning for c in self.cavities], dtype=float)

    @property
    def linewidths(self) -> NDArray[np.float64]:
        return np.array([c.linewidth for c in self.cavities], dtype=float)

    @property
    def couplings(self) -> NDArray[np.float64]:
        return np.array([c.coupling for c in self.cavities], dtype=float)

    @property
    def is_scissor(self) -> bool:
        d = self.detunings
        return self.comb_spacing == 0.0 and (d.size == 0 or bool(np.all(d == d[0])))

    @property
    def finesse(self) -> float:
        """Comb spacing over the full intrinsic linewidth, spacing / (2*gamma)."""
        gammas = self.linewidths
        if self.comb_spacing <= 0.0 or gammas.size == 0:
            raise ValidationError("finesse needs a positive comb spacing")
        if not np.allclose(gammas, gammas[0], rtol=0.0, atol=0.0):
            raise ValidationError("finesse needs a uniform linewidth")
        if gammas[0] <= 0.0:
            raise ValidationError("finesse is undefined for lossless cavities")
        return self.comb_spacing / (2.0 * gammas[0])

    def reordered(self, order: Sequence[int]) -> "ArraySpec":
        """Same cavities placed in a different order along the waveguide."""
        if sorted(order) != list(range(self.count)):
            raise ValidationError("order must be a permutation of the cavity positions")
        return ArraySpec(tuple(self.cavities[i] for i in order),
                         self.comb_spacing, self.propagation_delay)


def build_comb_array(count: int, spacing: float, linewidth: float, coupling: float,
                     centered: bool = True, first_detuning: float | None = None,
                     propagation_delay: float = 0.0) -> ArraySpec:
    """Uniform chirped comb: detuning_n = detuning_0 + n*spacing.

    With ``centered`` the comb straddles the carrier (detuning_0 =
    -(count-1)*spacing/2).  An explicit ``first_detuning`` overrides it.
    """
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise ValidationError(f"count must be an integer >= 1, got {count!r}")
    _check_nonnegative(spacing=spacing, linewidth=linewidth, coupling=coupling)
    count = int(count)
    if first_detuning is None:
        first_detuning = -0.5 * (count - 1) * spacing if centered else 0.0
    _check_finite(first_detuning=first_detuning)
    # index arithmetic (not accumulation) keeps the progression exact
    cavities = tuple(
        CavityParams(first_detuning + n * spacing, linewidth, coupling, n)
        for n in range(count)
    )
    return ArraySpec(cavities, float(spacing), float(propagation_delay))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time samples t_k = start + k*step, k = 0..count-1."""

    start: float
    step: float
    count: int

    def __post_init__(self) -> None:
        _check_finite(start=self.start, step=self.step)
        if self.step <= 0:
            raise ValidationError(f"step must be > 0, got {self.step}")
        if self.count < 2:
            raise ValidationError(f"count must be >= 2, got {self.count}")

    @property
    def times(self) -> NDArray[np.float64]:
        return self.start + self.step * np.arange(self.count)

    @property
    def duration(self) -> float:
        return self.step * self.count

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    @property
    def frequency_step(self) -> float:
        return 2.0 * np.pi / (self.count * self.step)

    @property
    def nyquist(self) -> float:
        return np.pi / self.step

    def detunings(self) -> NDArray[np.float64]:
        """Paired detuning grid in ascending order, symmetric about zero."""
        return 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(self.count, self.step))

    def index_of(self, t: float) -> int:
        """Index of the first sample at or after ``t`` (clipped to the grid)."""
        k = math.ceil((t - self.start) / self.step - 1e-9)
        return min(max(k, 0), self.count)


@dataclass(frozen=True)
class SampledSignal:
    """Complex envelope on a uniform time grid."""

    grid: TimeGrid
    samples: NDArray[np.complex128] = field(repr=False)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != (self.grid.count,):
            raise ValidationError(
                f"expected {self.grid.count} samples, got shape {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def times(self) -> NDArray[np.float64]:
        return self.grid.times

    @property
    def intensity(self) -> NDArray[np.float64]:
        return np.abs(self.samples) ** 2

    def energy(self, window: tuple[float, float] | None = None) -> float:
        """Sum of |A|^2 dt, optionally over the half-open window [lo, hi)."""
        intensity = self.intensity
        if window is not None:
            t = self.times
            intensity = intensity[(t >= window[0]) & (t < window[1])]
        return float(np.sum(intensity) * self.grid.step)

    def scaled(self, factor: complex) -> "SampledSignal":
        return SampledSignal(self.grid, self.samples * factor)


@dataclass(frozen=True)
class SpectrumSamples:
    """Complex spectral amplitude on the detuning grid paired with ``grid``.

    Samples are stored in ascending detuning order (see TimeGrid.detunings).
    """

    grid: TimeGrid
    samples: NDArray[np.complex128] = field(repr=False)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != (self.grid.count,):
            raise ValidationError(
                f"expected {self.grid.count} samples, got shape {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def detunings(self) -> NDArray[np.float64]:
        return self.grid.detunings()

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.frequency_step)


def _next_power_of_two(n: int) -> int:
    return 1 << max(1, math.ceil(math.log2(max(n, 2))))


def make_time_grid(bandwidth_factor: float, echoes_to_cover: int, spacing: float, *,
                   spec: ArraySpec | None = None, bandwidth: float = 1.0,
                   support: tuple[float, float] = (-8.0, 8.0),
                   duration: float | None = None,
                   sample_cap: int = DEFAULT_SAMPLE_CAP) -> TimeGrid:
    """Size a power-of-two grid for a simulation run.

    The window starts at ``support[0]`` and spans the input support plus
    ``echoes_to_cover`` comb periods 2*pi/spacing (or ``duration`` if that is
    longer).  When ``spec`` is given, the detuning step resolves the narrowest
    resonance feature to 1/8 of its width.  The Nyquist detuning covers
    ``bandwidth_factor`` times the wider of the comb edge and three signal
    widths.
    """
    _check_finite(bandwidth_factor=bandwidth_factor, bandwidth=bandwidth)
    if bandwidth_factor <= 0 or bandwidth <= 0:
        raise ValidationError("bandwidth_factor and bandwidth must be positive")
    if echoes_to_cover < 0:
        raise ValidationError("echoes_to_cover must be >= 0")
    lo, hi = support
    if not hi > lo:
        raise ValidationError(f"support must be an increasing pair, got {support}")
    window = hi - lo
    if echoes_to_cover > 0:
        if spacing <= 0:
            raise ValidationError("echo-based sizing needs a positive comb spacing; "
                                  "pass an explicit duration instead")
        window += echoes_to_cover * 2.0 * np.pi / spacing
    if duration is not None:
        window = max(window, float(duration))

    # three spectral widths: the Gaussian amplitude is down to 1% there
    reach = 3.0 * bandwidth
    if spec is not None and spec.count:
        reach = max(reach, float(np.max(np.abs(spec.detunings))))
        gammas = spec.linewidths
        half = spec.couplings / 2.0 + gammas
        features = np.where(gammas > 0, gammas, half)
        finest = float(np.min(features))
        window = max(window, 2.0 * np.pi / (finest / 8.0))
    step = np.pi / (bandwidth_factor * reach)
    needed = math.ceil(window / step * (1.0 + 1e-12))
    count = _next_power_of_two(needed)
    if count > sample_cap:
        raise ResourceError(f"grid needs {count} samples, cap is {sample_cap}")
    return TimeGrid(float(lo), float(step), int(count))
