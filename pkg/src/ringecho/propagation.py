"""Input pulses, the time/detuning transform pair, and spectral-domain synthesis
of the array output A_out(t), cavity amplitudes B_n(t) and occupations P_n(t).

Transform convention (unitary, synthesis with exp(-i w t))::

    X(w_k) = dt/sqrt(2 pi) * sum_j x(t_j) exp(+i w_k t_j)
    x(t_j) = dw/sqrt(2 pi) * sum_k X(w_k) exp(-i w_k t_j)

so that sum |x|^2 dt = sum |X|^2 dw.
"""

from __future__ import annotations

import warnings
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from ringecho.core import (
    ArraySpec,
    SampledSignal,
    SpectrumSamples,
    TimeGrid,
    ValidationError,
)
from ringecho.transfer import array_transfer, internal_response, iter_prefix_transfers

GAUSSIAN_MARGIN = 5.0
WRAP_TAIL = 0.05
WRAP_LIMIT = 1e-6


class WraparoundWarning(RuntimeWarning):
    """Output energy reached the end of the periodic window."""


class PulseOverlapWarning(UserWarning):
    """Components of a multi-pulse input overlap noticeably."""


def gaussian_pulse(grid: TimeGrid, t_center: float = 0.0, width: float = 1.0) -> SampledSignal:
    """Unit-energy Gaussian A(t) ~ exp(-width^2 (t - t_center)^2 / 2).

    ``width`` is the spectral width: the spectral amplitude falls as
    exp(-w^2 / (2 width^2)).
    """
    if width <= 0:
        raise ValidationError(f"width must be positive, got {width}")
    margin = GAUSSIAN_MARGIN / width
    if t_center - margin < grid.start or t_center + margin > grid.stop:
        raise ValidationError(
            f"pulse at {t_center} needs +/-{margin:g} inside [{grid.start:g}, {grid.stop:g}]")
    t = grid.times
    samples = np.exp(-0.5 * (width * (t - t_center)) ** 2).astype(complex)
    return _normalized(SampledSignal(grid, samples))


def three_pulse_input(grid: TimeGrid, spacing: float,
                      amplitudes: Sequence[float] = (1.0, 1.0, 1.0),
                      t_center: float = 0.0, width: float = 1.0) -> SampledSignal:
    """Three Gaussians at t_center + (-spacing, 0, +spacing), renormalized to unit energy."""
    if len(amplitudes) != 3:
        raise ValidationError("three_pulse_input takes exactly three amplitudes")
    if spacing <= 0:
        raise ValidationError(f"spacing must be positive, got {spacing}")
    if not any(amplitudes):
        raise ValidationError("at least one amplitude must be nonzero")
    fwhm = 2.0 * np.sqrt(np.log(2.0)) / width
    if fwhm > 0.5 * spacing:
        warnings.warn(f"pulse FWHM {fwhm:.3g} exceeds half the spacing {spacing:g}",
                      PulseOverlapWarning, stacklevel=2)
    total = np.zeros(grid.count, dtype=complex)
    for offset, amp in zip((-spacing, 0.0, spacing), amplitudes):
        if amp:
            total += amp * gaussian_pulse(grid, t_center + offset, width).samples
    return _normalized(SampledSignal(grid, total))


def _normalized(signal: SampledSignal) -> SampledSignal:
    return signal.scaled(1.0 / np.sqrt(signal.energy()))


def _fft_detunings(grid: TimeGrid) -> NDArray[np.float64]:
    return 2.0 * np.pi * np.fft.fftfreq(grid.count, grid.step)


def analyze(signal: SampledSignal) -> SpectrumSamples:
    """Unitary forward transform onto the paired detuning grid (ascending)."""
    grid = signal.grid
    w = _fft_detunings(grid)
    raw = np.fft.ifft(signal.samples) * grid.count
    spec = grid.step / np.sqrt(2.0 * np.pi) * np.exp(1j * w * grid.start) * raw
    return SpectrumSamples(grid, np.fft.fftshift(spec))


def synthesize(spectrum: SpectrumSamples) -> SampledSignal:
    """Inverse of :func:`analyze`: x(t) = dw/sqrt(2 pi) sum X(w) exp(-i w t)."""
    grid = spectrum.grid
    if spectrum.samples.shape != (grid.count,):
        raise ValidationError("spectrum length does not match its grid")
    w = _fft_detunings(grid)
    unshifted = np.fft.ifftshift(spectrum.samples) * np.exp(-1j * w * grid.start)
    samples = grid.frequency_step / np.sqrt(2.0 * np.pi) * np.fft.fft(unshifted)
    return SampledSignal(grid, samples)


def wraparound_fraction(output: SampledSignal, reference_energy: float) -> float:
    """Energy in the last 5% of the window relative to ``reference_energy``."""
    grid = output.grid
    tail = max(1, int(round(WRAP_TAIL * grid.count)))
    energy = float(np.sum(output.intensity[-tail:]) * grid.step)
    return energy / reference_energy if reference_energy > 0 else 0.0


def _check_wrap(output: SampledSignal, input_energy: float) -> None:
    frac = wraparound_fraction(output, input_energy)
    if frac >= WRAP_LIMIT:
        warnings.warn(f"{frac:.2e} of the input energy sits in the final "
                      f"{WRAP_TAIL:.0%} of the window; enlarge the grid",
                      WraparoundWarning, stacklevel=3)


def propagate(spec: ArraySpec, signal: SampledSignal, check_wrap: bool = True) -> SampledSignal:
    """Output field behind the last cavity (reference plane at the array exit)."""
    grid = signal.grid
    if spec.count == 0:
        return signal
    # the start-time phases of analyze/synthesize cancel for a pointwise filter
    w = _fft_detunings(grid)
    transfer = array_transfer(spec, w).values
    out = SampledSignal(grid, np.fft.fft(transfer * np.fft.ifft(signal.samples)))
    if check_wrap:
        _check_wrap(out, signal.energy())
    return out


def _selected(spec: ArraySpec, indices: Iterable[int] | None) -> set[int]:
    if indices is None:
        return set(range(spec.count))
    chosen = set(int(i) for i in indices)
    bad = [i for i in chosen if not 0 <= i < spec.count]
    if bad:
        raise ValidationError(f"cavity indices out of range: {sorted(bad)}")
    return chosen


def cavity_amplitudes(spec: ArraySpec, signal: SampledSignal,
                      indices: Iterable[int] | None = None) -> list[SampledSignal]:
    """Intracavity amplitudes B_n(t) for the requested cavity positions.

    B_n(w) = beta_n(w) * U^(n-1)(w) * A_in(w); positions are 0-based along
    the waveguide and results come back in ascending position order.
    """
    grid = signal.grid
    chosen = _selected(spec, indices)
    w = _fft_detunings(grid)
    source = np.fft.ifft(signal.samples)
    result = []
    for stage in iter_prefix_transfers(spec, w):
        n = stage.stage
        if n in chosen:
            beta = internal_response(w, spec.cavities[n])
            result.append(SampledSignal(grid, np.fft.fft(beta * stage.values * source)))
        if n >= max(chosen, default=-1):
            break
    return result


def occupations(spec: ArraySpec, signal: SampledSignal,
                indices: Iterable[int] | None = None) -> NDArray[np.float64]:
    """P_n(t) = |B_n(t)|^2 as an array of shape (cavities, samples)."""
    amps = cavity_amplitudes(spec, signal, indices)
    if not amps:
        return np.zeros((0, signal.grid.count))
    return np.vstack([a.intensity for a in amps])
