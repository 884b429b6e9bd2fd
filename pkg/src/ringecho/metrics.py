"""Echo detection, retrieval efficiency, delay and shape fidelity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from ringecho.core import SampledSignal, ValidationError

DOMINANT_THRESHOLD = 0.01
DEGENERATE_ENERGY = 1e-6

Window = tuple[float, float]


def _mask(signal: SampledSignal, window: Window) -> np.ndarray:
    lo, hi = window
    if not hi > lo:
        raise ValidationError(f"empty window {window}")
    t = signal.times
    mask = (t >= lo) & (t < hi)
    if not mask.any():
        raise ValidationError(f"window {window} holds no samples")
    return mask


def efficiency(input: SampledSignal, output: SampledSignal, window: Window) -> float:
    """Output energy inside ``window`` over the total input energy."""
    reference = input.energy()
    if reference <= 0:
        raise ValidationError("input carries no energy")
    mask = _mask(output, window)
    return float(np.sum(output.intensity[mask]) * output.grid.step / reference)


def centroid(signal: SampledSignal, window: Window | None = None) -> float:
    """Energy-weighted mean time, optionally inside [lo, hi)."""
    t = signal.times
    weights = signal.intensity
    if window is not None:
        mask = _mask(signal, window)
        t, weights = t[mask], weights[mask]
    total = float(np.sum(weights))
    if total <= 0:
        raise ValidationError("centroid of a zero signal")
    return float(np.sum(t * weights) / total)


def dominant_window(output: SampledSignal, threshold: float = DOMINANT_THRESHOLD) -> Window:
    """Contiguous run above ``threshold`` x peak intensity that holds the most energy."""
    intensity = output.intensity
    peak = float(intensity.max())
    if peak <= 0:
        raise ValidationError("output is identically zero")
    above = np.concatenate(([False], intensity >= threshold * peak, [False]))
    edges = np.flatnonzero(np.diff(above.astype(np.int8)))
    starts, stops = edges[::2], edges[1::2]
    cumulative = np.concatenate(([0.0], np.cumsum(intensity)))
    energies = cumulative[stops] - cumulative[starts]
    best = int(np.argmax(energies))
    t = output.times
    step = output.grid.step
    return float(t[starts[best]]), float(t[stops[best] - 1] + step)


def delay_time(input: SampledSignal, output: SampledSignal) -> float:
    """Centroid of the dominant output burst minus the input centroid."""
    e_in = input.energy()
    if e_in <= 0:
        raise ValidationError("input carries no energy")
    if output.energy() < DEGENERATE_ENERGY * e_in:
        raise ValidationError("output energy below the degeneracy threshold")
    return centroid(output, dominant_window(output)) - centroid(input)


def fidelity(input: SampledSignal, output: SampledSignal, window: Window) -> float:
    """Best normalized overlap between the input shape and the windowed output.

    |<A_in(. - s), A_out>|^2 / (|A_in|^2 |A_out,window|^2), maximized over the
    shift s: first on the sample lattice via FFT cross-correlation, then over
    sub-sample shifts using band-limited (spectral) shifting.
    """
    if input.grid != output.grid:
        raise ValidationError("fidelity needs both signals on the same grid")
    mask = _mask(output, window)
    windowed = np.where(mask, output.samples, 0.0)
    norm = float(np.sum(np.abs(input.samples) ** 2) * np.sum(np.abs(windowed) ** 2))
    if norm <= 0:
        return 0.0
    m = input.grid.count
    spec_in = np.fft.fft(input.samples)
    spec_out = np.fft.fft(windowed)
    cross = np.conj(spec_in) * spec_out
    # corr[j] = sum_t conj(in[t - j]) out[t]
    corr = np.fft.ifft(cross) * 1.0
    j = int(np.argmax(np.abs(corr)))
    k = np.fft.fftfreq(m)  # cycles per sample

    def overlap(shift: float) -> float:
        return float(abs(np.sum(cross * np.exp(2j * np.pi * k * shift))) / m)

    best = minimize_scalar(lambda s: -overlap(s), bounds=(j - 1.0, j + 1.0),
                           method="bounded", options={"xatol": 1e-6})
    value = max(overlap(best.x), float(abs(corr[j]))) ** 2 / norm
    return float(min(value, 1.0))


@dataclass(frozen=True)
class Echo:
    peak_time: float
    window: Window
    energy_fraction: float
    fidelity: float


@dataclass(frozen=True)
class EchoReport:
    """Echo bursts found at multiples of the comb period.

    CSV layout (:meth:`csv_header`): transmitted_fraction,
    total_output_fraction, then per echo k = 1..k_max the columns
    echo{k}_peak_time, echo{k}_t_lo, echo{k}_t_hi, echo{k}_energy_fraction,
    echo{k}_fidelity.
    """

    echoes: tuple[Echo, ...]
    transmitted_fraction: float
    total_output_fraction: float
    transmitted_window: Window = field(default=(0.0, 0.0))

    @staticmethod
    def csv_header(k_max: int) -> list[str]:
        cols = ["transmitted_fraction", "total_output_fraction"]
        for k in range(1, k_max + 1):
            cols += [f"echo{k}_{name}" for name in
                     ("peak_time", "t_lo", "t_hi", "energy_fraction", "fidelity")]
        return cols

    def csv_row(self) -> list[float]:
        row = [self.transmitted_fraction, self.total_output_fraction]
        for e in self.echoes:
            row += [e.peak_time, e.window[0], e.window[1], e.energy_fraction, e.fidelity]
        return row

    @property
    def first_echo_efficiency(self) -> float:
        return self.echoes[0].energy_fraction if self.echoes else 0.0


def echo_windows(spacing: float, k_max: int) -> list[Window]:
    period = 2.0 * math.pi / spacing
    return [(k * period - 0.5 * period, k * period + 0.5 * period) for k in range(1, k_max + 1)]


def detect_echoes(output: SampledSignal, spacing: float, k_max: int = 3,
                  reference: SampledSignal | None = None) -> EchoReport:
    """Split the output into the prompt (t < pi/spacing) part and echo windows.

    Echo k occupies [2 pi k/spacing - pi/spacing, 2 pi k/spacing + pi/spacing).
    Fractions are relative to the energy of ``reference`` (the input) or to
    unit energy when it is omitted; fidelity needs ``reference``.
    """
    if spacing <= 0:
        raise ValidationError("no comb period: detect_echoes needs spacing > 0 "
                              "(use delay_time for equal-frequency arrays)")
    e_ref = reference.energy() if reference is not None else 1.0
    dt = output.grid.step
    t = output.times
    intensity = output.intensity
    prompt = (output.grid.start, math.pi / spacing)
    transmitted = float(np.sum(intensity[(t >= prompt[0]) & (t < prompt[1])]) * dt / e_ref)
    echoes = []
    for window in echo_windows(spacing, k_max):
        mask = (t >= window[0]) & (t < window[1])
        energy = float(np.sum(intensity[mask]) * dt)
        if energy > 0:
            peak = float(np.sum(t[mask] * intensity[mask]) * dt / energy)
        else:
            peak = 0.5 * (window[0] + window[1])
        if reference is not None and mask.any():
            fid = fidelity(reference, output, window)
        else:
            fid = float("nan")
        echoes.append(Echo(peak, window, energy / e_ref, fid))
    total = float(np.sum(intensity) * dt / e_ref)
    return EchoReport(tuple(echoes), transmitted, total, prompt)
