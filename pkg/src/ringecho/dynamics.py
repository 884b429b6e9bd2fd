"""Time-domain integration of the cascaded cavity equations.

Each cavity obeys

    db_n/dt = -(i w_n(t) + k_n/2 + g_n) b_n + sqrt(k_n) a_in,n

and the waveguide closes the cascade algebraically (zero transit delay):
a_in,1 = input, a_out,n = sqrt(k_n) b_n - a_in,n, a_in,n+1 = a_out,n.  This is
an independent check on the spectral pipeline and the only engine that
handles time-dependent resonance frequencies.

The closure above gives a per-cavity through response without the leading
minus sign of :func:`ringecho.transfer.cavity_reflection`; reported fields
are multiplied by (-1) for every cavity passed so both engines share one
phase reference (intensities are unaffected).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

from ringecho.core import ArraySpec, SampledSignal, TimeGrid, ValidationError

MAX_STEP_RATE = 0.1
DEFAULT_STEP_RATE = 0.05


class IntegrationError(RuntimeError):
    """The state became non-finite."""


@dataclass(frozen=True)
class FrequencySchedule:
    """Piecewise-linear resonance detunings for freeze-and-release retrieval.

    Every cavity moves linearly from its base detuning to ``frozen`` over
    ``ramp`` starting at ``t_on``, holds, and returns over ``ramp`` starting
    at ``t_off``.  ``t_on == t_off`` describes an inactive schedule.
    """

    base: NDArray[np.float64] = field(repr=False)
    frozen: float
    t_on: float
    t_off: float
    ramp: float = 0.0

    def __post_init__(self) -> None:
        base = np.asarray(self.base, dtype=float).copy()
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        if self.ramp < 0:
            raise ValidationError("ramp must be >= 0")
        if self.t_off < self.t_on:
            raise ValidationError("t_off must not precede t_on")
        if self.active and self.t_off - self.t_on < self.ramp:
            raise ValidationError("hold window shorter than the ramp")

    @property
    def active(self) -> bool:
        return self.t_off > self.t_on

    @property
    def hold(self) -> float:
        """Net time the relative phases stay frozen (ramps count half each)."""
        return self.t_off - self.t_on

    def frozen_fraction(self, t: float) -> float:
        if not self.active or t < self.t_on or t >= self.t_off + self.ramp:
            return 0.0
        if self.ramp == 0.0:
            return 1.0 if t < self.t_off else 0.0
        rise = (t - self.t_on) / self.ramp
        fall = (self.t_off + self.ramp - t) / self.ramp
        return min(1.0, rise, fall)

    def detunings(self, t: float) -> NDArray[np.float64]:
        f = self.frozen_fraction(t)
        return self.base + f * (self.frozen - self.base)


def build_freeze_schedule(spec: ArraySpec, t_on: float, t_off: float, ramp: float = 0.0,
                          span: tuple[float, float] | None = None) -> FrequencySchedule:
    """Equalize all cavities to the comb's central detuning between t_on and t_off."""
    if spec.count == 0:
        raise ValidationError("empty array")
    if span is not None and (t_on < span[0] or t_off + ramp > span[1]):
        raise ValidationError(f"freeze window [{t_on}, {t_off + ramp}] outside simulation span {span}")
    base = spec.detunings
    centre = 0.5 * (float(base.min()) + float(base.max()))
    return FrequencySchedule(base, centre, float(t_on), float(t_off), float(ramp))


@dataclass(frozen=True)
class IntegrationResult:
    output: SampledSignal
    amplitudes: NDArray[np.complex128] = field(repr=False)  # (cavities, samples)
    step: float

    @property
    def occupations(self) -> NDArray[np.float64]:
        return np.abs(self.amplitudes) ** 2


def _system(spec: ArraySpec):
    """Constant parts of db/dt = A b + w x and the reported output y.b + x."""
    n = spec.count
    kappa = spec.couplings
    root = np.sqrt(kappa)
    sign = (-1.0) ** np.arange(n)
    # a_in,n = (-1)^n [x - sum_{m<n} (-1)^m sqrt(k_m) b_m]
    cascade = -np.tril(np.outer(sign, sign * root), k=-1)
    a = (root[:, None] * cascade).astype(complex)
    a[np.diag_indices(n)] -= 1j * spec.detunings + 0.5 * kappa + spec.linewidths
    w = root * sign
    # reported fields carry the (-1) per passed cavity of the transfer
    # convention: out = x - sum (-1)^m sqrt(k_m) b_m, B_n = (-1)^n b_n
    y = -sign * root
    return a, w, y, sign


def _rk4(a_of, b, forcing, t: float, h: float):
    """One classic RK4 step for db/dt = A(t) b + f(t); forcing = (f0, f_half, f1)."""
    f0, fh, f1 = forcing
    k1 = a_of(t) @ b + f0
    k2 = a_of(t + 0.5 * h) @ (b + 0.5 * h * k1) + fh
    k3 = a_of(t + 0.5 * h) @ (b + 0.5 * h * k2) + fh
    k4 = a_of(t + h) @ (b + h * k3) + f1
    return b + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def max_rate(spec: ArraySpec, schedule: FrequencySchedule | None = None) -> float:
    det = np.abs(spec.detunings)
    if schedule is not None and schedule.active:
        det = np.maximum(det, abs(schedule.frozen))
    return float(np.max(0.5 * spec.couplings + spec.linewidths + det))


def integrate(spec: ArraySpec, signal: SampledSignal, schedule: FrequencySchedule | None = None,
              step: float | None = None, t_stop: float | None = None) -> IntegrationResult:
    """RK4 integration from rest at the first grid sample.

    The step must divide the input grid step; by default it is the largest
    such step not exceeding 0.05 / max(k/2 + g + |w_n|).  The input envelope
    is cubic-spline interpolated between samples.  Results are reported on
    the input grid up to ``t_stop`` (default: the whole grid).
    """
    if spec.propagation_delay != 0.0:
        raise ValidationError("time-domain engine supports zero inter-cavity delay only")
    if spec.count == 0:
        raise ValidationError("empty array")
    grid = signal.grid
    rate = max_rate(spec, schedule)
    if step is None:
        substeps = max(1, math.ceil(grid.step * rate / DEFAULT_STEP_RATE))
    else:
        ratio = grid.step / step
        substeps = int(round(ratio))
        if substeps < 1 or abs(ratio - substeps) > 1e-9 * ratio:
            raise ValidationError(f"step {step} must divide the grid step {grid.step}")
    h = grid.step / substeps
    if h * rate > MAX_STEP_RATE * (1 + 1e-12):
        raise ValidationError(
            f"step {h:g} exceeds {MAX_STEP_RATE}/max rate = {MAX_STEP_RATE / rate:g}")

    count = grid.count if t_stop is None else min(grid.count, grid.index_of(t_stop) + 1)
    if count < 2:
        raise ValidationError("t_stop leaves fewer than two samples")
    spline = CubicSpline(grid.times, signal.samples)
    fine = grid.start + 0.5 * h * np.arange(2 * substeps * (count - 1) + 1)
    drive = spline(fine)
    drive[:: 2 * substeps] = signal.samples[:count]

    a0, w, y, sign = _system(spec)
    n = spec.count
    b = np.zeros(n, dtype=complex)
    amplitudes = np.empty((n, count), dtype=complex)
    out = np.empty(count, dtype=complex)
    amplitudes[:, 0] = b
    out[0] = drive[0]

    if schedule is None or not schedule.active:
        eye = np.eye(n, dtype=complex)
        zero = np.zeros(n, dtype=complex)
        const = lambda _t: a0  # noqa: E731
        prop = _rk4(const, eye, (0.0, 0.0, 0.0), 0.0, h)
        q0 = _rk4(const, zero, (w, zero, zero), 0.0, h)
        qh = _rk4(const, zero, (zero, w, zero), 0.0, h)
        q1 = _rk4(const, zero, (zero, zero, w), 0.0, h)
        # RK4 is linear in (b, forcing) for a constant matrix, so one step
        # composes into b -> prop b + q0 x(t) + qh x(t+h/2) + q1 x(t+h)
        for k in range(1, count):
            base = 2 * substeps * (k - 1)
            for s in range(substeps):
                j = base + 2 * s
                b = prop @ b + q0 * drive[j] + qh * drive[j + 1] + q1 * drive[j + 2]
            _store(k, b, amplitudes, out, y, sign, drive[2 * substeps * k], grid)
    else:
        base_det = spec.detunings

        def a_of(t: float):
            return a0 - 1j * np.diag(schedule.detunings(t) - base_det)

        t = grid.start
        for k in range(1, count):
            base = 2 * substeps * (k - 1)
            for s in range(substeps):
                j = base + 2 * s
                forcing = (w * drive[j], w * drive[j + 1], w * drive[j + 2])
                b = _rk4(a_of, b, forcing, t, h)
                t = grid.start + (j + 2) * 0.5 * h
            _store(k, b, amplitudes, out, y, sign, drive[2 * substeps * k], grid)

    out_grid = TimeGrid(grid.start, grid.step, count)
    return IntegrationResult(SampledSignal(out_grid, out), amplitudes, h)


def _store(k, b, amplitudes, out, y, sign, x, grid: TimeGrid) -> None:
    if not np.all(np.isfinite(b)):
        raise IntegrationError(f"non-finite cavity state at t = {grid.start + k * grid.step:g}")
    amplitudes[:, k] = sign * b
    out[k] = y @ b + x
