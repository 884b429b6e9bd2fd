"""Frequency-domain response of single cavities and of the cascaded array."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ringecho.core import ArraySpec, CavityParams

_PASSIVITY_SLACK = 1e-12


@dataclass(frozen=True)
class TransferSamples:
    """Transfer values over a detuning grid after ``stage`` cavities."""

    values: NDArray[np.complex128] = field(repr=False)
    stage: int


def cavity_reflection(omega: ArrayLike, cavity: CavityParams) -> NDArray[np.complex128]:
    """Through-port transfer of one side-coupled cavity.

    H(w) = -(k/2 - g - i(wn - w)) / (k/2 + g + i(wn - w))

    Lossless cavities are all-pass (|H| = 1) with H = -1 on resonance;
    critical coupling (k = 2g) gives H = 0 on resonance.
    """
    x = cavity.detuning - np.asarray(omega, dtype=float)
    half = 0.5 * cavity.coupling
    g = cavity.linewidth
    return -(half - g - 1j * x) / (half + g + 1j * x)


def internal_response(omega: ArrayLike, cavity: CavityParams) -> NDArray[np.complex128]:
    """Intracavity amplitude per unit incident field, sqrt(k) / (k/2 + g + i(wn - w))."""
    x = cavity.detuning - np.asarray(omega, dtype=float)
    return np.sqrt(cavity.coupling) / (0.5 * cavity.coupling + cavity.linewidth + 1j * x)


def _stage_phase(omega: NDArray[np.float64], spec: ArraySpec, stage: int) -> NDArray[np.complex128] | float:
    # waveguide transit between the first and the stage-th cavity
    if spec.propagation_delay == 0.0 or stage <= 1:
        return 1.0
    return np.exp(1j * omega * spec.propagation_delay * (stage - 1))


def _check_passive(values: NDArray[np.complex128], stage: int) -> None:
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    assert peak <= 1.0 + _PASSIVITY_SLACK, f"|U| = {peak} > 1 after {stage} passive cavities"


def array_transfer(spec: ArraySpec, omega: ArrayLike) -> TransferSamples:
    """Total transfer U^N of the array (product of per-cavity responses)."""
    omega = np.asarray(omega, dtype=float)
    values = np.ones(omega.shape, dtype=complex)
    if spec.count:
        # H = 1 - k / (k/2 + g + i(wn - w)), evaluated in place
        minus_iw = -1j * omega
        factor = np.empty(omega.shape, dtype=complex)
        for c in spec.cavities:
            np.add(minus_iw, c.loaded_halfwidth + 1j * c.detuning, out=factor)
            np.divide(-c.coupling, factor, out=factor)
            factor += 1.0
            values *= factor
    values = values * _stage_phase(omega, spec, spec.count)
    _check_passive(values, spec.count)
    return TransferSamples(values, spec.count)


def prefix_transfers(spec: ArraySpec, omega: ArrayLike) -> list[TransferSamples]:
    """Transfers U^m seen at the input of cavity m+1, for m = 0 .. N-1.

    Stage 0 is identically one.  Memory grows as N times the grid size, so
    long grids should use :func:`iter_prefix_transfers`.
    """
    return list(iter_prefix_transfers(spec, omega))


def iter_prefix_transfers(spec: ArraySpec, omega: ArrayLike):
    """Generator form of :func:`prefix_transfers`."""
    omega = np.asarray(omega, dtype=float)
    running = np.ones(omega.shape, dtype=complex)
    for m, cavity in enumerate(spec.cavities):
        yield TransferSamples(running * _stage_phase(omega, spec, m), m)
        running = running * cavity_reflection(omega, cavity)


def group_delay(spec: ArraySpec, omega: ArrayLike) -> NDArray[np.float64]:
    """d(arg U)/dw, the delay a narrowband signal at ``omega`` experiences.

    Evaluated analytically as a sum of per-cavity terms, so it has no phase
    unwrapping ambiguity.
    """
    omega = np.asarray(omega, dtype=float)
    total = np.full(omega.shape, spec.propagation_delay * max(spec.count - 1, 0), dtype=float)
    for c in spec.cavities:
        x = c.detuning - omega
        a = 0.5 * c.coupling - c.linewidth
        b = 0.5 * c.coupling + c.linewidth
        # arg H = pi + arg(a - ix) - arg(b + ix)
        total += a / (a * a + x * x) + b / (b * b + x * x)
    return total
