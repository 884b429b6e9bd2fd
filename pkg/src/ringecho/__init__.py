"""Photon-echo simulation for chirped ring-resonator arrays side-coupled to a waveguide.

The same linear engine describes a classical envelope and a single-photon
wavefunction amplitude, so no separate quantum propagator is provided.
"""

from ringecho.core import (
    ArraySpec,
    CavityParams,
    ResourceError,
    SampledSignal,
    SpectrumSamples,
    TimeGrid,
    ValidationError,
    build_comb_array,
    convert_rates,
    make_time_grid,
)
from ringecho.transfer import (
    TransferSamples,
    array_transfer,
    cavity_reflection,
    internal_response,
    prefix_transfers,
)
from ringecho.propagation import (
    analyze,
    cavity_amplitudes,
    gaussian_pulse,
    occupations,
    propagate,
    synthesize,
    three_pulse_input,
)
from ringecho.dynamics import FrequencySchedule, build_freeze_schedule, integrate
from ringecho.metrics import (
    EchoReport,
    delay_time,
    detect_echoes,
    efficiency,
    fidelity,
)

__version__ = "0.1.0"

__all__ = [
    "ArraySpec",
    "CavityParams",
    "EchoReport",
    "FrequencySchedule",
    "ResourceError",
    "SampledSignal",
    "SpectrumSamples",
    "TimeGrid",
    "TransferSamples",
    "ValidationError",
    "analyze",
    "array_transfer",
    "build_comb_array",
    "build_freeze_schedule",
    "cavity_amplitudes",
    "cavity_reflection",
    "convert_rates",
    "delay_time",
    "detect_echoes",
    "efficiency",
    "fidelity",
    "gaussian_pulse",
    "integrate",
    "internal_response",
    "make_time_grid",
    "occupations",
    "prefix_transfers",
    "propagate",
    "synthesize",
    "three_pulse_input",
]
