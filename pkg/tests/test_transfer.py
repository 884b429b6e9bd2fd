import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringecho.core import ArraySpec, CavityParams, build_comb_array
from ringecho.transfer import (
    array_transfer,
    cavity_reflection,
    group_delay,
    internal_response,
    prefix_transfers,
)

rates = st.floats(0.0, 10.0, allow_nan=False)
detunings = st.floats(-10.0, 10.0, allow_nan=False)


def test_lossless_on_resonance_is_minus_one():
    c = CavityParams(0.3, 0.0, 0.2)
    assert cavity_reflection(0.3, c) == pytest.approx(-1.0, abs=1e-15)


def test_critical_coupling_extinguishes():
    c = CavityParams(0.0, 0.05, 0.1)
    assert abs(cavity_reflection(0.0, c)) < 1e-15


def test_internal_response_on_resonance():
    # sqrt(0.05) / 0.025 = 8.944...
    c = CavityParams(0.0, 0.0, 0.05)
    assert abs(internal_response(0.0, c)) == pytest.approx(8.94427191, rel=1e-8)


def test_far_detuned_cavity_is_transparent():
    c = CavityParams(0.0, 1e-3, 0.05)
    assert cavity_reflection(1e4, c) == pytest.approx(1.0, abs=1e-5)


@settings(max_examples=200, deadline=None)
@given(det=detunings, gamma=rates, kappa=rates, w=st.floats(-20, 20))
def test_single_cavity_passive(det, gamma, kappa, w):
    if kappa + 2 * gamma <= 1e-9:
        return
    c = CavityParams(det, gamma, kappa)
    h = cavity_reflection(w, c)
    assert abs(h) <= 1.0 + 1e-12
    # energy not transmitted ends up in the cavity loss channel
    beta = internal_response(w, c)
    assert abs(h) ** 2 + 2 * gamma * abs(beta) ** 2 == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(det=detunings, kappa=st.floats(1e-3, 10.0), w=st.floats(-20, 20))
def test_lossless_cavity_all_pass(det, kappa, w):
    h = cavity_reflection(w, CavityParams(det, 0.0, kappa))
    assert abs(h) == pytest.approx(1.0, abs=1e-13)


def test_array_transfer_matches_product_of_literal_factors():
    spec = build_comb_array(61, 0.1, 1e-3, 0.05)
    w = np.linspace(-4, 4, 4001)
    expected = np.ones_like(w, dtype=complex)
    for c in spec.cavities:
        expected *= cavity_reflection(w, c)
    assert np.max(np.abs(array_transfer(spec, w).values - expected)) < 1e-12


def test_prefix_identity():
    spec = build_comb_array(12, 0.2, 0.01, 0.1)
    w = np.linspace(-3, 3, 777)
    stages = prefix_transfers(spec, w)
    assert [s.stage for s in stages] == list(range(12))
    assert np.all(stages[0].values == 1.0)
    for m in range(1, 12):
        step = cavity_reflection(w, spec.cavities[m - 1])
        assert np.max(np.abs(stages[m].values - stages[m - 1].values * step)) < 1e-14
    total = stages[-1].values * cavity_reflection(w, spec.cavities[-1])
    assert np.max(np.abs(total - array_transfer(spec, w).values)) < 1e-13


def test_empty_array_is_identity():
    w = np.linspace(-1, 1, 5)
    assert np.all(array_transfer(ArraySpec(()), w).values == 1.0)


def test_propagation_delay_adds_linear_phase():
    base = build_comb_array(5, 0.2, 0.01, 0.1)
    delayed = build_comb_array(5, 0.2, 0.01, 0.1, propagation_delay=0.7)
    w = np.linspace(-1, 1, 11)
    ratio = array_transfer(delayed, w).values / array_transfer(base, w).values
    assert np.allclose(ratio, np.exp(1j * w * 0.7 * 4), atol=1e-13)
    assert np.allclose(group_delay(delayed, w) - group_delay(base, w), 2.8, atol=1e-12)


def test_single_lossless_group_delay_by_finite_difference():
    kappa = 0.05
    spec = ArraySpec((CavityParams(0.0, 0.0, kappa),))
    h = 1e-6
    phase = np.angle(array_transfer(spec, np.array([h])).values[0]
                     / array_transfer(spec, np.array([-h])).values[0])
    assert phase / (2 * h) == pytest.approx(4.0 / kappa, rel=1e-6)
    assert group_delay(spec, np.array([0.0]))[0] == pytest.approx(4.0 / kappa, rel=1e-12)


def test_group_delay_matches_unwrapped_phase():
    spec = build_comb_array(7, 0.3, 0.005, 0.2)
    w = np.linspace(-1.5, 1.5, 300001)
    phase = np.unwrap(np.angle(array_transfer(spec, w).values))
    numeric = np.gradient(phase, w)
    analytic = group_delay(spec, w)
    assert np.max(np.abs(numeric - analytic)[1:-1]) < 1e-3 * np.max(analytic)


def test_fig2_group_delay_has_one_feature_per_cavity():
    spec = build_comb_array(61, 0.1, 1e-3, 0.05)
    w = np.linspace(-3.05, 3.05, 200001)
    tau = group_delay(spec, w)
    interior = (tau[1:-1] > tau[:-2]) & (tau[1:-1] > tau[2:])
    assert int(interior.sum()) == 61


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12))
def test_ordering_invariance(seed, n):
    rng = np.random.default_rng(seed)
    cavities = tuple(CavityParams(float(rng.uniform(-2, 2)), float(rng.uniform(0, 0.1)),
                                  float(rng.uniform(0.01, 1.0)), i) for i in range(n))
    spec = ArraySpec(cavities)
    w = np.linspace(-3, 3, 501)
    perm = [int(i) for i in rng.permutation(n)]
    u1 = array_transfer(spec, w).values
    u2 = array_transfer(spec.reordered(perm), w).values
    assert np.max(np.abs(u1 - u2)) <= 1e-12 * max(1.0, np.max(np.abs(u1)))
