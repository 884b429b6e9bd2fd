import math

import numpy as np
import pytest

from ringecho.core import ArraySpec, TimeGrid, ValidationError, build_comb_array, make_time_grid
from ringecho.dynamics import (
    FrequencySchedule,
    build_freeze_schedule,
    integrate,
    max_rate,
)
from ringecho.metrics import centroid, dominant_window
from ringecho.propagation import gaussian_pulse, occupations, propagate


def _rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_matches_spectral_engine(small_comb, small_grid, small_pulse):
    ode = integrate(small_comb, small_pulse)
    ref = propagate(small_comb, small_pulse)
    assert _rel_l2(ode.output.samples, ref.samples) < 1e-4
    occ = occupations(small_comb, small_pulse)
    assert _rel_l2(ode.occupations, occ) < 1e-4


def test_t_stop_truncates(small_comb, small_pulse):
    ode = integrate(small_comb, small_pulse, t_stop=5.0)
    assert ode.output.grid.stop >= 5.0
    assert ode.output.grid.stop < 5.0 + small_pulse.grid.step + 1e-12
    assert ode.amplitudes.shape == (9, ode.output.grid.count)


def test_fourth_order_convergence():
    spec = build_comb_array(5, 0.5, 0.01, 0.3)
    rate = max_rate(spec)
    grid = TimeGrid(-8.0, 0.1 / rate, 400)
    pulse = gaussian_pulse(grid)
    ref = integrate(spec, pulse, step=grid.step / 80).output.samples
    errors = [np.linalg.norm(integrate(spec, pulse, step=grid.step / k).output.samples - ref)
              for k in (1, 10)]
    order = math.log10(errors[0] / errors[1])
    assert 3.7 < order < 4.3


def test_step_checks(small_comb, small_pulse):
    with pytest.raises(ValidationError):
        integrate(small_comb, small_pulse, step=small_pulse.grid.step * 0.3)
    with pytest.raises(ValidationError):
        integrate(small_comb, small_pulse, step=small_pulse.grid.step)  # too coarse
    with pytest.raises(ValidationError):
        integrate(ArraySpec(()), small_pulse)
    delayed = build_comb_array(3, 0.5, 0.01, 0.3, propagation_delay=1.0)
    with pytest.raises(ValidationError):
        integrate(delayed, small_pulse)


def test_schedule_profile():
    s = FrequencySchedule(np.array([-1.0, 0.0, 1.0]), 0.0, 10.0, 20.0, 2.0)
    assert s.active and s.hold == 10.0
    assert s.frozen_fraction(9.9) == 0.0
    assert s.frozen_fraction(11.0) == pytest.approx(0.5)
    assert s.frozen_fraction(15.0) == 1.0
    assert s.frozen_fraction(21.0) == pytest.approx(0.5)
    assert s.frozen_fraction(22.0) == 0.0
    assert np.allclose(s.detunings(11.0), [-0.5, 0.0, 0.5])
    # net frozen time equals the hold
    t = np.linspace(0, 30, 300001)
    area = np.trapezoid([s.frozen_fraction(x) for x in t], t)
    assert area == pytest.approx(10.0, abs=1e-3)


def test_schedule_validation():
    base = np.zeros(2)
    with pytest.raises(ValidationError):
        FrequencySchedule(base, 0.0, 5.0, 4.0)
    with pytest.raises(ValidationError):
        FrequencySchedule(base, 0.0, 5.0, 6.0, 2.0)
    with pytest.raises(ValidationError):
        FrequencySchedule(base, 0.0, 5.0, 6.0, -1.0)
    assert not FrequencySchedule(base, 0.0, 5.0, 5.0).active


def test_freeze_outside_span_rejected(small_comb):
    with pytest.raises(ValidationError):
        build_freeze_schedule(small_comb, 10.0, 50.0, span=(-8.0, 40.0))


def test_inactive_schedule_matches_static(small_comb, small_pulse):
    static = integrate(small_comb, small_pulse, t_stop=20.0).output.samples
    idle = build_freeze_schedule(small_comb, 10.0, 10.0)
    same = integrate(small_comb, small_pulse, idle, t_stop=20.0).output.samples
    assert np.max(np.abs(static - same)) < 1e-14


def test_freeze_delays_echo_and_preserves_stored_energy():
    spec = build_comb_array(9, 0.5, 0.0, 0.3)
    hold = 7.0
    grid = make_time_grid(4.0, 3, 0.5, spec=spec, support=(-8.0, 8.0))
    pulse = gaussian_pulse(grid)
    t_on = 6.0
    sched = build_freeze_schedule(spec, t_on, t_on + hold)
    stop = 2 * math.pi / 0.5 + hold + 6.0
    static = integrate(spec, pulse, t_stop=stop)
    frozen = integrate(spec, pulse, sched, t_stop=stop)
    shift = centroid(frozen.output, dominant_window(frozen.output)) \
        - centroid(static.output, dominant_window(static.output))
    assert shift == pytest.approx(hold, rel=0.02)
    # lossless: whatever the frozen array loses during the hold leaves as output
    t = frozen.output.times
    held = (t > t_on + 0.5) & (t < t_on + hold)
    total = frozen.occupations.sum(axis=0)[held]
    drop = total[0] - total[-1]
    leaked = np.trapezoid(frozen.output.intensity[held], t[held])
    assert drop < 2e-3 * total[0]
    assert leaked == pytest.approx(drop, rel=0.05)
