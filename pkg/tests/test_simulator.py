import numpy as np
import pytest

from memloop.analysis import Classification, loop_energy, zero_crossing_currents
from memloop.devices import ActiveMemristorParams, DeviceState, InternalSourceSpec, step_device
from memloop.errors import InvalidSpecError
from memloop.simulator import (
    add_current_noise,
    frequency_sweep,
    run_repeated,
    run_sweep,
    simulate_voltages,
)
from memloop.waveforms import WaveformSpec


def shoelace_oracle(v, i):
    """Cross-product shoelace per voltage lobe, independent of the library."""
    total = 0.0
    for lobe in (v >= 0, v <= 0):
        x, y = v[lobe], i[lobe]
        x = np.append(x, x[0])
        y = np.append(y, y[0])
        total += abs(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])) / 2
    return total


def fine_oracle(params, spec, refine=10):
    """Euler recurrence on the analytic triangle at timestep / refine."""
    h = spec.timestep / refine
    n = spec.samples * refine
    T = spec.period
    A = spec.amplitude
    m = params.m0
    out_t, out_i = [], []
    for k in range(n):
        t = k * h
        x = (t / T) % 1.0
        v = A * (4 * x if x <= 0.25 else 2 - 4 * x if x <= 0.75 else 4 * x - 4)
        out_t.append(t)
        out_i.append(v / m)
        rate = params.rate_pos if v > 0 else params.rate_neg if v < 0 else 0.0
        m = min(max(m + rate * h, params.m_min), params.m_max)
    return np.array(out_t), np.array(out_i)


def test_resistor_sweep_is_ohmic(resistor, base_spec):
    trace, _ = run_sweep(resistor, base_spec)
    assert len(trace) == 160
    assert np.array_equal(trace.i, trace.v / 1e6)
    assert shoelace_oracle(trace.v, trace.i) < 1e-25


def test_passive_sweep_pinched_against_fine_oracle(passive, base_spec):
    trace, _ = run_sweep(passive, base_spec)
    imax = np.max(np.abs(trace.i))
    assert all(abs(c) < 1e-3 * imax for c in zero_crossing_currents(trace))

    t_fine, i_fine = fine_oracle(passive, base_spec)
    imax_fine = np.max(np.abs(i_fine))
    for tc in (0.0, base_spec.period / 2):
        k = int(round(tc / (base_spec.timestep / 10)))
        assert abs(i_fine[k]) < 1e-3 * imax_fine
    # coarse Euler stays close to the refined integration at the sample times
    assert np.allclose(trace.i, i_fine[::10], atol=0.02 * imax_fine)


def test_active_zero_crossings_exact(base_spec):
    p = ActiveMemristorParams(m0=1e6, rate_pos=2e3, rate_neg=2e3,
                              source=InternalSourceSpec("constant", 2e-9))
    trace, _ = run_sweep(p, base_spec)
    zero = np.flatnonzero(trace.v == 0)
    assert zero.tolist() == [0, 80]
    assert all(trace.i[k] == 2e-9 for k in zero)


def test_run_sweep_matches_step_device(active, base_spec):
    trace, final = run_sweep(active, base_spec)
    state = DeviceState.initial(active)
    for k, v in enumerate(trace.v):
        state, i = step_device(state, active, v, base_spec.timestep)
        assert i == trace.i[k]
    assert state.m == final.m and state.t == final.t


def test_repeated_stateless_identical(resistor, base_spec):
    traces = run_repeated(resistor, base_spec, 3)
    assert [t.meta.sweep_index for t in traces] == [0, 1, 2]
    assert traces[0].same_samples(traces[1]) and traces[1].same_samples(traces[2])


def test_repeated_single_equals_run_sweep(active, base_spec):
    (only,) = run_repeated(active, base_spec, 1)
    trace, _ = run_sweep(active, base_spec)
    assert only.same_samples(trace)


def test_repeated_rejects_zero(resistor, base_spec):
    with pytest.raises(InvalidSpecError):
        run_repeated(resistor, base_spec, 0)


def test_inter_sweep_drift_raises_memristance(base_spec):
    p = ActiveMemristorParams(m0=1e6, inter_sweep_drift=5e4)
    traces = run_repeated(p, base_spec, 3)
    m_start = [t.memristance[0] for t in traces]
    assert m_start == [1e6, 1.05e6, 1.1e6]


def test_source_phase_carries_across_sweeps():
    p = ActiveMemristorParams(m0=1e6, source=InternalSourceSpec("sine", 1e-9, half_period=700.0))
    spec = WaveformSpec(samples=160, timestep=2.0)
    first, second = run_repeated(p, spec, 2)
    assert not first.same_samples(second)
    # second sweep's device clock starts at 320 s
    assert second.i[0] == pytest.approx(1e-9 * np.sin(np.pi * 320 / 700), rel=1e-12)


def test_chaining_equals_concatenated_run(active):
    one = WaveformSpec(samples=160)
    two = WaveformSpec(samples=320, cycles=2)
    a, state = run_sweep(active, one)
    b, state2 = run_sweep(active, one, state)
    whole, final = run_sweep(active, two)
    assert np.array_equal(np.concatenate((a.i, b.i)), whole.i)
    assert state2.m == final.m and state2.t == final.t


def test_deterministic(active, base_spec):
    a, _ = run_sweep(active, base_spec)
    b, _ = run_sweep(active, base_spec)
    assert a.same_samples(b)


def test_resistor_energy_closed_form(resistor, base_spec):
    trace, _ = run_sweep(resistor, base_spec)
    energy, _ = loop_energy(trace)
    A, T, R = base_spec.amplitude, base_spec.period, 1e6
    assert energy == pytest.approx(A ** 2 * T / (3 * R), rel=0.01)


def test_frequency_sweep_resistor_no_hysteresis(resistor, base_spec):
    out = frequency_sweep(resistor, base_spec, [1, 0.5, 0.25])
    assert [p for p, _ in out] == [320.0, 160.0, 80.0]
    assert all(rep.hysteresis_h == 0 for _, rep in out)
    assert all(rep.classification is Classification.LINEAR for _, rep in out)


def test_frequency_sweep_memristor_area_shrinks(passive, base_spec):
    out = frequency_sweep(passive, base_spec, [1, 0.5])
    assert out[1][1].hysteresis_h < out[0][1].hysteresis_h
    # independent shoelace on the same traces agrees on the ordering
    areas = []
    for dt in (2.0, 1.0):
        tr, _ = run_sweep(passive, base_spec.with_timestep(dt))
        areas.append(shoelace_oracle(tr.v, tr.i))
    assert areas[1] < areas[0]


def test_frequency_sweep_mhz_ladder(passive):
    # 1000-sample cycles at 0.5/1/2 s are periods 500/1000/2000 s
    base = WaveformSpec(amplitude=0.1, timestep=1.0, samples=1000)
    out = frequency_sweep(passive, base, [0.5, 1, 2])
    assert [p for p, _ in out] == [500.0, 1000.0, 2000.0]
    assert len(out) == 3


def test_frequency_sweep_rejects_nonpositive(passive, base_spec):
    with pytest.raises(InvalidSpecError):
        frequency_sweep(passive, base_spec, [1, 0])


def test_noise_is_seeded(active, base_spec):
    trace, _ = run_sweep(active, base_spec)
    a = add_current_noise(trace, 0.02, seed=3)
    b = add_current_noise(trace, 0.02, seed=3)
    assert np.array_equal(a.i, b.i)
    assert np.std(a.i - trace.i) == pytest.approx(0.02 * np.max(np.abs(trace.i)), rel=0.2)


def test_simulate_voltages_default_dt(active):
    t = np.array([0.0, 1.0, 3.0])
    v = np.array([0.1, 0.1, 0.1])
    _, m, final = simulate_voltages(active, t, v)
    assert m.tolist() == [5e6, 5e6 + 5e3, 5e6 + 3 * 5e3]
    # last step repeats the previous interval
    assert final.t == 5.0
