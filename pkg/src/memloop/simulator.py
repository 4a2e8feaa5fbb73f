"""Drive a device with a voltage waveform and record I-V traces."""

import logging

import numpy as np

from .devices import (
    ActiveMemristorParams,
    DeviceState,
    SourceModel,
    drift_rate,
    internal_current,
)
from .errors import CorruptStateError, InvalidSpecError
from .trace import IVTrace, TraceMeta, TraceSource
from .waveforms import WaveformSpec, generate_waveform

log = logging.getLogger(__name__)


def _step_durations(t: np.ndarray) -> np.ndarray:
    if len(t) == 1:
        return np.ones(1)
    dt = np.diff(t)
    return np.append(dt, dt[-1])


def simulate_voltages(params: ActiveMemristorParams, t, v, dt=None, initial: DeviceState = None):
    """Integrate the device over a recorded voltage sequence.

    Parameters
    ----------
    params : ActiveMemristorParams
    t, v : array_like
        Sample times and voltages. Only ``dt`` advances the device clock;
        ``t`` fills the default ``dt``.
    dt : float or array_like, optional
        Step durations. Defaults to successive differences of ``t``, with the
        last difference repeated for the final sample.
    initial : DeviceState, optional

    Returns
    -------
    i : ndarray
        Terminal current per sample.
    m : ndarray
        Memristance in effect at each sample.
    final : DeviceState
        State after the last step, ready for chaining.
    """
    v = np.asarray(v, dtype=float)
    if dt is None:
        dt = _step_durations(np.asarray(t, dtype=float))
    dt = np.broadcast_to(np.asarray(dt, dtype=float), v.shape)
    if np.any(dt <= 0):
        raise InvalidSpecError("step durations must be > 0")
    state = initial or DeviceState.initial(params)
    m, clock = float(state.m), float(state.t)
    if not m > 0:
        raise CorruptStateError(f"memristance must be > 0, got {m}")
    n = len(v)
    # same float operations as devices.advance, hoisted out of the loop
    clocks = [0.0] * n
    for k in range(n):
        clocks[k] = clock
        clock += float(dt[k])
    src = params.source
    if src.model is SourceModel.OFF:
        iq = np.zeros(n)
    elif src.model is SourceModel.CONSTANT:
        iq = np.full(n, internal_current(src, 0.0))
    else:
        iq = np.array([internal_current(src, c) for c in clocks])
    rates = np.where(v > 0, drift_rate(params, 1.0), np.where(v < 0, drift_rate(params, -1.0), 0.0))
    steps = (rates * dt).tolist()
    lo, hi = params.m_min, params.m_max
    mem = [0.0] * n
    for k in range(n):
        mem[k] = m
        m = min(max(m + steps[k], lo), hi)
    mem = np.array(mem)
    cur = v / mem + iq
    return cur, mem, DeviceState(m, clock, state.sweep_index)


def _complete_sweep(params: ActiveMemristorParams, state: DeviceState) -> DeviceState:
    m = min(state.m + params.inter_sweep_drift, params.m_max)
    return DeviceState(m, state.t, state.sweep_index + 1)


def run_sweep(params: ActiveMemristorParams, spec: WaveformSpec, initial: DeviceState = None):
    """One sweep of ``spec`` applied to the device.

    Trace times restart at 0 for every sweep; the device clock in the
    returned state keeps running so internal-source phase carries over.
    Returns ``(IVTrace, DeviceState)``.
    """
    state = initial or DeviceState.initial(params)
    wave = generate_waveform(spec)
    i, m, final = simulate_voltages(params, wave.t, wave.v, spec.timestep, state)
    meta = TraceMeta(
        source=TraceSource.SIMULATED, waveform=spec, sweep_index=state.sweep_index,
    )
    trace = IVTrace(wave.t, wave.v, i, meta, memristance=m)
    return trace, _complete_sweep(params, final)


def run_repeated(params: ActiveMemristorParams, spec: WaveformSpec, n_sweeps: int,
                 initial: DeviceState = None) -> list:
    if n_sweeps < 1:
        raise InvalidSpecError(f"n_sweeps must be >= 1, got {n_sweeps}")
    traces = []
    state = initial
    for _ in range(n_sweeps):
        trace, state = run_sweep(params, spec, state)
        traces.append(trace)
    log.debug("repeated %d sweeps, final m=%g", n_sweeps, state.m)
    return traces


def frequency_sweep(params: ActiveMemristorParams, base_spec: WaveformSpec, timestep_multipliers,
                    config=None) -> list:
    """Analyse one fresh-device sweep per timestep multiplier.

    Returns a list of ``(period, AnalysisReport)`` in multiplier order.
    """
    from .analysis import analyze

    mults = [float(x) for x in timestep_multipliers]
    if not mults or any(not x > 0 for x in mults):
        raise InvalidSpecError("timestep multipliers must be positive")
    out = []
    for mult in mults:
        spec = base_spec.with_timestep(base_spec.timestep * mult)
        trace, _ = run_sweep(params, spec)
        out.append((spec.period, analyze(trace, config)))
    return out


def add_current_noise(trace: IVTrace, rel_std: float, seed=None) -> IVTrace:
    """Copy of ``trace`` with Gaussian noise of ``rel_std * max|i|`` added to the current."""
    rng = np.random.default_rng(seed)
    sigma = rel_std * float(np.max(np.abs(trace.i)))
    noisy = trace.i + rng.normal(0.0, sigma, size=len(trace))
    return IVTrace(trace.t.copy(), trace.v.copy(), noisy, trace.meta, memristance=trace.memristance)
