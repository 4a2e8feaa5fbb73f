"""Two-terminal device models: resistor, passive memristor, active memristor.

The active memristor is a memristor in parallel with an internal current
source, so the terminal current is ``i_tot = v / M + i_q(t)``. Memristance
drifts linearly at a lobe-dependent rate and saturates hard at
``[m_min, m_max]``.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
import math

import numpy as np

from .errors import CorruptStateError, InvalidSpecError

#: Keithley 617 lower current limit; below this a resistance is not defined.
CURRENT_FLOOR = 1e-12
#: Keithley 617 upper current limit.
CURRENT_CEILING = 3.5e-3


class SourceModel(str, Enum):
    OFF = "off"
    CONSTANT = "constant"
    SINE = "sine"
    BPWL = "bpwl"


class Polarity(str, Enum):
    ADDITIVE = "additive"
    SUBTRACTIVE = "subtractive"

    @property
    def sign(self) -> float:
        return 1.0 if self is Polarity.ADDITIVE else -1.0


class DriftConvention(str, Enum):
    """Direction of memristance drift in each voltage lobe.

    ``RISING``: memristance grows at ``rate_pos`` while v > 0 and at
    ``rate_neg`` while v < 0, which yields positive R(t) tangents on both
    lobes. ``OPPOSING``: memristance falls at ``rate_pos`` while v > 0 and
    grows at ``rate_neg`` while v < 0 (a self-restoring memristor).
    """

    RISING = "rising"
    OPPOSING = "opposing"


@dataclass(frozen=True)
class InternalSourceSpec:
    model: SourceModel = SourceModel.OFF
    amplitude: float = 0.0
    half_period: float = 700.0
    polarity: Polarity = Polarity.ADDITIVE

    def __post_init__(self):
        object.__setattr__(self, "model", SourceModel(self.model))
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise InvalidSpecError(f"source amplitude must be finite and >= 0, got {self.amplitude}")
        if self.model in (SourceModel.SINE, SourceModel.BPWL) and not self.half_period > 0:
            raise InvalidSpecError(f"half_period must be > 0 for {self.model.value} source")

    @classmethod
    def from_signed(cls, model, signed_amplitude, half_period=700.0):
        """Build a source from a signed amplitude; the sign selects polarity."""
        pol = Polarity.ADDITIVE if signed_amplitude >= 0 else Polarity.SUBTRACTIVE
        return cls(model, abs(signed_amplitude), half_period, pol)

    @property
    def signed_amplitude(self) -> float:
        if self.model is SourceModel.OFF:
            return 0.0
        return self.polarity.sign * self.amplitude


def internal_current(source: InternalSourceSpec, t: float) -> float:
    """Signed internal current at device time ``t``.

    The polarity sign is applied to every model, so a subtractive sine
    source is ``-amplitude * sin(pi t / half_period)``.
    """
    model = source.model
    if model is SourceModel.OFF:
        return 0.0
    if model is SourceModel.CONSTANT:
        base = 1.0
    else:
        if not source.half_period > 0:
            raise InvalidSpecError("half_period must be > 0 for periodic sources")
        if model is SourceModel.SINE:
            base = math.sin(math.pi * t / source.half_period)
        else:
            base = 1.0 if t % (2 * source.half_period) < source.half_period else -1.0
    return source.polarity.sign * source.amplitude * base


@dataclass(frozen=True)
class ActiveMemristorParams:
    """Full device description.

    ``m_min``/``m_max`` default to one decade either side of ``m0``.
    ``vq`` only enters the ``M + V_q / i_q`` diagnostic, never the
    simulated current.
    """

    m0: float
    rate_pos: float = 0.0
    rate_neg: float = 0.0
    m_min: float = None
    m_max: float = None
    source: InternalSourceSpec = field(default_factory=InternalSourceSpec)
    vq: float = 0.0
    inter_sweep_drift: float = 0.0
    drift: DriftConvention = DriftConvention.RISING

    def __post_init__(self):
        if self.m_min is None:
            object.__setattr__(self, "m_min", self.m0 / 10)
        if self.m_max is None:
            object.__setattr__(self, "m_max", self.m0 * 10)
        object.__setattr__(self, "drift", DriftConvention(self.drift))
        for name in ("m0", "rate_pos", "rate_neg", "m_min", "m_max", "vq", "inter_sweep_drift"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidSpecError(f"{name} must be finite")
        if not 0 < self.m_min <= self.m0 <= self.m_max:
            raise InvalidSpecError(
                f"need 0 < m_min <= m0 <= m_max, got {self.m_min}, {self.m0}, {self.m_max}"
            )
        if self.vq < 0 or self.inter_sweep_drift < 0:
            raise InvalidSpecError("vq and inter_sweep_drift must be >= 0")

    @classmethod
    def resistor(cls, r: float) -> "ActiveMemristorParams":
        return cls(m0=r)

    @property
    def is_passive(self) -> bool:
        return self.source.model is SourceModel.OFF and self.inter_sweep_drift == 0

    @property
    def is_linear(self) -> bool:
        return self.is_passive and self.rate_pos == 0 and self.rate_neg == 0

    def replace(self, **changes) -> "ActiveMemristorParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DeviceState:
    m: float
    t: float = 0.0
    sweep_index: int = 0

    @classmethod
    def initial(cls, params: ActiveMemristorParams) -> "DeviceState":
        return cls(m=params.m0)


def drift_rate(params: ActiveMemristorParams, v: float) -> float:
    """dM/dt in ohms per second for applied voltage ``v``."""
    if v > 0:
        return params.rate_pos if params.drift is DriftConvention.RISING else -params.rate_pos
    if v < 0:
        return params.rate_neg
    return 0.0


def advance(params: ActiveMemristorParams, m: float, t: float, v: float, dt: float):
    """Scalar kernel behind :func:`step_device`; returns ``(m_next, i_tot)``."""
    if not m > 0:
        raise CorruptStateError(f"memristance must be > 0, got {m}")
    i_tot = v / m + internal_current(params.source, t)
    m_next = m + drift_rate(params, v) * dt
    m_next = min(max(m_next, params.m_min), params.m_max)
    return m_next, i_tot


def step_device(state: DeviceState, params: ActiveMemristorParams, v: float, dt: float):
    """Apply ``v`` for ``dt`` seconds.

    The returned current is evaluated with the memristance held at the
    start of the step (explicit Euler).

    Returns
    -------
    (DeviceState, float)
        New state and the terminal current ``i_tot``.
    """
    if not dt > 0:
        raise InvalidSpecError(f"dt must be > 0, got {dt}")
    m_next, i_tot = advance(params, state.m, state.t, v, dt)
    return DeviceState(m_next, state.t + dt, state.sweep_index), i_tot


def effective_resistance(v, i, floor: float = CURRENT_FLOOR, v_floor: float = 0.0):
    """Chord resistance ``v / i``; NaN marks an undefined point.

    Points with ``|i| < floor`` or ``|v| <= v_floor`` are undefined. With the
    default ``v_floor`` this masks exact zero-voltage samples, where an
    active device carries only its internal current.
    """
    v_arr = np.asarray(v, dtype=float)
    i_arr = np.asarray(i, dtype=float)
    bad = (np.abs(i_arr) < floor) | (np.abs(v_arr) <= v_floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bad, np.nan, v_arr / np.where(bad, 1.0, i_arr))
    return float(r) if r.ndim == 0 else r


def internal_resistance(params: ActiveMemristorParams, t):
    """``V_q / i_q(t)``; NaN wherever the internal current vanishes."""
    iq = np.array([internal_current(params.source, tk) for tk in np.atleast_1d(t)])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(iq == 0, np.nan, params.vq / np.where(iq == 0, 1.0, iq))
    return float(out[0]) if np.ndim(t) == 0 else out


def decomposed_resistance(params: ActiveMemristorParams, m, t):
    """Resistance as memristance plus the internal-battery term, ``M + V_q / i_q``."""
    return np.asarray(m, dtype=float) + internal_resistance(params, t)
