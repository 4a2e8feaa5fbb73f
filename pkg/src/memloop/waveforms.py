"""Driving-voltage waveforms for bipolar I-V sweeps.

A triangular sweep starts at 0 V and rises, so one cycle visits
0 -> +A -> 0 -> -A -> 0. Multi-cycle sweeps set ``cycles`` > 1; ``samples``
is always the total sample count.
"""

from dataclasses import dataclass
from enum import Enum
import math
from typing import NamedTuple

import numpy as np

from .errors import InvalidSpecError


class Shape(str, Enum):
    TRIANGULAR = "triangular"
    SINE = "sine"
    BPWL = "bpwl"
    CONSTANT = "constant"


@dataclass(frozen=True)
class WaveformSpec:
    """Parametric description of a sampled voltage waveform.

    Parameters
    ----------
    shape : Shape
    amplitude : float
        Peak voltage in volts.
    timestep : float
        Sampling interval in seconds.
    samples : int
        Total number of samples.
    offset : float
        DC level added to every sample.
    phase_fraction : float
        Start point as a fraction of one cycle, in [0, 1).
    cycles : int
        Number of full cycles spanned by ``samples``.
    """

    shape: Shape = Shape.TRIANGULAR
    amplitude: float = 0.1
    timestep: float = 2.0
    samples: int = 160
    offset: float = 0.0
    phase_fraction: float = 0.0
    cycles: int = 1

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        self.validate()

    def validate(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise InvalidSpecError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if not (math.isfinite(self.timestep) and self.timestep > 0):
            raise InvalidSpecError(f"timestep must be > 0, got {self.timestep}")
        if int(self.samples) != self.samples or self.samples < 1:
            raise InvalidSpecError(f"samples must be a positive integer, got {self.samples}")
        if not math.isfinite(self.offset):
            raise InvalidSpecError("offset must be finite")
        if not 0 <= self.phase_fraction < 1:
            raise InvalidSpecError(f"phase_fraction must lie in [0, 1), got {self.phase_fraction}")
        if int(self.cycles) != self.cycles or self.cycles < 1 or self.samples % self.cycles:
            raise InvalidSpecError(
                f"cycles must be a positive divisor of samples ({self.samples}), got {self.cycles}"
            )

    @property
    def samples_per_cycle(self) -> int:
        return self.samples // self.cycles

    @property
    def period(self) -> float:
        """Duration of one cycle in seconds."""
        return self.timestep * self.samples_per_cycle

    @property
    def frequency(self) -> float:
        """D.C.-equivalent sweep frequency (1 / period) in hertz."""
        return 1.0 / self.period

    def with_timestep(self, timestep: float) -> "WaveformSpec":
        return WaveformSpec(
            self.shape, self.amplitude, timestep, self.samples,
            self.offset, self.phase_fraction, self.cycles,
        )


class Waveform(NamedTuple):
    t: np.ndarray
    v: np.ndarray


def _cycle_position(spec: WaveformSpec) -> np.ndarray:
    n = spec.samples_per_cycle
    k = np.arange(spec.samples) % n
    if spec.phase_fraction == 0:
        return k.astype(float)
    return np.mod(k + spec.phase_fraction * n, n)


def _triangle(p: np.ndarray, n: int) -> np.ndarray:
    # integer numerators keep rising and falling ramps bitwise symmetric
    q = 4.0 * p
    return np.where(q <= n, q / n, np.where(q <= 3 * n, (2 * n - q) / n, (q - 4 * n) / n))


def _bpwl(p: np.ndarray, n: int) -> np.ndarray:
    half = n / 2
    out = np.where(p < half, 1.0, -1.0)
    out[(p == 0) | (p == half)] = 0.0
    return out


def generate_waveform(spec: WaveformSpec) -> Waveform:
    """Sample ``spec`` at ``t_k = k * timestep`` for ``k = 0 .. samples - 1``."""
    spec.validate()
    n = spec.samples_per_cycle
    t = np.arange(spec.samples) * spec.timestep
    if spec.shape is Shape.CONSTANT:
        unit = np.ones(spec.samples)
    else:
        p = _cycle_position(spec)
        if spec.shape is Shape.TRIANGULAR:
            unit = _triangle(p, n)
        elif spec.shape is Shape.SINE:
            unit = np.sin(2 * np.pi * p / n)
        else:
            unit = _bpwl(p, n)
    v = spec.amplitude * unit
    if spec.offset:
        v = v + spec.offset
    return Waveform(t, v)
