"""The I-V trace container passed between every stage of the toolkit."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .devices import CURRENT_CEILING, CURRENT_FLOOR
from .errors import InvalidTraceError
from .waveforms import WaveformSpec


class TraceSource(str, Enum):
    SIMULATED = "simulated"
    MEASURED = "measured"


@dataclass
class TraceMeta:
    source: TraceSource = TraceSource.MEASURED
    waveform: Optional[WaveformSpec] = None
    sample_label: str = ""
    tube_length: Optional[float] = None  # mm
    electrode_separation: Optional[float] = None  # mm
    sweep_index: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.source = TraceSource(self.source)


@dataclass(eq=False)
class IVTrace:
    """Time-ordered (t, V, I) samples.

    ``memristance`` holds the true device state for simulated traces and is
    ``None`` for measured ones. ``warnings`` collects out-of-range current
    flags; they never make a trace invalid.
    """

    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    meta: TraceMeta = field(default_factory=TraceMeta)
    memristance: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.i = np.asarray(self.i, dtype=float)
        if not (self.t.ndim == self.v.ndim == self.i.ndim == 1):
            raise InvalidTraceError("t, v and i must be one-dimensional")
        if not len(self.t) == len(self.v) == len(self.i):
            raise InvalidTraceError("t, v and i must have equal length")
        if len(self.t) == 0:
            raise InvalidTraceError("trace is empty")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.i))):
            raise InvalidTraceError("trace contains non-finite values")
        if np.any(np.diff(self.t) <= 0):
            raise InvalidTraceError("t must be strictly increasing")
        if self.meta.source is TraceSource.MEASURED and not self.warnings:
            self.warnings = current_range_warnings(self.i)

    def __len__(self):
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def same_samples(self, other: "IVTrace") -> bool:
        """Bitwise equality of the sample arrays."""
        return (
            np.array_equal(self.t, other.t)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.i, other.i)
        )

    def scaled(self, current_factor: float) -> "IVTrace":
        return IVTrace(self.t.copy(), self.v.copy(), self.i * current_factor, self.meta)


def current_range_warnings(i, floor=CURRENT_FLOOR, ceiling=CURRENT_CEILING) -> list:
    out = []
    mag = np.abs(np.asarray(i, dtype=float))
    high = np.flatnonzero(mag > ceiling)
    low = np.flatnonzero(mag < floor)
    if high.size:
        out.append(f"{high.size} sample(s) exceed {ceiling:g} A (first at index {high[0]})")
    if low.size:
        out.append(f"{low.size} sample(s) below {floor:g} A (first at index {low[0]})")
    return out
