"""I-V trace analysis.

Covers instantaneous (incremental) resistance, the four-segment split of a
bipolar sweep, straight-line tangents of R(t), the lobe asymmetry factor g,
the internal-battery rate derived from g, loop area, loop classification,
energy bookkeeping and the correlation helper used for batch studies.
"""

from dataclasses import dataclass, field
from enum import Enum
import math
from typing import NamedTuple, Optional

import numpy as np

from .devices import CURRENT_FLOOR, decomposed_resistance, effective_resistance
from .errors import (
    DegenerateFitError,
    InsufficientDataError,
    NotSegmentableError,
    UndefinedCorrelationError,
)
from .trace import IVTrace


class Classification(str, Enum):
    PINCHED = "pinched"
    OPEN = "open"
    LINEAR = "linear"
    UNCONNECTED = "unconnected"


@dataclass(frozen=True)
class AnalysisConfig:
    """Thresholds used throughout the analysis.

    ``delta_i``: minimum |Δi| (A) for an instantaneous-resistance point.
    ``delta_v_fraction``: points with |v| below this fraction of peak |v|
    are masked. ``eps_i``: zero-crossing current, as a fraction of max|i|,
    above which a loop is open. ``eps_a``: loop area, relative to
    max|v|·max|i|, below which a trace is linear.
    """

    delta_i: float = 1e-11
    delta_v_fraction: float = 0.05
    eps_i: float = 0.05
    eps_a: float = 1e-3
    current_floor: float = CURRENT_FLOOR
    r0_fallback_fraction: float = 0.05
    correlation_threshold: float = 0.5
    correlation_min_n: int = 10


DEFAULT_CONFIG = AnalysisConfig()


@dataclass(frozen=True)
class SegmentFit:
    segment_id: int
    gradient: float  # ohm / s
    intercept: float  # ohm, value at t = 0
    residual_norm: float  # ohm
    n_points: int


class Segment(NamedTuple):
    segment_id: int
    indices: np.ndarray


class ResistanceSeries(NamedTuple):
    t: np.ndarray
    m: np.ndarray
    masked: np.ndarray


@dataclass
class AnalysisReport:
    r0: float
    hysteresis_h: float
    hysteresis_hbar: Optional[float]
    g: Optional[float]
    internal_rate: Optional[float]
    internal_intercept: Optional[float]
    classification: Classification
    energy: float
    avg_power: float
    segment_fits: list = field(default_factory=list)
    masked_fraction: float = 0.0
    sample_label: str = ""
    tube_length: Optional[float] = None
    electrode_separation: Optional[float] = None
    sweep_index: int = 0

    def fit(self, segment_id: int) -> Optional[SegmentFit]:
        for f in self.segment_fits:
            if f.segment_id == segment_id:
                return f
        return None


# -- instantaneous resistance -------------------------------------------------

def instantaneous_resistance(trace: IVTrace, config: AnalysisConfig = DEFAULT_CONFIG,
                             delta_i: float = None, delta_v: float = None) -> ResistanceSeries:
    """Incremental resistance ``(v_k - v_{k-1}) / (i_k - i_{k-1})``.

    The first sample has no predecessor and is always masked. Masked points
    keep their computed value (NaN where Δi = 0) so callers can still plot
    them.
    """
    if len(trace) < 2:
        raise InsufficientDataError("instantaneous resistance needs at least 2 samples")
    if delta_i is None:
        delta_i = config.delta_i
    if delta_v is None:
        delta_v = config.delta_v_fraction * float(np.max(np.abs(trace.v)))
    dv = np.diff(trace.v)
    di = np.diff(trace.i)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(di == 0, np.nan, dv / np.where(di == 0, 1.0, di))
    m = np.concatenate(([np.nan], m))
    masked = np.ones(len(trace), dtype=bool)
    masked[1:] = (np.abs(di) < delta_i) | (np.abs(trace.v[1:]) < delta_v)
    masked |= ~np.isfinite(m)
    return ResistanceSeries(trace.t.copy(), m, masked)


# -- segmentation -------------------------------------------------------------

def _first_cyclic(mask: np.ndarray, start: int) -> int:
    order = np.roll(np.arange(len(mask)), -start)
    hits = np.flatnonzero(mask[order])
    return int(order[hits[0]])


def _cyclic_range(start: int, stop: int, n: int) -> np.ndarray:
    if start < stop:
        return np.arange(start, stop)
    return np.concatenate((np.arange(start, n), np.arange(0, stop)))


def _boundaries(trace: IVTrace):
    """Start indices of segments 1..4: zero-up, +peak, zero-down, -peak."""
    v = trace.v
    if len(v) < 4:
        raise NotSegmentableError(f"not segmentable: need at least 4 samples, got {len(v)}")
    if not (v.max() > 0 > v.min()):
        raise NotSegmentableError("not segmentable: trace needs both a positive and a negative voltage peak")
    ipos = int(np.argmax(v))
    ineg = int(np.argmin(v))
    zdown = _first_cyclic(v <= 0, ipos)
    zup = _first_cyclic(v >= 0, ineg)
    starts = (zup, ipos, zdown, ineg)
    if len(set(starts)) < 4:
        raise NotSegmentableError("not segmentable: a segment would be empty")
    # cyclic order must be zup -> ipos -> zdown -> ineg
    rel = [(s - zup) % len(v) for s in starts]
    if rel != sorted(rel):
        raise NotSegmentableError("not segmentable: voltage extrema and zero crossings are out of order")
    return starts


def segment_trace(trace: IVTrace) -> list:
    """Split one bipolar cycle into segments 1-4.

    1: 0 V -> +max, 2: +max -> 0 V, 3: 0 V -> -max, 4: -max -> 0 V.
    Segments are returned in trace order, so a sweep starting at the
    positive peak reports ids 2, 3, 4, 1. A segment that runs past the end
    of the trace wraps around to the start.
    """
    starts = _boundaries(trace)
    n = len(trace)
    segs = [
        Segment(k + 1, _cyclic_range(starts[k], starts[(k + 1) % 4], n))
        for k in range(4)
    ]
    return sorted(segs, key=lambda s: s.indices[0])


def segment_times(trace: IVTrace, indices: np.ndarray) -> np.ndarray:
    """Times for ``indices`` with wrapped samples shifted forward by one cycle."""
    t = trace.t[indices]
    wrap = np.flatnonzero(np.diff(indices) < 0)
    if wrap.size:
        step = trace.t[1] - trace.t[0]
        t = t.copy()
        t[wrap[0] + 1:] += trace.t[-1] - trace.t[0] + step
    return t


# -- tangents and the asymmetry factor ---------------------------------------

def fit_tangent(t, m, mask=None, segment_id: int = 1) -> SegmentFit:
    """Least-squares straight line ``m = gradient * t + intercept``.

    Masked and non-finite points are excluded from the fit.
    """
    t = np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    use = np.isfinite(m) & np.isfinite(t)
    if mask is not None:
        use &= ~np.asarray(mask, dtype=bool)
    tt, mm = t[use], m[use]
    if len(tt) < 2:
        raise InsufficientDataError(
            f"segment {segment_id}: need at least 2 unmasked points, got {len(tt)}"
        )
    if np.ptp(tt) == 0:
        raise InsufficientDataError(f"segment {segment_id}: all points share one time")
    # centre t for conditioning, then shift the intercept back to t = 0
    tc = tt.mean()
    design = np.column_stack((tt - tc, np.ones_like(tt)))
    (gradient, mid), *_ = np.linalg.lstsq(design, mm, rcond=None)
    resid = mm - (gradient * (tt - tc) + mid)
    return SegmentFit(
        segment_id=segment_id,
        gradient=float(gradient),
        intercept=float(mid - gradient * tc),
        residual_norm=float(np.linalg.norm(resid)),
        n_points=int(len(tt)),
    )


def asymmetry_g(fit_pos: SegmentFit, fit_neg: SegmentFit) -> float:
    """Ratio of the negative-lobe tangent gradient to the positive-lobe one."""
    if fit_pos.gradient == 0:
        raise DegenerateFitError("positive-lobe gradient is zero; asymmetry factor undefined")
    return fit_neg.gradient / fit_pos.gradient


def internal_rate(g: float, fit_pos: SegmentFit):
    """Drift rate and intercept of the internal-battery resistance term.

    Both scale the positive-lobe tangent by ``(g - 1) / -2``, so a
    symmetric loop (g = 1) has no internal term.
    """
    factor = (g - 1.0) / -2.0
    return factor * fit_pos.gradient, factor * fit_pos.intercept


# -- loop metrics -------------------------------------------------------------

def _polygon_area(x: np.ndarray, y: np.ndarray) -> float:
    # trapezoid form of the shoelace sum; fsum makes retraced edges cancel exactly
    x2 = np.append(x, x[0])
    y2 = np.append(y, y[0])
    terms = (x2[1:] - x2[:-1]) * (y2[1:] + y2[:-1])
    return abs(math.fsum(terms.tolist())) / 2.0


def lobe_indices(trace: IVTrace):
    """Index arrays of the positive and negative lobes, each closed at 0 V."""
    zup, _, zdown, _ = _boundaries(trace)
    n = len(trace)
    pos = np.append(_cyclic_range(zup, zdown, n), zdown)
    neg = np.append(_cyclic_range(zdown, zup, n), zup)
    return pos, neg


def loop_area(trace: IVTrace) -> float:
    """Enclosed V-I area, summed as absolute values per lobe.

    Non-bipolar traces are treated as a single polygon.
    """
    try:
        lobes = lobe_indices(trace)
    except NotSegmentableError:
        return _polygon_area(trace.v, trace.i)
    return sum(_polygon_area(trace.v[idx], trace.i[idx]) for idx in lobes)


def hysteresis(trace: IVTrace, r0: float):
    """Loop area ``h`` and its R0-scaled value ``hbar`` (None when r0 <= 0)."""
    h = loop_area(trace)
    hbar = h / r0 if (r0 is not None and math.isfinite(r0) and r0 > 0) else None
    return h, hbar


def zero_crossing_currents(trace: IVTrace) -> list:
    """Current where the voltage passes 0 V going up and going down.

    Uses the exact 0 V sample when there is one, else interpolates linearly
    between the bracketing samples.
    """
    zup, _, zdown, _ = _boundaries(trace)
    v, i = trace.v, trace.i
    out = []
    for z in (zup, zdown):
        if v[z] == 0:
            out.append(float(i[z]))
            continue
        p = z - 1  # wraps to the last sample for z = 0
        frac = v[p] / (v[p] - v[z])
        out.append(float(i[p] + frac * (i[z] - i[p])))
    return out


def classify(trace: IVTrace, config: AnalysisConfig = DEFAULT_CONFIG, h: float = None) -> Classification:
    _boundaries(trace)
    imax = float(np.max(np.abs(trace.i)))
    if imax < config.current_floor:
        return Classification.UNCONNECTED
    if h is None:
        h = loop_area(trace)
    if h < config.eps_a * float(np.max(np.abs(trace.v))) * imax:
        return Classification.LINEAR
    crossings = zero_crossing_currents(trace)
    if all(abs(c) < config.eps_i * imax for c in crossings):
        return Classification.PINCHED
    return Classification.OPEN


def loop_energy(trace: IVTrace):
    """Trapezoidal integral of v·i over the trace, and its time average."""
    if len(trace) < 2:
        raise InsufficientDataError("loop energy needs at least 2 samples")
    energy = float(np.trapezoid(trace.v * trace.i, trace.t))
    return energy, energy / trace.duration


# -- correlation study --------------------------------------------------------

def correlate(xs, ys):
    """Pearson coefficient and sample count."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise UndefinedCorrelationError("xs and ys must be 1-D sequences of equal length")
    n = len(x)
    if n < 3:
        raise UndefinedCorrelationError(f"need at least 3 pairs, got {n}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("zero variance in input")
    # r is scale-free; rescaling keeps the moments away from overflow/underflow
    x = x / np.max(np.abs(x))
    y = y / np.max(np.abs(y))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = float(np.corrcoef(x, y)[0, 1])
    if not math.isfinite(r):
        raise UndefinedCorrelationError("variance underflows; correlation undefined")
    return min(1.0, max(-1.0, r)), n


def correlation_verdict(r: float, n: int, config: AnalysisConfig = DEFAULT_CONFIG) -> str:
    if n < config.correlation_min_n:
        return "inconclusive"
    return "correlated" if abs(r) >= config.correlation_threshold else "no correlation"


# -- full pipeline ------------------------------------------------------------

def _fallback_r0(trace: IVTrace, config: AnalysisConfig) -> float:
    k = max(2, math.ceil(config.r0_fallback_fraction * len(trace)))
    r = effective_resistance(trace.v[:k], trace.i[:k], config.current_floor)
    r = r[np.isfinite(r)]
    return float(r.mean()) if r.size else math.nan


def segment_fits(trace: IVTrace, config: AnalysisConfig = DEFAULT_CONFIG, series=None) -> list:
    """Tangent fits for every segment with enough unmasked points."""
    if series is None:
        series = instantaneous_resistance(trace, config)
    fits = []
    for seg in segment_trace(trace):
        t = segment_times(trace, seg.indices)
        try:
            fits.append(fit_tangent(t, series.m[seg.indices], series.masked[seg.indices], seg.segment_id))
        except InsufficientDataError:
            continue
    return sorted(fits, key=lambda f: f.segment_id)


def _is_flat(fit: SegmentFit, span: float) -> bool:
    return abs(fit.gradient) * span <= 1e-9 * abs(fit.intercept)


def analyze(trace: IVTrace, config: AnalysisConfig = None) -> AnalysisReport:
    """Run the whole analysis chain on one bipolar sweep.

    R0 is the segment-1 tangent intercept; when segment 1 cannot be fitted
    it falls back to the mean chord resistance of the first few samples.
    g and the internal rate are left as None when either tangent is
    missing or the segment-1 tangent is flat.
    """
    config = config or DEFAULT_CONFIG
    series = instantaneous_resistance(trace, config)
    fits = segment_fits(trace, config, series)
    by_id = {f.segment_id: f for f in fits}
    fit1, fit3 = by_id.get(1), by_id.get(3)

    r0 = fit1.intercept if fit1 is not None else _fallback_r0(trace, config)
    g = rate = intercept = None
    if fit1 is not None and fit3 is not None and not _is_flat(fit1, trace.duration):
        g = asymmetry_g(fit1, fit3)
        rate, intercept = internal_rate(g, fit1)

    h, hbar = hysteresis(trace, r0)
    energy, power = loop_energy(trace)
    meta = trace.meta
    return AnalysisReport(
        r0=float(r0),
        hysteresis_h=h,
        hysteresis_hbar=hbar,
        g=g,
        internal_rate=rate,
        internal_intercept=intercept,
        classification=classify(trace, config, h),
        energy=energy,
        avg_power=power,
        segment_fits=fits,
        masked_fraction=float(series.masked.mean()),
        sample_label=meta.sample_label,
        tube_length=meta.tube_length,
        electrode_separation=meta.electrode_separation,
        sweep_index=meta.sweep_index,
    )


def resistance_diagnostic(trace: IVTrace, params) -> dict:
    """Compare chord resistance v/i with the true memristance and ``M + V_q/i_q``.

    The simulated current law makes ``v / i = M / (1 + M i_q / v)``, which
    differs from ``M + V_q / i_q``; both are reported so the gap is visible.
    Needs a simulated trace carrying its memristance.
    """
    if trace.memristance is None:
        raise InsufficientDataError("trace has no memristance record")
    r_eff = effective_resistance(trace.v, trace.i)
    m = trace.memristance
    return {
        "r_eff": r_eff,
        "memristance": m.copy(),
        "decomposed": decomposed_resistance(params, m, trace.t),
        "r_eff_minus_m": r_eff - m,
    }
