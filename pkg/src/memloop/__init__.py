"""Active-memristor simulation and I-V loop analysis."""

from .analysis import (
    AnalysisConfig,
    AnalysisReport,
    Classification,
    SegmentFit,
    analyze,
    asymmetry_g,
    classify,
    correlate,
    fit_tangent,
    hysteresis,
    instantaneous_resistance,
    internal_rate,
    loop_energy,
    segment_trace,
)
from .devices import (
    ActiveMemristorParams,
    DeviceState,
    DriftConvention,
    InternalSourceSpec,
    Polarity,
    SourceModel,
    effective_resistance,
    internal_current,
    step_device,
)
from .estimation import FitResult, estimate_params, residual_rms
from .simulator import frequency_sweep, run_repeated, run_sweep
from .trace import IVTrace, TraceMeta, TraceSource
from .waveforms import Shape, WaveformSpec, generate_waveform

__version__ = "0.1.0"
