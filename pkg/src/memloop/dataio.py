"""Text formats for traces, run configurations and analysis reports.

Trace files are CSV with the header ``t_s,v_volts,i_amps``. Lines starting
with ``#`` carry ``key=value`` metadata; unknown keys survive a round trip.
Floats are written with ``repr`` so a write/read cycle is lossless.
"""

import configparser
import csv
from dataclasses import dataclass, field, fields
import io
import json
import math
from typing import Optional

import numpy as np

from .analysis import AnalysisConfig, AnalysisReport
from .devices import ActiveMemristorParams, InternalSourceSpec
from .errors import InvalidSpecError, InvalidTraceError, TraceParseError
from .trace import IVTrace, TraceMeta, TraceSource
from .waveforms import WaveformSpec

HEADER = ("t_s", "v_volts", "i_amps")

_WAVEFORM_KEYS = {
    "waveform_shape": ("shape", str),
    "waveform_amplitude": ("amplitude", float),
    "waveform_timestep": ("timestep", float),
    "waveform_samples": ("samples", int),
    "waveform_offset": ("offset", float),
    "waveform_phase_fraction": ("phase_fraction", float),
    "waveform_cycles": ("cycles", int),
}


def _fmt(x) -> str:
    return repr(float(x))


# -- traces -------------------------------------------------------------------

def _meta_from_pairs(pairs: dict, lines: dict) -> TraceMeta:
    meta = TraceMeta()
    wave = {}
    for key, value in pairs.items():
        try:
            if key == "source":
                meta.source = TraceSource(value)
            elif key == "sample_label":
                meta.sample_label = value
            elif key == "tube_length_mm":
                meta.tube_length = float(value)
            elif key == "electrode_separation_mm":
                meta.electrode_separation = float(value)
            elif key == "sweep_index":
                meta.sweep_index = int(value)
            elif key in _WAVEFORM_KEYS:
                name, conv = _WAVEFORM_KEYS[key]
                wave[name] = conv(value)
            else:
                meta.extra[key] = value
        except ValueError as exc:
            raise TraceParseError(f"bad metadata value for {key!r}: {exc}", lines[key]) from None
    if wave:
        try:
            meta.waveform = WaveformSpec(**wave)
        except (InvalidSpecError, TypeError) as exc:
            raise TraceParseError(f"bad waveform metadata: {exc}") from None
    return meta


def read_trace(text: str) -> IVTrace:
    """Parse a trace file. Out-of-range currents become warnings, not errors."""
    pairs, pair_lines = {}, {}
    rows = []
    header_seen = False
    last_t = -math.inf
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                pairs[key.strip()] = value.strip()
                pair_lines[key.strip()] = lineno
            continue
        cells = [c.strip() for c in line.split(",")]
        if not header_seen:
            if tuple(cells) != HEADER:
                raise TraceParseError(f"expected header {','.join(HEADER)!r}, got {line!r}", lineno)
            header_seen = True
            continue
        if len(cells) != 3:
            raise TraceParseError(f"expected 3 columns, got {len(cells)}", lineno)
        try:
            t, v, i = (float(c) for c in cells)
        except ValueError:
            raise TraceParseError(f"non-numeric cell in {line!r}", lineno) from None
        if not all(math.isfinite(x) for x in (t, v, i)):
            raise TraceParseError(f"non-finite value in {line!r}", lineno)
        if t <= last_t:
            raise TraceParseError(f"time {t} does not increase", lineno)
        last_t = t
        rows.append((t, v, i))
    if not header_seen:
        raise TraceParseError("missing header row")
    if not rows:
        raise TraceParseError("no data rows")
    meta = _meta_from_pairs(pairs, pair_lines)
    arr = np.array(rows)
    try:
        return IVTrace(arr[:, 0], arr[:, 1], arr[:, 2], meta)
    except InvalidTraceError as exc:
        raise TraceParseError(str(exc)) from None


def write_trace(trace: IVTrace) -> str:
    meta = trace.meta
    out = [f"# source={meta.source.value}"]
    if meta.sample_label:
        out.append(f"# sample_label={meta.sample_label}")
    if meta.tube_length is not None:
        out.append(f"# tube_length_mm={_fmt(meta.tube_length)}")
    if meta.electrode_separation is not None:
        out.append(f"# electrode_separation_mm={_fmt(meta.electrode_separation)}")
    out.append(f"# sweep_index={meta.sweep_index}")
    if meta.waveform is not None:
        for key, (name, conv) in _WAVEFORM_KEYS.items():
            value = getattr(meta.waveform, name)
            if name == "shape":
                value = value.value
            elif conv is float:
                value = _fmt(value)
            out.append(f"# {key}={value}")
    for key, value in meta.extra.items():
        out.append(f"# {key}={value}")
    out.append(",".join(HEADER))
    out.extend(f"{_fmt(t)},{_fmt(v)},{_fmt(i)}" for t, v, i in zip(trace.t, trace.v, trace.i))
    return "\n".join(out) + "\n"


def load_trace(path) -> IVTrace:
    with open(path, encoding="utf-8") as fh:
        trace = read_trace(fh.read())
    if not trace.meta.sample_label:
        trace.meta.sample_label = str(path)
    return trace


def save_trace(trace: IVTrace, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_trace(trace))


# -- reports ------------------------------------------------------------------

def report_to_dict(report: AnalysisReport, fit=None) -> dict:
    """Flat key/value view of a report; absent quantities are left out."""
    d = {
        "sample_label": report.sample_label,
        "sweep_index": report.sweep_index,
        "classification": report.classification.value,
        "r0": report.r0,
        "hysteresis_h": report.hysteresis_h,
        "hysteresis_hbar": report.hysteresis_hbar,
        "g": report.g,
        "internal_rate": report.internal_rate,
        "internal_intercept": report.internal_intercept,
        "energy": report.energy,
        "avg_power": report.avg_power,
        "masked_fraction": report.masked_fraction,
        "tube_length_mm": report.tube_length,
        "electrode_separation_mm": report.electrode_separation,
    }
    for f in report.segment_fits:
        prefix = f"seg{f.segment_id}_"
        d[prefix + "gradient"] = f.gradient
        d[prefix + "intercept"] = f.intercept
        d[prefix + "residual_norm"] = f.residual_norm
        d[prefix + "n_points"] = f.n_points
    if fit is not None:
        p = fit.params
        d.update({
            "fit_m0": p.m0,
            "fit_rate_pos": p.rate_pos,
            "fit_rate_neg": p.rate_neg,
            "fit_m_min": p.m_min,
            "fit_m_max": p.m_max,
            "fit_drift": p.drift.value,
            "fit_source_model": p.source.model.value,
            "fit_iq": p.source.signed_amplitude,
            "fit_half_period": p.source.half_period,
            "fit_residual_rms": fit.residual_rms,
            "fit_iterations": fit.iterations,
            "fit_converged": fit.converged,
            "fit_passive_indistinguishable": fit.passive_indistinguishable,
        })
    return {k: v for k, v in d.items() if v is not None and v != ""}


def write_report(report: AnalysisReport, fit=None) -> str:
    return json.dumps(report_to_dict(report, fit), indent=2) + "\n"


def write_report_table(reports, fits=None) -> str:
    """One CSV row per report; cells for absent quantities are empty."""
    fits = fits or [None] * len(reports)
    rows = [report_to_dict(r, f) for r, f in zip(reports, fits)]
    columns = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_report_row(report: AnalysisReport, fit=None) -> str:
    return write_report_table([report], [fit])


# -- run configuration --------------------------------------------------------

@dataclass
class RunConfig:
    params: ActiveMemristorParams
    waveform: WaveformSpec = field(default_factory=WaveformSpec)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    out: Optional[str] = None
    seed: Optional[int] = None
    noise: float = 0.0


_DEVICE_KEYS = {"m0": float, "rate_pos": float, "rate_neg": float, "m_min": float, "m_max": float,
                "vq": float, "inter_sweep_drift": float, "drift": str}
_SOURCE_KEYS = {"model": str, "amplitude": float, "half_period": float, "polarity": str}
_WAVE_KEYS = {name: conv for name, conv in _WAVEFORM_KEYS.values()}
_ANALYSIS_KEYS = {f.name: f.type for f in fields(AnalysisConfig)}
_RUN_KEYS = {"out": str, "seed": int, "noise": float}


def _section(cp, name, allowed):
    if not cp.has_section(name):
        return {}
    out = {}
    for key, raw in cp.items(name):
        if key not in allowed:
            raise InvalidSpecError(f"unknown key [{name}] {key}")
        conv = allowed[key]
        conv = {"float": float, "int": int, "str": str}.get(conv, conv)
        try:
            out[key] = conv(raw)
        except ValueError:
            raise InvalidSpecError(f"[{name}] {key}: cannot parse {raw!r}") from None
    return out


def read_config(text: str) -> RunConfig:
    """Parse an INI run configuration.

    Sections: ``[device]`` (m0 required), ``[source]``, ``[waveform]``,
    ``[analysis]``, ``[run]``. Unknown sections or keys are errors.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidSpecError(f"malformed config: {exc}") from None
    known = {"device", "source", "waveform", "analysis", "run"}
    extra = set(cp.sections()) - known
    if extra:
        raise InvalidSpecError(f"unknown config section(s): {sorted(extra)}")
    device = _section(cp, "device", _DEVICE_KEYS)
    if "m0" not in device:
        raise InvalidSpecError("[device] m0 is required")
    source = InternalSourceSpec(**_section(cp, "source", _SOURCE_KEYS))
    params = ActiveMemristorParams(source=source, **device)
    run = _section(cp, "run", _RUN_KEYS)
    return RunConfig(
        params=params,
        waveform=WaveformSpec(**_section(cp, "waveform", _WAVE_KEYS)),
        analysis=AnalysisConfig(**_section(cp, "analysis", _ANALYSIS_KEYS)),
        **run,
    )


def write_config(cfg: RunConfig) -> str:
    p = cfg.params
    cp = configparser.ConfigParser()
    cp["device"] = {
        "m0": _fmt(p.m0), "rate_pos": _fmt(p.rate_pos), "rate_neg": _fmt(p.rate_neg),
        "m_min": _fmt(p.m_min), "m_max": _fmt(p.m_max), "vq": _fmt(p.vq),
        "inter_sweep_drift": _fmt(p.inter_sweep_drift), "drift": p.drift.value,
    }
    s = p.source
    cp["source"] = {"model": s.model.value, "amplitude": _fmt(s.amplitude),
                    "half_period": _fmt(s.half_period), "polarity": s.polarity.value}
    w = cfg.waveform
    cp["waveform"] = {"shape": w.shape.value, "amplitude": _fmt(w.amplitude),
                      "timestep": _fmt(w.timestep), "samples": str(w.samples),
                      "offset": _fmt(w.offset), "phase_fraction": _fmt(w.phase_fraction),
                      "cycles": str(w.cycles)}
    cp["analysis"] = {f.name: str(getattr(cfg.analysis, f.name)) for f in fields(AnalysisConfig)}
    run = {"noise": _fmt(cfg.noise)}
    if cfg.out is not None:
        run["out"] = cfg.out
    if cfg.seed is not None:
        run["seed"] = str(cfg.seed)
    cp["run"] = run
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return read_config(fh.read())
