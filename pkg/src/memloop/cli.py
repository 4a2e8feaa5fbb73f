"""memloop command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 analysis
failure (e.g. a trace that cannot be segmented).
"""

import argparse
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import analysis, dataio, estimation, simulator
from .devices import ActiveMemristorParams, InternalSourceSpec, SourceModel
from .errors import (
    DegenerateFitError,
    InsufficientDataError,
    InvalidSpecError,
    InvalidTraceError,
    NotSegmentableError,
    TraceParseError,
    UndefinedCorrelationError,
)

log = logging.getLogger("memloop")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ANALYSIS = 0, 1, 2, 3

_DATA_ERRORS = (TraceParseError, InvalidSpecError, InvalidTraceError, OSError)
_ANALYSIS_ERRORS = (NotSegmentableError, InsufficientDataError, DegenerateFitError,
                    UndefinedCorrelationError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging():
    level = os.environ.get("MEMLOOP_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


# -- helpers ------------------------------------------------------------------

def _run_config(args) -> dataio.RunConfig:
    if args.config:
        cfg = dataio.load_config(args.config)
    else:
        cfg = dataio.RunConfig(params=ActiveMemristorParams(m0=1e6))
    w = cfg.waveform
    wave_over = {k: v for k, v in (("timestep", args.timestep), ("amplitude", args.amplitude),
                                   ("samples", args.samples)) if v is not None}
    if wave_over:
        cfg.waveform = dataio.WaveformSpec(
            w.shape, wave_over.get("amplitude", w.amplitude), wave_over.get("timestep", w.timestep),
            wave_over.get("samples", w.samples), w.offset, w.phase_fraction, w.cycles,
        )
    src = cfg.params.source
    if args.source is not None or args.iq is not None or args.half_period is not None:
        model = SourceModel(args.source) if args.source else src.model
        signed = args.iq if args.iq is not None else src.signed_amplitude
        half = args.half_period if args.half_period is not None else src.half_period
        cfg.params = cfg.params.replace(source=InternalSourceSpec.from_signed(model, signed, half))
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "noise", None) is not None:
        cfg.noise = args.noise
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _emit(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _guard_inputs(out, *inputs):
    if out in (None, "-"):
        return
    for p in inputs:
        if p and Path(out).resolve() == Path(p).resolve():
            raise UsageError(f"refusing to overwrite input file {p}")


def _plot_stem(out, fallback):
    if out in (None, "-"):
        return Path(fallback)
    p = Path(out)
    return p.with_suffix("")


def write_plot(stem: Path, trace, report=None, config=analysis.DEFAULT_CONFIG):
    """Write gnuplot data files and a script next to ``stem``."""
    iv = stem.with_name(stem.name + ".iv.dat")
    np.savetxt(iv, np.column_stack((trace.v, trace.i)), header="v_volts i_amps", fmt="%.12g")
    lines = ["set terminal pngcairo size 1200,500",
             f"set output '{stem.name}.png'",
             "set multiplot layout 1,2",
             "set xlabel 'V (V)'; set ylabel 'I (A)'",
             f"plot '{iv.name}' using 1:2 with linespoints title 'I-V'"]
    try:
        series = analysis.instantaneous_resistance(trace, config)
    except InsufficientDataError:
        series = None
    if series is not None:
        rt = stem.with_name(stem.name + ".rt.dat")
        keep = ~series.masked
        np.savetxt(rt, np.column_stack((series.t[keep], series.m[keep])), header="t_s r_ohms",
                   fmt="%.12g")
        lines.append("set xlabel 't (s)'; set ylabel 'R (ohm)'")
        plot = [f"'{rt.name}' using 1:2 with points title 'dV/dI'"]
        if report is not None:
            for seg in (1, 3):
                f = report.fit(seg)
                if f is not None:
                    plot.append(f"{f.gradient!r}*x + {f.intercept!r} title 'segment {seg} tangent'")
        lines.append("plot " + ", ".join(plot))
    lines.append("unset multiplot")
    stem.with_name(stem.name + ".gp").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args):
    cfg = _run_config(args)
    trace, _ = simulator.run_sweep(cfg.params, cfg.waveform)
    if cfg.noise:
        trace = simulator.add_current_noise(trace, cfg.noise, cfg.seed)
    _guard_inputs(cfg.out, args.config)
    _emit(dataio.write_trace(trace), cfg.out)
    if args.plot:
        write_plot(_plot_stem(cfg.out, "trace"), trace)
    return EXIT_OK


def _analysis_config(args):
    if args.config:
        return dataio.load_config(args.config).analysis
    return analysis.DEFAULT_CONFIG


def cmd_analyze(args):
    _guard_inputs(args.out, args.trace, args.config)
    trace = dataio.load_trace(args.trace)
    for w in trace.warnings:
        log.warning("%s: %s", args.trace, w)
    config = _analysis_config(args)
    report = analysis.analyze(trace, config)
    text = dataio.write_report_row(report) if args.csv else dataio.write_report(report)
    _emit(text, args.out)
    if args.plot:
        write_plot(_plot_stem(args.out, Path(args.trace).stem), trace, report, config)
    return EXIT_OK


def cmd_fit(args):
    _guard_inputs(args.out, args.trace, args.config)
    trace = dataio.load_trace(args.trace)
    config = _analysis_config(args)
    report = analysis.analyze(trace, config)
    fit = estimation.estimate_params(trace, args.source, drift=args.drift,
                                     half_period=args.half_period, config=config)
    if not fit.converged:
        log.warning("refinement did not converge; reporting best parameters found")
    _emit(dataio.write_report(report, fit), args.out)
    if args.plot:
        write_plot(_plot_stem(args.out, Path(args.trace).stem), trace, report, config)
    return EXIT_OK


def cmd_freq_sweep(args):
    cfg = _run_config(args)
    _guard_inputs(cfg.out, args.config)
    mults = [float(x) for x in args.multipliers.split(",") if x.strip()]
    results = simulator.frequency_sweep(cfg.params, cfg.waveform, mults, cfg.analysis)
    rows = ["period_s,frequency_hz,r0,hysteresis_h,g,classification,energy,avg_power"]
    for period, rep in results:
        g = "" if rep.g is None else repr(rep.g)
        rows.append(f"{period!r},{1 / period!r},{rep.r0!r},{rep.hysteresis_h!r},{g},"
                    f"{rep.classification.value},{rep.energy!r},{rep.avg_power!r}")
    _emit("\n".join(rows) + "\n", cfg.out)
    return EXIT_OK


def cmd_repeat(args):
    cfg = _run_config(args)
    _guard_inputs(cfg.out, args.config)
    traces = simulator.run_repeated(cfg.params, cfg.waveform, args.n)
    outdir = Path(args.trace_dir) if args.trace_dir else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
    rows = ["sweep_index,r0,hysteresis_h,classification"]
    for k, trace in enumerate(traces):
        if cfg.noise:
            trace = simulator.add_current_noise(trace, cfg.noise, None if cfg.seed is None else cfg.seed + k)
        if outdir is not None:
            dataio.save_trace(trace, outdir / f"sweep_{k:03d}.csv")
        rep = analysis.analyze(trace, cfg.analysis)
        rows.append(f"{trace.meta.sweep_index},{rep.r0!r},{rep.hysteresis_h!r},{rep.classification.value}")
        if args.plot and outdir is not None:
            write_plot(outdir / f"sweep_{k:03d}", trace, rep, cfg.analysis)
    _emit("\n".join(rows) + "\n", cfg.out)
    return EXIT_OK


_CORRELATION_PAIRS = (
    ("r0", "tube_length"), ("hysteresis_hbar", "tube_length"), ("hysteresis_h", "tube_length"),
    ("hysteresis_h", "r0"), ("r0", "electrode_separation"), ("energy", "r0"),
    ("avg_power", "r0"), ("energy", "electrode_separation"), ("avg_power", "electrode_separation"),
)


def correlation_summary(reports, config=analysis.DEFAULT_CONFIG) -> list:
    """Pearson r for each metric pair over the reports that carry both values."""
    out = []
    for ykey, xkey in _CORRELATION_PAIRS:
        pairs = [(getattr(r, xkey), getattr(r, ykey)) for r in reports]
        pairs = [(x, y) for x, y in pairs if x is not None and y is not None]
        if not pairs:
            continue
        xs, ys = zip(*pairs)
        try:
            r, n = analysis.correlate(xs, ys)
        except UndefinedCorrelationError as exc:
            out.append((ykey, xkey, None, len(pairs), str(exc)))
            continue
        out.append((ykey, xkey, r, n, analysis.correlation_verdict(r, n, config)))
    return out


def cmd_report(args):
    src = Path(args.directory)
    if not src.is_dir():
        raise UsageError(f"{src} is not a directory")
    files = sorted(src.glob("*.csv"))
    if not files:
        raise TraceParseError(f"no *.csv traces in {src}")
    config = _analysis_config(args)
    reports = []
    for path in files:
        trace = dataio.load_trace(path)
        try:
            reports.append(analysis.analyze(trace, config))
        except NotSegmentableError as exc:
            log.error("%s: %s; skipped", path, exc)
    if not reports:
        raise NotSegmentableError("no trace in the directory could be analysed")
    _guard_inputs(args.out, *files)
    _emit(dataio.write_report_table(reports), args.out)
    lines = ["y,x,r,n,verdict"]
    for ykey, xkey, r, n, verdict in correlation_summary(reports, config):
        lines.append(f"{ykey},{xkey},{'' if r is None else f'{r:.4f}'},{n},{verdict}")
    summary = "\n".join(lines) + "\n"
    if args.summary:
        Path(args.summary).write_text(summary, encoding="utf-8")
    else:
        sys.stderr.write(summary)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_run_flags(p):
    p.add_argument("--config", metavar="PATH", help="INI run configuration")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--plot", action="store_true", help="also write gnuplot data + script")
    p.add_argument("--seed", type=int, help="seed for current noise")
    p.add_argument("--noise", type=float, help="Gaussian current noise, fraction of max|i|")
    p.add_argument("--timestep", type=float, metavar="S")
    p.add_argument("--amplitude", type=float, metavar="V")
    p.add_argument("--samples", type=int, metavar="N")
    p.add_argument("--source", choices=[m.value for m in SourceModel])
    p.add_argument("--iq", type=float, metavar="A", help="signed internal current amplitude")
    p.add_argument("--half-period", type=float, metavar="S", dest="half_period")


def _add_trace_flags(p):
    p.add_argument("trace", help="trace CSV")
    p.add_argument("--config", metavar="PATH", help="INI file; only [analysis] is used")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--seed", type=int, help="accepted for uniformity; analysis is deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memloop", description="Memristive I-V simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one sweep and write a trace CSV")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="analyse a trace CSV")
    _add_trace_flags(p)
    p.add_argument("--csv", action="store_true", help="one-row CSV instead of JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="estimate device parameters from a trace CSV")
    _add_trace_flags(p)
    p.add_argument("--source", choices=[m.value for m in SourceModel], default="constant")
    p.add_argument("--half-period", type=float, default=700.0, dest="half_period")
    p.add_argument("--drift", choices=["rising", "opposing"], default="rising")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("freq-sweep", help="analyse fresh sweeps at scaled timesteps")
    _add_run_flags(p)
    p.add_argument("--multipliers", default="1,0.5,0.25",
                   help="comma-separated timestep multipliers (default: 1,0.5,0.25)")
    p.set_defaults(func=cmd_freq_sweep)

    p = sub.add_parser("repeat", help="run repeated sweeps on one device")
    _add_run_flags(p)
    p.add_argument("-n", type=int, default=3, help="number of sweeps (default: 3)")
    p.add_argument("--trace-dir", metavar="DIR", help="write each sweep's trace here")
    p.set_defaults(func=cmd_repeat)

    p = sub.add_parser("report", help="batch-analyse a directory of traces")
    p.add_argument("directory")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="batch CSV (default: stdout)")
    p.add_argument("--summary", metavar="PATH", help="correlation summary (default: stderr)")
    p.set_defaults(func=cmd_report)
    return parser


def dispatch(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if getattr(args, "n", 1) < 1:
            raise UsageError("-n must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"memloop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _ANALYSIS_ERRORS as exc:
        print(f"memloop: analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except _DATA_ERRORS as exc:
        print(f"memloop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
