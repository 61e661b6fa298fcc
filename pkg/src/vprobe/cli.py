"""Command-line front end.

Exit codes: 0 success, 2 configuration or input error, 3 solver or
simulation error, 4 analysis error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

from . import __version__
from .analysis import AnalysisError, Trace, analyze_trace
from .config import ConfigError, RunConfig, load_config
from .contact import SolverError, run_sweep
from .instrument import InstrumentError, RangeError, run_virtual_measurement
from .mechanics import MATERIALS, DomainError, SpecError, hertz_contact_radius, hertz_peak_pressure
from .traceio import (
    TraceFormatError,
    atomic_write_text,
    from_measurement,
    from_sim,
    read_trace,
    write_json,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ANALYSIS = 4

POSITIONS_HEADER = "# stylus-positions v1"
VARIATION_HEADER = "# stylus-variation v1"


def _err(msg: str) -> None:
    print(f"vprobe: error: {msg}", file=sys.stderr)


def _warn(msg: str) -> None:
    print(f"vprobe: warning: {msg}", file=sys.stderr)


def _plot(fn, *args) -> None:
    """Plots are best effort; a failure is reported but never changes the exit code."""
    try:
        from . import plotting

        getattr(plotting, fn)(*args)
    except Exception as exc:  # noqa: BLE001
        _warn(f"plot not written: {exc}")


def _out(args, cfg: RunConfig, key: str, default: str | None) -> str | None:
    flag = getattr(args, key, None)
    if flag:
        return flag
    return cfg.outputs.get(key, default)


def _sim_meta(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "device": cfg.device.name,
        "x_s_m": cfg.x_s,
        "seed": cfg.seed,
    }


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.sim_grid()
    sim = run_sweep(cfg.device, cfg.stylus, cfg.effective_placement(), grid, cfg.solver)
    meta = _sim_meta(cfg, "simulate")
    trace_path = _out(args, cfg, "trace", "trace.csv")
    events_path = _out(args, cfg, "events", None) or _sidecar(trace_path)
    write_trace(trace_path, from_sim(sim, meta))
    atomic_write_text(events_path, sim.events_json(meta))
    plot = _out(args, cfg, "plot", None)
    if plot:
        _plot("force_curve", plot, sim.z, sim.F_z, sim.events)
    return EXIT_OK


def _sidecar(trace_path: str) -> str:
    stem = trace_path[:-4] if trace_path.endswith(".csv") else trace_path
    return stem + ".events.json"


def cmd_measure(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    grid = cfg.sim_grid()
    mt = run_virtual_measurement(
        cfg.device, cfg.stylus, cfg.effective_placement(), cfg.placement_error, cfg.instrument, grid, seed, cfg.solver
    )
    meta = _sim_meta(cfg, "measure")
    meta.update(seed=seed, placement_error_m=cfg.placement_error)
    trace_path = _out(args, cfg, "trace", "measurement.csv")
    write_trace(trace_path, from_measurement(mt, meta))
    plot = _out(args, cfg, "plot", None)
    if plot:
        _plot("force_curve", plot, mt.z_cmd, mt.F_readout, (), "Force readout versus deflection (virtual measurement)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    table = read_trace(args.trace)
    trace = table.to_trace()
    events = []
    if args.events:
        import json

        try:
            with open(args.events, encoding="utf-8") as fh:
                events = json.load(fh).get("events", [])
        except (OSError, ValueError, AttributeError) as exc:
            raise ConfigError(f"{args.events}: cannot read events sidecar: {exc}") from None
    window = (args.fit_lo * 1e-6, args.fit_hi * 1e-6)
    report = analyze_trace(trace, window, args.calibration_bias, args.apparatus_stiffness, events)
    for w in report.warnings:
        _warn(w)
    doc = report.to_dict()
    doc["source"] = {"trace": str(args.trace), "meta": table.meta}
    if args.report:
        write_json(args.report, doc)
    else:
        import json

        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if args.plot and report.segmentation is not None:
        _plot("annotated_analysis", args.plot, trace, report.segmentation, report.fit)
    return EXIT_OK


def _fit_grid(cfg: RunConfig):
    from .config import GridSpec

    g = cfg.z_grid
    stop = g.stop if g.stop is not None else cfg.fit_window[1] + g.step
    return GridSpec(g.start, stop, g.step).build(stop)


def cmd_sweep_position(args) -> int:
    from .studies import stiffness_vs_position

    cfg = load_config(args.config)
    analytic = cfg.device
    probed = cfg.device
    if args.inject_support_compliance is not None:
        if not args.inject_support_compliance >= 0:
            raise ConfigError("--inject-support-compliance must be >= 0")
        probed = replace(cfg.device, support_rot_compliance=args.inject_support_compliance)
    instrument = cfg.instrument
    if args.ideal:
        from .instrument import InstrumentModel

        instrument = InstrumentModel.ideal()
    positions = cfg.position_list()
    rows = stiffness_vs_position(
        probed, cfg.stylus, positions, instrument, _fit_grid(cfg), cfg.fit_window, cfg.seed, analytic, cfg.solver
    )
    import json

    meta = {
        "command": "sweep-position",
        "device": cfg.device.name,
        "seed": cfg.seed,
        "injected_support_compliance": args.inject_support_compliance,
        "fit_window_um": [cfg.fit_window[0] * 1e6, cfg.fit_window[1] * 1e6],
    }
    lines = [POSITIONS_HEADER, "# meta: " + json.dumps(meta, sort_keys=True, separators=(",", ":")),
             "x_s_um,k_analytic_N_per_m,k_measured_N_per_m"]
    for r in rows:
        lines.append(f"{r.x_s * 1e6:.6f},{r.k_analytic:.9f},{r.k_measured:.9f}")
    out = _out(args, cfg, "positions", "positions.csv")
    atomic_write_text(out, "\n".join(lines) + "\n")
    plot = _out(args, cfg, "plot", None)
    if plot:
        _plot("stiffness_vs_position", plot, [r.x_s for r in rows], [r.k_analytic for r in rows],
              [r.k_measured for r in rows])
    return EXIT_OK


def cmd_hertz(args) -> int:
    tip = MATERIALS[args.tip]
    sub = MATERIALS[args.substrate]
    p0 = hertz_peak_pressure(args.force, args.radius, tip, sub)
    a = hertz_contact_radius(args.force, args.radius, tip, sub)
    print(format_hertz(p0, a))
    return EXIT_OK


def format_hertz(p0: float, a: float) -> str:
    return f"p0_Pa {p0:.9e}\ncontact_radius_m {a:.9e}"


def cmd_montecarlo(args) -> int:
    from .studies import run_montecarlo

    cfg = load_config(args.config)
    mc = cfg.montecarlo
    n_runs = args.n_runs if args.n_runs is not None else mc.n_runs
    std = args.placement_error_std * 1e-6 if args.placement_error_std is not None else mc.placement_error_std
    workers = args.workers if args.workers is not None else mc.workers
    if n_runs < 1 or std < 0 or workers < 1:
        raise ConfigError("--n-runs and --workers must be >= 1 and --placement-error-std >= 0")
    grid = cfg.sliding_grid()
    res = run_montecarlo(cfg.device, cfg.stylus, cfg.x_s, std, cfg.instrument, grid, n_runs, cfg.seed, workers, cfg.solver)
    import json

    meta = {
        "command": "montecarlo",
        "device": cfg.device.name,
        "seed": cfg.seed,
        "n_runs": n_runs,
        "placement_error_std_m": std,
        "placement_errors_m": res.placement_errors,
    }
    lines = [VARIATION_HEADER, "# meta: " + json.dumps(meta, sort_keys=True, separators=(",", ":")),
             ",".join(["z_cmd_um"] + [f"force_uN_run{i}" for i in range(n_runs)])]
    for j, z in enumerate(res.z):
        lines.append(",".join([f"{z * 1e6:.6f}"] + [f"{c[j] * 1e6:.6f}" for c in res.curves]))
    atomic_write_text(_out(args, cfg, "variation", "variation.csv"), "\n".join(lines) + "\n")
    doc = {"format": "stylus-variation-report v1", "meta": meta, "report": res.report.to_dict()}
    write_json(_out(args, cfg, "report", "variation_report.json"), doc)
    plot = _out(args, cfg, "plot", None)
    if plot:
        _plot("variation", plot, res.z, res.curves)
    print(f"max deviation {res.report.max_deviation * 1e6:.3f} uN, envelope {res.report.envelope * 1e6:.3f} uN, "
          f"within_envelope {str(res.report.within_envelope).lower()}")
    return EXIT_OK


def _positive(text: str) -> float:
    v = float(text)
    if not math.isfinite(v) or v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vprobe", description="Virtual probe station for cantilever MEMS force-deflection tests.")
    p.add_argument("--version", action="version", version=f"vprobe {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="noiseless quasi-static sweep with event detection")
    s.add_argument("config")
    s.add_argument("-o", "--trace", help="trace CSV path")
    s.add_argument("--events", help="events JSON path (default: next to the trace)")
    s.add_argument("--plot", help="SVG path for the force curve")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("measure", help="virtual measurement through the instrument error model")
    m.add_argument("config")
    m.add_argument("-o", "--trace", help="trace CSV path")
    m.add_argument("--seed", type=int, help="override the config seed")
    m.add_argument("--plot", help="SVG path")
    m.set_defaults(func=cmd_measure)

    a = sub.add_parser("analyze", help="stiffness fit and regime report for a trace file")
    a.add_argument("trace")
    a.add_argument("--events", help="events JSON sidecar to include in the report")
    a.add_argument("--calibration-bias", type=float, help="relative load-cell bias to remove, e.g. 0.025")
    a.add_argument("--apparatus-stiffness", type=_positive, help="rig stiffness in N/m to remove in series")
    a.add_argument("--fit-lo", type=float, default=5.0, help="fit window start in um (default 5)")
    a.add_argument("--fit-hi", type=float, default=50.0, help="fit window end in um (default 50)")
    a.add_argument("--report", help="report JSON path (default: stdout)")
    a.add_argument("--plot", help="SVG path for the annotated trace")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("sweep-position", help="stiffness versus stylus position along the mass")
    w.add_argument("config")
    w.add_argument("-o", "--positions", help="output CSV path")
    w.add_argument("--inject-support-compliance", type=float, metavar="C_S",
                   help="clamp compliance (rad/(N m)) given to the probed device only")
    w.add_argument("--ideal", action="store_true", help="switch every instrument error channel off")
    w.add_argument("--plot", help="SVG path")
    w.set_defaults(func=cmd_sweep_position)

    h = sub.add_parser("hertz", help="Hertz peak pressure and contact radius of the tip")
    h.add_argument("--force", type=float, required=True, help="normal force in N")
    h.add_argument("--radius", type=_positive, required=True, help="tip radius in m")
    h.add_argument("--tip", choices=sorted(MATERIALS), default="diamond")
    h.add_argument("--substrate", choices=sorted(MATERIALS), default="silicon")
    h.set_defaults(func=cmd_hertz)

    c = sub.add_parser("montecarlo", help="sample-to-sample variation under placement scatter")
    c.add_argument("config")
    c.add_argument("--n-runs", type=int)
    c.add_argument("--placement-error-std", type=float, help="placement scatter in um")
    c.add_argument("--workers", type=int)
    c.add_argument("-o", "--variation", help="variation CSV path")
    c.add_argument("--report", help="variation report JSON path")
    c.add_argument("--plot", help="SVG path")
    c.set_defaults(func=cmd_montecarlo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AnalysisError as exc:
        _err(f"analysis failed: {exc}")
        return EXIT_ANALYSIS
    except (ConfigError, TraceFormatError, SpecError, DomainError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (SolverError, RangeError, InstrumentError) as exc:
        _err(f"simulation failed: {exc}")
        return EXIT_SOLVER
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror or exc}")
        return EXIT_CONFIG
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        _err(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
