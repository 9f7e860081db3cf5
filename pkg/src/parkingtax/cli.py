"""Command-line entry point.

Exit codes: 0 success, 1 domain or input error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import difflib
import json
import re
import sys
from pathlib import Path

from parkingtax import DomainError, ParseError, __version__
from parkingtax.breakeven import breakeven, per_hour
from parkingtax.impact import (DEFAULT_GRID_KG_PER_KWH, HOURS_PER_YEAR, FleetScenario, scenario_report,
                               sensitivity_grid)
from parkingtax.power import LoadProfile, parking_tax, resolve_load, resolve_profile
from parkingtax.reproduce import TABLES, reproduce, write_report
from parkingtax import sim
from parkingtax.sim import AlwaysOn, SimConfig, compare_policies, parse_policy
from parkingtax.stats import analyze, gen_telemetry, ingest, parse_schedule, write_telemetry
from parkingtax.traffic import (Bursty, Diurnal, Steady, TrafficSpec, load_trace, save_trace)

SCHEMA_VERSION = 1
MANIFEST_NAME = "run_manifest.json"


class UsageError(Exception):
    pass


def parse_duration(text: str) -> float:
    """Seconds from ``24h``, ``90m``, ``300s`` or a bare number of seconds."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([hms]?)\s*", str(text))
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r} (use e.g. 24h, 90m, 300s)")
    return float(m.group(1)) * {"h": 3600.0, "m": 60.0, "s": 1.0, "": 1.0}[m.group(2)]


def parse_rate(text: str) -> float:
    """Requests/hour from ``5/hr``, ``0.01/s`` or a bare number (per hour)."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(/hr|/h|/s)?\s*", str(text))
    if not m:
        raise argparse.ArgumentTypeError(f"bad rate {text!r} (use e.g. 5/hr, 0.01/s)")
    v = float(m.group(1))
    return per_hour(v) if m.group(2) == "/s" else v


def parse_traffic(text: str, duration_s: float) -> TrafficSpec:
    """``steady:<rate>``, ``bursty[:low,high,period,duty]`` or ``diurnal[:peak,cycle,floor]``."""
    name, _, arg = text.partition(":")
    try:
        if name == "steady":
            return TrafficSpec(Steady(parse_rate(arg) if arg else 5.0), duration_s)
        if name == "bursty":
            d = Bursty()
            parts = arg.split(",") if arg else []
            return TrafficSpec(Bursty(
                parse_rate(parts[0]) if len(parts) > 0 else d.low_per_hr,
                parse_rate(parts[1]) if len(parts) > 1 else d.high_per_hr,
                parse_duration(parts[2]) if len(parts) > 2 else d.period_s,
                float(parts[3]) if len(parts) > 3 else d.low_duty_fraction), duration_s)
        if name == "diurnal":
            d = Diurnal()
            parts = arg.split(",") if arg else []
            return TrafficSpec(Diurnal(
                parse_rate(parts[0]) if len(parts) > 0 else d.peak_per_hr,
                parse_duration(parts[1]) if len(parts) > 1 else d.cycle_s,
                parse_rate(parts[2]) if len(parts) > 2 else d.floor_per_hr), duration_s)
    except (ValueError, argparse.ArgumentTypeError) as e:
        raise DomainError(f"bad traffic spec {text!r}: {e}") from None
    raise DomainError(f"unknown traffic spec {text!r}")


def _json_default(o):
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    if hasattr(o, "item"):
        return o.item()
    return str(o)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def write_manifest(out_paths, args, argv, config: dict) -> Path | None:
    """Write ``run_manifest.json`` beside the first output file."""
    out_paths = [Path(p) for p in out_paths if p]
    if not out_paths:
        return None
    first = out_paths[0]
    where = first if first.is_dir() else first.parent
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "subcommand": args.command,
        "argv": list(argv),
        "config": config,
        "outputs": [str(p) for p in out_paths],
    }
    path = where / MANIFEST_NAME
    path.write_text(_dump(manifest))
    return path


# ---------------------------------------------------------------------------
# subcommands

def _load_from_args(args) -> LoadProfile:
    if args.load_profile:
        return resolve_load(args.load_profile)
    if args.load_power is not None or args.load_time is not None:
        if args.load_power is None or args.load_time is None:
            raise UsageError("--load-power and --load-time go together")
        return LoadProfile.constant(args.load_power, args.load_time)
    return resolve_load("pytorch-70b")


def cmd_breakeven(args, argv):
    profile = resolve_profile(args.profile)
    load = _load_from_args(args)
    park = args.park_power if args.park_power is not None else parking_tax(profile)
    r = breakeven(park, load)
    out = {"schema_version": SCHEMA_VERSION, "profile": profile.name, "load": load.to_dict(),
           "park_w": park, "load_energy_j": r.load_energy_j, "t_star_s": r.t_star_s,
           "t_star_min": r.t_star_min, "lambda_star_per_hr": r.lambda_star_per_hr,
           "lambda_star_per_s": r.lambda_star_per_s}
    print(f"T* = {r.t_star_s:.1f} s ({r.t_star_min:.1f} min), λ* = {r.lambda_star_per_hr:.1f}/hr")
    if args.json:
        print(_dump(out), end="")
    if args.out:
        Path(args.out).write_text(_dump(out))
        write_manifest([args.out], args, argv, {"profile": profile.to_dict(), "load": load.to_dict(),
                                                "park_w": park})
    return 0


def _traffic_spec_args(args) -> TrafficSpec:
    if args.pattern == "steady":
        return TrafficSpec(Steady(args.rate), args.duration)
    if args.pattern == "bursty":
        return TrafficSpec(Bursty(args.low, args.high, args.period, args.low_duty), args.duration)
    return TrafficSpec(Diurnal(args.peak, args.cycle, args.floor, args.peak_first), args.duration)


def cmd_gen_traffic(args, argv):
    spec = _traffic_spec_args(args)
    trace = spec.generate(args.seed)
    if args.out:
        save_trace(trace, args.out)
        write_manifest([args.out], args, argv, {"traffic": spec.label, "duration_s": spec.duration_s,
                                                "seed": args.seed})
    print(f"{len(trace)} arrivals over {trace.duration_s:g} s ({trace.mean_rate_per_hr:.2f}/hr) "
          f"[{trace.spec_label}, seed={args.seed}]")
    return 0


def _trace_from_args(args, seed):
    if Path(args.traffic).is_file():
        return load_trace(args.traffic, None), {"trace_file": args.traffic}
    spec = parse_traffic(args.traffic, args.duration)
    return spec.generate(seed), {"traffic": spec.label, "seed": seed}


def cmd_simulate(args, argv):
    profile = resolve_profile(args.profile)
    load = _load_from_args(args)
    policy = parse_policy(args.policy)
    trace, tinfo = _trace_from_args(args, args.seed)
    duration = max(args.duration, trace.duration_s) if Path(args.traffic).is_file() else args.duration
    cfg = SimConfig(profile, load, policy, trace, duration, args.count_initial_load)
    result, segs = sim.run(cfg)
    if not isinstance(policy, AlwaysOn):
        base = sim.run(dataclasses.replace(cfg, policy=AlwaysOn()))[0]
        result = dataclasses.replace(
            result, savings_vs_always_on_pct=100.0 * (base.energy_wh - result.energy_wh) / base.energy_wh)
    else:
        result = dataclasses.replace(result, savings_vs_always_on_pct=0.0)
    out = {"schema_version": SCHEMA_VERSION, "profile": profile.name, "policy": str(policy),
           "load": load.label, **tinfo, **result.to_dict()}
    print(f"{policy}: {result.energy_wh:.1f} Wh, savings {result.savings_vs_always_on_pct:.1f}%, "
          f"{result.cold_starts} cold starts, {result.total_requests} requests, "
          f"avg added latency {result.avg_added_latency_s:.2f} s")
    outputs = []
    if args.out:
        Path(args.out).write_text(_dump(out))
        outputs.append(args.out)
    if args.emit_timeline:
        with open(args.emit_timeline, "w") as f:
            f.write("t_start,t_end,state,power_w\n")
            for s in segs:
                f.write(f"{s.t_start!r},{s.t_end!r},{s.state},{s.power_w!r}\n")
        outputs.append(args.emit_timeline)
    write_manifest(outputs, args, argv, {"profile": profile.to_dict(), "load": load.to_dict(),
                                         "policy": str(policy), "duration_s": duration,
                                         "count_initial_load": args.count_initial_load, **tinfo})
    return 0


def cmd_compare(args, argv):
    profile = resolve_profile(args.profile)
    load = _load_from_args(args)
    # split only before a policy name so "hysteresis:120,900" stays whole
    policies = [parse_policy(p) for p in re.split(r",(?=\s*[A-Za-z])", args.policies)]
    if not any(isinstance(p, AlwaysOn) for p in policies):
        policies.insert(0, AlwaysOn())
    seeds = list(range(args.seed, args.seed + args.seeds))
    per_seed = []
    if Path(args.traffic).is_file():
        trace = load_trace(args.traffic)
        per_seed.append(compare_policies(profile, load, trace, policies,
                                         max(args.duration, trace.duration_s), args.count_initial_load))
    else:
        for s in seeds:
            trace = parse_traffic(args.traffic, args.duration).generate(s)
            per_seed.append(compare_policies(profile, load, trace, policies, args.duration,
                                             args.count_initial_load))
    rows = []
    for i, pol in enumerate(policies):
        rs = [r[i] for r in per_seed]
        n = len(rs)
        row = {"policy": str(pol), "n_runs": n}
        for f in ("energy_wh", "savings_vs_always_on_pct", "cold_starts", "total_requests",
                  "avg_added_latency_s"):
            row[f] = sum(getattr(r, f) for r in rs) / n
        rows.append(row)
        print(f"{str(pol):>22}  {row['energy_wh']:8.1f} Wh  {row['savings_vs_always_on_pct']:6.2f}%  "
              f"{row['cold_starts']:6.1f} cold  {row['avg_added_latency_s']:6.2f} s")
    if args.out:
        Path(args.out).write_text(_dump({"schema_version": SCHEMA_VERSION, "profile": profile.name,
                                         "traffic": args.traffic, "seeds": seeds, "rows": rows}))
        write_manifest([args.out], args, argv, {"profile": profile.to_dict(), "load": load.to_dict(),
                                                "policies": [str(p) for p in policies], "seeds": seeds})
    return 0


def cmd_gen_telemetry(args, argv):
    profile = resolve_profile(args.profile)
    schedule = parse_schedule(json.loads(Path(args.schedule).read_text()))
    samples = gen_telemetry(profile, schedule, args.noise, args.drift, args.seed, args.gpu_id,
                            phase_noise_std_w=args.phase_noise)
    write_telemetry(samples, args.out)
    write_manifest([args.out], args, argv, {"profile": profile.to_dict(), "schedule": schedule,
                                            "noise": args.noise, "drift": args.drift, "seed": args.seed})
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def cmd_analyze(args, argv):
    batch = ingest(args.input, args.util_max)
    report = analyze(batch.samples, args.clock_threshold, args.tost_bound)
    report = {"schema_version": SCHEMA_VERSION,
              "retention": {"n_read": batch.n_read, "n_retained": batch.n_retained,
                            "fraction": batch.retention, "util_max_pct": args.util_max},
              **report}
    print(f"retained {batch.n_retained}/{batch.n_read} samples ({100 * batch.retention:.1f}%)")
    ts = report["two_state"]
    if ts:
        print(f"context effect {ts['delta_w']:+.1f} W (d = {ts['cohens_d']:.2f}, p = {ts['welch_p']:.3g})")
    for gid, g in report["per_gpu"].items():
        if g["regression"]:
            r, e = g["regression"], g["equivalence"]
            print(f"{gid}: beta = {r['slope_w_per_gb']:+.4f} W/GB "
                  f"[{r['ci95_lo']:+.4f}, {r['ci95_hi']:+.4f}], p = {r['p_two_sided']:.3g}, "
                  f"p_TOST = {e['p_tost']:.3g} ({'equivalent' if e['equivalent'] else 'not equivalent'})")
    if args.out:
        Path(args.out).write_text(_dump(report))
        write_manifest([args.out], args, argv, {"input": args.input, "util_max": args.util_max,
                                                "clock_threshold": args.clock_threshold,
                                                "tost_bound": args.tost_bound})
    return 0


def cmd_impact(args, argv):
    if args.sensitivity:
        corners = [FleetScenario.from_dict(json.loads(Path(p).read_text())) for p in args.sensitivity]
        grid = sensitivity_grid(*corners)
        for row in grid:
            print(f"{row['parameter']:>12}  {row['low']:>12.4g}  {row['base']:>12.4g}  {row['high']:>12.4g}")
        out = {"schema_version": SCHEMA_VERSION, "sensitivity": grid}
    else:
        if args.fleet is None or args.utilization is None or args.park_power is None:
            raise UsageError("impact needs --fleet, --utilization and --park-power (or --sensitivity)")
        s = FleetScenario(args.fleet, args.utilization, args.park_power, args.hours, args.grid_intensity)
        out = {"schema_version": SCHEMA_VERSION, **scenario_report(s)}
        print(f"{out['e_park_gwh_rounded']} GWh/yr ({out['e_park_gwh']:.1f}), "
              f"{out['co2_kt']:.0f} kT CO2 at {s.grid_intensity_kg_per_kwh} kg/kWh")
    if args.out:
        Path(args.out).write_text(_dump(out))
        write_manifest([args.out], args, argv, {k: v for k, v in vars(args).items() if k != "func"})
    return 0


def cmd_reproduce(args, argv):
    tables = list(TABLES) if args.table == "all" else [args.table]
    seeds = list(range(args.seed, args.seed + args.seeds))
    outputs = []
    failed = 0
    for t in tables:
        rep = reproduce(t, seeds, args.jobs)
        print(f"== {t}")
        for c in rep["checks"]:
            failed += not c["pass"]
            print(f"  {'PASS' if c['pass'] else 'FAIL'}  {c['name']}: ours={c['ours']:.4g} "
                  f"ref={c['reference']} tol={c['tol']}")
        if args.out:
            outputs += write_report(rep, args.out)
    if args.out:
        write_manifest(outputs, args, argv, {"tables": tables, "seeds": seeds})
    print(f"{failed} comparison(s) outside tolerance" if failed else "all comparisons within tolerance")
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_load_flags(p):
    p.add_argument("--load-profile", help="built-in loader name or JSON file")
    p.add_argument("--load-power", type=float, help="constant loading power (W)")
    p.add_argument("--load-time", type=parse_duration, help="loading time (e.g. 45s)")


def _add_sim_flags(p):
    p.add_argument("--profile", default="h100")
    _add_load_flags(p)
    p.add_argument("--traffic", default="steady:5",
                   help="steady:<rate> | bursty[:lo,hi,period,duty] | diurnal[:peak,cycle,floor] | trace file")
    p.add_argument("--duration", type=parse_duration, default=86400.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count-initial-load", action=argparse.BooleanOptionalAction, default=True,
                   help="count the pre-window load as one cold start")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parkingtax", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("breakeven", help="breakeven time and critical arrival rate")
    p.add_argument("--profile", default="h100")
    p.add_argument("--park-power", type=float, help="override the profile's parking tax (W)")
    _add_load_flags(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_breakeven)

    p = sub.add_parser("gen-traffic", help="generate an arrival trace")
    p.add_argument("--pattern", choices=("steady", "bursty", "diurnal"), default="steady")
    p.add_argument("--duration", type=parse_duration, default=86400.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=parse_rate, default=5.0)
    p.add_argument("--low", type=parse_rate, default=Bursty.low_per_hr)
    p.add_argument("--high", type=parse_rate, default=Bursty.high_per_hr)
    p.add_argument("--period", type=parse_duration, default=Bursty.period_s)
    p.add_argument("--low-duty", type=float, default=Bursty.low_duty_fraction)
    p.add_argument("--peak", type=parse_rate, default=Diurnal.peak_per_hr)
    p.add_argument("--cycle", type=parse_duration, default=Diurnal.cycle_s)
    p.add_argument("--floor", type=parse_rate, default=Diurnal.floor_per_hr)
    p.add_argument("--peak-first", action="store_true", help="diurnal cycle starts at its peak")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_traffic)

    p = sub.add_parser("simulate", help="simulate one eviction policy")
    _add_sim_flags(p)
    p.add_argument("--policy", default="breakeven",
                   help="always-on | ttl:<s> | breakeven | rate:<window_s> | hysteresis:<lo>,<hi>")
    p.add_argument("--emit-timeline", help="CSV of (t_start, t_end, state, power_w) segments")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare policies on identical traces")
    _add_sim_flags(p)
    p.add_argument("--policies", default="always-on,ttl:300,ttl:900,ttl:1800,breakeven")
    p.add_argument("--seeds", type=int, default=1, help="number of seeds starting at --seed")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-telemetry", help="synthetic idle-power telemetry CSV")
    p.add_argument("--profile", default="h100")
    p.add_argument("--schedule", required=True, help="JSON list of {vram_gb, ctx, duration_s}")
    p.add_argument("--noise", type=float, default=0.17, help="per-sample noise SD (W)")
    p.add_argument("--phase-noise", type=float, default=0.0, help="per-phase offset SD (W)")
    p.add_argument("--drift", type=float, default=0.0, help="linear drift (W/hr)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gpu-id", default="gpu0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_telemetry)

    p = sub.add_parser("analyze", help="two-state, dose-response and TOST analysis of telemetry")
    p.add_argument("--input", required=True)
    p.add_argument("--util-max", type=float, default=0.0)
    p.add_argument("--clock-threshold", type=float, default=700.0)
    p.add_argument("--tost-bound", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("impact", help="fleet-scale annual parking energy")
    p.add_argument("--fleet", type=float)
    p.add_argument("--utilization", type=float)
    p.add_argument("--park-power", type=float)
    p.add_argument("--hours", type=float, default=HOURS_PER_YEAR)
    p.add_argument("--grid-intensity", type=float, default=DEFAULT_GRID_KG_PER_KWH)
    p.add_argument("--sensitivity", nargs=3, metavar=("LOW", "BASE", "HIGH"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_impact)

    p = sub.add_parser("reproduce", help="regenerate a reference table or figure dataset")
    p.add_argument("table", choices=TABLES + ("all",))
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _suggest(parser, command, extras) -> str:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    opts = [o for a in sub.choices[command]._actions for o in a.option_strings]
    hints = []
    for e in extras:
        flag = e.split("=")[0]
        if flag.startswith("-"):
            close = difflib.get_close_matches(flag, opts, n=1)
            hints.append(f"{flag} (did you mean {close[0]}?)" if close else flag)
        else:
            hints.append(flag)
    return ", ".join(hints)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args, extras = parser.parse_known_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if extras:
        print(f"parkingtax {args.command}: error: unrecognized arguments: {_suggest(parser, args.command, extras)}",
              file=sys.stderr)
        return 2
    try:
        return args.func(args, argv)
    except UsageError as e:
        print(f"parkingtax {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (DomainError, ParseError) as e:
        print(f"parkingtax {args.command}: {e}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as e:
        print(f"parkingtax {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
