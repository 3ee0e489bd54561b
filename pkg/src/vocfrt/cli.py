"""Command-line front end: run, compare, analyze and sweep scenarios.

Exit codes: 0 on success, 1 on configuration errors, 2 when a simulation
leaves the finite range.
"""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import analysis, config
from .engine import NonFinite, run, run_many

EXIT_OK, EXIT_CONFIG, EXIT_NONFINITE = 0, 1, 2

# (csv header, record column)
CSV_COLUMNS = (
    ("t_s", "t"), ("v_pcc_a_V", "v_pcc_a"), ("v_pcc_b_V", "v_pcc_b"),
    ("v_pcc_c_V", "v_pcc_c"), ("i_inv_a_A", "i_inv_a"), ("i_inv_b_A", "i_inv_b"),
    ("i_inv_c_A", "i_inv_c"), ("p_W", "p"), ("q_var", "q"), ("p_a_W", "p_a"),
    ("p_b_W", "p_b"), ("p_c_W", "p_c"), ("v_voc_a_V", "v_voc_a"),
    ("sin_delta", "sin_delta"), ("frt_mode", "frt_mode"), ("limiter_d", "limiter_d"),
    ("limiter_mag", "limiter_mag"), ("breaker", "breaker"),
)
COMPARE_KEYS = ("max_dsin_fault", "min_p_post_W", "recovery_time_s")


def write_timeseries(record, path):
    """Write the fixed-schema CSV (dot decimal, ``%.10g``)."""
    cols = [record[c] for _, c in CSV_COLUMNS]
    data = np.column_stack(cols)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(h for h, _ in CSV_COLUMNS) + "\n")
        for row in data:
            fh.write(",".join("%.10g" % x for x in row) + "\n")


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def _source(arg):
    """Document from a preset name or a config path."""
    if arg in config.PRESETS:
        return config.preset(arg)
    if not os.path.exists(arg):
        raise config.ConfigError(f"no such config file or preset: '{arg}'")
    return config.load(arg)


def _document(args):
    if getattr(args, "config", None) and getattr(args, "preset", None):
        raise config.ConfigError("give either --config or --preset, not both")
    if getattr(args, "config", None):
        doc = config.load(args.config)
    elif getattr(args, "preset", None):
        doc = config.preset(args.preset)
    else:
        raise config.ConfigError("a --config file or a --preset is required")
    return _overrides(doc, args)


def _overrides(doc, args):
    if getattr(args, "dt", None) is not None:
        doc = config.set_key(doc, "simulation.dt_us", args.dt * 1e6)
    if getattr(args, "decimate", None) is not None:
        doc = config.set_key(doc, "simulation.decimate", args.decimate)
    return doc


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_run(args):
    doc = _document(args)
    sc = config.to_scenario(doc)
    out = _outdir(args.out)
    with open(os.path.join(out, "scenario.json"), "w", encoding="utf-8") as fh:
        fh.write(config.dumps(doc))
    t0 = time.perf_counter()
    try:
        rec, metrics = run(sc)
    except NonFinite as exc:
        if exc.record is not None:
            write_timeseries(exc.record, os.path.join(out, "timeseries.csv"))
        write_json({"name": sc.name, "complete": False, "error": str(exc)},
                   os.path.join(out, "metrics.json"))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    write_timeseries(rec, os.path.join(out, "timeseries.csv"))
    write_json(metrics, os.path.join(out, "metrics.json"))
    print(f"{sc.name or 'run'}: {time.perf_counter() - t0:.2f} s, "
          f"reversal={metrics['reversal']} sync_loss={metrics['sync_loss']} -> {out}")
    return EXIT_OK


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def compare_table(ma, mb, names=("A", "B")):
    """Metrics side by side with B - A deltas for the headline keys."""
    keys = [k for k in ma if k in mb and k != "name"]
    rows = []
    for k in keys:
        a, b = ma[k], mb[k]
        d = None
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not (
                isinstance(a, bool) or isinstance(b, bool)):
            d = b - a
        rows.append({"metric": k, names[0]: a, names[1]: b, "delta": d})
    deltas = {}
    for k in COMPARE_KEYS:
        a, b = ma.get(k), mb.get(k)
        deltas[k] = (b - a) if isinstance(a, (int, float)) and isinstance(b, (int, float)) else None
    return rows, deltas


def cmd_compare(args):
    docs = [_overrides(_source(a), args) for a in args.configs]
    scs = [config.to_scenario(d) for d in docs]
    out = _outdir(args.out)
    ms = run_many(scs, args.workers)
    for m in ms:
        if not m.get("complete", False):
            print(f"error: {m.get('error', 'incomplete run')}", file=sys.stderr)
            return EXIT_NONFINITE
    names = [sc.name or f"config{i + 1}" for i, sc in enumerate(scs)]
    if names[0] == names[1]:
        names = [names[0] + "_A", names[1] + "_B"]
    rows, deltas = compare_table(ms[0], ms[1], names)
    write_json({"configs": names, "metrics": {names[0]: ms[0], names[1]: ms[1]},
                "deltas": deltas}, os.path.join(out, "compare.json"))
    w = max(len(r["metric"]) for r in rows)
    lines = [f"{'metric':<{w}}  {names[0]:>18}  {names[1]:>18}  {'delta':>14}"]
    for r in rows:
        d = "" if r["delta"] is None else _fmt(r["delta"])
        lines.append(f"{r['metric']:<{w}}  {_fmt(r[names[0]]):>18}  {_fmt(r[names[1]]):>18}  {d:>14}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out, "compare.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


def cmd_analyze(args):
    doc = _document(args)
    sc = config.to_scenario(doc)
    out = _outdir(args.out)
    deltas = np.linspace(args.delta_range[0], args.delta_range[1], args.n_delta)
    sags = np.linspace(args.sag_range[0], args.sag_range[1], args.n_sag)
    t0 = time.perf_counter()
    pts = analysis.clearance_grid(sc, deltas, sags, args.with_oracle, args.workers)
    with open(os.path.join(out, "analysis.csv"), "w", encoding="ascii", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_c_rad", "sag_pu", "predicted", "margin_A", "simulated", "agree"])
        for p in pts:
            w.writerow(["%.10g" % p.delta_c, "%.10g" % p.sag, p.predicted, "%.10g" % p.margin,
                        p.simulated, "" if p.agree is None else int(p.agree)])
    summary = {"points": len(pts),
               "condition2_points": sum(p.predicted == analysis.CONDITION2 for p in pts),
               "runtime_s": round(time.perf_counter() - t0, 2)}
    if args.with_oracle:
        summary["agreement"] = analysis.agreement(pts)
        summary["disagreements_outside_band"] = len(analysis.boundary_band(pts))
    write_json(summary, os.path.join(out, "analysis.json"))
    print(json.dumps(summary))
    return EXIT_OK


def _axis(args):
    if args.values:
        return [float(v) for v in args.values.split(",")]
    lo, hi, n = args.range
    n = int(n)
    if args.log:
        return list(np.geomspace(lo, hi, n))
    return list(np.linspace(lo, hi, n))


def cmd_sweep(args):
    doc = _document(args)
    values = _axis(args)
    docs = [config.set_key(doc, args.param, v) for v in values]
    scs = [config.to_scenario(d) for d in docs]
    out = _outdir(args.out)
    ms = run_many(scs, args.workers)
    keys = []
    for m in ms:
        keys += [k for k in m if k not in keys]
    with open(os.path.join(out, "sweep.csv"), "w", encoding="ascii", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([args.param] + keys)
        for v, m in zip(values, ms):
            w.writerow(["%.10g" % v] + [_cell(m.get(k)) for k in keys])
    write_json({"param": args.param, "values": values, "rows": ms},
               os.path.join(out, "sweep.json"))
    bad = sum(not m.get("complete", False) for m in ms)
    print(f"sweep {args.param}: {len(ms)} points, {bad} non-finite -> {out}")
    return EXIT_NONFINITE if bad else EXIT_OK


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, float):
        return "%.10g" % x
    return x


def build_parser():
    ap = argparse.ArgumentParser(prog="vocfrt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, source=True):
        if source:
            p.add_argument("--config", help="JSON scenario file")
            p.add_argument("--preset", choices=config.PRESETS, help="shipped scenario")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--dt", type=float, help="integration step in seconds")
        p.add_argument("--decimate", type=int, help="record every n-th step")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="parallel simulations")

    p = sub.add_parser("run", help="simulate one scenario")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="simulate two scenarios and tabulate metrics")
    p.add_argument("configs", nargs=2, metavar="CONFIG", help="config path or preset name")
    common(p, source=False)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze", help="classify clearance over an angle x sag grid")
    common(p)
    p.add_argument("--delta-range", nargs=2, type=float, default=(0.0, -math.pi),
                   metavar=("FROM", "TO"), help="clearance angle range in rad")
    p.add_argument("--sag-range", nargs=2, type=float, default=(0.0, 1.0),
                   metavar=("FROM", "TO"), help="grid sag depth range in pu")
    p.add_argument("--n-delta", type=int, default=20)
    p.add_argument("--n-sag", type=int, default=20)
    p.add_argument("--with-oracle", action="store_true",
                   help="simulate every grid point and report agreement")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="vary one config key")
    common(p)
    p.add_argument("--param", required=True, help="dotted key, e.g. frt.gamma_A_per_V")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", help="comma-separated values")
    g.add_argument("--range", nargs=3, type=float, metavar=("FROM", "TO", "N"))
    p.add_argument("--log", action="store_true", help="geometric spacing for --range")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
