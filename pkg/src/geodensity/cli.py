"""Command-line front end.

Subcommands: ``eval`` (one point), ``grid`` (CSV table), ``validate``
(property checks) and ``prelimit`` (scaled pre-limit ratio against p).

Exit codes: 0 success, 1 validation failure, 2 argument error,
3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import prelimit, validation
from .errors import InvalidArgument, NonFiniteResult, SingularityError
from .limit_density import DensityPoint, SeriesConfig, eval_p, eval_p_hat, eval_ut_tail
from .quadrature import thread_count

EXIT_OK, EXIT_FAIL, EXIT_ARGS, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

CSV_HEADER = ["h", "x", "t", "p", "p_hat", "err_p", "err_phat", "n_used"]
EVALUATORS = {"p": eval_p, "phat": eval_p_hat, "ut-tail": eval_ut_tail}
LABELS = {"p": "p", "phat": "p_hat", "ut-tail": "ut_tail"}


class ArgumentError(Exception):
    pass


def fmt(v: float) -> str:
    return f"{v:.17g}"


def parse_nmax(raw: str) -> int | None:
    if raw.strip().lower() in ("all", "none"):
        return None
    try:
        n = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'all', got {raw!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'all', got {raw!r}")
    return n


def parse_range(raw: str) -> np.ndarray:
    """``a:b:n`` -> n equally spaced values from a to b."""
    parts = raw.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"range must look like a:b:n, got {raw!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must look like a:b:n, got {raw!r}")
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise argparse.ArgumentTypeError(f"range needs finite ends and n >= 1, got {raw!r}")
    return np.linspace(a, b, n)


def read_config(path: str) -> dict[str, str]:
    """Flat ``key=value`` file; ``#`` starts a comment, keys use flag names."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ArgumentError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = val
    return out


def _add_series_flags(p: argparse.ArgumentParser, nmax_default: str | None = "all") -> None:
    p.add_argument("--nmax", type=parse_nmax, default=nmax_default, help="series order, or 'all'")
    p.add_argument("--nodes", type=int, default=48, help="quadrature nodes per contour leg")
    p.add_argument("--eps", type=float, default=1e-15, help="contour truncation tolerance")
    p.add_argument("--config", help="key=value file with defaults for any flag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geodensity", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="evaluate one point")
    ev.add_argument("--h", type=float)
    ev.add_argument("--x", type=float)
    ev.add_argument("--t", type=float)
    ev.add_argument("--density", choices=sorted(EVALUATORS), default="p")
    ev.add_argument("--engine", choices=("fredholm", "tensor"), default="fredholm")
    ev.add_argument("--json", action="store_true", help="emit the result as JSON")
    ev.add_argument("--terms", action="store_true", help="also print per-order term magnitudes")
    _add_series_flags(ev)

    gr = sub.add_parser("grid", help="tabulate p and p̂ on an (h, x) grid as CSV")
    gr.add_argument("--h-range", type=parse_range)
    gr.add_argument("--x-range", type=parse_range)
    gr.add_argument("--t", type=float)
    gr.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    _add_series_flags(gr)

    va = sub.add_parser("validate", help="run the property checks")
    va.add_argument("--suite", choices=validation.SUITES, default="fast")
    va.add_argument("--log", help="also write the report to this file")
    va.add_argument("--config", help="key=value file with defaults for any flag")

    pl = sub.add_parser("prelimit", help="scaled pre-limit density ratio against p")
    pl.add_argument("--h", type=float)
    pl.add_argument("--x", type=float)
    pl.add_argument("--t", type=float)
    pl.add_argument("--L", type=float)
    pl.add_argument("--nmax", type=parse_nmax, default="1", help="series order, or 'all'")
    pl.add_argument("--nodes", type=int, help="nodes per leg (default depends on the engine)")
    pl.add_argument("--json", action="store_true")
    pl.add_argument("--config", help="key=value file with defaults for any flag")
    return parser


RANGE_FLAGS = ("--h-range", "--x-range")


def _join_ranges(argv: list[str]) -> list[str]:
    # "--h-range -1:1:3" would read the negative start as a flag
    out, i = [], 0
    while i < len(argv):
        if argv[i] in RANGE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def parse(argv: list[str] | None) -> argparse.Namespace:
    parser = build_parser()
    argv = _join_ranges(list(sys.argv[1:] if argv is None else argv))
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            values = read_config(args.config)
        except OSError as exc:
            raise ArgumentError(f"cannot read config file: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ArgumentError(f"unknown config keys: {', '.join(unknown)}")
        for action in sub._actions:
            if isinstance(action, argparse._StoreTrueAction) and action.dest in values:
                raw = values[action.dest].lower()
                if raw not in ("1", "0", "true", "false", "yes", "no"):
                    raise ArgumentError(f"config key {action.dest} expects true/false, got {raw!r}")
                values[action.dest] = raw in ("1", "true", "yes")
        # string defaults go through each flag's type converter; explicit flags still win
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise ArgumentError("missing required value(s): " + ", ".join("--" + m for m in missing))


def _series_config(args, engine: str = "fredholm") -> SeriesConfig:
    return SeriesConfig(n_max=args.nmax, nodes_per_leg=args.nodes, eps=args.eps, engine=engine)


def run_eval(args) -> int:
    _require(args, "h", "x", "t")
    pt = DensityPoint(args.h, args.x, args.t)
    res = EVALUATORS[args.density](pt, _series_config(args, args.engine), with_terms=True)
    if args.json:
        print(json.dumps(res.to_dict(), sort_keys=True))
        return EXIT_OK
    print(f"{LABELS[args.density]}= {fmt(res.value)} err= {res.err_estimate:.3e} n_used= {res.n_used}")
    if args.terms:
        for k, c in enumerate(res.terms, 1):
            print(f"term {k} |c|= {abs(c):.6e}")
    return EXIT_OK


def _grid_row(job):
    h, x, t, cfg = job
    pt = DensityPoint(float(h), float(x), t)
    rp = eval_p(pt, cfg, with_terms=True)
    rh = eval_p_hat(pt, cfg)
    return [fmt(pt.h), fmt(pt.x), fmt(t), fmt(rp.value), fmt(rh.value), fmt(rp.err_estimate), fmt(rh.err_estimate), str(rp.n_used)]


def run_grid(args) -> int:
    _require(args, "h-range", "x-range", "t")
    cfg = _series_config(args)
    DensityPoint(0.0, 0.0, args.t)  # validates t before any output is opened
    jobs = [(h, x, args.t, cfg) for h in args.h_range for x in args.x_range]
    try:
        fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot open output: {exc}", file=sys.stderr)
        return EXIT_IO
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_row, jobs))
    else:
        rows = [_grid_row(j) for j in jobs]
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
        fh.flush()
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if fh is not sys.stdout:
            fh.close()
    # diagnostic: location of the maximum along h on the x column nearest 0
    xs = args.x_range
    j = int(np.argmin(np.abs(xs)))
    col = [float(rows[i * len(xs) + j][3]) for i in range(len(args.h_range))]
    print(f"argmax_h p(h, x={fmt(xs[j])}) = {fmt(args.h_range[int(np.argmax(col))])}", file=sys.stderr)
    return EXIT_OK


def run_validate(args) -> int:
    results = []
    for res in validation.run_suite(args.suite):
        print(res.line(), flush=True)
        results.append(res)
    print(validation.summary_line(results, args.suite))
    if args.log:
        try:
            with open(args.log, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(validation.render_report(results, args.suite))
        except OSError as exc:
            print(f"error: cannot write log: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def run_prelimit(args) -> int:
    _require(args, "h", "x", "t", "L")
    if not args.L > 0:
        raise InvalidArgument(f"L must be positive, got {args.L}")
    pt = prelimit.scaled_point(args.h, args.x, args.t, args.L)
    contours = None
    if args.nodes is not None:
        contours = prelimit.PrelimitContours.scaled(args.L, nodes_per_leg=args.nodes)
    ratio = prelimit.scaled_density_ratio(args.h, args.x, args.t, args.L, n_max=args.nmax, contours=contours)
    p = eval_p(DensityPoint(args.h, args.x, args.t)).value
    gap = abs(ratio - p) / abs(p)
    if args.json:
        rec = {"h": args.h, "x": args.x, "t": args.t, "L": args.L, "tau": pt.tau,
               "n_max": args.nmax, "ratio": ratio, "p": p, "rel_gap": gap}
        print(json.dumps(rec, sort_keys=True))
    else:
        print(f"L= {fmt(args.L)} ratio= {fmt(ratio)} p= {fmt(p)} rel_gap= {gap:.6e}")
    return EXIT_OK


COMMANDS = {"eval": run_eval, "grid": run_grid, "validate": run_validate, "prelimit": run_prelimit}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse(argv)
        return COMMANDS[args.command](args)
    except (ArgumentError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (NonFiniteResult, SingularityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
