"""Command line front end: ``metamolecule run|compare|spectrum``.

Exit status: 0 success, 1 a guard fired (or a comparison failed), 2 usage or
configuration error. ``METAMOLECULE_WORKERS`` overrides the worker count.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import spectrum
from .errors import GuardAbort
from .io import (
    CompareSettings,
    ConfigError,
    SeriesFormatError,
    apply_overrides,
    comparison_report,
    load_series,
    parse_config,
    run,
)

EXIT_OK, EXIT_GUARD, EXIT_USAGE = 0, 1, 2


def _cmd_run(args) -> int:
    text = Path(args.config).read_text() if args.config else ""
    cfg = parse_config(text)
    overrides = {}
    if args.engine:
        overrides["engine"] = args.engine
    if args.output:
        overrides["output"] = args.output
    if args.seed is not None:
        overrides["seed"] = args.seed
    env = os.environ.get("METAMOLECULE_WORKERS")
    if env:
        try:
            overrides["workers"] = max(1, int(env))
        except ValueError:
            raise ConfigError(f"METAMOLECULE_WORKERS must be an integer, got {env!r}") from None
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    out = Path(cfg.output)
    try:
        result = run(cfg, out, log=lambda m: print(m, file=sys.stderr))
    except GuardAbort as e:
        out.mkdir(parents=True, exist_ok=True)
        record = {"guard": e.guard, "message": str(e), "diagnostics": e.diagnostics, "config_hash": cfg.digest()}
        (out / "abort.json").write_text(json.dumps(record, indent=2, sort_keys=True, default=float) + "\n")
        print(f"aborted by guard '{e.guard}': {e}", file=sys.stderr)
        return EXIT_GUARD
    if result["report"] is not None:
        _print_report(result["report"])
        if not result["report"]["passed"]:
            print("guard 'equivalence' failed", file=sys.stderr)
            return EXIT_GUARD
    return EXIT_OK


def _print_report(report):
    for ch, r in report["channels"].items():
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{ch}: rmse={r['rmse']:.4g} max={r['max_abs']:.4g} max_se={r['max_se']:.3g} {status}")


def _cmd_compare(args) -> int:
    a, b = load_series(args.a), load_series(args.b)
    settings = CompareSettings(args.rmse_tol, args.sigma_factor, args.abs_slack, tuple(args.channel))
    t_range = (args.t_min, args.t_max) if args.t_max is not None else None
    report = comparison_report(a, b, settings, t_range=t_range)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        _print_report(report)
    return EXIT_OK if report["passed"] else EXIT_GUARD


def _cmd_spectrum(args) -> int:
    s = load_series(args.series)
    window = tuple(args.window) if args.window else None
    peaks = spectrum(s[args.channel], s.t, window=window)
    for w, amp in peaks[: args.top]:
        print(f"{w:.6f}\t{amp:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metamolecule", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the trajectory and/or grid engine")
    r.add_argument("config", nargs="?", help="YAML config (defaults apply when omitted)")
    r.add_argument("--engine", choices=("pwd", "grid", "both"))
    r.add_argument("--output", "-o")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=_cmd_run)

    defaults = CompareSettings()
    c = sub.add_parser("compare", help="compare two series files")
    c.add_argument("a", help="series carrying the standard errors (normally pwd)")
    c.add_argument("b")
    c.add_argument("--channel", action="append", default=None)
    c.add_argument("--rmse-tol", type=float, default=defaults.rmse_tol)
    c.add_argument("--sigma-factor", type=float, default=defaults.sigma_factor)
    c.add_argument("--abs-slack", type=float, default=defaults.abs_slack)
    c.add_argument("--t-min", type=float, default=0.0)
    c.add_argument("--t-max", type=float, default=None)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=_cmd_compare)

    s = sub.add_parser("spectrum", help="spectral peaks of one channel")
    s.add_argument("series")
    s.add_argument("--channel", default="sx")
    s.add_argument("--window", nargs=2, type=float, metavar=("T0", "T1"))
    s.add_argument("--top", type=int, default=5)
    s.set_defaults(func=_cmd_spectrum)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if getattr(args, "channel", None) is None and args.command == "compare":
        args.channel = list(CompareSettings().channels)
    try:
        return args.func(args)
    except (ConfigError, SeriesFormatError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
