"""Command-line front end: ``speedmeter {psd,snr,scenario,oracle}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .config import ConfigError, ScenarioConfig, load_config, parse_band, parse_config
from .langevin import StabilityError, StepBudgetError
from .quadrature import QuadratureError
from .response import PoleError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ORACLE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _resolve_config(args) -> ScenarioConfig:
    unit = args.freq_unit
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    cfg = load_config(args.config, unit, overrides) if args.config else parse_config("", unit, overrides)
    if args.band:
        lo, hi = parse_band(args.band)
        scale = 2.0 * math.pi if cfg.frequency_unit == "hz" else 1.0
        cfg.band = (lo * scale, hi * scale)
    if args.out:
        cfg.output_path = args.out
    return cfg


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def _emit(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_CONFIG) from None


def _csv_text(cfg: ScenarioConfig, columns, rows, footer=()) -> str:
    buf = io.StringIO()
    buf.write(f"# config: {cfg.as_json()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def cmd_psd(args) -> int:
    from .scenarios import CSV_COLUMNS, psd_rows

    cfg = _resolve_config(args)
    if args.variants:
        cfg.variants = tuple(v.strip() for v in args.variants.split(","))
    try:
        rows = psd_rows(cfg)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    _emit(_csv_text(cfg, CSV_COLUMNS, rows), cfg.output_path)
    return EXIT_OK


def cmd_snr(args) -> int:
    from .scenarios import SNR_COLUMNS, monotonicity, snr_sweep

    cfg = _resolve_config(args)
    if args.taus:
        cfg.taus = tuple(float(t) for t in args.taus.split(","))
    taus = cfg.taus or tuple(float(t) for t in np.geomspace(1e-8, 1e-2, 30))
    sig = cfg.signal
    if sig["kind"] != "gravitational":
        sig = {"kind": "gravitational", "m_chi": 1e-5, "b": 1e-3}
    rows = snr_sweep(cfg.detector, sig["m_chi"], sig["b"], taus, band=cfg.band,
                     optimize_velocity=args.optimize_velocity)
    footer = [
        f"diagnostic: snr_velocity_exact {monotonicity([r[1] for r in rows])} in tau",
        f"diagnostic: snr_position_exact {monotonicity([r[3] for r in rows])} in tau",
        f"diagnostic: ratio_velocity_position {monotonicity([r[4] for r in rows])} in tau",
    ]
    _emit(_csv_text(cfg, SNR_COLUMNS, rows, footer), cfg.output_path)
    return EXIT_OK


def _parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise CliError(f"--set expects KEY=VALUE, got {item!r}", EXIT_CONFIG)
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise CliError(f"--set {k}: expected a number, got {v!r}", EXIT_CONFIG) from None
    return out


def cmd_scenario(args) -> int:
    from .scenarios import SCENARIOS, format_report

    if args.name not in SCENARIOS:
        raise CliError(f"unknown scenario {args.name!r}; choose from {', '.join(SCENARIOS)}", EXIT_CONFIG)
    overrides = _parse_sets(args.set)
    try:
        report = SCENARIOS[args.name](overrides)
    except (KeyError, ValueError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    sys.stdout.write(format_report(report) + "\n")
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        _emit(text, args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracle import run_oracle

    seed = args.seed if args.seed is not None else 0
    if args.config:
        seed = load_config(args.config, overrides={"seed": seed} if args.seed is not None else None).seed
    report = run_oracle(seed=seed, segments=args.segments, trajectories=args.trajectories)
    text = report.text()
    _emit(text, args.out)
    if args.out:
        sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="speedmeter", description="Force-noise spectra, matched-filter SNR "
                                 "and Monte Carlo checks for optomechanical impulse sensors.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, band=True):
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
        p.add_argument("--freq-unit", choices=("rad_s", "hz"), default=None,
                       help="unit of rates in the config and --band (default rad_s)")
        p.add_argument("--seed", type=int, default=None)
        if band:
            p.add_argument("--band", metavar="LO:HI", help="frequency band")

    p = sub.add_parser("psd", help="tabulate force-noise PSD components")
    common(p)
    p.add_argument("--variants", help="comma list of position, velocity, position_detuned, velocity_detuned")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("snr", help="flyby SNR versus interaction time")
    common(p)
    p.add_argument("--taus", help="comma list of flyby times in s")
    p.add_argument("--optimize-velocity", action="store_true",
                   help="re-optimise the velocity-meter coupling at each tau")
    p.set_defaults(func=cmd_snr)

    p = sub.add_parser("scenario", help="named scenario report")
    p.add_argument("name", help="gas-collision or dark-matter-flyby")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario input")
    p.add_argument("--out", metavar="PATH", help="write the JSON report here")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("oracle", help="toy-parameter Monte Carlo validation")
    common(p, band=False)
    p.add_argument("--segments", type=int, default=1024, help="Welch segments per PSD run")
    p.add_argument("--trajectories", type=int, default=600, help="trajectories for the SNR check")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, StepBudgetError, StabilityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, PoleError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
