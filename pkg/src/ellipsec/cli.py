"""Command line entry point ``ellipsec``.

Exit codes: 0 ok, 1 invalid configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    PLOT_KINDS,
    ConfigError,
    ExperimentConfig,
    emit_plotdata,
    parse_key_values,
    run_bound_audit,
    run_decay,
    run_dichotomy,
    run_gelfand,
    run_lower_probe,
    run_radius,
    run_recovery_sweep,
)
from .recovery import DecodeError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

# subcommand -> experiment name stored in the config
SUBCOMMANDS = {
    "gelfand": "gelfand",
    "radius": "radius",
    "decay": "decay",
    "dichotomy": "dichotomy",
    "audit": "bound_audit",
    "probe": "lower_probe",
    "recover": "recovery_sweep",
}


def _global_flags(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="FILE", default=d, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=d, help="base seed (overrides the config)")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1, help="worker threads; never changes output")
    parser.add_argument("--out", metavar="DIR", default=d, help="output directory (default: config 'output' or .)")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser():
    parser = argparse.ArgumentParser(prog="ellipsec", description="Sections of l_p-ellipsoids: radii, bounds and experiments.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        _global_flags(sp, suppress=True)
        sp.add_argument("overrides", nargs="*", metavar="KEY=VALUE", help="config overrides")
    sp = sub.add_parser("plotdata")
    _global_flags(sp, suppress=True)
    sp.add_argument("kind", choices=PLOT_KINDS)
    sp.add_argument("input", nargs="?", help="CSV produced by decay, radius, dichotomy or probe")
    sp.add_argument("--grid", type=int, default=50, help="phase diagram resolution")
    return parser


def _load(args, experiment):
    overrides = parse_key_values(args.overrides)
    overrides["experiment"] = experiment
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_mapping(overrides)


def _run(args):
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if args.command == "plotdata":
        if args.grid < 1:
            raise ConfigError("--grid must be >= 1")
        if args.kind != "phase_diagram" and args.input is None:
            raise ConfigError(f"plot kind {args.kind} needs an input CSV")
        if args.input is not None and not Path(args.input).is_file():
            raise ConfigError(f"no such file: {args.input}")
        out = Path(args.out or ".")
        path = _write(emit_plotdata(args.input, args.kind, grid=args.grid), out, ".tsv")
        print(path)
        return
    cfg = _load(args, SUBCOMMANDS[args.command])
    out = Path(args.out or cfg.output or ".")
    th = args.threads
    written = []
    if args.command == "gelfand":
        written.append(_write(run_gelfand(cfg), out))
    elif args.command == "radius":
        written.append(_write(run_radius(cfg, th), out))
    elif args.command == "decay":
        res = run_decay(cfg, th)
        written += [_write(res.trials, out), _write(res.fit, out)]
        pred = "n/a" if res.predicted_slope is None else f"{-res.predicted_slope:.4g}"
        print(f"slope {res.slope:.6g}  constant {res.constant:.6g}  predicted {pred}")
    elif args.command == "dichotomy":
        summary, trials = run_dichotomy(cfg, th)
        written += [_write(summary, out), _write(trials, out)]
    elif args.command == "audit":
        summary, trials = run_bound_audit(cfg, th)
        written += [_write(summary, out), _write(trials, out)]
        spread = summary.rows[0]["spread"]
        print(f"C_hat spread {spread:.6g} ({'stable' if spread <= 2 else 'unstable'})")
    elif args.command == "probe":
        summary, trials = run_lower_probe(cfg, th)
        written += [_write(summary, out), _write(trials, out)]
    elif args.command == "recover":
        written.append(_write(run_recovery_sweep(cfg, th), out))
    for p in written:
        print(p)


def _write(table, out, suffix=".csv"):
    for row in table.rows:
        for k, v in row.items():
            if isinstance(v, (float, np.floating)) and np.isnan(v):
                raise FloatingPointError(f"{table.name}: column {k} is NaN")
    return table.write(out, suffix)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        print(f"ellipsec: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, DecodeError, FloatingPointError) as exc:
        print(f"ellipsec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
