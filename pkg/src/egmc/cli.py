"""Command-line front end.

Subcommands map one-to-one onto experiment kinds; flags override config-file
values which override built-in defaults.  Exit codes: 0 success, 2 invalid
configuration, 3 unwritable output path, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .errors import CalibrationError, ConfigError, UndefinedStatisticError
from .harness import ExperimentSpec, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OUTPUT = 3
EXIT_NUMERICAL = 4

# (flag, config key, type, help)
_OVERRIDE_FLAGS = [
    ("--D", "D_um2_per_s", float, "diffusion coefficient [um^2/s]"),
    ("--L", "L_um", float, "transmitter distance [um]"),
    ("--R", "R_um", float, "receiver radius [um]"),
    ("--r-x", "r_x_um", float, "1D receiver position [um]"),
    ("--dt", "dt_s", float, "time step [s]"),
    ("--steps", "n_steps", int, "number of iterations"),
    ("--particles", "n_particles", int, "released molecules"),
    ("--alpha", "alpha", float, "boundary-shift coefficient"),
    ("--streams", "n_streams", int, "independent RNG sub-ensembles"),
    ("--repeats", "n_repeats", int, "repeat count for noise/calibration"),
    ("--alpha-min", "alpha_min", float, "calibration grid lower edge"),
    ("--alpha-max", "alpha_max", float, "calibration grid upper edge"),
    ("--alpha-points", "alpha_points", int, "calibration grid size"),
    ("--t-factor", "t_factor", float, "1D final-time factor (t_f = factor L^2/D)"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egmc",
        description="Diffusion-channel Monte Carlo with an effective-geometry receiver")
    parser.add_argument("--version", action="version", version=f"egmc {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(cmd):
        cmd.add_argument("--config", metavar="PATH",
                         help="key=value config file; flags override it")
        cmd.add_argument("--out", metavar="PATH", help="result file path")
        cmd.add_argument("--format", choices=("csv", "json"))
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--threads", type=int, default=1)
        cmd.add_argument("--plot", action=argparse.BooleanOptionalAction,
                         default=None,
                         help="render a PNG alongside the table "
                              "(default: on for repro, off otherwise)")
        for flag, _, caster, help_text in _OVERRIDE_FLAGS:
            cmd.add_argument(flag, type=caster, help=help_text, dest=flag.lstrip("-").replace("-", "_"))
        return cmd

    for kind in ("run1d", "run3d", "calibrate1d", "calibrate3d"):
        add_common(sub.add_parser(kind, help=f"run the {kind} experiment"))
    add_common(sub.add_parser("noise", help="repeat a 3D run and profile count noise"))
    cmd = add_common(sub.add_parser("inaccuracy", help="step-size sweep of both engines"))
    cmd.add_argument("--dts", metavar="LIST",
                     help="comma-separated step sizes [s]")
    cmd = add_common(sub.add_parser("repro", help="run a bundled reference study (fig4..fig9)"))
    cmd.add_argument("figure", choices=("fig4", "fig5", "fig6", "fig7", "fig8", "fig9"))
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    params = {}
    if args.config:
        params.update(load_config(args.config))
    for flag, key, _, _ in _OVERRIDE_FLAGS:
        value = getattr(args, flag.lstrip("-").replace("-", "_"), None)
        if value is not None:
            params[key] = value
    if args.seed is not None:
        params["seed"] = args.seed
    if getattr(args, "dts", None):
        params["dt_list_s"] = [float(v) for v in args.dts.split(",") if v.strip()]
    if getattr(args, "figure", None):
        params["figure"] = args.figure
    kind = args.command
    if "kind" in params and params["kind"] != kind:
        raise ConfigError(
            f"config file says kind={params['kind']!r} but the subcommand is {kind!r}")
    params.pop("kind", None)
    out = args.out or params.pop("out", None)
    fmt = args.format or params.pop("format", None) or "csv"
    plot = args.plot if args.plot is not None else params.pop("plot", None)
    params.pop("out", None)
    params.pop("format", None)
    params.pop("plot", None)
    threads = args.threads if args.threads else int(params.pop("threads", 1))
    params.pop("threads", None)
    return ExperimentSpec(kind=kind, params=params, output_path=out,
                          format=fmt, plot=plot, threads=threads)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = _spec_from_args(args)
        from .harness import run_experiment
        out_path = run_experiment(spec)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except (CalibrationError, UndefinedStatisticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(out_path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
