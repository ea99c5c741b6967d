"""``knnradar`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 oracle-check failure.
"""
import argparse
import logging
import sys

from ..exceptions import (
    ConfigError,
    InsufficientTrials,
    InvalidCombinatorics,
    KnnRadarError,
)
from . import config as config_mod
from . import experiments as ex

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ORACLE = 0, 2, 3, 4

# which trial count --trials overrides for each subcommand
TRIAL_KEY = {
    "calibrate": "trials.pfa",
    "pfa": "trials.pfa",
    "pd-curve": "trials.pd",
    "cfar-sweep": "trials.pfa",
    "oracle-check": "oracle.n_trials",
    "cos2theta": None,
}


def build_parser():
    p = argparse.ArgumentParser(prog="knnradar", description="KNN adaptive radar detection experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="dotted key = value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--trials", type=int, metavar="N", help="trial count of the subcommand")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--threads", type=int, default=1, metavar="N")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="extra config override, repeatable")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("calibrate", "calibrate every detector at pfa.target and re-test on fresh H0 data"),
        ("pfa", "empirical false-alarm probability"),
        ("pd-curve", "detection probability versus SNR at a common Pfa"),
        ("cfar-sweep", "KNN Pfa across test covariances with training fixed"),
        ("oracle-check", "semi-analytic KNN probability versus brute force"),
        ("cos2theta", "print the mismatch cos^2(theta) of a config"),
    ):
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def _overrides(args):
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    if args.seed is not None:
        out["seed"] = str(args.seed)
    key = TRIAL_KEY[args.command]
    if args.trials is not None and key:
        out[key] = str(args.trials)
    if args.out is not None:
        out["output"] = args.out
    return out


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run(args):
    cfg = config_mod.load(args.config, _overrides(args))
    threads = max(int(args.threads), 1)
    cmd = args.command
    if cmd == "cos2theta":
        scn = cfg.test_scenario
        _emit(
            f"n={scn.n} nu_d={scn.nu_d:.17g} delta_nu={scn.delta_nu:.17g} "
            f"rho={scn.rho:.17g} cos2_theta={scn.cos2_theta:.17g}\n",
            cfg.output,
        )
        return EXIT_OK
    if cmd == "oracle-check":
        report = ex.run_oracle_check(cfg)
        _emit(report.text(), cfg.output)
        return EXIT_OK if report.passed else EXIT_ORACLE
    runner = {
        "calibrate": ex.run_calibration,
        "pfa": ex.run_pfa,
        "pd-curve": ex.run_pd_curve,
        "cfar-sweep": ex.run_cfar_sweep,
    }[cmd]
    rows = runner(cfg, threads=threads)
    _emit(ex.to_csv(rows), cfg.output)
    return EXIT_OK


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, InsufficientTrials, InvalidCombinatorics) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KnnRadarError, ValueError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
