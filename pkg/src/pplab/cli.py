"""Command-line front end: ``pplab <verb> [options]``.

Exit codes: 0 success, 2 argument error, 3 profile validation failure,
4 example mismatch.
"""
from __future__ import annotations

import argparse
import random
import sys

from . import __version__
from .attack import ProfileError, default_profile, load_profile
from .cases import CASES, run_case
from .montecarlo import MAX_ENUM_BITS, RunConfig, enumerate_outcomes, simulate_run
from .protocol import round_trip
from .security import default_grid, info_curves, rows_to_csv, threshold_report

EXIT_OK, EXIT_USAGE, EXIT_PROFILE, EXIT_MISMATCH = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pplab", description="Ping-pong protocol attack simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def with_profile(sp):
        sp.add_argument("--profile", metavar="FILE", help="attack profile (key=value); default profile if omitted")
        return sp

    hc = sub.add_parser("honest-check", help="encode/decode round trips without attack")
    hc.add_argument("--trials", type=_positive, default=10_000)
    hc.add_argument("--seed", type=int, default=0)

    sim = with_profile(sub.add_parser("simulate", help="simulate one finite run"))
    sim.add_argument("--n", type=_positive, default=1000)
    sim.add_argument("--eta", type=_probability, default=0.5)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--alice", metavar="BITS")
    sim.add_argument("--tags", metavar="STRING", help="per-bit attack tags from n/u/s")
    sim.add_argument("--records", metavar="PATH", help="write round records CSV ('-' for stdout)")

    en = with_profile(sub.add_parser("enumerate", help="exact outcome atlas for a short Alice string"))
    en.add_argument("--alice", metavar="BITS", required=True)
    en.add_argument("--tags", metavar="STRING")
    en.add_argument("--condition", choices=("all-arrived", "unconditional"), default="all-arrived")

    sw = with_profile(sub.add_parser("sweep", help="information curves over eta"))
    sw.add_argument("--grid", type=int, default=101, metavar="K", help="number of eta points on [0, 1]")
    sw.add_argument("--normalization", choices=("per-arrived", "per-sent"), default="per-arrived")
    sw.add_argument("--trials", type=int, default=0, metavar="T", help="Monte Carlo runs per eta")
    sw.add_argument("--n", type=_positive, default=1000, help="bits per Monte Carlo run")
    sw.add_argument("--seed", type=int, default=0)

    th = with_profile(sub.add_parser("thresholds", help="security threshold report"))
    th.add_argument("--normalization", choices=("per-arrived", "per-sent"), default="per-arrived")

    ex = with_profile(sub.add_parser("example", help="replay a worked case"))
    ex.add_argument("--name", choices=sorted(CASES), required=True)
    return p


def _profile(args):
    if getattr(args, "profile", None) is None:
        return default_profile()
    try:
        return load_profile(args.profile)
    except OSError as exc:
        raise UsageError(f"cannot read profile {args.profile}: {exc.strerror}") from None


def cmd_honest_check(args, out) -> int:
    rng = random.Random(args.seed)
    failures = 0
    worst = 0.0
    for _ in range(args.trials):
        b = rng.getrandbits(1)
        got, conf = round_trip(b)
        worst = max(worst, abs(conf - 1.0))
        failures += got != b or abs(conf - 1.0) > 1e-12
    out.write(f"trials={args.trials}\nfailures={failures}\nmax_confidence_deviation={worst:.3g}\n")
    out.write("PASS\n" if failures == 0 else "FAIL\n")
    return EXIT_OK if failures == 0 else EXIT_MISMATCH


def cmd_simulate(args, out) -> int:
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    try:
        config = RunConfig(args.n, args.eta, args.seed, _profile(args), args.alice, args.tags)
    except ValueError as exc:
        if isinstance(exc, ProfileError):
            raise
        raise UsageError(str(exc)) from None
    rounds, stats = simulate_run(config)
    out.write(stats.to_text())
    if args.records == "-":
        out.write(rounds.to_csv())
    elif args.records:
        with open(args.records, "w", newline="\n") as fh:
            fh.write(rounds.to_csv())
    return EXIT_OK


def cmd_enumerate(args, out) -> int:
    profile = _profile(args)
    if len(args.alice) > MAX_ENUM_BITS:
        raise UsageError(f"--alice longer than the enumeration bound ({MAX_ENUM_BITS})")
    try:
        atlas = enumerate_outcomes(args.alice, args.tags, profile, args.condition)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.write(atlas.to_csv())
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    if args.grid < 2:
        raise UsageError("--grid needs at least 2 points")
    if args.trials < 0:
        raise UsageError("--trials must be non-negative")
    rows = info_curves(default_grid(args.grid), _profile(args), args.normalization,
                       trials=args.trials, n_bits=args.n, seed=args.seed)
    out.write(rows_to_csv(rows))
    return EXIT_OK


def cmd_thresholds(args, out) -> int:
    out.write(threshold_report(_profile(args), args.normalization).to_text())
    return EXIT_OK


def cmd_example(args, out) -> int:
    res = run_case(args.name, _profile(args))
    out.write(res.render())
    return EXIT_OK if res.passed else EXIT_MISMATCH


COMMANDS = {
    "honest-check": cmd_honest_check,
    "simulate": cmd_simulate,
    "enumerate": cmd_enumerate,
    "sweep": cmd_sweep,
    "thresholds": cmd_thresholds,
    "example": cmd_example,
}


def run_cli(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.verb](args, out)
    except ProfileError as exc:
        err.write(f"pplab: invalid profile: {exc}\n")
        return EXIT_PROFILE
    except UsageError as exc:
        err.write(f"pplab: {exc}\n")
        return EXIT_USAGE


def main():
    sys.exit(run_cli())
