"""Command-line entry point: ``structprior <subcommand> [flags]``.

Subcommands ``phantom``, ``simulate``, ``reconstruct``, ``sweep`` and
``report``. Every subcommand accepts ``--config FILE``, a flat ``key = value``
file whose keys mirror the long flag names (``iters``, ``no-prewhiten``, ...);
flags given on the command line override the file.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from ..fields import Grid, write_csv, write_image
from ..problem import REGULARIZERS
from .experiment import CASES, METRICS_HEADER, SWEEPABLE, ExperimentConfig, run_case, sweep, \
    write_case_data
from .phantom import generate_phantom_pair

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _add_common(p: argparse.ArgumentParser, full: bool = True) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--size", type=int, default=64, help="grid is size x size (default 64)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-shared", type=int, default=6)
    p.add_argument("--n-unshared", type=int, default=8)
    p.add_argument("--out", default=None, help="output directory")
    if not full:
        return
    p.add_argument("--case", choices=CASES, default="x-ray")
    p.add_argument("--views", type=int, default=10, dest="n_views")
    p.add_argument("--detectors", type=int, default=None, dest="n_detectors")
    p.add_argument("--factor", type=int, default=4, help="super-resolution factor")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reg", choices=REGULARIZERS, default="TV")
    p.add_argument("--alpha", type=float, default=1e-1)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=None,
                   help="default 1.0 for x-ray, 0.9 for super-resolution")
    p.add_argument("--beta", type=float, default=5e-2)
    p.add_argument("--fidelity", choices=("l1", "l2"), default=None)
    p.add_argument("--iters", type=int, default=500, dest="iterations")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--no-prewhiten", action="store_true")
    p.add_argument("--timing-repeats", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structprior",
                                     description="structure-guided image reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="write the target / side-information pair")
    _add_common(p, full=False)

    p = sub.add_parser("simulate", help="write phantom pair and noisy data")
    _add_common(p)

    p = sub.add_parser("reconstruct", help="single reconstruction with metrics")
    _add_common(p)
    _add_solver(p)

    p = sub.add_parser("sweep", help="one reconstruction per parameter value")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--param", choices=SWEEPABLE, required=True)
    p.add_argument("--values", type=float, nargs="+", required=True)

    p = sub.add_parser("report", help="aggregate metrics CSVs below a directory")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("root", help="directory searched recursively for metrics/sweep CSVs")
    p.add_argument("--out", default=None, help="combined CSV (default: print only)")
    parser.subcommands = sub.choices
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse ``argv`` with defaults taken from ``--config`` when present."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if a in parser.subcommands), None)
    if known.config is None or command is None:
        return parser.parse_args(argv)
    subparser = parser.subcommands[command]
    actions = {a.dest: a for a in subparser._actions}
    aliases = {"iters": "iterations", "views": "n_views", "detectors": "n_detectors"}
    defaults = {}
    for key, value in read_config_file(known.config).items():
        if key == "prewhiten":
            key, value = "no_prewhiten", str(value.lower() in FALSE_WORDS)
        key = aliases.get(key, key)
        if key not in actions or key == "config":
            parser.error(f"unknown key {key!r} in {known.config}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            low = value.lower()
            if low not in TRUE_WORDS | FALSE_WORDS:
                parser.error(f"{key}: expected a boolean, got {value!r}")
            defaults[key] = low in TRUE_WORDS
        elif action.nargs in ("+", "*"):
            defaults[key] = [action.type(v) for v in value.replace(",", " ").split()]
        else:
            converted = action.type(value) if action.type else value
            if action.choices is not None and converted not in action.choices:
                parser.error(f"{key}: invalid choice {value!r}")
            defaults[key] = converted
    subparser.set_defaults(**defaults)
    # required options may now be satisfied by the file
    for a in subparser._actions:
        if a.dest in defaults:
            a.required = False
    return parser.parse_args(argv)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kwargs = {
        "size": args.size, "seed": args.seed, "n_shared": args.n_shared,
        "n_unshared": args.n_unshared, "out": args.out,
    }
    for name in ("case", "n_views", "n_detectors", "factor", "reg", "alpha", "eta", "gamma",
                 "beta", "fidelity", "iterations", "rho", "timing_repeats"):
        if hasattr(args, name):
            kwargs[name] = getattr(args, name)
    if hasattr(args, "no_prewhiten"):
        kwargs["prewhiten"] = not args.no_prewhiten
    return ExperimentConfig(**kwargs)


def _report(root, out=None) -> list[list[str]]:
    rows = []
    for path in sorted(Path(root).rglob("*.csv")):
        if path.name != "metrics.csv" and not path.name.startswith("sweep_"):
            continue
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != METRICS_HEADER:
                continue
            rows.extend(reader)
    # sweep CSVs repeat rows of their per-value metrics.csv
    unique = sorted(set(map(tuple, rows)))
    if out:
        write_csv(out, METRICS_HEADER, unique)
    return [list(r) for r in unique]


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config_file(parser, argv)

    if args.command == "report":
        rows = _report(args.root, args.out)
        print(",".join(METRICS_HEADER))
        for r in rows:
            print(",".join(r))
        return 0

    cfg = config_from_args(args) if args.command != "phantom" else None
    out = Path(args.out or ".")

    if args.command == "phantom":
        pair = generate_phantom_pair(Grid.square(args.size), args.seed, args.n_shared,
                                     args.n_unshared)
        out.mkdir(parents=True, exist_ok=True)
        write_image(pair.u_true, out / "u_true.pgm", (0.0, float(pair.u_true.max())))
        write_image(pair.v, out / "v.pgm", (float(pair.v.min()), float(pair.v.max())))
        print(f"wrote {out / 'u_true.pgm'} and {out / 'v.pgm'}")
    elif args.command == "simulate":
        write_case_data(cfg, out)
        print(f"wrote phantom pair and {cfg.case} data to {out}")
    elif args.command == "reconstruct":
        record, _, _ = run_case(cfg)
        print(",".join(METRICS_HEADER))
        print(",".join(record.row()))
        print(f"# wall time {record.wall_time:.3f} s", file=sys.stderr)
    elif args.command == "sweep":
        records = sweep(cfg, args.param, args.values)
        print(",".join(METRICS_HEADER))
        for r in records:
            print(",".join(r.row()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
