"""Command-line entry point: ``stfr {converge,order-vs-c,entropy,cost,selftest}``.

Configuration comes from ``--config FILE`` (repeatable, later files win)
followed by ``--<key> VALUE`` flags, one per :class:`RunConfig` field.
Exit status: 0 when every run converged (and, for ``selftest``, every
property passed), 1 otherwise, 2 for invalid configurations.
"""

from __future__ import annotations

import argparse
import sys

from stfr.config import CONFIG_KEYS, RunConfig
from stfr.errors import ConfigurationError
from stfr.harness import (
    ResultTable,
    emit,
    run_convergence,
    run_cost_study,
    run_entropy_study,
    run_order_vs_c,
)

COMMANDS = {
    "converge": (run_convergence, "L2 error and observed order over an N sweep"),
    "order-vs-c": (run_order_vs_c, "order from the last two N levels per c, space-time and RK54 reference"),
    "entropy": (run_entropy_study, "entropy preservation (two-point) or stability (upwind) study"),
    "cost": (run_cost_study, "last-timeslab right-hand-side assemblies per node combo and c"),
}


def _add_config_flags(parser):
    parser.add_argument("--config", action="append", default=[], metavar="FILE",
                        help="key=value configuration file (repeatable)")
    for key in CONFIG_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}", metavar="VALUE", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stfr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        _add_config_flags(sub.add_parser(name, help=helptext))
    st = sub.add_parser("selftest", help="run the property suites")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--pairs", type=int, default=1000, help="random state pairs per two-point check")
    st.add_argument("--output", default="-")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    for path in args.config:
        cfg = RunConfig.from_file(path, cfg)
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return cfg.with_overrides(**overrides) if overrides else cfg


def _selftest(args) -> int:
    from stfr.selftest import run_selftest

    results = run_selftest(seed=args.seed, n_pairs=args.pairs)
    table = ResultTable("selftest", RunConfig(seed=args.seed), ["property", "value", "tolerance", "passed"])
    for r in results:
        table.add(property=r.name, value=r.value, tolerance=r.tolerance, passed=r.passed)
    table.ok = all(r.passed for r in results)
    emit(table, args.output)
    return 0 if table.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return _selftest(args)
        cfg = config_from_args(args)
        table = COMMANDS[args.command][0](cfg)
    except ConfigurationError as exc:
        print(f"stfr: configuration error: {exc}", file=sys.stderr)
        return 2
    emit(table, cfg.output)
    return 0 if table.ok else 1


if __name__ == "__main__":
    sys.exit(main())
