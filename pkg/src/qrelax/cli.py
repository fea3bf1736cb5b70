"""qrelax command line.

Subcommands:
  qrelax run <config>                        run a scenario file
  qrelax check                               run the structural invariant suite
  qrelax table coefficients --beta-min ...   emit the coefficient sweep table

Exit codes: 0 success, 2 configuration error, 3 solver instability,
4 invariant-suite failure (`check`).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checks import run_invariant_suite
from .config import ScenarioConfig, parse_config
from .core import PhysParams
from .errors import ConfigError, InstabilityError
from .output import write_csv
from .scenarios import coefficient_table_rows, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3
EXIT_CHECK_FAILED = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrelax",
        description="Relaxation simulators for open quantum systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario configuration file")
    run_p.add_argument("config", help="path to the scenario file")
    _common_flags(run_p)

    check_p = sub.add_parser("check", help="run the structural invariant suite")
    _common_flags(check_p)

    table_p = sub.add_parser("table", help="emit closed-form tables")
    table_sub = table_p.add_subparsers(dest="table_kind", required=True)
    coeff_p = table_sub.add_parser("coefficients", help="relaxation coefficient sweep")
    coeff_p.add_argument("--beta-min", type=float, required=True)
    coeff_p.add_argument("--beta-max", type=float, required=True)
    coeff_p.add_argument("--points", type=int, required=True)
    _common_flags(coeff_p)
    return parser


def _common_flags(p):
    p.add_argument("--output", default=None, help="output directory")
    p.add_argument("--format", default=None, choices=["csv", "csv+svg"],
                   help="output format (default csv)")
    p.add_argument("--jobs", type=int, default=1, help="worker bound for sweeps")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for any randomized check inputs")


def _cmd_run(args) -> int:
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        for line in exc.violations:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results, files = run_scenario(
            config, output_dir=args.output, fmt=args.format, jobs=args.jobs
        )
    except InstabilityError as exc:
        print(f"solver instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except (ValueError, OverflowError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for r in results:
        print(r.line())
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def _cmd_check(args) -> int:
    results = run_invariant_suite(seed=args.seed)
    for r in results:
        print(r.line())
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "check_report.txt").write_text(
            "\n".join(r.line() for r in results) + "\n"
        )
    return EXIT_OK if n_fail == 0 else EXIT_CHECK_FAILED


def _cmd_table(args) -> int:
    if not 0 < args.beta_min < args.beta_max:
        print("config error: requires 0 < beta-min < beta-max", file=sys.stderr)
        return EXIT_CONFIG
    if args.points < 2:
        print("config error: requires points >= 2", file=sys.stderr)
        return EXIT_CONFIG
    rows = coefficient_table_rows(
        PhysParams(), args.beta_min, args.beta_max, args.points, jobs=args.jobs
    )
    out = Path(args.output or "out")
    path = out / "coefficients.csv"
    write_csv(path, ["beta", "B", "D_p", "eps_exact", "eps_mh"], list(zip(*rows)))
    print(f"wrote {path}")
    if args.format == "csv+svg":
        import numpy as np

        from .output import write_svg_lineplot

        cols = list(zip(*rows))
        svg = out / "coefficients.svg"
        write_svg_lineplot(svg, np.array(cols[0]), [np.array(c) for c in cols[1:]],
                           ["B", "D_p", "eps_exact", "eps_mh"],
                           title="relaxation coefficients")
        print(f"wrote {svg}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        code = _cmd_run(args)
    elif args.command == "check":
        code = _cmd_check(args)
    else:
        code = _cmd_table(args)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
