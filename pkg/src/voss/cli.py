"""Command-line front door for the loss-estimation toolkit.

Four subcommands: ``solve`` runs the radial power flow on a feeder file
and writes node/segment CSVs; ``benchmark`` compares the voltage-only
estimates against simulated truth per line and per path; ``oracle``
checks the distributed-extraction correction factor against a
discretized line simulation; ``sensors`` turns a day of field voltage
readings into loss curves.  All outputs are plain CSV (plot data in
long format, rendering left to external tools) and byte-identical
across runs with identical inputs.

Exit codes: 0 success, 1 usage error, 2 input or parse error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .benchmark import (
    NEAR_ZERO_POWER_FRACTION,
    RhoSource,
    excluded_lines,
    run_multi_segment_study,
    run_single_segment_study,
    write_comparison_csv,
    write_plot_long_csv,
)
from .feeder import FeederFormatError, expand_distributed_loads, parse_feeder
from .line_oracle import sweep_rho, write_sweep_csv
from .powerflow import (
    PowerFlowError,
    SolveOptions,
    solve,
    write_flows_csv,
    write_voltages_csv,
)
from .sensors import (
    SensorFormatError,
    ingest_csv,
    loss_curve,
    parse_chain_config,
    write_loss_curve_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

DEFAULT_RHO_LIST = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"


class _Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2 for usage errors; this tool uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_paths(text: str) -> list:
    """'head-tail,head-tail' -> [(head, tail), ...]."""
    pairs = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        head, sep, tail = token.partition("-")
        if not sep or not head or not tail:
            raise ValueError(f"bad path {token!r}, expected HEAD-TAIL")
        pairs.append((head, tail))
    if not pairs:
        raise ValueError("no paths given")
    return pairs


def _parse_rho_list(text: str) -> list:
    values = [float(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise ValueError("no rho values given")
    return values


def _typed(parse):
    """Adapt a ValueError-raising parser to argparse's error reporting."""

    def wrapper(text):
        try:
            return parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return wrapper


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _options(args) -> SolveOptions:
    return SolveOptions(tol=args.tol, max_iter=args.max_iter)


def cmd_solve(args) -> int:
    model = parse_feeder(args.feeder)
    solution = solve(expand_distributed_loads(model), _options(args))
    out = _out_dir(args)
    voltages = out / f"voltages_{model.name}.csv"
    flows = out / f"flows_{model.name}.csv"
    write_voltages_csv(solution, voltages)
    write_flows_csv(solution, flows)
    print(
        f"{model.name}: converged in {solution.iterations} iterations, "
        f"max mismatch {solution.max_mismatch:.3e} pu, "
        f"power balance {solution.power_balance_residual_pu():.3e} pu"
    )
    for flag in solution.flags:
        print(f"warning: {flag}")
    print(f"wrote {voltages}")
    print(f"wrote {flows}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    model = parse_feeder(args.feeder)
    options = _options(args)
    rows = run_single_segment_study(
        model, options=options, near_zero_fraction=args.near_zero_threshold
    )
    out = _out_dir(args)
    single = out / f"single_segment_{model.name}.csv"
    write_comparison_csv(rows, single)
    plot = out / f"plot_long_{model.name}.csv"
    write_plot_long_csv(rows, plot)
    print(
        f"{model.name}: {len(rows)} line-phase rows, "
        f"excluded lines: {', '.join(excluded_lines(rows)) or 'none'}"
    )
    print(f"wrote {single}")
    print(f"wrote {plot}")
    if args.paths:
        multi_rows = run_multi_segment_study(
            model,
            args.paths,
            rho_source=args.rho_s_source,
            options=options,
            near_zero_fraction=args.near_zero_threshold,
        )
        multi = out / f"multi_segment_{model.name}.csv"
        write_comparison_csv(multi_rows, multi)
        print(f"wrote {multi}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    rows = sweep_rho(args.rho_list, args.segments)
    out = _out_dir(args)
    path = out / "oracle_sweep.csv"
    write_sweep_csv(rows, path)
    worst = max(rows, key=lambda r: r.deviation)
    print(
        f"n={args.segments}: worst |oracle - formula| = {worst.deviation:.3e} "
        f"at rho={worst.rho:g}"
    )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sensors(args) -> int:
    config = parse_chain_config(args.chain_config)
    series_list = ingest_csv(
        args.data_csv,
        nominal_voltage=config.nominal_voltage_v,
        calibration=config.calibration,
    )
    series = {s.sensor_id: s for s in series_list}
    for s in series_list:
        if s.duplicates_dropped:
            print(
                f"note: {s.sensor_id}: dropped {s.duplicates_dropped} "
                f"duplicate timestamp(s), kept first"
            )
    curves = loss_curve(
        config.chain,
        series,
        window_s=config.smoothing_window_s,
        grid_step_s=config.grid_step_s,
        tolerance_s=config.tolerance_s,
    )
    out = _out_dir(args)
    for curve in curves:
        path = write_loss_curve_csv(curve, out)
        flagged = sum(1 for p in curve.points if p.flags)
        print(
            f"{curve.upstream}->{curve.downstream}: {len(curve.points)} points "
            f"({flagged} flagged)"
        )
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voss", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument(
        "--out-dir", default=".", help="directory for output files (default: .)"
    )
    defaults = SolveOptions()
    common.add_argument(
        "--tol",
        type=float,
        default=defaults.tol,
        help=f"power-flow convergence tolerance in pu (default: {defaults.tol})",
    )
    common.add_argument(
        "--max-iter",
        type=int,
        default=defaults.max_iter,
        help=f"power-flow iteration limit (default: {defaults.max_iter})",
    )
    common.add_argument(
        "--near-zero-threshold",
        type=float,
        default=NEAR_ZERO_POWER_FRACTION,
        help=(
            "input power below this fraction of the feeder base marks a "
            f"row near-zero (default: {NEAR_ZERO_POWER_FRACTION})"
        ),
    )

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_solve = sub.add_parser(
        "solve", parents=[common], help="run the power flow on a feeder file"
    )
    p_solve.add_argument("feeder", help="feeder definition file (JSON)")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser(
        "benchmark",
        parents=[common],
        help="compare voltage-only estimates against simulated truth",
    )
    p_bench.add_argument("feeder", help="feeder definition file (JSON)")
    p_bench.add_argument(
        "--paths",
        type=_typed(_parse_paths),
        default=None,
        help="comma-separated head-tail node pairs for the multi-segment study",
    )
    p_bench.add_argument(
        "--rho-s-source",
        type=_typed(RhoSource.parse),
        default=RhoSource.simulated(),
        help="'simulated' or 'estimate:<value>' power ratio for paths "
        "(default: simulated)",
    )
    p_bench.set_defaults(func=cmd_benchmark)

    p_oracle = sub.add_parser(
        "oracle",
        parents=[common],
        help="check the correction factor against a discretized line",
    )
    p_oracle.add_argument(
        "--rho-list",
        type=_typed(_parse_rho_list),
        default=_parse_rho_list(DEFAULT_RHO_LIST),
        help=f"comma-separated extraction fractions (default: {DEFAULT_RHO_LIST})",
    )
    p_oracle.add_argument(
        "--segments",
        type=int,
        default=10000,
        help="number of discretization segments (default: 10000)",
    )
    p_oracle.set_defaults(func=cmd_oracle)

    p_sensors = sub.add_parser(
        "sensors",
        parents=[common],
        help="compute loss curves from sensor voltage readings",
    )
    p_sensors.add_argument("data_csv", help="sensor_id,timestamp,voltage_v readings")
    p_sensors.add_argument("chain_config", help="sensor chain config (JSON)")
    p_sensors.set_defaults(func=cmd_sensors)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return EXIT_OK
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except PowerFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FeederFormatError, SensorFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
