"""
Command-line front-end.

    hiring-sim simulate --policy alg2 --n 256 1024 --reps 10000
    hiring-sim dp --n 200 --curve
    hiring-sim figure4 --n-max 500
    hiring-sim bounds
    hiring-sim markov --family M_hat --p 0.75 --k 3

Every subcommand writes CSV to stdout or ``--out``. Output is written only
after all work has finished, so a failed run leaves nothing behind.
"""

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

import numpy as np
from pydantic import ValidationError

from hiring_simulator.analysis import (
    gilbert_mosteller_curve_array,
    harmonic_fraction,
    relaxation_curve_array,
    standard_bound_reports,
)
from hiring_simulator.config_manager import ConfigManager
from hiring_simulator.distributions import RngStream, Uniform01, from_spec
from hiring_simulator.dp_optimal import compute_table, export_csv, lower_bound_ratio
from hiring_simulator.engine import run_batch
from hiring_simulator.errors import CoverageViolation, DomainError, HiringSimError
from hiring_simulator.markov import (
    mhat_total_transitions,
    mhat_visits,
    nhat_h,
    simulate_chain,
)
from hiring_simulator.models import (
    DEFAULT_DENOMINATOR_BOUND,
    DP_TIER_LIMITS,
    Alg2Spec,
    BoundReport,
    ChainSpec,
    ExperimentConfig,
    SimulationReport,
    Tier,
    validate_model,
)
from hiring_simulator.policies import PolicyFactory

logger = logging.getLogger("hiring.cli")

Rows = List[List[str]]

DP_HEADER = ["n", "numerator", "denominator", "value", "harmonic_minus_one", "ratio"]
FIGURE4_HEADER = [
    "n",
    "alg2_ratio",
    "alg2_ratio_stderr",
    "dp_ratio",
    "gm_lower",
    "gm_asymptotic",
]
MARKOV_HEADER = ["family", "p", "k", "reps", "quantity", "mean", "stderr", "closed_form"]


def cmd_simulate(config: ExperimentConfig) -> Rows:
    """One SimulationReport row per horizon in the config."""
    distribution = from_spec(config.distribution)
    factories = [
        PolicyFactory(
            config.policy,
            distribution,
            n,
            two_concurrent=config.two_concurrent,
            unknown_n=config.unknown_n,
        )
        for n in config.n
    ]
    # Surface parameter errors before any episode runs.
    for factory in factories:
        factory()

    rows: Rows = [list(SimulationReport.CSV_HEADER)]
    for n, factory in zip(config.n, factories):
        report = run_batch(
            factory,
            distribution,
            n,
            config.reps,
            config.seed,
            truncate_at_n=config.truncate_at_n,
            workers=config.workers,
            distribution_label=config.distribution.label,
        )
        rows.append(report.csv_row())
    return rows


def check_dp_tier(n: int, tier: Tier) -> None:
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    limit = DP_TIER_LIMITS[tier]
    if limit is not None and n > limit:
        raise DomainError(f"DP horizon {n} exceeds the {tier} tier limit {limit}; use --tier full")


def cmd_dp(
    n: int,
    denominator_bound: Optional[int] = DEFAULT_DENOMINATOR_BOUND,
    tier: Tier = "standard",
    curve: bool = False,
    export_table: Optional[str] = None,
    memory_limit_bytes: Optional[int] = None,
) -> Rows:
    """
    C(n, 0) as a fraction and a decimal, H_{n+1} - 1, and their ratio.

    With ``curve`` there is one row for every horizon 1..n.
    """
    check_dp_tier(n, tier)
    table = compute_table(
        n,
        denominator_bound,
        keep_full=export_table is not None,
        memory_limit_bytes=memory_limit_bytes,
    )
    if export_table is not None:
        export_csv(table, export_table)
    rows: Rows = [list(DP_HEADER)]
    for m in range(1, n + 1) if curve else [n]:
        value = table.column0[m]
        opt = harmonic_fraction(m + 1) - 1
        rows.append(
            [
                str(m),
                str(value.numerator),
                str(value.denominator),
                repr(float(value)),
                repr(float(opt)),
                repr(lower_bound_ratio(table, m)),
            ]
        )
    return rows


def log_grid(n_max: int, points: int) -> List[int]:
    """Distinct integers spread logarithmically over 1..n_max."""
    if n_max < 1:
        raise DomainError(f"n_max must be positive, got {n_max}")
    grid = np.unique(np.rint(np.logspace(0.0, np.log10(n_max), max(points, 1))).astype(int))
    return [int(n) for n in grid if 1 <= n <= n_max]


def cmd_figure4(
    n_max: int,
    reps: int,
    seed: int,
    points: int = 12,
    tier: Tier = "standard",
    denominator_bound: Optional[int] = DEFAULT_DENOMINATOR_BOUND,
    workers: int = 1,
) -> Rows:
    """Monte Carlo Algorithm 2 ratio, DP lower bound and relaxation curve on a log grid."""
    check_dp_tier(n_max, tier)
    table = compute_table(n_max, denominator_bound)
    relaxation = relaxation_curve_array(n_max)
    asymptotic = gilbert_mosteller_curve_array(n_max)
    law = Uniform01()
    spec = Alg2Spec(policy="alg2")
    rows: Rows = [list(FIGURE4_HEADER)]
    for n in log_grid(n_max, points):
        report = run_batch(PolicyFactory(spec, law, n), law, n, reps, seed, workers=workers)
        rows.append(
            [
                str(n),
                repr(report.ratio_of_means),
                repr(report.ratio_stderr) if report.ratio_stderr is not None else "nan",
                repr(lower_bound_ratio(table, n)),
                repr(float(relaxation[n - 1])),
                repr(float(asymptotic[n - 1])),
            ]
        )
    return rows


def cmd_bounds(sweep_max: int = 10**6) -> Rows:
    reports = standard_bound_reports(sweep_max)
    return [list(BoundReport.CSV_HEADER)] + [report.csv_row() for report in reports]


def cmd_markov(spec: ChainSpec, reps: int, seed: int) -> Rows:
    """Simulated visit and transition counts, next to the closed forms where they exist."""
    stats = simulate_chain(spec, reps, RngStream(seed, 0))
    closed_visits: List[Optional[float]] = [None] * len(stats.state_labels)
    closed_transitions: Optional[float] = None
    closed_ab: Optional[float] = None
    if spec.family == "M_hat":
        assert spec.p is not None
        closed_visits = [float(v) for v in mhat_visits(spec.p, spec.k)]
        closed_transitions = float(mhat_total_transitions(spec.p, spec.k))
    elif spec.family == "N_hat":
        assert spec.p is not None
        closed_ab = float(nhat_h(spec.p, spec.k))

    prefix = [spec.family, "" if spec.p is None else repr(spec.p), str(spec.k), str(reps)]

    def row(quantity: str, mean: float, stderr: float, closed: Optional[float]) -> List[str]:
        closed_text = "nan" if closed is None else repr(closed)
        return prefix + [quantity, repr(mean), repr(stderr), closed_text]

    rows: Rows = [list(MARKOV_HEADER)]
    for label, mean, stderr, closed in zip(
        stats.state_labels, stats.visits_mean, stats.visits_stderr, closed_visits
    ):
        rows.append(row(f"visits:{label}", mean, stderr, closed))
    rows.append(
        row("transitions", stats.transitions_mean, stats.transitions_stderr, closed_transitions)
    )
    if stats.ab_transitions_mean is not None and stats.ab_transitions_stderr is not None:
        rows.append(
            row("ab_transitions", stats.ab_transitions_mean, stats.ab_transitions_stderr, closed_ab)
        )
    return rows


def write_rows(rows: Rows, out: Optional[str], stdout: TextIO) -> None:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    if out is None:
        stdout.write(buffer.getvalue())
    else:
        Path(out).write_text(buffer.getvalue())
        logger.info(f"Wrote {len(rows) - 1} rows to {out}")


def _denominator_bound(value: str) -> Optional[int]:
    if value.lower() in ("none", "exact"):
        return None
    bound = int(value, 0)
    if bound < 1:
        raise argparse.ArgumentTypeError(f"denominator bound must be positive, got {value}")
    return bound


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiring-sim", description="Online hiring over time: simulation and bounds"
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level for messages on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Monte Carlo competitive ratio of a policy")
    simulate.add_argument("--config", help="JSON experiment file mirroring these flags")
    simulate.add_argument("--policy", help="alg1, alg2, alg3, alg4, alg5 or dp_optimal")
    simulate.add_argument("--policy-param", action="append", default=[], metavar="KEY=VALUE")
    simulate.add_argument("--dist", help="uniform01, exponential, pareto or empirical")
    simulate.add_argument("--dist-param", action="append", default=[], metavar="KEY=VALUE")
    simulate.add_argument("--n", type=int, nargs="+")
    simulate.add_argument("--reps", type=int)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--out")
    simulate.add_argument("--workers", type=int)
    simulate.add_argument("--tier", choices=["smoke", "standard", "full"])
    simulate.add_argument("--truncate-at-n", action="store_true", default=None)
    simulate.add_argument("--unknown-n", action="store_true", default=None)
    simulate.add_argument("--two-concurrent", action="store_true", default=None)

    dp = sub.add_parser("dp", help="Exact lower bound from the optimal online DP")
    dp.add_argument("--n", type=int, required=True)
    dp.add_argument(
        "--denominator-bound", type=_denominator_bound, default=DEFAULT_DENOMINATOR_BOUND
    )
    dp.add_argument("--tier", choices=["smoke", "standard", "full"], default="standard")
    dp.add_argument("--curve", action="store_true", help="One row per horizon 1..n")
    dp.add_argument("--export-table", metavar="PATH")
    dp.add_argument("--memory-limit", type=int, metavar="BYTES")
    dp.add_argument("--out")

    figure4 = sub.add_parser("figure4", help="Algorithm 2, DP bound and relaxation curves")
    figure4.add_argument("--n-max", type=int, default=500)
    figure4.add_argument("--reps", type=int, default=1000)
    figure4.add_argument("--seed", type=int, default=0)
    figure4.add_argument("--points", type=int, default=12)
    figure4.add_argument("--workers", type=int, default=1)
    figure4.add_argument(
        "--denominator-bound", type=_denominator_bound, default=DEFAULT_DENOMINATOR_BOUND
    )
    figure4.add_argument("--tier", choices=["smoke", "standard", "full"], default="standard")
    figure4.add_argument("--out")

    bounds = sub.add_parser("bounds", help="Numerical checks of the analytic bounds")
    bounds.add_argument("--sweep-max", type=int, default=10**6)
    bounds.add_argument("--out")

    markov = sub.add_parser("markov", help="Simulate a threshold-evolution chain")
    markov.add_argument("--family", choices=["M_hat", "N_hat", "M", "N"], default="M_hat")
    markov.add_argument("--p", type=float)
    markov.add_argument("--k", type=int, required=True)
    markov.add_argument("--c", type=float, default=0.75)
    markov.add_argument("--reps", type=int, default=10**5)
    markov.add_argument("--seed", type=int, default=0)
    markov.add_argument("--out")
    return parser


def run_command(args: argparse.Namespace) -> Rows:
    match args.command:
        case "simulate":
            manager = ConfigManager(args.config)
            manager.update_policy(args.policy, args.policy_param)
            manager.update_distribution(args.dist, args.dist_param)
            manager.update_config(
                {
                    "n": args.n,
                    "reps": args.reps,
                    "seed": args.seed,
                    "out": args.out,
                    "workers": args.workers,
                    "tier": args.tier,
                    "truncate_at_n": args.truncate_at_n,
                    "unknown_n": args.unknown_n,
                    "two_concurrent": args.two_concurrent,
                }
            )
            config = manager.validate()
            args.out = config.out
            rows = cmd_simulate(config)
            if config.out is not None:
                manager.save_config(str(Path(config.out).with_suffix(".config.json")))
            return rows
        case "dp":
            return cmd_dp(
                args.n,
                args.denominator_bound,
                args.tier,
                args.curve,
                args.export_table,
                args.memory_limit,
            )
        case "figure4":
            return cmd_figure4(
                args.n_max,
                args.reps,
                args.seed,
                args.points,
                args.tier,
                args.denominator_bound,
                args.workers,
            )
        case "bounds":
            return cmd_bounds(args.sweep_max)
        case "markov":
            spec = validate_model(
                ChainSpec, {"family": args.family, "p": args.p, "k": args.k, "c": args.c}
            )
            if args.reps < 1:
                raise DomainError(f"replications must be positive, got {args.reps}")
            return cmd_markov(spec, args.reps, args.seed)
    raise DomainError(f"unknown command {args.command}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point.

    Returns:
        0 on success, 2 on configuration or domain errors, 3 on a coverage
        violation, 4 when the DP would exceed its memory limit
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        stream=sys.stderr,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    logger.info(f"Running {args.command}")

    try:
        rows = run_command(args)
    except ValidationError as e:
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"])
            print(f"invalid {location or 'config'}: {error['msg']}", file=sys.stderr)
        logger.error(f"Invalid configuration: {e.error_count()} errors")
        return 2
    except CoverageViolation as e:
        logger.error(f"Coverage violation: {e}")
        print(f"coverage violation: {e}", file=sys.stderr)
        return e.exit_code
    except HiringSimError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    write_rows(rows, getattr(args, "out", None), sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
