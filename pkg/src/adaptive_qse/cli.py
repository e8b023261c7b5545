"""Command-line entry point.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
Results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import PLUS, PLUS_I, UP, RandomSource, ValidationError, bloch_to_state, haar_random_state, state_to_bloch
from .harness import (
    CATALOGS,
    DEFAULT_CATALOG,
    ExperimentConfig,
    StrategySpec,
    load_config,
    massar_bound,
    qubit_config,
    run_experiment,
    two_qubit_config,
    write_csv,
    write_svg_plot,
)
from .posterior import ENGINES
from .simulator import Stopping, Strategy, StrategyKind, run_protocol, scripted_trace

STRATEGIES = [k.value for k in StrategyKind]
TABLE1_FIDELITY = (0.5, 2 / 3, 0.5 + math.sqrt(2) / 6, 0.5 + math.sqrt(3) / 6)
FIDELITY_TOL = 1e-9
UNBIASED_TOL = 1e-5


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"adaptive-qse: {msg}", file=sys.stderr)


def _angles(vec) -> str:
    theta, phi = state_to_bloch(vec)
    return f"({theta:.6f},{phi:.6f})"


def _build_strategy(args) -> Strategy:
    kind = StrategyKind(args.strategy)
    if kind is StrategyKind.ADAPTIVE and args.dim != 2:
        raise UsageError(f"d={args.dim} requires a catalog strategy (restricted-adaptive or nonadaptive); "
                         "the unrestricted optimizer is qubit-only")
    catalog = None
    if kind in (StrategyKind.RESTRICTED_ADAPTIVE, StrategyKind.NONADAPTIVE):
        name = args.catalog or DEFAULT_CATALOG.get(args.dim)
        if name is None:
            raise UsageError(f"no basis catalog available for d={args.dim}")
        catalog = CATALOGS[name]()
        if catalog.dim != args.dim:
            raise UsageError(f"catalog {name!r} has d={catalog.dim}, not {args.dim}")
    elif args.catalog is not None:
        raise UsageError(f"--catalog has no effect with --strategy {kind.value}")
    try:
        return Strategy(kind, catalog=catalog, restarts=args.restarts, engine=args.engine)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None


def cmd_trace(args) -> int:
    if args.dim < 2:
        raise UsageError("--dim must be at least 2")
    if args.k_max < 0:
        raise UsageError("--k-max must be non-negative")
    strategy = _build_strategy(args)
    root = RandomSource(args.seed)
    hidden = haar_random_state(args.dim, root.spawn(0))
    run = run_protocol(hidden, strategy, Stopping(args.k_max), root.spawn(1))
    catalog_labels = strategy.catalog is not None
    for est, basis, n, report in zip(run.estimates, run.bases_used, run.outcomes, run.reports):
        shown = basis.label if catalog_labels and basis.label else _angles(basis[0]) if args.dim == 2 else "haar"
        print(
            f"k={est.k} basis={shown} outcome={n} lambda_max={est.fidelity:.6f} "
            f"infidelity={est.infidelity:.6f} purity={est.purity:.6f}"
        )
        if args.verbose and report is not None:
            extra = f" angles={report.angles[0]:.6f},{report.angles[1]:.6f}" if report.angles else ""
            print(
                f"  [k={est.k}] score={report.score:.9f} degenerate={report.degenerate}{extra}",
                file=sys.stderr,
            )
    final = run.estimates[-1] if run.estimates else run.initial_estimate
    hidden_desc = f" hidden={_angles(hidden)}" if args.dim == 2 else ""
    print(
        f"summary strategy={strategy.name} d={args.dim} measurements={len(run.estimates)} "
        f"final_infidelity={final.infidelity:.6f} stop={run.stop_reason}{hidden_desc}"
    )
    return 0


def _experiment_config(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
    elif args.dim == 2:
        config = qubit_config()
    elif args.dim == 4:
        config = two_qubit_config()
    else:
        raise UsageError("experiment needs --config, or --dim 2 / --dim 4 for the built-in setups")
    if args.dim is not None and args.config and args.dim != config.dim:
        raise UsageError(f"--dim {args.dim} conflicts with config dim {config.dim}")
    if args.strategy:
        specs = tuple(StrategySpec(s, args.catalog if s in ("restricted-adaptive", "nonadaptive") else None)
                      for s in args.strategy)
        config = config.with_overrides(strategies=specs)
    return config.with_overrides(
        seed=args.seed,
        n_experiments=args.n_experiments,
        k_max=args.k_max,
        csv_path=args.out_csv,
        svg_path=args.out_svg,
        workers=args.workers,
        restarts=args.restarts,
    )


def cmd_experiment(args) -> int:
    try:
        config = _experiment_config(args)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None

    def progress(done, total):
        if args.verbose and (done == total or done % max(1, total // 10) == 0):
            print(f"  {done}/{total} experiments", file=sys.stderr)

    stats = run_experiment(config, progress=progress)
    print(f"{'strategy':<22}{'k':>4}{'mean_infidelity':>18}{'stderr':>12}{'bound':>12}")
    for label, k, mean, err, n, bound in stats.rows():
        b = "" if bound is None else f"{bound:.6f}"
        print(f"{label:<22}{k:>4}{mean:>18.6f}{err:>12.6f}{b:>12}")
    if config.csv_path:
        write_csv(stats, config.csv_path)
        print(f"wrote {config.csv_path}", file=sys.stderr)
    if config.svg_path:
        write_svg_plot(stats, config.svg_path, log_scale=config.log_scale)
        print(f"wrote {config.svg_path}", file=sys.stderr)
    return 0


def table1_script(perturb: bool = False):
    second = bloch_to_state(math.pi / 2 + 0.05, 0.0) if perturb else PLUS
    return [UP, second, PLUS_I]


def cmd_validate_table1(args) -> int:
    script = table1_script(args.perturb)
    rows = scripted_trace(script, restarts=args.restarts, rng=RandomSource(args.seed))
    all_ok = True
    for row, expected in zip(rows, TABLE1_FIDELITY):
        checks = [abs(row.fidelity - expected) <= FIDELITY_TOL]
        detail = f"fidelity={row.fidelity:.12f} expected={expected:.12f}"
        if row.report is not None:
            basis = row.next_basis
            earlier = [UP, PLUS][: row.k] if row.k < 3 else []
            refs = [row.state] + earlier
            bias = max(abs(abs(np.vdot(e, v)) ** 2 - 0.5) for e in basis for v in refs)
            checks.append(bias <= UNBIASED_TOL)
            detail += f" next={_angles(basis[0])} unbiased_err={bias:.1e}"
            if row.scripted_score is not None:
                gap = abs(row.next_score - row.scripted_score)
                checks.append(gap <= 1e-8)
                detail += f" script_gap={gap:.1e}"
        ok = all(checks)
        all_ok &= ok
        print(f"k={row.k} {'PASS' if ok else 'FAIL'} {detail}")
    return 0 if all_ok else 1


def cmd_bound(args) -> int:
    if args.k_max < 0:
        raise UsageError("--k-max must be non-negative")
    for k in range(args.k_max + 1):
        print(f"{k} {massar_bound(k):.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-qse", description="Adaptive Bayesian pure-state estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--verbose", "-v", action="store_true")
        p.add_argument("--catalog", choices=sorted(CATALOGS))
        p.add_argument("--restarts", type=int, default=None)

    p = sub.add_parser("trace", help="run one protocol and print every iteration")
    common(p)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--strategy", choices=STRATEGIES, default="adaptive")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--engine", choices=ENGINES, default="expansion")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("experiment", help="average infidelity over many hidden states")
    common(p)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--strategy", choices=STRATEGIES, action="append",
                   help="replace the configured strategies (repeatable)")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--n-experiments", type=int, default=None)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-svg", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate-table1", help="replay the scripted up, +, +i record and check each row")
    common(p)
    p.add_argument("--perturb", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate_table1)

    p = sub.add_parser("bound", help="print 1/(k+2) for k = 0..k_max")
    p.add_argument("--k-max", type=int, default=30)
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("trace", "validate-table1"):
        args.seed = 0 if args.seed is None else args.seed
        args.restarts = 8 if args.restarts is None else args.restarts
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        _err("--seed must fit in 64 unsigned bits")
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return 2
    except Exception as exc:  # runtime failure
        _err(f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
