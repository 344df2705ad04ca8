"""Command-line front end.

Exit codes: 0 success, 2 usage or schema error, 3 infeasible instance,
4 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import experiments
from .analysis import RULES, evaluate_rule, optimize_closed_form, optimize_lp
from .errors import DimensionError, DomainError, InfeasibleError, InstanceError, SolverError
from .instances import SchemaError, load_instance
from .lp import BACKENDS
from .multi_dim import build_mean_lp
from .table import ResultTable

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive(v, name):
    if v <= 0:
        raise UsageError(f"--{name} must be positive, got {v}")


def cmd_optimize(args) -> ResultTable:
    inst = load_instance(args.instance)
    if args.bound is not None:
        _positive(args.bound, "bound")
        inst = inst.with_bound(args.bound)
    dim = inst.mean_instance().dim
    use_lp = args.lp or (not args.closed_form and dim > 1)
    if use_lp:
        rows, sol = optimize_lp(inst, args.backend)
        if args.lp_dump:
            Path(args.lp_dump).write_text(build_mean_lp(inst.mean_instance()).to_lp_format(), encoding="utf-8")
    else:
        rows = optimize_closed_form(inst)
    table = ResultTable(["quantity", "value"])
    for name, value in rows:
        table.add(name, value)
    return table


def cmd_evaluate(args) -> ResultTable:
    inst = load_instance(args.instance)
    if args.bound is not None:
        _positive(args.bound, "bound")
        inst = inst.with_bound(args.bound)
    cols = ["objective", "prior_report_score", "proper", "worst_violation", "score_min", "score_max"]
    table = ResultTable(["rule"] + cols)
    for name in args.rule:
        res = evaluate_rule(name, inst, seed=args.seed, backend=args.backend)
        table.add(name, *(res[c] for c in cols))
    return table


def cmd_bayes(args) -> ResultTable:
    inst = load_instance(args.instance)
    if inst.kind != "signal_model":
        raise SchemaError("kind", "the bayes command needs a signal_model instance")
    dist = inst.posterior_means()
    table = ResultTable([f"mean[{j}]" for j in range(dist.dim)] + ["prob"])
    for point, p in zip(dist.support, dist.probs):
        table.add(*(float(v) for v in point), float(p))
    return table


def cmd_experiment(args) -> ResultTable:
    common = dict(seed=args.seed, jobs=args.jobs)
    name = args.name
    if name == "sep-gap":
        ns = args.n or [2, 5, 10]
        if any(n < 1 for n in ns):
            raise UsageError("--n values must be positive integers")
        return experiments.sep_gap(ns, **common)
    if name == "full-gap":
        eps = args.eps or [0.5, 0.1, 0.05, 0.01]
        if any(not 0 < e <= 0.5 for e in eps):
            raise UsageError("--eps values must lie in (0, 0.5]")
        return experiments.full_gap(eps, **common)
    if name == "quad-worstcase":
        cs = args.c or [0.1, 0.25, 0.5]
        if any(not 0 < c <= 0.5 for c in cs):
            raise UsageError("--c values must lie in (0, 0.5]")
        _positive(args.grid, "grid")
        return experiments.quad_worstcase(cs, args.grid, **common)
    if name == "pi-adversary":
        ds = args.d or [2, 4, 8]
        if any(d < 1 for d in ds):
            raise UsageError("--d values must be positive integers")
        if args.utilities < 0:
            raise UsageError("--utilities must be nonnegative")
        return experiments.pi_adversary(ds, args.utilities, **common)
    if name == "robustness":
        eps = args.eps or [0.01, 0.05, 0.1]
        if any(not 0 <= e <= 0.5 for e in eps):
            raise UsageError("--eps values must lie in [0, 0.5]")
        _positive(args.pairs, "pairs")
        return experiments.robustness(eps, args.pairs, **common)
    # sampling
    eps = args.eps or [0.1]
    delta = 0.05 if args.delta is None else args.delta
    n = (args.n or [4])[0]
    if len(eps) != 1 or not 0 < eps[0] < 1:
        raise UsageError("sampling takes a single --eps in (0, 1)")
    if not 0 < delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    _positive(n, "n")
    _positive(args.trials, "trials")
    return experiments.sampling(eps[0], delta, n, args.trials, **common)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "table"), default="csv")
    common.add_argument("--seed", type=int, default=0, help="seed for every randomized step (default 0)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for experiment rows")
    common.add_argument("--out", help="write the table here instead of stdout")
    common.add_argument("--backend", choices=sorted(BACKENDS), default="simplex", help="LP solver")

    p = argparse.ArgumentParser(prog="effortscore", description="Bounded proper scoring rules that reward effort.")
    sub = p.add_subparsers(dest="command", required=True)

    opt = sub.add_parser("optimize", parents=[common], help="optimal rule for an instance file")
    opt.add_argument("instance")
    mode = opt.add_mutually_exclusive_group()
    mode.add_argument("--closed-form", action="store_true", help="one-dimensional V-shaped optimum")
    mode.add_argument("--lp", action="store_true", help="exact linear program")
    opt.add_argument("--bound", type=float, help="score bound (overrides the file)")
    opt.add_argument("--lp-dump", metavar="PATH", help="write the program in LP text format")
    opt.set_defaults(func=cmd_optimize)

    ev = sub.add_parser("evaluate", parents=[common], help="objective, properness and range of rules")
    ev.add_argument("instance")
    ev.add_argument("--rule", nargs="+", choices=RULES, default=["quadratic"])
    ev.add_argument("--bound", type=float, help="score bound (overrides the file)")
    ev.set_defaults(func=cmd_evaluate)

    ex = sub.add_parser("experiment", parents=[common], help="reproduce a gap or robustness experiment")
    ex.add_argument("name", choices=sorted(experiments.EXPERIMENTS))
    ex.add_argument("--n", type=_ints, help="dimensions (sep-gap, sampling)")
    ex.add_argument("--eps", type=_floats, help="epsilon values (full-gap, robustness, sampling)")
    ex.add_argument("--c", type=_floats, help="OPT values (quad-worstcase)")
    ex.add_argument("--d", type=_ints, help="cell counts (pi-adversary)")
    ex.add_argument("--delta", type=float, help="failure probability (sampling)")
    ex.add_argument("--trials", type=int, default=1000, help="Monte Carlo trials (sampling)")
    ex.add_argument("--pairs", type=int, default=100, help="random instances per epsilon (robustness)")
    ex.add_argument("--utilities", type=int, default=5, help="random V-shapes (pi-adversary)")
    ex.add_argument("--grid", type=int, default=200, help="grid size per axis (quad-worstcase)")
    ex.set_defaults(func=cmd_experiment)

    by = sub.add_parser("bayes", parents=[common], help="posterior-mean distribution of a signal model")
    by.add_argument("instance")
    by.set_defaults(func=cmd_bayes)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            table = args.func(args)
    except (UsageError, SchemaError, DimensionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, InstanceError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    text = table.render(args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
