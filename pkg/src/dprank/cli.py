"""Command-line interface: ``dprank generate|aggregate|evaluate|benchmark|oracle``.

Exit codes: 0 success, 2 usage error, 3 budget error, 4 input/output error.
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from pathlib import Path

from .apxmed import DEFAULT_KAPPA
from .errors import BudgetExhaustedError, InvalidInputError, InvalidParameterError, UnsupportedSizeError
from .experiment import load_spec, run_experiment
from .generators import GENERATORS, generate
from .io import format_text, parse_ranking, read_dataset, write_dataset
from .pipeline import OBJECTIVES, objective_metric, run_aggregation
from .privacy import PrivacyBudget
from .rankings import BRUTE_FORCE_MAX_M, avg_distance, brute_force_optimal

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4

OPT_MAX_M = 9


class _BudgetFlagError(Exception):
    pass


def _budget_from_args(args) -> PrivacyBudget:
    given = {k for k in ("epsilon", "rho", "delta") if getattr(args, k) is not None}
    needed = {"pure": {"epsilon"}, "ldp": {"epsilon"}, "zcdp": {"rho"}, "approx": {"epsilon", "delta"}}[args.model]
    if given != needed:
        flags = " and ".join(f"--{k}" for k in sorted(needed))
        raise _BudgetFlagError(f"--model {args.model} takes exactly {flags}")
    for key in given:
        if not getattr(args, key) > 0:
            raise InvalidParameterError(f"--{key} must be positive")
    if args.model == "pure":
        return PrivacyBudget.pure(args.epsilon)
    if args.model == "ldp":
        return PrivacyBudget.ldp(args.epsilon)
    if args.model == "zcdp":
        return PrivacyBudget.zcdp(args.rho)
    return PrivacyBudget.approx(args.epsilon, args.delta)


def _buckets(text: str):
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--buckets takes 'auto' or a positive integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("--buckets must be >= 1")
    return value


def cmd_generate(args) -> int:
    data = generate(args.generator, args.m, args.n, phi=args.phi, rng=args.seed)
    if args.output:
        write_dataset(data, args.output)
    else:
        sys.stdout.write(format_text(data))
    return EXIT_OK


def _opt_value(data, metric):
    if data.m > OPT_MAX_M:
        return None
    return avg_distance(brute_force_optimal(data, metric), data, metric)


def cmd_aggregate(args, parser) -> int:
    try:
        budget = _budget_from_args(args)
    except _BudgetFlagError as exc:
        parser.error(str(exc))
    except InvalidParameterError as exc:
        print(f"dprank: budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    data = read_dataset(args.dataset)
    seed = args.seed if args.seed is not None else secrets.randbits(63)
    log = None
    try:
        if args.dump_messages:
            if budget.kind != "ldp":
                parser.error("--dump-messages needs --model ldp")
            log = open(args.dump_messages, "w")
        result = run_aggregation(data, args.objective, budget, seed=seed, regime=args.regime,
                                 n_buckets=args.buckets, kappa=args.kappa, local_mechanism=args.local_mechanism,
                                 message_log=log)
    finally:
        if log is not None:
            log.close()
    metric = objective_metric(args.objective)
    report = {
        "objective": args.objective,
        "metric": metric,
        "objective_value": result.objective_value,
        "opt_if_computable": _opt_value(data, metric),
        "budget": budget.to_dict(),
        "seed": seed,
        "ledger": result.ledger.audit(),
    }
    if args.report:
        details = result.details.get("regime_details", {})
        report["details"] = {
            "regime": result.details.get("regime"),
            "fallback_used": details.get("fallback_used", False),
            "imbalanced_pairs": details.get("imbalanced_pairs"),
            "balanced_pairs": details.get("balanced_pairs"),
            "bounded": details.get("bounded", True),
            "buckets": details.get("buckets"),
            "combiner": result.details.get("combiner"),
        }
    print(result.ranking)
    print(json.dumps(report))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    data = read_dataset(args.dataset)
    text = Path(args.ranking).read_text().splitlines()[0] if Path(args.ranking).is_file() else args.ranking
    ranking = parse_ranking(text)
    print(json.dumps({"metric": args.metric, "value": avg_distance(ranking, data, args.metric)}))
    return EXIT_OK


def cmd_oracle(args) -> int:
    data = read_dataset(args.dataset)
    if data.m > BRUTE_FORCE_MAX_M:
        raise UnsupportedSizeError(f"oracle supports m <= {BRUTE_FORCE_MAX_M}, got m={data.m}")
    best = brute_force_optimal(data, args.metric)
    print(best)
    print(json.dumps({"metric": args.metric, "value": avg_distance(best, data, args.metric)}))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    spec = load_spec(args.config)
    if args.output:
        spec.output = args.output
    out = run_experiment(spec)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dprank", description="Differentially private rank aggregation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--generator", choices=GENERATORS, default="mallows")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--phi", type=float, default=0.5)
    g.add_argument("--seed", type=int)
    g.add_argument("--output", "-o")

    a = sub.add_parser("aggregate", help="privately aggregate a dataset")
    a.add_argument("dataset")
    a.add_argument("--objective", choices=OBJECTIVES, default="kemeny-ptas")
    a.add_argument("--model", choices=("pure", "zcdp", "approx", "ldp"), default="pure")
    a.add_argument("--epsilon", type=float)
    a.add_argument("--delta", type=float)
    a.add_argument("--rho", type=float)
    a.add_argument("--regime", choices=("auto", "small", "large"), default="auto")
    a.add_argument("--buckets", type=_buckets, default=None, help="'auto' or a bucket count")
    a.add_argument("--seed", type=int)
    a.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    a.add_argument("--local-mechanism", choices=("laplace", "sphere"), default="laplace")
    a.add_argument("--report", action="store_true", help="add regime diagnostics to the JSON report")
    a.add_argument("--dump-messages", metavar="PATH", help="write local-model user messages as JSON lines")

    e = sub.add_parser("evaluate", help="average distance of a ranking to a dataset")
    e.add_argument("dataset")
    e.add_argument("ranking", help="comma-separated positions, or a file whose first line holds them")
    e.add_argument("--metric", choices=("kendall", "footrule"), default="kendall")

    b = sub.add_parser("benchmark", help="run an experiment config")
    b.add_argument("config")
    b.add_argument("--output", "-o")

    o = sub.add_parser("oracle", help="brute-force optimal ranking (m <= 10)")
    o.add_argument("dataset")
    o.add_argument("--metric", choices=("kendall", "footrule"), default="kendall")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "aggregate":
            return cmd_aggregate(args, parser)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        return cmd_benchmark(args)
    except BudgetExhaustedError as exc:
        print(f"dprank: budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvalidParameterError as exc:
        print(f"dprank: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedSizeError as exc:
        print(f"dprank: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, OSError) as exc:
        print(f"dprank: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
