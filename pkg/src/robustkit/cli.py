"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 infeasible, 3 unsupported pairing,
4 resource limit. Machine output goes to files or stdout, messages to stderr.
"""

import argparse
import json
import math
import os
import sys

from .algorithms import cut_log_jsonl, required_sample_size, sampling_bound
from .combinatorial import (
    STRATEGIES,
    cc_knapsack_dp,
    graph_from_dict,
    knapsack_from_dict,
    load_json,
    midpoint_path,
    regret_path_bb,
)
from .concurrency import set_default_threads
from .errors import InstanceError, LimitError, RobustError, SolveFailure, UnsupportedError
from .evaluate import (
    COUNTERPARTS,
    compare_concepts,
    evaluate_solution,
    evaluation_scenarios,
    run_concept,
)
from .model import load_instance
from .solver import from_lp_text, solve, using_tolerances

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_UNSUPPORTED, EXIT_LIMIT = 0, 1, 2, 3, 4

SOLVE_CONCEPTS = (
    "strict", "cc", "reliability", "light", "adjustable", "mulvey", "regret-finite", "regret-dual",
    "cutting-plane", "sampling", "surrogate-bb", "candidate", "knapsack-dp", "regret-path-bb",
    "midpoint-path",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for infeasibility
    def error(self, message):
        raise UsageError(message)


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc.msg}") from None


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--feas-tol", type=float)
    p.add_argument("--int-tol", type=float)
    p.add_argument("--cut-tol", type=float)
    p.add_argument("-o", "--output", help="output file (directory for transform)")


def _concept_flags(p):
    p.add_argument("--config", help="JSON file with concept settings")
    p.add_argument("--weights", type=_json_arg, help='light robustness row weights, e.g. {"c1": 1}')
    p.add_argument("--rho", type=float, help="light robustness nominal-quality slack")
    p.add_argument("--probabilities", type=_json_arg, help="Mulvey scenario probabilities")
    p.add_argument("--omega", type=float)
    p.add_argument("--sigma-mode", choices=("worst-case", "expectation"))
    p.add_argument("--penalty", choices=("positive", "abs"))
    p.add_argument("--gamma-vector", type=_json_arg, help="reliability rhs shifts per row")
    p.add_argument("--assume-integral", action="store_true",
                   help="assert the integrality premise of the interval regret dual")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--epsilon", type=float, action="append", default=[])
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--strategy", choices=STRATEGIES, default="midpoint-branching")
    p.add_argument("--cut-log", help="write the cutting-plane log as JSON lines")


def build_parser():
    parser = _Parser(prog="robustkit", description="Robust optimization toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("transform", help="write a robust counterpart as LP text plus metadata")
    p.add_argument("input")
    p.add_argument("--concept", required=True, choices=tuple(COUNTERPARTS))
    _common(p)
    _concept_flags(p)

    p = sub.add_parser("solve", help="solve an instance under one concept")
    p.add_argument("input")
    p.add_argument("--concept", choices=SOLVE_CONCEPTS, help="omit to solve an LP-text model as is")
    _common(p)
    _concept_flags(p)

    p = sub.add_parser("compare", help="tabulate several concepts on one instance")
    p.add_argument("input")
    p.add_argument("--concepts", required=True, help="comma-separated concept list")
    p.add_argument("--format", choices=("csv", "json"), help="default: from the output suffix, else csv")
    p.add_argument("--eval-samples", type=int, default=100)
    p.add_argument("--timing", action="store_true", help="record solve times (output no longer reproducible)")
    _common(p)
    _concept_flags(p)

    p = sub.add_parser("evaluate", help="evaluate a solution on the instance's scenarios")
    p.add_argument("input")
    p.add_argument("--solution", required=True, help="solve output or a plain assignment JSON")
    p.add_argument("--eval-samples", type=int, default=100)
    _common(p)

    p = sub.add_parser("bound", help="sampling probability bound or required sample size")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--beta", type=float)
    p.add_argument("-o", "--output")
    return parser


def _config(args):
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(load_json(args.config))
    for key in ("weights", "rho", "probabilities", "omega", "sigma_mode", "penalty", "gamma_vector"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg.update(
        assume_integral=args.assume_integral or cfg.get("assume_integral", False),
        samples=args.samples,
        seed=args.seed,
        epsilons=tuple(args.epsilon),
        max_iters=args.max_iters,
        cut_tol=args.cut_tol,
        threads=args.threads,
    )
    return cfg


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(doc):
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def _plain(value):
    """JSON-safe copy of report info."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def _report_doc(report, concept, seed):
    info = {k: v for k, v in report.info.items() if k not in ("concept", "cut_log", "incumbent")}
    return {
        "status": report.status,
        "objective": report.objective,
        "assignment": report.assignment,
        "counters": report.counters,
        "concept": concept,
        "seed": seed,
        "info": _plain(info),
    }


def _status_exit(status):
    if status == "optimal":
        return EXIT_OK
    if status in ("infeasible", "unbounded"):
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


def cmd_transform(args):
    problem = load_instance(args.input)
    art = COUNTERPARTS[args.concept](problem, _config(args))
    out = args.output or "."
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "model.lp"), "w") as fh:
        fh.write(art.lp_text())
    meta = art.metadata()
    meta.update(variable_map=art.variable_map, warnings=list(art.warnings), columns=len(art.model.columns),
                rows=len(art.model.rows))
    with open(os.path.join(out, "meta.json"), "w") as fh:
        fh.write(_dumps(_plain(meta)))
    print(f"wrote {out}/model.lp and {out}/meta.json", file=sys.stderr)
    return EXIT_OK


def _solve_combinatorial(args):
    doc = load_json(args.input)
    if args.concept == "knapsack-dp":
        res = cc_knapsack_dp(knapsack_from_dict(doc))
        return {"status": "optimal", "objective": res.profit, "assignment": {"chosen": list(res.chosen)},
                "counters": {}, "concept": args.concept, "seed": args.seed,
                "info": {"worst_weight": res.worst_weight}}
    graph = graph_from_dict(doc)
    if args.concept == "midpoint-path":
        res = midpoint_path(graph)
    else:
        res = regret_path_bb(graph, args.strategy)
    return {"status": "optimal", "objective": res.regret, "assignment": {"arcs": list(res.arcs)},
            "counters": {"nodes": res.nodes}, "concept": args.concept, "seed": args.seed,
            "info": {"strategy": args.strategy} if args.concept == "regret-path-bb" else {}}


def cmd_solve(args):
    if args.concept in ("knapsack-dp", "regret-path-bb", "midpoint-path"):
        doc = _solve_combinatorial(args)
        _emit(_dumps(doc), args.output)
        return EXIT_OK
    if args.concept is None:
        with open(args.input) as fh:
            model = from_lp_text(fh.read())
        report = solve(model)
        doc = _report_doc(report, "lp", args.seed)
    else:
        problem = load_instance(args.input)
        try:
            report, _ = run_concept(problem, args.concept, _config(args))
        except LimitError as exc:
            if exc.best is not None:
                _emit(_dumps(_report_doc(exc.best, args.concept, args.seed)), args.output)
            raise
        doc = _report_doc(report, args.concept, args.seed)
        if args.cut_log and "cut_log" in report.info:
            with open(args.cut_log, "w") as fh:
                fh.write(cut_log_jsonl(report.info["cut_log"]))
    _emit(_dumps(doc), args.output)
    return _status_exit(doc["status"])


def _format(args):
    if args.format:
        return args.format
    return "json" if args.output and args.output.endswith(".json") else "csv"


def cmd_compare(args):
    concepts = [c.strip() for c in args.concepts.split(",") if c.strip()]
    if len(concepts) < 2:
        raise UsageError("compare needs at least two concepts")
    problem = load_instance(args.input)
    cfg = _config(args)
    table = compare_concepts(problem, concepts, {"*": cfg}, seed=args.seed, samples=args.eval_samples,
                             threads=args.threads, timing=args.timing)
    _emit(table.to_json() + "\n" if _format(args) == "json" else table.to_csv(), args.output)
    for row in table.rows:
        if row.status == "FAILED":
            print(f"{row.concept}: FAILED {row.message}", file=sys.stderr)
    return EXIT_OK if table.succeeded else EXIT_INPUT


def cmd_evaluate(args):
    problem = load_instance(args.input)
    doc = load_json(args.solution)
    assignment = doc.get("assignment", doc) if isinstance(doc, dict) else None
    if not isinstance(assignment, dict):
        raise InstanceError("BAD_SOLUTION", "solution must be a JSON object")
    scenarios = evaluation_scenarios(problem, args.seed, args.eval_samples)
    report = evaluate_solution(problem, assignment, scenarios)
    _emit(report.to_json() + "\n", args.output)
    return EXIT_OK


def cmd_bound(args):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if not 0.0 <= args.epsilon <= 1.0:
        raise UsageError("--epsilon must lie in [0, 1]")
    if args.samples is not None:
        if args.samples < 1:
            raise UsageError("--samples must be at least 1")
        doc = {"n": args.n, "samples": args.samples, "epsilon": args.epsilon,
               "bound": sampling_bound(args.n, args.samples, args.epsilon)}
    elif args.beta is not None:
        if not (0.0 < args.epsilon < 1.0) or not args.beta > 0.0:
            raise UsageError("required sample size needs 0 < epsilon < 1 and beta > 0")
        doc = {"n": args.n, "epsilon": args.epsilon, "beta": args.beta,
               "required_samples": required_sample_size(args.n, args.epsilon, args.beta)}
    else:
        raise UsageError("give --samples or --beta")
    _emit(_dumps(doc), args.output)
    return EXIT_OK


COMMANDS = {
    "transform": cmd_transform,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "evaluate": cmd_evaluate,
    "bound": cmd_bound,
}


def _tolerance_overrides(args):
    kw = {}
    for flag, key in (("feas_tol", "feas"), ("int_tol", "integrality"), ("cut_tol", "cut")):
        value = getattr(args, flag, None)
        if value is not None:
            if not (math.isfinite(value) and value > 0):
                raise UsageError(f"--{flag.replace('_', '-')} must be positive")
            kw[key] = value
    return kw


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        set_default_threads(getattr(args, "threads", 1))
        with using_tolerances(**_tolerance_overrides(args)):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnsupportedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except LimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except SolveFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RobustError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
