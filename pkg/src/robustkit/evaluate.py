"""Evaluate solutions across scenarios and compare robustness concepts side by side."""

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

from .algorithms import (
    candidate_heuristic,
    cutting_plane_solve,
    sample_and_solve,
    sample_scenarios,
    surrogate_relaxation_bb,
)
from .concurrency import parallel_map
from .counterparts import (
    LightConfig,
    MulveyConfig,
    adjustable_counterpart,
    cc_counterpart,
    light_counterpart,
    mulvey_counterpart,
    nominal_optimum,
    regret_counterpart_finite,
    regret_dual_counterpart_interval,
    reliability_counterpart,
    scenario_optima,
    strict_counterpart,
)
from .errors import InstanceError, RobustError, SolveFailure
from .model import FiniteSet, PolytopeSet, enumerate_vertices, instantiate
from .solver import Column, DeterministicModel, Row, row_violation, solve, tolerances

CONCEPT_ORDER = (
    "strict",
    "cc",
    "reliability",
    "light",
    "adjustable",
    "mulvey",
    "regret-finite",
    "regret-dual",
    "cutting-plane",
    "sampling",
    "surrogate-bb",
    "candidate",
)
DEFAULT_EVAL_SAMPLES = 100


@dataclass
class EvaluationReport:
    values: dict  # scenario name -> objective value
    violations: dict  # scenario name -> max(0, largest row violation)
    worst_case: float
    nominal_value: float
    mean_value: float
    violated_count: int
    max_violation: float

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _worse(problem, a, b):
    return a > b if problem.sense == "min" else a < b


def _lhs(row, assignment):
    return math.fsum(a * assignment.get(v, 0.0) for v, a in row.coeffs.items())


def _max_violation(model, assignment):
    return max((row_violation(_lhs(r, assignment), r.sense, r.rhs) for r in model.rows), default=0.0)


def _violated(model, assignment):
    feas = tolerances().feas
    return any(
        row_violation(_lhs(r, assignment), r.sense, r.rhs) > feas * max(1.0, abs(r.rhs)) for r in model.rows
    )


def _fixed(model, fixed):
    cols = tuple(replace(c, lower=fixed[c.name], upper=fixed[c.name]) if c.name in fixed else c
                 for c in model.columns)
    return replace(model, columns=cols)


def _least_violation(model):
    """Recourse minimizing the largest row violation; used when no recourse is feasible."""
    t = "t#violation"
    cols = model.columns + (Column(t, 0.0, math.inf, False, 1.0),)
    cols = tuple(replace(c, cost=0.0) if c.name != t else c for c in cols)
    rows = []
    for r in model.rows:
        if r.sense in ("<=", "="):
            rows.append(Row(r.name + "#le", {**r.coeffs, t: -1.0}, "<=", r.rhs))
        if r.sense in (">=", "="):
            rows.append(Row(r.name + "#ge", {**r.coeffs, t: 1.0}, ">=", r.rhs))
    rep = solve(DeterministicModel("min", cols, tuple(rows), model.name + "#violation"))
    if rep.status != "optimal":
        raise SolveFailure("RECOURSE_UNSOLVABLE", f"{model.name}: least-violation recourse is {rep.status}", rep.status)
    return {c.name: rep.assignment[c.name] for c in model.columns}


def _scenario_outcome(problem, assignment, scenario, recourse):
    model = instantiate(problem, scenario)
    if recourse and problem.wait_and_see:
        first = {v.name: float(assignment[v.name]) for v in problem.here_and_now}
        fixed = _fixed(model, first)
        rep = solve(fixed)
        if rep.status == "optimal":
            x = rep.assignment
        elif rep.status == "infeasible":
            x = _least_violation(fixed)
        else:
            raise SolveFailure("RECOURSE_UNSOLVABLE", f"scenario {scenario.name!r}: recourse is {rep.status}", rep.status)
    else:
        x = {v: float(assignment[v]) for v in problem.variable_names}
    return model.objective_value(x), max(0.0, _max_violation(model, x)), _violated(model, x)


def evaluate_solution(problem, assignment, scenarios=None, recourse=True):
    """Objective and feasibility of ``assignment`` under each scenario.

    With wait-and-see variables and ``recourse`` set, those variables are
    re-optimized per scenario with the here-and-now part fixed. An empty
    scenario list means the nominal scenario only.
    """
    need = problem.here_and_now if (recourse and problem.wait_and_see) else problem.variables
    missing = [v.name for v in need if v.name not in assignment]
    if missing:
        raise InstanceError("INCOMPLETE_ASSIGNMENT", f"no value for {missing[0]!r}")
    nominal = problem.nominal_scenario()
    scenarios = list(scenarios) if scenarios else [nominal]
    values, violations = {}, {}
    worst, violated = None, 0
    for s in scenarios:
        value, viol, bad = _scenario_outcome(problem, assignment, s, recourse)
        values[s.name] = value
        violations[s.name] = viol
        violated += bad
        if worst is None or _worse(problem, value, worst):
            worst = value
    if nominal.name in values and nominal in scenarios:
        nominal_value = values[nominal.name]
    else:
        nominal_value = _scenario_outcome(problem, assignment, nominal, recourse)[0]
    return EvaluationReport(
        values=values,
        violations=violations,
        worst_case=worst,
        nominal_value=nominal_value,
        mean_value=math.fsum(values.values()) / len(values),
        violated_count=violated,
        max_violation=max(violations.values()),
    )


def price_of_robustness(problem, concept_value):
    """Robust over nominal optimum for min problems, nominal over robust for max.

    Raises ``DIVISION_BY_ZERO`` when the denominator vanishes.
    """
    nominal = nominal_optimum(problem)
    num, den = (concept_value, nominal) if problem.sense == "min" else (nominal, concept_value)
    if abs(den) < 1e-12:
        raise RobustError("DIVISION_BY_ZERO", "price of robustness undefined for a zero denominator")
    return num / den


def _finite_scenarios(problem):
    u = problem.uncertainty
    if isinstance(u, FiniteSet):
        return list(u.scenarios)
    return enumerate_vertices(problem)


def robustness_gap(problem, threads=None):
    """Strict robust optimum minus the worst per-scenario optimum (sign-adjusted for max)."""
    scenarios = _finite_scenarios(problem)
    rep = strict_counterpart(problem).solve()
    if rep.status != "optimal":
        raise SolveFailure("STRICT_INFEASIBLE" if rep.status == "infeasible" else "STRICT_UNSOLVABLE",
                           f"strict counterpart is {rep.status}", rep.status)
    optima = scenario_optima(problem, scenarios, threads)
    if problem.sense == "min":
        return rep.objective - max(optima)
    return min(optima) - rep.objective


# ---------------------------------------------------------------------------
# comparison harness


@dataclass
class ComparisonRow:
    concept: str
    status: str
    objective: float = None  # the concept's own objective
    robust_value: float = None  # worst case over the evaluation scenarios
    nominal_value: float = None
    mean_value: float = None
    violated: int = None
    max_violation: float = None
    price: float = None
    columns: int = None
    rows: int = None
    solve_time: float = None
    message: str = ""


COLUMNS = tuple(ComparisonRow.__dataclass_fields__)


@dataclass
class ComparisonTable:
    rows: list = field(default_factory=list)
    evaluation_scenarios: int = 0

    def row(self, concept):
        for r in self.rows:
            if r.concept == concept:
                return r
        raise KeyError(concept)

    @property
    def succeeded(self):
        return [r for r in self.rows if r.status != "FAILED"]

    def to_dict(self):
        return {"evaluation_scenarios": self.evaluation_scenarios, "rows": [asdict(r) for r in self.rows]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(["" if getattr(r, c) is None else getattr(r, c) for c in COLUMNS])
        return buf.getvalue()


def _light(problem, cfg):
    if "weights" not in cfg:
        raise InstanceError("MISSING_CONFIG", "light robustness needs row weights")
    return light_counterpart(problem, LightConfig(dict(cfg["weights"]), float(cfg.get("rho", 0.0))))


def _mulvey(problem, cfg):
    if "probabilities" not in cfg:
        raise InstanceError("MISSING_CONFIG", "the Mulvey model needs scenario probabilities")
    return mulvey_counterpart(problem, MulveyConfig(
        dict(cfg["probabilities"]),
        float(cfg.get("omega", 1.0)),
        cfg.get("sigma_mode", "worst-case"),
        cfg.get("penalty", "positive"),
    ))


def _reliability(problem, cfg):
    if "gamma_vector" not in cfg:
        raise InstanceError("MISSING_CONFIG", "reliability needs a gamma vector")
    return reliability_counterpart(problem, dict(cfg["gamma_vector"]))


COUNTERPARTS = {
    "strict": lambda p, cfg: strict_counterpart(p),
    "cc": lambda p, cfg: cc_counterpart(p),
    "reliability": _reliability,
    "light": _light,
    "adjustable": lambda p, cfg: adjustable_counterpart(p),
    "mulvey": _mulvey,
    "regret-finite": lambda p, cfg: regret_counterpart_finite(p, cfg.get("threads")),
    "regret-dual": lambda p, cfg: regret_dual_counterpart_interval(p, cfg.get("assume_integral", False)),
}

ALGORITHMS = {
    "cutting-plane": lambda p, cfg: cutting_plane_solve(p, cfg.get("cut_tol"), cfg.get("max_iters", 200)),
    "sampling": lambda p, cfg: sample_and_solve(p, cfg.get("samples", 100), cfg.get("seed", 0),
                                                cfg.get("epsilons", ())),
    "surrogate-bb": lambda p, cfg: surrogate_relaxation_bb(p),
    "candidate": lambda p, cfg: candidate_heuristic(p, cfg.get("threads")),
}


def run_concept(problem, concept, config=None):
    """Solve ``problem`` under ``concept``; returns ``(report, model)`` (model is None for algorithms)."""
    cfg = dict(config or {})
    if concept in COUNTERPARTS:
        art = COUNTERPARTS[concept](problem, cfg)
        rep = art.solve()
        if rep.assignment is not None:
            rep.assignment = {k: v for k, v in rep.assignment.items() if k in set(problem.variable_names)}
        rep.info["concept"] = concept
        return rep, art.model
    if concept in ALGORITHMS:
        return ALGORITHMS[concept](problem, cfg), None
    raise InstanceError("UNKNOWN_CONCEPT", f"unknown concept {concept!r}")


def evaluation_scenarios(problem, seed=0, samples=DEFAULT_EVAL_SAMPLES):
    """Common scenario list: the whole finite/vertex set, else nominal plus seeded samples."""
    u = problem.uncertainty
    if isinstance(u, (FiniteSet, PolytopeSet)):
        return _finite_scenarios(problem)
    return [problem.nominal_scenario()] + sample_scenarios(problem, samples, seed)


def _compare_one(problem, concept, cfg, scenarios, timing):
    row = ComparisonRow(concept, "FAILED")
    try:
        start = time.perf_counter()
        rep, model = run_concept(problem, concept, cfg)
        elapsed = time.perf_counter() - start
        if timing:
            row.solve_time = round(elapsed, 6)
        if model is not None:
            row.columns, row.rows = len(model.columns), len(model.rows)
        row.status = rep.status
        row.objective = rep.objective
        if rep.status != "optimal":
            return row
        ev = evaluate_solution(problem, rep.assignment, scenarios)
        row.robust_value = ev.worst_case
        row.nominal_value = ev.nominal_value
        row.mean_value = ev.mean_value
        row.violated = ev.violated_count
        row.max_violation = ev.max_violation
        try:
            row.price = price_of_robustness(problem, ev.worst_case)
        except RobustError as exc:
            row.message = exc.code
    except (RobustError, ValueError) as exc:
        row.status = "FAILED"
        row.message = getattr(exc, "code", type(exc).__name__) + ": " + str(getattr(exc, "message", exc))
    return row


def compare_concepts(problem, concepts, configs=None, seed=0, samples=DEFAULT_EVAL_SAMPLES,
                     threads=None, timing=False):
    """Run each concept, evaluate its solution on one shared scenario list, and tabulate.

    ``configs`` maps a concept to its keyword settings (a ``"*"`` entry applies
    to all). Rows follow ``CONCEPT_ORDER`` with unknown concepts last; a failing
    concept yields a FAILED row instead of an exception. Solve times are only
    recorded with ``timing`` so that tables stay reproducible.
    """
    configs = configs or {}
    wanted = list(dict.fromkeys(concepts))
    rank = {c: i for i, c in enumerate(CONCEPT_ORDER)}
    wanted.sort(key=lambda c: (rank.get(c, len(rank)), c))
    scenarios = evaluation_scenarios(problem, seed, samples)
    base = {"seed": seed, **configs.get("*", {})}

    def run(concept):
        return _compare_one(problem, concept, {**base, **configs.get(concept, {})}, scenarios, timing)

    return ComparisonTable(parallel_map(run, wanted, threads), len(scenarios))
