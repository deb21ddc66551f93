"""Uncertain linear programs: data model, instance documents, scenarios.

An instance is a nominal LP (coefficients, right-hand sides, objective) plus
per-entry deviations and one attached uncertainty set.  Scenarios are sparse
overrides of the nominal data; anything a scenario does not mention keeps its
nominal value.
"""

import itertools
import json
import math
import re
from dataclasses import dataclass, field

from .errors import InstanceError, LimitError, UnsupportedError
from .solver import Column, DeterministicModel, Row

HERE_AND_NOW = "here-and-now"
WAIT_AND_SEE = "wait-and-see"
STAGES = (HERE_AND_NOW, WAIT_AND_SEE)
DEFAULT_VERTEX_CAP = 1 << 20

# '#' and '@' are reserved for generated column and row names
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]{}!$%&()/,;?'~|]*$")


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    integer: bool = False
    stage: str = HERE_AND_NOW


@dataclass(frozen=True)
class Objective:
    coeffs: dict = field(default_factory=dict)
    deviations: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConstraintRow:
    name: str
    coeffs: dict
    sense: str
    rhs: float
    deviations: dict = field(default_factory=dict)
    rhs_deviation: float = 0.0

    @property
    def uncertain(self):
        return self.rhs_deviation > 0 or any(d > 0 for d in self.deviations.values())


@dataclass(frozen=True)
class Scenario:
    name: str
    rows: dict = field(default_factory=dict)  # row -> {var: coefficient}
    rhs: dict = field(default_factory=dict)  # row -> rhs
    objective: dict = field(default_factory=dict)  # var -> coefficient

    @property
    def empty(self):
        return not (self.rows or self.rhs or self.objective)


@dataclass(frozen=True)
class FiniteSet:
    scenarios: tuple
    nominal_index: int = 0
    kind = "finite"


@dataclass(frozen=True)
class IntervalSet:
    kind = "interval"


@dataclass(frozen=True)
class BudgetSet:
    gamma: float
    kind = "budget"


@dataclass(frozen=True)
class PolytopeSet:
    vertices: tuple
    kind = "polytope"


@dataclass(frozen=True)
class UncertainLinearProgram:
    name: str
    sense: str
    variables: tuple
    objective: Objective
    constraints: tuple
    uncertainty: object

    @property
    def variable_names(self):
        return [v.name for v in self.variables]

    def variable(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def row(self, name):
        for r in self.constraints:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def here_and_now(self):
        return [v for v in self.variables if v.stage == HERE_AND_NOW]

    @property
    def wait_and_see(self):
        return [v for v in self.variables if v.stage == WAIT_AND_SEE]

    def nominal_scenario(self):
        if isinstance(self.uncertainty, FiniteSet):
            return self.uncertainty.scenarios[self.uncertainty.nominal_index]
        return Scenario("nominal")

    def with_uncertainty(self, uncertainty):
        return UncertainLinearProgram(
            self.name, self.sense, self.variables, self.objective, self.constraints, uncertainty
        )

    def with_constraints(self, constraints):
        return UncertainLinearProgram(
            self.name, self.sense, self.variables, self.objective, tuple(constraints), self.uncertainty
        )


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str


def validate(problem):
    """Check every invariant of ``problem``; returns a list of :class:`Violation`."""
    out = []

    def bad(code, loc, msg):
        out.append(Violation(code, loc, msg))

    if problem.sense not in ("min", "max"):
        bad("BAD_SENSE", "sense", f"sense must be min or max, got {problem.sense!r}")
    if not problem.variables:
        bad("EMPTY_VARIABLES", "variables", "at least one variable is required")
    names = set()
    for v in problem.variables:
        loc = f"variables.{v.name}"
        if not isinstance(v.name, str) or not _NAME.match(v.name):
            bad("BAD_NAME", loc, f"invalid variable name {v.name!r}")
        if v.name in names:
            bad("DUPLICATE_NAME", loc, f"duplicate variable {v.name!r}")
        names.add(v.name)
        if math.isnan(v.lower) or math.isnan(v.upper) or v.lower > v.upper:
            bad("BAD_BOUNDS", loc, f"lower {v.lower} exceeds upper {v.upper}")
        if v.stage not in STAGES:
            bad("BAD_STAGE", loc, f"unknown stage {v.stage!r}")

    def check_map(mapping, loc, deviations=False):
        for var, val in mapping.items():
            if var not in names:
                bad("UNKNOWN_VARIABLE", loc, f"unknown variable {var!r}")
            if not _finite(val):
                bad("NON_FINITE", loc, f"non-finite value for {var!r}")
            elif deviations and val < 0:
                bad("NEGATIVE_DEVIATION", loc, f"negative deviation {val} for {var!r}")

    check_map(problem.objective.coeffs, "objective.coeffs")
    check_map(problem.objective.deviations, "objective.deviations", deviations=True)

    rows = set()
    for r in problem.constraints:
        loc = f"constraints.{r.name}"
        if not isinstance(r.name, str) or not _NAME.match(r.name):
            bad("BAD_NAME", loc, f"invalid row name {r.name!r}")
        if r.name in rows:
            bad("DUPLICATE_NAME", loc, f"duplicate row {r.name!r}")
        rows.add(r.name)
        if r.sense not in ("<=", ">=", "="):
            bad("BAD_SENSE", loc, f"unknown row sense {r.sense!r}")
        if not _finite(r.rhs):
            bad("NON_FINITE", loc, "non-finite rhs")
        check_map(r.coeffs, loc + ".coeffs")
        check_map(r.deviations, loc + ".deviations", deviations=True)
        if not _finite(r.rhs_deviation):
            bad("NON_FINITE", loc, "non-finite rhs_deviation")
        elif r.rhs_deviation < 0:
            bad("NEGATIVE_DEVIATION", loc, f"negative rhs_deviation {r.rhs_deviation}")
        elif r.sense == "=" and r.uncertain:
            bad("EQUALITY_DEVIATION", loc, "equality rows cannot carry deviations")

    def check_scenario(s, loc):
        for row, coeffs in s.rows.items():
            if row not in rows:
                bad("UNKNOWN_ROW", loc, f"unknown row {row!r}")
            check_map(coeffs, f"{loc}.rows.{row}")
        for row, val in s.rhs.items():
            if row not in rows:
                bad("UNKNOWN_ROW", loc, f"unknown row {row!r}")
            if not _finite(val):
                bad("NON_FINITE", loc, f"non-finite rhs for {row!r}")
        check_map(s.objective, loc + ".objective")

    u = problem.uncertainty
    if isinstance(u, FiniteSet):
        if not u.scenarios:
            bad("EMPTY_SET", "uncertainty", "finite set needs at least one scenario")
        elif not 0 <= u.nominal_index < len(u.scenarios):
            bad("BAD_NOMINAL_INDEX", "uncertainty", f"nominal_index {u.nominal_index} out of range")
        for s in u.scenarios:
            check_scenario(s, f"uncertainty.scenarios.{s.name}")
    elif isinstance(u, PolytopeSet):
        if not u.vertices:
            bad("EMPTY_SET", "uncertainty", "polytope needs at least one vertex")
        for s in u.vertices:
            check_scenario(s, f"uncertainty.vertices.{s.name}")
    elif isinstance(u, BudgetSet):
        if not _finite(u.gamma) or u.gamma < 0:
            bad("BAD_GAMMA", "uncertainty", f"gamma must be >= 0, got {u.gamma}")
    elif not isinstance(u, IntervalSet):
        bad("BAD_SET", "uncertainty", f"unknown uncertainty set {u!r}")
    return out


def _finite(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def check(problem):
    """Raise :class:`InstanceError` for the first violation, else return ``problem``."""
    report = validate(problem)
    if report:
        v = report[0]
        raise InstanceError(v.code, f"{v.location}: {v.message}")
    return problem


# ---------------------------------------------------------------------------
# instance documents


def _bound(value, default, where):
    if value is None:
        return default
    if isinstance(value, str):
        token = value.strip().lower()
        if token in ("+inf", "inf", "infinity", "+infinity"):
            return math.inf
        if token in ("-inf", "-infinity"):
            return -math.inf
        raise InstanceError("BAD_VALUE", f"{where}: bad bound {value!r}")
    return _number(value, where)


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceError("BAD_VALUE", f"{where}: expected a number, got {value!r}")
    return float(value)


def _num_map(obj, where):
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise InstanceError("BAD_VALUE", f"{where}: expected an object")
    return {str(k): _number(v, f"{where}.{k}") for k, v in obj.items()}


def _scenario(obj, where):
    if not isinstance(obj, dict):
        raise InstanceError("BAD_VALUE", f"{where}: scenario must be an object")
    rows = obj.get("rows") or {}
    if not isinstance(rows, dict):
        raise InstanceError("BAD_VALUE", f"{where}.rows: expected an object")
    return Scenario(
        name=str(obj.get("name", where)),
        rows={str(r): _num_map(m, f"{where}.rows.{r}") for r, m in rows.items()},
        rhs=_num_map(obj.get("rhs"), f"{where}.rhs"),
        objective=_num_map(obj.get("objective"), f"{where}.objective"),
    )


def _require(obj, key, where):
    if key not in obj:
        raise InstanceError("MISSING_KEY", f"{where}: missing key {key!r}")
    return obj[key]


def problem_from_dict(doc):
    if not isinstance(doc, dict):
        raise InstanceError("BAD_VALUE", "instance must be a JSON object")
    variables = []
    for i, v in enumerate(_require(doc, "variables", "instance") or []):
        where = f"variables[{i}]"
        variables.append(
            Variable(
                name=str(_require(v, "name", where)),
                lower=_bound(v.get("lb"), 0.0, where + ".lb"),
                upper=_bound(v.get("ub"), math.inf, where + ".ub"),
                integer=bool(v.get("integer", False)),
                stage=v.get("stage", HERE_AND_NOW),
            )
        )
    if not variables:
        raise InstanceError("EMPTY_VARIABLES", "at least one variable is required")
    obj = doc.get("objective") or {}
    objective = Objective(
        _num_map(obj.get("coeffs"), "objective.coeffs"),
        _num_map(obj.get("deviations"), "objective.deviations"),
    )
    constraints = []
    for i, r in enumerate(doc.get("constraints") or []):
        where = f"constraints[{i}]"
        constraints.append(
            ConstraintRow(
                name=str(_require(r, "name", where)),
                coeffs=_num_map(r.get("coeffs"), where + ".coeffs"),
                sense=_require(r, "sense", where),
                rhs=_number(_require(r, "rhs", where), where + ".rhs"),
                deviations=_num_map(r.get("deviations"), where + ".deviations"),
                rhs_deviation=_number(r.get("rhs_deviation", 0.0), where + ".rhs_deviation"),
            )
        )
    unc = doc.get("uncertainty") or {"type": "interval"}
    kind = unc.get("type")
    if kind == "finite":
        scen = tuple(_scenario(s, f"scenarios[{i}]") for i, s in enumerate(unc.get("scenarios") or []))
        uncertainty = FiniteSet(scen, int(unc.get("nominal_index", 0)))
    elif kind == "interval":
        uncertainty = IntervalSet()
    elif kind == "budget":
        uncertainty = BudgetSet(_number(_require(unc, "gamma", "uncertainty"), "uncertainty.gamma"))
    elif kind == "polytope":
        uncertainty = PolytopeSet(
            tuple(_scenario(s, f"vertices[{i}]") for i, s in enumerate(unc.get("vertices") or []))
        )
    else:
        raise InstanceError("BAD_SET", f"unknown uncertainty type {kind!r}")
    problem = UncertainLinearProgram(
        name=str(doc.get("name", "instance")),
        sense=doc.get("sense", "min"),
        variables=tuple(variables),
        objective=objective,
        constraints=tuple(constraints),
        uncertainty=uncertainty,
    )
    return check(problem)


def parse_instance(text):
    """Parse and validate an instance document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError("SYNTAX", exc.msg, exc.lineno, exc.colno) from None
    return problem_from_dict(doc)


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def _bound_out(x):
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    return x


def _scenario_out(s):
    return {"name": s.name, "rows": s.rows, "rhs": s.rhs, "objective": s.objective}


def problem_to_dict(problem):
    u = problem.uncertainty
    if isinstance(u, FiniteSet):
        unc = {"type": "finite", "scenarios": [_scenario_out(s) for s in u.scenarios],
               "nominal_index": u.nominal_index}
    elif isinstance(u, BudgetSet):
        unc = {"type": "budget", "gamma": u.gamma}
    elif isinstance(u, PolytopeSet):
        unc = {"type": "polytope", "vertices": [_scenario_out(s) for s in u.vertices]}
    else:
        unc = {"type": "interval"}
    return {
        "name": problem.name,
        "sense": problem.sense,
        "variables": [
            {"name": v.name, "lb": _bound_out(v.lower), "ub": _bound_out(v.upper),
             "integer": v.integer, "stage": v.stage}
            for v in problem.variables
        ],
        "objective": {"coeffs": problem.objective.coeffs, "deviations": problem.objective.deviations},
        "constraints": [
            {"name": r.name, "coeffs": r.coeffs, "deviations": r.deviations, "sense": r.sense,
             "rhs": r.rhs, "rhs_deviation": r.rhs_deviation}
            for r in problem.constraints
        ],
        "uncertainty": unc,
    }


def serialize_instance(problem):
    return json.dumps(problem_to_dict(problem), indent=2)


# ---------------------------------------------------------------------------
# scenarios


def scenario_row(problem, row, scenario):
    """Coefficients and rhs of ``row`` under ``scenario``."""
    coeffs = dict(row.coeffs)
    coeffs.update(scenario.rows.get(row.name, {}))
    return coeffs, scenario.rhs.get(row.name, row.rhs)


def scenario_objective(problem, scenario):
    coeffs = dict(problem.objective.coeffs)
    coeffs.update(scenario.objective)
    return coeffs


def _check_refs(problem, scenario):
    names = set(problem.variable_names)
    rows = {r.name for r in problem.constraints}
    for row, coeffs in scenario.rows.items():
        if row not in rows:
            raise InstanceError("UNKNOWN_ROW", f"scenario {scenario.name!r}: unknown row {row!r}")
        for var in coeffs:
            if var not in names:
                raise InstanceError("UNKNOWN_VARIABLE", f"scenario {scenario.name!r}: unknown variable {var!r}")
    for row in scenario.rhs:
        if row not in rows:
            raise InstanceError("UNKNOWN_ROW", f"scenario {scenario.name!r}: unknown row {row!r}")
    for var in scenario.objective:
        if var not in names:
            raise InstanceError("UNKNOWN_VARIABLE", f"scenario {scenario.name!r}: unknown variable {var!r}")


def instantiate(problem, scenario=None):
    """The deterministic problem P(scenario); deviations and stages are dropped."""
    scenario = scenario or Scenario("nominal")
    _check_refs(problem, scenario)
    cost = scenario_objective(problem, scenario)
    columns = [Column(v.name, v.lower, v.upper, v.integer, float(cost.get(v.name, 0.0)))
               for v in problem.variables]
    rows = []
    for r in problem.constraints:
        coeffs, rhs = scenario_row(problem, r, scenario)
        rows.append(Row(r.name, coeffs, r.sense, float(rhs)))
    return DeterministicModel(problem.sense, tuple(columns), tuple(rows), f"{problem.name}@{scenario.name}")


def uncertain_entries(problem):
    """Entries with a strictly positive deviation, in a fixed order.

    Each entry is ``(kind, row, var, nominal, deviation)`` with kind one of
    ``objective``, ``coeff``, ``rhs``.
    """
    order = problem.variable_names
    entries = []
    for v in order:
        d = problem.objective.deviations.get(v, 0.0)
        if d > 0:
            entries.append(("objective", None, v, problem.objective.coeffs.get(v, 0.0), d))
    for r in problem.constraints:
        for v in order:
            d = r.deviations.get(v, 0.0)
            if d > 0:
                entries.append(("coeff", r.name, v, r.coeffs.get(v, 0.0), d))
        if r.rhs_deviation > 0:
            entries.append(("rhs", r.name, None, r.rhs, r.rhs_deviation))
    return entries


def scenario_from_entries(name, values):
    """Build a scenario from ``[(kind, row, var, value), ...]``."""
    rows, rhs, objective = {}, {}, {}
    for kind, row, var, value in values:
        if kind == "objective":
            objective[var] = value
        elif kind == "coeff":
            rows.setdefault(row, {})[var] = value
        else:
            rhs[row] = value
    return Scenario(name, rows, rhs, objective)


def enumerate_vertices(problem, cap=DEFAULT_VERTEX_CAP):
    """Extreme scenarios of an interval box (2^M corners) or a polytope's vertex list."""
    u = problem.uncertainty
    if isinstance(u, PolytopeSet):
        if len(u.vertices) > cap:
            raise LimitError("CAP_EXCEEDED", f"{len(u.vertices)} vertices exceed cap {cap}")
        return list(u.vertices)
    if not isinstance(u, IntervalSet):
        raise UnsupportedError("UNSUPPORTED_SET", f"vertex enumeration needs an interval or polytope set, not {u.kind}")
    entries = uncertain_entries(problem)
    M = len(entries)
    if 2 ** M > cap:
        raise LimitError("CAP_EXCEEDED", f"2^{M} corners exceed cap {cap}")
    out = []
    width = max(1, len(str(2 ** M - 1)))
    for k, signs in enumerate(itertools.product((-1.0, 1.0), repeat=M)):
        values = [(kind, row, var, nom + s * d) for (kind, row, var, nom, d), s in zip(entries, signs)]
        out.append(scenario_from_entries(f"corner{k:0{width}d}", values))
    return out
