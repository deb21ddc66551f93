"""Robust counterparts: uncertain LP + concept -> one deterministic model.

Generated columns and rows use ``#`` (auxiliary) and ``@`` (per-scenario
copy) in their names; user names may not contain either character.

Row-wise reformulations for interval and budget sets treat the uncertainty as
constraint-wise: each row hedges against its own worst case.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

from .concurrency import parallel_map
from .errors import InstanceError, SolveFailure, UnsupportedError
from .model import (
    BudgetSet,
    FiniteSet,
    IntervalSet,
    PolytopeSet,
    instantiate,
    scenario_objective,
    scenario_row,
)
from .solver import Column, DeterministicModel, Row, solve, to_lp_text

EPIGRAPH = "z#obj"


@dataclass(frozen=True)
class LightConfig:
    """Light robustness parameters.

    ``weights`` must name every constraint row.  Rescaling a row by a factor
    rescales its slack by the same factor, so weights are never normalized
    implicitly.
    """

    weights: dict
    rho: float = 0.0

    def __post_init__(self):
        if any(not w > 0 for w in self.weights.values()):
            raise InstanceError("BAD_CONFIG", "light weights must be strictly positive")
        if not self.rho >= 0:
            raise InstanceError("BAD_CONFIG", "rho must be >= 0")


@dataclass(frozen=True)
class MulveyConfig:
    probabilities: dict
    omega: float = 1.0
    sigma_mode: str = "worst-case"
    penalty: str = "positive"

    def __post_init__(self):
        if any(p < 0 for p in self.probabilities.values()):
            raise InstanceError("BAD_CONFIG", "probabilities must be >= 0")
        if abs(sum(self.probabilities.values()) - 1.0) > 1e-9:
            raise InstanceError("BAD_CONFIG", "probabilities must sum to 1")
        if not self.omega >= 0:
            raise InstanceError("BAD_CONFIG", "omega must be >= 0")
        if self.sigma_mode not in ("worst-case", "expectation"):
            raise InstanceError("BAD_CONFIG", f"unknown sigma_mode {self.sigma_mode!r}")
        if self.penalty not in ("positive", "abs"):
            raise InstanceError("BAD_CONFIG", f"unknown penalty {self.penalty!r}")


@dataclass
class CounterpartArtifact:
    model: DeterministicModel
    variable_map: dict
    concept: str
    scenario_count: int = 0
    per_scenario_optima: dict = None
    nominal_optimum: float = None
    warnings: list = field(default_factory=list)

    def solve(self, **kw):
        report = solve(self.model, **kw)
        report.info["concept"] = self.concept
        return report

    def metadata(self):
        return {
            "concept": self.concept,
            "scenario_count": self.scenario_count,
            "per_scenario_optima": self.per_scenario_optima,
            "nominal_optimum": self.nominal_optimum,
        }

    def metadata_json(self):
        return json.dumps(self.metadata(), indent=2)

    def lp_text(self):
        return to_lp_text(self.model)


class _Builder:
    def __init__(self, name):
        self.name = name
        self.columns = []
        self.rows = []
        self._names = set()
        self._row_keys = set()
        self._abs = {}

    def column(self, name, lower=0.0, upper=math.inf, integer=False, cost=0.0):
        if name in self._names:
            raise InstanceError("DUPLICATE_NAME", f"generated column {name!r} collides")
        self._names.add(name)
        self.columns.append(Column(name, lower, upper, integer, cost))
        return name

    def row(self, name, coeffs, sense, rhs, dedupe=False):
        coeffs = {k: float(v) for k, v in coeffs.items() if v != 0}
        if dedupe:
            key = (tuple(sorted(coeffs.items())), sense, float(rhs))
            if key in self._row_keys:
                return
            self._row_keys.add(key)
        self.rows.append(Row(name, coeffs, sense, float(rhs)))

    def abs_column(self, problem, var):
        """Column y with -y <= x <= y, shared by every row that needs |x|."""
        if var not in self._abs:
            y = self.column(f"y#{var}")
            self.row(f"abs+#{var}", {var: 1.0, y: -1.0}, "<=", 0.0)
            self.row(f"abs-#{var}", {var: -1.0, y: -1.0}, "<=", 0.0)
            self._abs[var] = y
        return self._abs[var]

    def add_cost(self, name, amount):
        for k, c in enumerate(self.columns):
            if c.name == name:
                self.columns[k] = Column(c.name, c.lower, c.upper, c.integer, c.cost + amount)
                return
        raise KeyError(name)

    def model(self, sense):
        return DeterministicModel(sense, tuple(self.columns), tuple(self.rows), self.name)


def _sign(problem):
    return 1.0 if problem.sense == "min" else -1.0


def _original_columns(b, problem, cost=None):
    cost = cost if cost is not None else {}
    for v in problem.variables:
        b.column(v.name, v.lower, v.upper, v.integer, float(cost.get(v.name, 0.0)))
    return {v.name: v.name for v in problem.variables}


def _scenarios(problem):
    u = problem.uncertainty
    if isinstance(u, FiniteSet):
        return list(u.scenarios)
    if isinstance(u, PolytopeSet):
        return list(u.vertices)
    raise UnsupportedError("UNSUPPORTED_SET", f"needs a finite or polytope set, not {u.kind}")


def _objectives_differ(problem, scenarios):
    objs = [
        {k: v for k, v in scenario_objective(problem, s).items() if v != 0} for s in scenarios
    ]
    return any(o != objs[0] for o in objs[1:])


def _reject_equality_deviations(problem):
    for r in problem.constraints:
        if r.sense == "=" and r.uncertain:
            raise UnsupportedError("EQUALITY_DEVIATION", f"row {r.name!r}: equality rows cannot carry deviations")


def _shifted(sense, rhs, shift):
    if sense == "<=":
        return rhs + shift
    if sense == ">=":
        return rhs - shift
    return rhs


def _relax(coeffs, sense, slack):
    """Add slack column so that the row reads F(x) <= slack."""
    if slack is None or sense == "=":
        return coeffs
    out = dict(coeffs)
    out[slack] = out.get(slack, 0.0) + (-1.0 if sense == "<=" else 1.0)
    return out


def _emit_rows(b, problem, shift=None, slack=None):
    """Robust versions of all constraint rows for the problem's uncertainty set."""
    shift = shift or {}
    slack = slack or {}
    u = problem.uncertainty
    if isinstance(u, (FiniteSet, PolytopeSet)):
        for s in _scenarios(problem):
            for r in problem.constraints:
                coeffs, rhs = scenario_row(problem, r, s)
                rhs = _shifted(r.sense, rhs, shift.get(r.name, 0.0))
                if r.sense == "=" and r.name in slack:
                    b.row(f"{r.name}@{s.name}#le", _relax(coeffs, "<=", slack[r.name]), "<=", rhs, dedupe=True)
                    b.row(f"{r.name}@{s.name}#ge", _relax(coeffs, ">=", slack[r.name]), ">=", rhs, dedupe=True)
                else:
                    b.row(f"{r.name}@{s.name}", _relax(coeffs, r.sense, slack.get(r.name)), r.sense, rhs, dedupe=True)
        return
    _reject_equality_deviations(problem)
    for r in problem.constraints:
        rhs = _shifted(r.sense, r.rhs, shift.get(r.name, 0.0))
        if r.sense == "=" and r.name in slack:
            b.row(f"{r.name}#le", _relax(r.coeffs, "<=", slack[r.name]), "<=", rhs)
            b.row(f"{r.name}#ge", _relax(r.coeffs, ">=", slack[r.name]), ">=", rhs)
            continue
        coeffs = _relax(r.coeffs, r.sense, slack.get(r.name))
        if not r.uncertain:
            b.row(r.name, coeffs, r.sense, rhs)
            continue
        direction = 1.0 if r.sense == "<=" else -1.0
        if isinstance(u, IntervalSet):
            coeffs = dict(coeffs)
            for var, d in r.deviations.items():
                if d > 0:
                    y = b.abs_column(problem, var)
                    coeffs[y] = coeffs.get(y, 0.0) + direction * d
            b.row(r.name, coeffs, r.sense, rhs - direction * r.rhs_deviation)
        elif isinstance(u, BudgetSet):
            protection = _budget_block(b, problem, r.name, r.deviations, r.rhs_deviation, u.gamma)
            coeffs = dict(coeffs)
            for col, a in protection.items():
                coeffs[col] = coeffs.get(col, 0.0) + direction * a
            b.row(r.name, coeffs, r.sense, rhs - direction * protection.pop("#const", 0.0))
        else:
            raise UnsupportedError("UNSUPPORTED_SET", f"unknown set {u!r}")


def _budget_block(b, problem, tag, deviations, rhs_deviation, gamma):
    """Dual of the inner max over budgeted deviations for one row (or the objective).

    Emits z + p_j >= d_j y_j and returns the protection term gamma*z + sum p_j as
    a column->coefficient map.  A right-hand-side deviation is an entry whose
    absolute multiplier is fixed at 1.
    """
    z = b.column(f"zg#{tag}")
    protection = {z: float(gamma)}
    for var in problem.variable_names:
        d = deviations.get(var, 0.0)
        if d > 0:
            y = b.abs_column(problem, var)
            p = b.column(f"p#{tag}#{var}")
            b.row(f"dual#{tag}#{var}", {z: 1.0, p: 1.0, y: -d}, ">=", 0.0)
            protection[p] = 1.0
    if rhs_deviation > 0:
        p = b.column(f"p#{tag}#rhs")
        b.row(f"dual#{tag}#rhs", {z: 1.0, p: 1.0}, ">=", rhs_deviation)
        protection[p] = 1.0
    return protection


def _emit_objective(b, problem):
    """Worst-case objective, folded into column costs or an epigraph column."""
    u = problem.uncertainty
    sign = _sign(problem)
    if isinstance(u, (FiniteSet, PolytopeSet)):
        scenarios = _scenarios(problem)
        if not _objectives_differ(problem, scenarios):
            for var, c in scenario_objective(problem, scenarios[0]).items():
                b.add_cost(var, c)
            return
        z = b.column(EPIGRAPH, -math.inf, math.inf, cost=1.0)
        for s in scenarios:
            coeffs = dict(scenario_objective(problem, s))
            coeffs[z] = -1.0
            b.row(f"obj@{s.name}", coeffs, "<=" if sign > 0 else ">=", 0.0, dedupe=True)
        return
    for var, c in problem.objective.coeffs.items():
        b.add_cost(var, c)
    devs = {k: d for k, d in problem.objective.deviations.items() if d > 0}
    if not devs:
        return
    if isinstance(u, IntervalSet):
        for var, d in devs.items():
            b.add_cost(b.abs_column(problem, var), sign * d)
    else:
        protection = _budget_block(b, problem, "obj", devs, 0.0, u.gamma)
        for col, a in protection.items():
            b.add_cost(col, sign * a)


def _artifact(b, problem, concept, **kw):
    return CounterpartArtifact(
        model=b.model(problem.sense if concept not in ("light", "regret-finite", "regret-dual") else "min"),
        variable_map={v.name: v.name for v in problem.variables},
        concept=concept,
        **kw,
    )


def _scenario_count(problem):
    u = problem.uncertainty
    if isinstance(u, FiniteSet):
        return len(u.scenarios)
    if isinstance(u, PolytopeSet):
        return len(u.vertices)
    return 0


def strict_counterpart(problem):
    """Strictly robust counterpart (feasible for every scenario, worst-case objective)."""
    if isinstance(problem.uncertainty, BudgetSet):
        raise UnsupportedError("UNSUPPORTED_SET", "budget sets need the cc counterpart (--concept cc)")
    b = _Builder(f"{problem.name}#strict")
    _original_columns(b, problem)
    _emit_rows(b, problem)
    _emit_objective(b, problem)
    return _artifact(b, problem, "strict", scenario_count=_scenario_count(problem))


def cc_counterpart(problem):
    """Cardinality-constrained counterpart via the dualized budget block."""
    if not isinstance(problem.uncertainty, BudgetSet):
        raise UnsupportedError("UNSUPPORTED_SET", f"cc counterpart needs a budget set, not {problem.uncertainty.kind}")
    b = _Builder(f"{problem.name}#cc")
    _original_columns(b, problem)
    _emit_rows(b, problem)
    _emit_objective(b, problem)
    return _artifact(b, problem, "cc")


def reliability_counterpart(problem, gamma_vector):
    """Strict (or cc) counterpart after relaxing each row by its tolerance."""
    rows = {r.name: r for r in problem.constraints}
    for name, g in gamma_vector.items():
        if name not in rows:
            raise InstanceError("UNKNOWN_ROW", f"unknown row {name!r}")
        if not g >= 0:
            raise InstanceError("BAD_CONFIG", f"reliability tolerance for {name!r} must be >= 0")
        if rows[name].sense == "=" and g > 0:
            raise UnsupportedError("EQUALITY_ROW", f"row {name!r}: reliability needs inequality rows")
    b = _Builder(f"{problem.name}#reliability")
    _original_columns(b, problem)
    _emit_rows(b, problem, shift=dict(gamma_vector))
    _emit_objective(b, problem)
    return _artifact(b, problem, "reliability", scenario_count=_scenario_count(problem))


def _optimum(model, what):
    report = solve(model)
    if not report.optimal:
        raise SolveFailure(what, f"{model.name}: {report.status}", report.status)
    return report.objective


def nominal_optimum(problem):
    """f*(nominal) with the embedded solver; raises NOMINAL_UNSOLVABLE."""
    return _optimum(instantiate(problem, problem.nominal_scenario()), "NOMINAL_UNSOLVABLE")


def scenario_optima(problem, scenarios, threads=None):
    return parallel_map(lambda s: _optimum(instantiate(problem, s), "SCENARIO_UNSOLVABLE"), scenarios, threads)


def light_counterpart(problem, config):
    """Lightly robust counterpart: min sum w_i*slack_i with a nominal-quality budget."""
    u = problem.uncertainty
    if not isinstance(u, (FiniteSet, IntervalSet, BudgetSet, PolytopeSet)):
        raise UnsupportedError("UNSUPPORTED_SET", "unsupported uncertainty set")
    missing = [r.name for r in problem.constraints if r.name not in config.weights]
    if missing:
        raise InstanceError("BAD_CONFIG", f"light robustness needs a weight for every row; missing {missing}")
    f_nom = nominal_optimum(problem)
    b = _Builder(f"{problem.name}#light")
    _original_columns(b, problem)
    slack = {}
    for r in problem.constraints:
        slack[r.name] = b.column(f"gamma#{r.name}", cost=float(config.weights[r.name]))
    nominal = problem.nominal_scenario()
    quality = scenario_objective(problem, nominal)
    if problem.sense == "min":
        b.row("nominal#quality", quality, "<=", f_nom + config.rho)
    else:
        b.row("nominal#quality", quality, ">=", f_nom - config.rho)
    _emit_rows(b, problem, slack=slack)
    art = _artifact(b, problem, "light", scenario_count=_scenario_count(problem), nominal_optimum=f_nom)
    art.variable_map.update({f"gamma#{k}": v for k, v in slack.items()})
    return art


def _copy(name, scenario):
    return f"{name}@{scenario.name}"


def adjustable_counterpart(problem):
    """Two-stage counterpart: wait-and-see columns are copied once per scenario."""
    u = problem.uncertainty
    if not isinstance(u, FiniteSet):
        raise UnsupportedError("UNSUPPORTED_SET", f"adjustable counterpart needs a finite set, not {u.kind}")
    recourse = {v.name for v in problem.wait_and_see}
    if not recourse:
        art = strict_counterpart(problem)
        art.warnings.append("no wait-and-see variables; adjustable counterpart equals the strict one")
        warnings.warn(art.warnings[-1], stacklevel=2)
        return art
    sign = _sign(problem)
    b = _Builder(f"{problem.name}#adjustable")
    vmap = {}
    for v in problem.variables:
        if v.name in recourse:
            vmap[v.name] = {}
            for s in u.scenarios:
                vmap[v.name][s.name] = b.column(_copy(v.name, s), v.lower, v.upper, v.integer)
        else:
            vmap[v.name] = b.column(v.name, v.lower, v.upper, v.integer)

    def rename(coeffs, s):
        out = {}
        for var, a in coeffs.items():
            col = _copy(var, s) if var in recourse else var
            out[col] = out.get(col, 0.0) + a
        return out

    z = b.column(EPIGRAPH, -math.inf, math.inf, cost=1.0)
    for s in u.scenarios:
        for r in problem.constraints:
            coeffs, rhs = scenario_row(problem, r, s)
            b.row(f"{r.name}@{s.name}", rename(coeffs, s), r.sense, rhs, dedupe=True)
        obj = rename(scenario_objective(problem, s), s)
        obj[z] = obj.get(z, 0.0) - 1.0
        b.row(f"obj@{s.name}", obj, "<=" if sign > 0 else ">=", 0.0, dedupe=True)
    return CounterpartArtifact(b.model(problem.sense), vmap, "adjustable", scenario_count=len(u.scenarios))


def _row_varies(problem, row, scenarios):
    base = {k: v for k, v in row.coeffs.items() if v != 0}, row.rhs
    for s in scenarios:
        coeffs, rhs = scenario_row(problem, row, s)
        if ({k: v for k, v in coeffs.items() if v != 0}, rhs) != base:
            return True
    return False


def mulvey_counterpart(problem, config):
    """Mulvey-style counterpart with per-scenario recourse and penalized infeasibility.

    Rows whose data varies across scenarios are uncertain: each copy gets a
    free infeasibility column z, penalized through s >= z, s >= 0 (or
    |z| with ``penalty="abs"``).  Rows with identical data in every scenario
    stay hard.
    """
    u = problem.uncertainty
    if not isinstance(u, FiniteSet):
        raise UnsupportedError("UNSUPPORTED_SET", f"Mulvey counterpart needs a finite set, not {u.kind}")
    probs = config.probabilities
    missing = [s.name for s in u.scenarios if s.name not in probs]
    if missing:
        raise InstanceError("BAD_CONFIG", f"missing probabilities for scenarios {missing}")
    sign = _sign(problem)
    recourse = {v.name for v in problem.wait_and_see}
    b = _Builder(f"{problem.name}#mulvey")
    vmap = {}
    for v in problem.variables:
        if v.name in recourse:
            vmap[v.name] = {s.name: b.column(_copy(v.name, s), v.lower, v.upper, v.integer) for s in u.scenarios}
        else:
            vmap[v.name] = b.column(v.name, v.lower, v.upper, v.integer)

    def rename(coeffs, s):
        out = {}
        for var, a in coeffs.items():
            col = _copy(var, s) if var in recourse else var
            out[col] = out.get(col, 0.0) + a
        return out

    uncertain = {r.name for r in problem.constraints if _row_varies(problem, r, u.scenarios)}
    for s in u.scenarios:
        for r in problem.constraints:
            coeffs, rhs = scenario_row(problem, r, s)
            coeffs = rename(coeffs, s)
            if r.name not in uncertain:
                b.row(f"{r.name}@{s.name}", coeffs, r.sense, rhs, dedupe=True)
                continue
            z = b.column(f"z#{r.name}@{s.name}", -math.inf, math.inf)
            coeffs[z] = {"<=": -1.0, ">=": 1.0, "=": 1.0}[r.sense]
            b.row(f"{r.name}@{s.name}", coeffs, r.sense, rhs)
            pen = b.column(f"s#{r.name}@{s.name}", cost=sign * config.omega * probs[s.name])
            b.row(f"pen+#{r.name}@{s.name}", {pen: 1.0, z: -1.0}, ">=", 0.0)
            if config.penalty == "abs":
                b.row(f"pen-#{r.name}@{s.name}", {pen: 1.0, z: 1.0}, ">=", 0.0)

    if config.sigma_mode == "worst-case":
        t = b.column(EPIGRAPH, -math.inf, math.inf, cost=1.0)
        for s in u.scenarios:
            obj = rename(scenario_objective(problem, s), s)
            obj[t] = -1.0
            b.row(f"obj@{s.name}", obj, "<=" if sign > 0 else ">=", 0.0, dedupe=True)
    else:
        for s in u.scenarios:
            for col, c in rename(scenario_objective(problem, s), s).items():
                b.add_cost(col, probs[s.name] * c)
    return CounterpartArtifact(b.model(problem.sense), vmap, "mulvey", scenario_count=len(u.scenarios))


def regret_counterpart_finite(problem, threads=None):
    """Min-max regret over a finite set of objective scenarios."""
    u = problem.uncertainty
    if not isinstance(u, FiniteSet):
        raise UnsupportedError("UNSUPPORTED_SET", f"finite regret needs a finite set, not {u.kind}")
    if any(s.rows or s.rhs for s in u.scenarios):
        raise UnsupportedError("CONSTRAINT_UNCERTAINTY", "regret counterpart supports objective uncertainty only")
    optima = scenario_optima(problem, u.scenarios, threads)
    b = _Builder(f"{problem.name}#regret")
    _original_columns(b, problem)
    for r in problem.constraints:
        b.row(r.name, r.coeffs, r.sense, r.rhs)
    z = b.column("z#regret", -math.inf, math.inf, cost=1.0)
    for s, f in zip(u.scenarios, optima):
        obj = dict(scenario_objective(problem, s))
        if problem.sense == "min":
            obj[z] = -1.0
            b.row(f"regret@{s.name}", obj, "<=", f)
        else:
            obj[z] = 1.0
            b.row(f"regret@{s.name}", obj, ">=", f)
    return _artifact(
        b, problem, "regret-finite",
        scenario_count=len(u.scenarios),
        per_scenario_optima={s.name: f for s, f in zip(u.scenarios, optima)},
    )


def regret_dual_counterpart_interval(problem, assume_integral=False):
    """Min-max regret MIP for binary covering problems with interval costs.

    Only exact when {Ax >= b, 0 <= x <= 1} is integral, which the caller must
    assert via ``assume_integral``.
    """
    if not assume_integral:
        raise UnsupportedError("MISSING_ASSERTION", "regret-dual requires assume_integral (--assume-integral)")
    if not isinstance(problem.uncertainty, IntervalSet):
        raise UnsupportedError("UNSUPPORTED_SET", "regret-dual needs interval objective costs")
    if problem.sense != "min":
        raise UnsupportedError("BAD_SENSE", "regret-dual needs a minimization problem")
    for v in problem.variables:
        if not (v.integer and v.lower == 0 and v.upper == 1):
            raise UnsupportedError("NON_BINARY", f"variable {v.name!r} is not binary")
    for r in problem.constraints:
        if r.sense != ">=" or r.rhs < 0 or any(a < 0 for a in r.coeffs.values()) or r.uncertain:
            raise UnsupportedError("BAD_ROW", f"row {r.name!r} must read Ax >= b with A, b >= 0 and no deviations")
    lower = problem.objective.coeffs
    dev = problem.objective.deviations
    b = _Builder(f"{problem.name}#regret-dual")
    for v in problem.variables:
        b.column(v.name, 0.0, 1.0, True, lower.get(v.name, 0.0) + dev.get(v.name, 0.0))
    duals = {r.name: b.column(f"dual#{r.name}", cost=-r.rhs) for r in problem.constraints}
    # duals of the inner x <= 1 bounds; zero whenever those bounds are redundant
    caps = {v.name: b.column(f"dualub#{v.name}", cost=1.0) for v in problem.variables}
    for r in problem.constraints:
        b.row(r.name, r.coeffs, ">=", r.rhs)
    for v in problem.variables:
        coeffs = {duals[r.name]: r.coeffs.get(v.name, 0.0) for r in problem.constraints}
        coeffs[caps[v.name]] = -1.0
        coeffs[v.name] = -dev.get(v.name, 0.0)
        b.row(f"dualrow#{v.name}", coeffs, "<=", lower.get(v.name, 0.0))
    return _artifact(b, problem, "regret-dual")
