"""Iterative robust solvers: worst-case oracle, cutting planes, sampling,
surrogate-relaxation branch-and-bound and the per-scenario candidate heuristic.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .concurrency import parallel_map
from .counterparts import strict_counterpart
from .errors import LimitError, SolveFailure, UnsupportedError
from .model import (
    BudgetSet,
    FiniteSet,
    IntervalSet,
    Objective,
    PolytopeSet,
    Scenario,
    enumerate_vertices,
    instantiate,
    scenario_objective,
    scenario_row,
    uncertain_entries,
)
from .solver import SolveReport, branch_and_bound, row_violation, solve, tolerances

OBJECTIVE = "objective"


# ---------------------------------------------------------------------------
# worst-case oracle


@dataclass
class OracleResult:
    scenario: Scenario
    violation: float
    row: str = None  # row attaining the maximum, or "objective"


def _dot(coeffs, assignment):
    return math.fsum(a * assignment[v] for v, a in coeffs.items())


def _objective_excess(problem, value, epigraph):
    if epigraph is None:
        return -math.inf
    return value - epigraph if problem.sense == "min" else epigraph - value


def _scenario_violation(problem, scenario, assignment, epigraph):
    best, where = -math.inf, None
    for r in problem.constraints:
        coeffs, rhs = scenario_row(problem, r, scenario)
        v = row_violation(_dot(coeffs, assignment), r.sense, rhs)
        if v > best:
            best, where = v, r.name
    v = _objective_excess(problem, _dot(scenario_objective(problem, scenario), assignment), epigraph)
    if v > best:
        best, where = v, OBJECTIVE
    return best, where


def _sign(x):
    # x = 0 resolves to -1: the lexicographically smaller sign pattern
    return 1.0 if x > 0 else -1.0


def _row_pushes(problem, coeffs, deviations, rhs_dev, assignment, direction, gamma):
    """Worst-case coefficient and rhs shifts for one row.

    ``direction`` is +1 when larger lhs hurts (<= rows, min objective) and -1
    otherwise. Returns ``(coeff_overrides, rhs_shift_weight)`` where the rhs
    shift weight is in [0, 1].
    """
    items = []
    for j, var in enumerate(problem.variable_names):
        d = deviations.get(var, 0.0)
        if d > 0:
            items.append((d * abs(assignment[var]), j, var, d))
    if rhs_dev > 0:
        items.append((rhs_dev, len(problem.variable_names), None, rhs_dev))
    weights = {}
    if gamma is None:
        for _, _, var, _ in items:
            weights[var] = 1.0
    else:
        items = sorted((it for it in items if it[0] > 0), key=lambda it: (-it[0], it[1]))
        full = int(math.floor(gamma))
        for k, (_, _, var, _) in enumerate(items):
            if k < full:
                weights[var] = 1.0
            elif k == full and gamma - full > 0:
                weights[var] = gamma - full
    overrides = {}
    for _, _, var, d in items:
        w = weights.get(var, 0.0)
        if var is None or w == 0.0:
            continue
        overrides[var] = coeffs.get(var, 0.0) + w * d * direction * _sign(assignment[var])
    return overrides, weights.get(None, 0.0)


def _closed_form_worst(problem, assignment):
    u = problem.uncertainty
    gamma = u.gamma if isinstance(u, BudgetSet) else None
    rows, rhs = {}, {}
    for r in problem.constraints:
        if not r.uncertain:
            continue
        direction = 1.0 if r.sense == "<=" else -1.0
        over, w = _row_pushes(problem, r.coeffs, r.deviations, r.rhs_deviation, assignment, direction, gamma)
        if over:
            rows[r.name] = over
        if w > 0:
            rhs[r.name] = r.rhs - direction * w * r.rhs_deviation
    direction = 1.0 if problem.sense == "min" else -1.0
    objective, _ = _row_pushes(
        problem, problem.objective.coeffs, problem.objective.deviations, 0.0, assignment, direction, gamma
    )
    return Scenario("worst", rows, rhs, objective)


def worst_case_oracle(problem, assignment, epigraph=None):
    """Scenario of the uncertainty set maximizing the violation of ``assignment``.

    The violation is the largest row violation (positive means infeasible) or,
    when ``epigraph`` is given, the excess of the worst-case objective over it.
    Ties go to the earliest scenario.
    """
    missing = [v for v in problem.variable_names if v not in assignment]
    if missing:
        raise SolveFailure("INCOMPLETE_ASSIGNMENT", f"no value for {missing[0]!r}")
    u = problem.uncertainty
    if isinstance(u, (IntervalSet, BudgetSet)):
        scenario = _closed_form_worst(problem, assignment)
        v, where = _scenario_violation(problem, scenario, assignment, epigraph)
        return OracleResult(scenario, v, where)
    scenarios = list(u.scenarios) if isinstance(u, FiniteSet) else enumerate_vertices(problem)
    best = None
    for s in scenarios:
        v, where = _scenario_violation(problem, s, assignment, epigraph)
        if best is None or v > best.violation:
            best = OracleResult(s, v, where)
    return best


# ---------------------------------------------------------------------------
# cutting planes


def _certain(problem):
    rows = tuple(replace(r, deviations={}, rhs_deviation=0.0) for r in problem.constraints)
    obj = Objective(dict(problem.objective.coeffs), {})
    return replace(problem, objective=obj, constraints=rows)


def _scenario_key(problem, scenario):
    """Resolved data of ``scenario`` on every entry that can vary."""
    key = [tuple(sorted(scenario_objective(problem, scenario).items()))]
    for r in problem.constraints:
        coeffs, rhs = scenario_row(problem, r, scenario)
        key.append((tuple(sorted(coeffs.items())), rhs))
    return tuple(key)


def _first_scenario(problem):
    u = problem.uncertainty
    if isinstance(u, PolytopeSet):
        # base data need not lie in the polytope
        return u.vertices[0]
    return problem.nominal_scenario()


def _original(problem, assignment):
    return {v: assignment[v] for v in problem.variable_names}


def cut_log_jsonl(log):
    return "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in log)


def cutting_plane_solve(problem, tol=None, max_iters=200):
    """Strict robust optimum by alternating a finite master and the oracle.

    The report's ``info["cut_log"]`` holds one record per iteration with
    ``iter``, ``master_value``, ``violation`` and ``scenario_name`` (None when
    the iteration added nothing).
    """
    if not isinstance(problem.uncertainty, (FiniteSet, IntervalSet, BudgetSet, PolytopeSet)):
        raise UnsupportedError("UNSUPPORTED_SET", f"unknown set {problem.uncertainty!r}")
    tol = tolerances().cut if tol is None else tol
    base = _certain(problem)
    active = [_first_scenario(problem)]
    seen = {_scenario_key(problem, active[0])}
    log = []
    iters = nodes = 0
    report = None
    for it in range(1, max_iters + 1):
        master = base.with_uncertainty(FiniteSet(tuple(active), 0))
        report = strict_counterpart(master).solve()
        iters += report.iterations
        nodes += report.nodes
        if report.status != "optimal":
            raise SolveFailure("MASTER_" + report.status.upper().replace("-", "_"),
                               f"master problem is {report.status} at iteration {it}", report.status)
        x = _original(problem, report.assignment)
        oracle = worst_case_oracle(problem, x, epigraph=report.objective)
        entry = {"iter": it, "master_value": report.objective, "violation": oracle.violation,
                 "scenario_name": None}
        log.append(entry)
        if oracle.violation <= tol:
            out = SolveReport("optimal", report.objective, x, iters, nodes, cuts=len(active) - 1)
            out.info.update(concept="cutting-plane", cut_log=log)
            return out
        scenario = oracle.scenario
        if not isinstance(problem.uncertainty, (FiniteSet, PolytopeSet)):
            scenario = replace(scenario, name=f"cut{len(active)}")
        key = _scenario_key(problem, scenario)
        if key in seen:
            raise SolveFailure("REPEATED_CUT", f"oracle returned scenario {scenario.name!r} twice")
        seen.add(key)
        active.append(scenario)
        entry["scenario_name"] = scenario.name
    best = SolveReport("iteration-limit", report.objective, _original(problem, report.assignment),
                       iters, nodes, cuts=len(active) - 1)
    best.info.update(concept="cutting-plane", cut_log=log)
    raise LimitError("ITER_LIMIT", f"no convergence within {max_iters} iterations", best=best)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplingBoundQuery:
    n: int
    N: int
    epsilon: float

    def __post_init__(self):
        if self.n < 1 or self.N < 1:
            raise ValueError("n and N must be at least 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def bound(self):
        return sampling_bound(self.n, self.N, self.epsilon)


def sampling_bound(n, N, epsilon):
    """Probability bound sum_{i<n} C(N,i) eps^i (1-eps)^(N-i), capped at 1."""
    SamplingBoundQuery(n, N, epsilon)
    k = min(n, N + 1)
    if epsilon == 0.0:
        return 1.0
    if epsilon == 1.0:
        return 1.0 if k > N else 0.0
    i = np.arange(k, dtype=float)
    # log C(N, i) via a running sum keeps N up to 1e6 exact enough
    steps = np.log(N - i[:-1]) - np.log(i[:-1] + 1.0)
    log_binom = np.concatenate(([0.0], np.cumsum(steps)))
    logs = log_binom + i * math.log(epsilon) + (N - i) * math.log1p(-epsilon)
    top = logs.max()
    total = math.exp(top) * math.fsum(np.exp(logs - top))
    return min(1.0, max(0.0, total))


def required_sample_size(n, epsilon, beta):
    """Smallest N with ``sampling_bound(n, N, epsilon) <= beta``."""
    if beta >= 1.0:
        return 1
    if not (0.0 < epsilon < 1.0 and beta > 0.0):
        raise ValueError("need 0 < epsilon < 1 and 0 < beta")
    lo, hi = 0, max(1, n)
    while sampling_bound(n, hi, epsilon) > beta:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if sampling_bound(n, mid, epsilon) <= beta:
            hi = mid
        else:
            lo = mid
    return hi


def _sample_finite(problem, N, rng):
    sc = problem.uncertainty.scenarios
    return [sc[int(i)] for i in rng.integers(0, len(sc), size=N)]


def _sample_box(problem, N, rng):
    entries = uncertain_entries(problem)
    out = []
    for k in range(N):
        t = rng.uniform(-1.0, 1.0, size=len(entries))
        out.append(_from_entries(f"sample{k}", entries, t))
    return out


def _from_entries(name, entries, multipliers):
    rows, rhs, objective = {}, {}, {}
    for (kind, row, var, nom, d), t in zip(entries, multipliers):
        value = nom + float(t) * d
        if kind == "objective":
            objective[var] = value
        elif kind == "coeff":
            rows.setdefault(row, {})[var] = value
        else:
            rhs[row] = value
    return Scenario(name, rows, rhs, objective)


def _sample_budget(problem, N, rng):
    entries = uncertain_entries(problem)
    groups = {}
    for i, (kind, row, *_rest) in enumerate(entries):
        groups.setdefault((kind == "objective", row), []).append(i)
    gamma = problem.uncertainty.gamma
    full = int(math.floor(gamma))
    frac = gamma - full
    out = []
    for k in range(N):
        t = np.zeros(len(entries))
        for idx in groups.values():
            chosen = rng.permutation(idx)
            signs = rng.choice((-1.0, 1.0), size=len(chosen))
            for m, (i, s) in enumerate(zip(chosen, signs)):
                if m < full:
                    t[i] = s
                elif m == full:
                    t[i] = s * frac
        out.append(_from_entries(f"sample{k}", entries, t))
    return out


def _mix(problem, name, vertices, weights):
    rows, rhs, objective = {}, {}, {}
    for r in problem.constraints:
        touched = set()
        for v in vertices:
            touched.update(v.rows.get(r.name, {}))
        for var in sorted(touched):
            rows.setdefault(r.name, {})[var] = math.fsum(
                w * scenario_row(problem, r, v)[0].get(var, 0.0) for v, w in zip(vertices, weights)
            )
        if any(r.name in v.rhs for v in vertices):
            rhs[r.name] = math.fsum(w * scenario_row(problem, r, v)[1] for v, w in zip(vertices, weights))
    touched = set()
    for v in vertices:
        touched.update(v.objective)
    for var in sorted(touched):
        objective[var] = math.fsum(
            w * scenario_objective(problem, v).get(var, 0.0) for v, w in zip(vertices, weights)
        )
    return Scenario(name, rows, rhs, objective)


def _sample_polytope(problem, N, rng):
    vertices = list(problem.uncertainty.vertices)
    return [_mix(problem, f"sample{k}", vertices, rng.dirichlet(np.ones(len(vertices))))
            for k in range(N)]


SAMPLERS = {
    FiniteSet: _sample_finite,
    IntervalSet: _sample_box,
    BudgetSet: _sample_budget,
    PolytopeSet: _sample_polytope,
}


def sample_scenarios(problem, N, seed):
    """``N`` scenarios drawn from the problem's set with a seeded generator."""
    rng = np.random.default_rng(seed)
    return SAMPLERS[type(problem.uncertainty)](problem, N, rng)


def sample_and_solve(problem, N, seed=0, epsilons=(), sampler=None):
    """Strict counterpart over ``N`` sampled scenarios.

    ``sampler(problem, N, rng)`` overrides the default sampler. The report is
    annotated with ``sampling_bound(n, N, eps)`` for each requested ``eps``;
    that bound presumes every scenario subset is feasible, which is not checked.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if sampler is None:
        drawn = sample_scenarios(problem, N, seed)
    else:
        drawn = sampler(problem, N, np.random.default_rng(seed))
    unique, names = [], set()
    for s in drawn:
        if s.name not in names:
            names.add(s.name)
            unique.append(s)
    master = _certain(problem).with_uncertainty(FiniteSet(tuple(unique), 0))
    report = strict_counterpart(master).solve()
    if report.assignment is not None:
        report.assignment = _original(problem, report.assignment)
    n = max(1, len(problem.here_and_now))
    report.info.update(
        concept="sampling",
        samples=N,
        distinct_scenarios=len(unique),
        seed=seed,
        bounds={str(eps): sampling_bound(n, N, eps) for eps in epsilons},
    )
    return report


# ---------------------------------------------------------------------------
# surrogate relaxation


@dataclass
class SurrogateState:
    mu: np.ndarray
    lower_bound: float = -math.inf
    incumbent: dict = None
    incumbent_value: float = math.inf
    history: list = field(default_factory=list)


class _MinMax:
    """Binary min-max problem over finitely many objective scenarios, as arrays."""

    def __init__(self, problem):
        u = problem.uncertainty
        if not isinstance(u, FiniteSet):
            raise UnsupportedError("UNSUPPORTED_SET", f"needs a finite set, not {u.kind}")
        for s in u.scenarios:
            if s.rows or s.rhs:
                raise UnsupportedError("CONSTRAINT_UNCERTAINTY",
                                       f"scenario {s.name!r} changes constraints; only objective uncertainty is allowed")
        for v in problem.variables:
            if not (v.integer and v.lower >= 0 and v.upper <= 1):
                raise UnsupportedError("NOT_BINARY", f"variable {v.name!r} is not binary")
        self.problem = problem
        self.names = problem.variable_names
        self.sign = 1.0 if problem.sense == "min" else -1.0
        self.C = self.sign * np.array(
            [[scenario_objective(problem, s).get(v, 0.0) for v in self.names] for s in u.scenarios],
            dtype=float,
        ).reshape(len(u.scenarios), len(self.names))
        _, self.A, self.senses, self.b, lo, hi = instantiate(problem).to_arrays()
        self.lo = np.ceil(lo - 1e-9)
        self.hi = np.floor(hi + 1e-9)
        self.ints = np.ones(len(self.names), dtype=bool)
        self.solves = 0
        self.iterations = 0

    def src(self, mu, lo, hi):
        """min_x (mu @ C) x / sum(mu) over the node; returns (value, x) or None."""
        self.solves += 1
        w = (mu @ self.C) / mu.sum()
        if not self.senses:
            if np.any(lo > hi):
                return None
            x = np.where(w < 0, hi, lo)
            return float(w @ x), x
        res = branch_and_bound(w, self.A, self.senses, self.b, lo, hi, self.ints)
        self.iterations += res.iters
        if res.status == "infeasible":
            return None
        if res.status != "optimal":
            raise SolveFailure("SURROGATE_UNSOLVABLE", f"surrogate problem is {res.status}", res.status)
        return res.obj, res.x

    def worst(self, x):
        return float((self.C @ x).max())

    def assignment(self, x):
        return {v: float(val) for v, val in zip(self.names, x)}


def surrogate_bound(problem, mu):
    """SRC*(mu): optimum of the mu-weighted objective over the feasible set.

    For min problems this is a lower bound on the min-max value (an upper
    bound on the max-min value for max problems). Returns ``(value, assignment)``.
    """
    mm = _MinMax(problem)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (mm.C.shape[0],) or np.any(mu < 0) or mu.sum() <= 0:
        raise ValueError("mu must be a nonnegative vector with positive sum, one entry per scenario")
    out = mm.src(mu, mm.lo, mm.hi)
    if out is None:
        raise SolveFailure("INFEASIBLE", "no feasible binary solution", "infeasible")
    val, x = out
    return mm.sign * val, mm.assignment(x)


def _node_bound(mm, state, lo, hi, mu, rounds):
    """Subgradient ascent on SRC*(mu) at one node; returns (bound, best mu, x) or None."""
    lam, stall = 2.0, 0
    best, best_mu, best_x = -math.inf, mu, None
    for _ in range(rounds):
        out = mm.src(mu, lo, hi)
        if out is None:
            return None
        val, x = out
        ub = mm.worst(x)
        if ub < state.incumbent_value - 1e-12:
            state.incumbent_value, state.incumbent = ub, x.copy()
        if val > best + 1e-12:
            best, best_mu, best_x, stall = val, mu, x, 0
        else:
            stall += 1
            if stall >= 5:
                lam, stall = lam / 2.0, 0
        if best >= state.incumbent_value - 1e-9:
            break
        g = mm.C @ x - val
        norm2 = float(g @ g)
        if norm2 < 1e-18:
            break
        step = lam * (state.incumbent_value - val) / norm2
        mu = np.maximum(mu + step * g, 0.0)
        total = mu.sum()
        mu = mu / total if total >= 1e-9 else np.full_like(mu, 1.0 / len(mu))
    return best, best_mu, best_x


def surrogate_relaxation_bb(problem, max_nodes=100_000, rounds=50):
    """Exact min-max optimum for binary problems with finite objective uncertainty.

    Each node maximizes the surrogate bound by subgradient steps on mu
    (warm-started from the parent), updates the incumbent with the true worst
    case of every surrogate minimizer, and branches on the lowest-index free
    binary, exploring the value taken by the best surrogate minimizer first.
    """
    mm = _MinMax(problem)
    k = mm.C.shape[0]
    state = SurrogateState(np.full(k, 1.0 / k))
    stack = [(mm.lo, mm.hi, state.mu)]
    nodes = 0
    root_bound = None
    while stack:
        lo, hi, mu = stack.pop()
        if nodes >= max_nodes:
            best = SolveReport("iteration-limit", nodes=nodes, iterations=mm.iterations)
            if state.incumbent is not None:
                best.objective = mm.sign * state.incumbent_value
                best.assignment = mm.assignment(state.incumbent)
            raise LimitError("NODE_LIMIT", f"more than {max_nodes} nodes", best=best)
        nodes += 1
        out = _node_bound(mm, state, lo, hi, mu, rounds)
        if out is None:
            continue
        bound, mu, x = out
        if root_bound is None:
            root_bound = bound
            state.lower_bound = bound
        if bound >= state.incumbent_value - 1e-9:
            continue
        free = np.flatnonzero(lo < hi)
        if free.size == 0:
            continue
        j = int(free[0])
        first = int(round(x[j]))
        for value in (1 - first, first):
            l, h = lo.copy(), hi.copy()
            l[j] = h[j] = value
            stack.append((l, h, mu))
    if state.incumbent is None:
        return SolveReport("infeasible", nodes=nodes, iterations=mm.iterations,
                           info={"concept": "surrogate-bb"})
    return SolveReport(
        "optimal",
        objective=mm.sign * state.incumbent_value,
        assignment=mm.assignment(state.incumbent),
        iterations=mm.iterations,
        nodes=nodes,
        info={"concept": "surrogate-bb", "root_bound": mm.sign * root_bound,
              "surrogate_solves": mm.solves},
    )


# ---------------------------------------------------------------------------
# candidate heuristic


def strict_worst_case(problem, assignment, scenarios=None):
    """Worst objective of ``assignment`` over finitely many scenarios; +-inf if infeasible in one."""
    scenarios = scenarios if scenarios is not None else list(problem.uncertainty.scenarios)
    feas = tolerances().feas
    worst = None
    for s in scenarios:
        for r in problem.constraints:
            coeffs, rhs = scenario_row(problem, r, s)
            if row_violation(_dot(coeffs, assignment), r.sense, rhs) > feas * max(1.0, abs(rhs)):
                return math.inf if problem.sense == "min" else -math.inf
        v = _dot(scenario_objective(problem, s), assignment)
        if worst is None or (v > worst if problem.sense == "min" else v < worst):
            worst = v
    return worst


def candidate_heuristic(problem, threads=None):
    """Best per-scenario optimizer under the strict worst case.

    For min problems with nonnegative objectives on all scenarios the value is
    at most |U| times the strict robust optimum.
    """
    u = problem.uncertainty
    if not isinstance(u, FiniteSet):
        raise UnsupportedError("UNSUPPORTED_SET", f"candidate heuristic needs a finite set, not {u.kind}")
    scenarios = list(u.scenarios)
    reports = parallel_map(lambda s: solve(instantiate(problem, s)), scenarios, threads)
    for s, rep in zip(scenarios, reports):
        if rep.status != "optimal":
            raise SolveFailure("SCENARIO_UNSOLVABLE", f"scenario {s.name!r} is {rep.status}", rep.status)
    best = None
    for s, rep in zip(scenarios, reports):
        value = strict_worst_case(problem, rep.assignment, scenarios)
        better = best is None or (value < best[0] if problem.sense == "min" else value > best[0])
        if better:
            best = (value, s.name, rep.assignment)
    value, name, x = best
    info = {"concept": "candidate", "heuristic": True, "candidate": name}
    iters = sum(r.iterations for r in reports)
    if math.isinf(value):
        return SolveReport("infeasible", iterations=iters, info=info)
    return SolveReport("optimal", value, dict(x), iters, sum(r.nodes for r in reports), info=info)
