import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import (
    cut_covering_doc,
    interval_regret_brute_force,
    random_budget_problem,
    random_connected_graph,
    random_finite_problem,
    random_interval_problem,
    random_polytope_problem,
    random_two_stage_problem,
)
from robustkit.combinatorial import IntervalGraph, regret_path_brute_force
from robustkit.counterparts import (
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
    strict_counterpart,
)
from robustkit.errors import InstanceError, UnsupportedError
from robustkit.model import (
    BudgetSet,
    FiniteSet,
    enumerate_vertices,
    instantiate,
    problem_from_dict,
    problem_to_dict,
)
from robustkit.solver import from_lp_text

TOL = 1e-6


def P(d):
    return problem_from_dict(d)


def value(artifact):
    rep = artifact.solve()
    assert rep.status == "optimal", rep.status
    return rep.objective


LINE = {"sense": "min", "variables": [{"name": "x", "lb": 1, "ub": 2}], "objective": {"coeffs": {"x": 1}},
        "uncertainty": {"type": "finite", "scenarios": [{"name": "a"}, {"name": "b", "objective": {"x": 2}}]}}

ONE_ROW = {"sense": "max", "variables": [{"name": "x"}], "objective": {"coeffs": {"x": 1}},
           "constraints": [{"name": "c", "coeffs": {"x": 1}, "deviations": {"x": 0.5}, "sense": "<=", "rhs": 3}],
           "uncertainty": {"type": "interval"}}


def test_strict_finite_objective():
    rep = strict_counterpart(P(LINE)).solve()
    assert rep.objective == pytest.approx(2) and rep.assignment["x"] == pytest.approx(1)


def test_strict_single_scenario_is_nominal():
    d = dict(LINE, uncertainty={"type": "finite", "scenarios": [{"name": "only"}]})
    p = P(d)
    assert value(strict_counterpart(p)) == pytest.approx(nominal_optimum(p))


def test_strict_interval_row():
    assert value(strict_counterpart(P(ONE_ROW))) == pytest.approx(2)


def test_strict_rejects_budget_and_equality_deviations():
    with pytest.raises(UnsupportedError):
        strict_counterpart(P(ONE_ROW).with_uncertainty(BudgetSet(1)))
    d = json.loads(json.dumps(ONE_ROW))
    d["constraints"][0]["sense"] = "="
    with pytest.raises(InstanceError):
        P(d)


def test_cc_examples():
    p = P(ONE_ROW)
    assert value(cc_counterpart(p.with_uncertainty(BudgetSet(1)))) == pytest.approx(2)
    assert value(cc_counterpart(p.with_uncertainty(BudgetSet(0)))) == pytest.approx(3)
    with pytest.raises(UnsupportedError):
        cc_counterpart(p)


def test_cc_dual_block_shape():
    model = cc_counterpart(P(ONE_ROW).with_uncertainty(BudgetSet(1))).model
    names = set(model.column_names)
    assert "x" in names and len(names) > 1
    assert len(model.rows) > 1


def test_reliability_examples():
    d = {"sense": "max", "variables": [{"name": "x"}], "objective": {"coeffs": {"x": 1}},
         "constraints": [{"name": "c", "coeffs": {"x": 1}, "sense": "<=", "rhs": 1}],
         "uncertainty": {"type": "interval"}}
    p = P(d)
    assert reliability_counterpart(p, {"c": 0}).model.rows == strict_counterpart(p).model.rows
    assert value(reliability_counterpart(p, {"c": 0.5})) == pytest.approx(1.5)
    d["constraints"][0]["rhs"] = -1
    d["sense"] = "min"
    q = P(d)
    assert strict_counterpart(q).solve().status == "infeasible"
    assert reliability_counterpart(q, {"c": 2}).solve().status == "optimal"
    with pytest.raises(InstanceError):
        reliability_counterpart(q, {"c": -1})
    with pytest.raises(InstanceError):
        reliability_counterpart(q, {"nope": 1})


LIGHT = {"sense": "min", "variables": [{"name": "x"}], "objective": {"coeffs": {"x": 1}},
         "constraints": [{"name": "c", "coeffs": {"x": 1}, "sense": ">=", "rhs": 1}],
         "uncertainty": {"type": "finite", "scenarios": [{"name": "nom"}, {"name": "hi", "rhs": {"c": 2}}]}}


def test_light_examples():
    p = P(LIGHT)
    rep = light_counterpart(p, LightConfig({"c": 1}, 0)).solve()
    assert rep.objective == pytest.approx(1) and rep.assignment["x"] == pytest.approx(1)
    rep = light_counterpart(p, LightConfig({"c": 1}, 1)).solve()
    assert rep.objective == pytest.approx(0) and rep.assignment["x"] == pytest.approx(2)
    single = P(dict(LIGHT, uncertainty={"type": "finite", "scenarios": [{"name": "nom"}]}))
    art = light_counterpart(single, LightConfig({"c": 1}, 0))
    assert value(art) == pytest.approx(0)
    assert art.metadata()["nominal_optimum"] == pytest.approx(1)


def test_light_config_rules():
    with pytest.raises(InstanceError):
        LightConfig({"c": 0})
    with pytest.raises(InstanceError):
        LightConfig({"c": 1}, -1)


def test_light_unbounded_nominal():
    d = dict(LIGHT, variables=[{"name": "x", "lb": "-inf"}], sense="max")
    with pytest.raises(Exception) as exc:
        light_counterpart(P(d), LightConfig({"c": 1}))
    assert exc.value.code == "NOMINAL_UNSOLVABLE"


ADJ = {"sense": "min", "variables": [{"name": "u"}, {"name": "v", "stage": "wait-and-see"}],
       "objective": {"coeffs": {"u": 1, "v": 1}},
       "constraints": [{"name": "c", "coeffs": {"u": 1, "v": 1}, "sense": ">=", "rhs": 1}],
       "uncertainty": {"type": "finite", "scenarios": [{"name": "s1"}, {"name": "s2", "rhs": {"c": 2}}]}}


def test_adjustable_examples():
    art = adjustable_counterpart(P(ADJ))
    assert value(art) == pytest.approx(2)
    assert {"v@s1", "v@s2"} <= set(art.model.column_names)


def test_adjustable_without_recourse_matches_strict():
    d = json.loads(json.dumps(ADJ))
    d["variables"][1]["stage"] = "here-and-now"
    p = P(d)
    with pytest.warns(UserWarning):
        art = adjustable_counterpart(p)
    assert art.warnings
    assert value(art) == pytest.approx(value(strict_counterpart(p)))


def test_adjustable_needs_finite():
    with pytest.raises(UnsupportedError):
        adjustable_counterpart(P(ONE_ROW))


MUL = {"sense": "min", "variables": [{"name": "u"}], "objective": {"coeffs": {"u": 0}},
       "constraints": [{"name": "c", "coeffs": {"u": 1}, "sense": "=", "rhs": 1}],
       "uncertainty": {"type": "finite", "scenarios": [{"name": "s1"}, {"name": "s2", "rhs": {"c": 2}}]}}


def test_mulvey_examples():
    cfg = MulveyConfig({"s1": 0.5, "s2": 0.5}, 1.0, "expectation")
    assert value(mulvey_counterpart(P(MUL), cfg)) == pytest.approx(0)
    capped = P(dict(MUL, variables=[{"name": "u", "ub": 1}]))
    rep = mulvey_counterpart(capped, cfg).solve()
    assert rep.objective == pytest.approx(0.5) and rep.assignment["u"] == pytest.approx(1)


def test_mulvey_abs_penalty_counts_both_sides():
    cfg = MulveyConfig({"s1": 0.5, "s2": 0.5}, 1.0, "expectation", "abs")
    assert value(mulvey_counterpart(P(MUL), cfg)) == pytest.approx(0.5)


def test_mulvey_vacuous_penalty():
    d = {"sense": "min", "variables": [{"name": "u", "ub": 4}], "objective": {"coeffs": {"u": -1}},
         "constraints": [{"name": "c", "coeffs": {"u": 1}, "sense": "<=", "rhs": 3}],
         "uncertainty": {"type": "finite", "scenarios": [{"name": "a"}, {"name": "b"}]}}
    p = P(d)
    cfg = MulveyConfig({"a": 0.3, "b": 0.7}, 0.0, "expectation")
    assert value(mulvey_counterpart(p, cfg)) == pytest.approx(nominal_optimum(p))


def test_mulvey_config_rules():
    with pytest.raises(InstanceError):
        MulveyConfig({"a": 0.5, "b": 0.6})
    with pytest.raises(InstanceError):
        MulveyConfig({"a": 1.0}, sigma_mode="median")
    with pytest.raises(Exception):
        mulvey_counterpart(P(MUL), MulveyConfig({"s1": 1.0}))


def test_regret_finite_examples():
    art = regret_counterpart_finite(P(LINE))
    rep = art.solve()
    assert rep.objective == pytest.approx(0) and rep.assignment["x"] == pytest.approx(1)
    assert art.metadata()["per_scenario_optima"] == {"a": pytest.approx(1), "b": pytest.approx(2)}


def test_regret_finite_swapped_payoffs():
    d = {"sense": "max", "variables": [{"name": "a", "ub": 1, "integer": True}, {"name": "b", "ub": 1, "integer": True}],
         "objective": {"coeffs": {}},
         "constraints": [{"name": "one", "coeffs": {"a": 1, "b": 1}, "sense": "=", "rhs": 1}],
         "uncertainty": {"type": "finite", "scenarios": [{"name": "s1", "objective": {"a": 5, "b": 1}},
                                                        {"name": "s2", "objective": {"a": 2, "b": 4}}]}}
    # choose a: regret max(0, 4-2)=2; choose b: max(5-1, 0)=4
    assert value(regret_counterpart_finite(P(d))) == pytest.approx(2)


def test_regret_finite_rejects_constraint_uncertainty():
    with pytest.raises(UnsupportedError):
        regret_counterpart_finite(P(LIGHT))


REGRET_DUAL = {"sense": "min",
               "variables": [{"name": "x1", "ub": 1, "integer": True}, {"name": "x2", "ub": 1, "integer": True}],
               "objective": {"coeffs": {"x1": 1, "x2": 2}, "deviations": {"x1": 2}},
               "constraints": [{"name": "c", "coeffs": {"x1": 1, "x2": 1}, "sense": ">=", "rhs": 1}],
               "uncertainty": {"type": "interval"}}


def test_regret_dual_examples():
    p = P(REGRET_DUAL)
    assert value(regret_dual_counterpart_interval(p, True)) == pytest.approx(1)
    flat = json.loads(json.dumps(REGRET_DUAL))
    flat["objective"]["deviations"] = {}
    assert value(regret_dual_counterpart_interval(P(flat), True)) == pytest.approx(0)


def test_regret_dual_diamond_matches_path_enumeration():
    g = IntervalGraph(4, 0, 3, ((0, 1, 1, 4), (0, 2, 2, 3), (1, 3, 2, 2), (2, 3, 1, 5), (1, 2, 0, 1)))
    doc = cut_covering_doc(g)
    got = value(regret_dual_counterpart_interval(P(doc), True))
    assert got == pytest.approx(regret_path_brute_force(g).regret, abs=TOL)


def test_regret_dual_preconditions():
    p = P(REGRET_DUAL)
    with pytest.raises(UnsupportedError) as exc:
        regret_dual_counterpart_interval(p)
    assert exc.value.code == "MISSING_ASSERTION"
    d = json.loads(json.dumps(REGRET_DUAL))
    d["sense"] = "max"
    with pytest.raises(UnsupportedError):
        regret_dual_counterpart_interval(P(d), True)
    d = json.loads(json.dumps(REGRET_DUAL))
    d["variables"][0]["ub"] = 2
    with pytest.raises(UnsupportedError):
        regret_dual_counterpart_interval(P(d), True)


def test_regret_dual_matches_brute_force_on_path_polytopes():
    rng = np.random.default_rng(404)
    checked = 0
    while checked < 25:
        g = random_connected_graph(rng, max_nodes=5, max_arcs=9)
        doc = cut_covering_doc(g)
        got = value(regret_dual_counterpart_interval(P(doc), True))
        assert got == pytest.approx(interval_regret_brute_force(doc), abs=TOL)
        checked += 1


def test_artifact_exports():
    art = regret_counterpart_finite(P(LINE))
    meta = json.loads(art.metadata_json())
    assert set(meta) == {"concept", "scenario_count", "per_scenario_optima", "nominal_optimum"}
    assert meta["concept"] == "regret-finite" and meta["scenario_count"] == 2
    assert from_lp_text(art.lp_text()) == art.model


# ---------------------------------------------------------------------------
# properties on random families


def test_polytope_reduces_to_vertex_set():
    rng = np.random.default_rng(501)
    for _ in range(60):
        p = random_polytope_problem(rng)
        finite = p.with_uncertainty(FiniteSet(p.uncertainty.vertices))
        a, b = strict_counterpart(p).solve(), strict_counterpart(finite).solve()
        assert a.status == b.status
        if a.optimal:
            assert a.objective == pytest.approx(b.objective, abs=TOL)


def test_soyster_matches_vertex_enumeration():
    rng = np.random.default_rng(502)
    for _ in range(60):
        p = random_interval_problem(rng, max_entries=4)
        finite = p.with_uncertainty(FiniteSet(tuple(enumerate_vertices(p))))
        a, b = strict_counterpart(p).solve(), strict_counterpart(finite).solve()
        assert a.status == b.status
        if a.optimal:
            assert a.objective == pytest.approx(b.objective, abs=TOL)


def test_cc_monotone_in_gamma():
    rng = np.random.default_rng(503)
    for _ in range(30):
        p = random_budget_problem(rng)
        sign = 1 if p.sense == "min" else -1
        prev = -np.inf
        for g in np.arange(0, len(p.variables) + 1.5, 0.5):
            rep = cc_counterpart(p.with_uncertainty(BudgetSet(float(g)))).solve()
            assert rep.optimal
            assert sign * rep.objective >= prev - TOL
            prev = sign * rep.objective


def test_adding_scenario_never_helps():
    rng = np.random.default_rng(504)
    for _ in range(40):
        p = random_finite_problem(rng, max_scenarios=4)
        scen = p.uncertainty.scenarios
        if len(scen) < 2:
            continue
        sign = 1 if p.sense == "min" else -1
        small = strict_counterpart(p.with_uncertainty(FiniteSet(scen[:-1]))).solve()
        big = strict_counterpart(p).solve()
        if big.optimal:
            assert sign * big.objective >= sign * small.objective - TOL


def test_adjustable_no_worse_than_strict():
    rng = np.random.default_rng(505)
    compared = 0
    for _ in range(40):
        p = random_two_stage_problem(rng)
        s, a = strict_counterpart(p).solve(), adjustable_counterpart(p).solve()
        assert a.optimal
        if s.optimal:
            assert a.objective <= s.objective + TOL
            compared += 1
    assert compared > 10


def test_regret_nonnegative():
    rng = np.random.default_rng(506)
    for _ in range(30):
        d = problem_to_dict(random_finite_problem(rng))
        for s in d["uncertainty"]["scenarios"]:
            s.pop("rows", None)
            s.pop("rhs", None)
        p = P(d)
        assert value(regret_counterpart_finite(p)) >= -TOL
        one = p.with_uncertainty(FiniteSet(p.uncertainty.scenarios[:1]))
        assert value(regret_counterpart_finite(one)) == pytest.approx(0, abs=TOL)


def test_light_zero_when_strict_solution_is_good_enough():
    rng = np.random.default_rng(507)
    hits = 0
    for _ in range(40):
        p = random_finite_problem(rng)
        strict = strict_counterpart(p).solve()
        nominal = nominal_optimum(p)
        if not strict.optimal:
            continue
        x = {v.name: strict.assignment[v.name] for v in p.variables}
        gap = instantiate(p, p.nominal_scenario()).objective_value(x) - nominal
        rho = abs(gap) + 1e-6
        weights = {r.name: 1.0 for r in p.constraints}
        assert value(light_counterpart(p, LightConfig(weights, rho))) == pytest.approx(0, abs=TOL)
        hits += 1
    assert hits > 10


@settings(max_examples=40, deadline=None)
@given(c=st.lists(st.integers(1, 5), min_size=3, max_size=3),
       d=st.lists(st.integers(0, 4), min_size=3, max_size=3),
       need=st.integers(1, 3))
def test_regret_dual_on_uniform_matroid(c, d, need):
    names = ["a", "b", "c"]
    doc = {"sense": "min", "variables": [{"name": v, "ub": 1, "integer": True} for v in names],
           "objective": {"coeffs": dict(zip(names, c)), "deviations": {v: x for v, x in zip(names, d) if x}},
           "constraints": [{"name": "k", "coeffs": {v: 1 for v in names}, "sense": ">=", "rhs": need}],
           "uncertainty": {"type": "interval"}}
    got = value(regret_dual_counterpart_interval(P(doc), True))
    assert got == pytest.approx(interval_regret_brute_force(doc), abs=TOL)


def test_zero_gamma_keeps_nominal_feasible_set():
    rng = np.random.default_rng(508)
    for _ in range(20):
        p = random_budget_problem(rng)
        rep = cc_counterpart(p.with_uncertainty(BudgetSet(0.0))).solve()
        assert rep.objective == pytest.approx(nominal_optimum(p), abs=TOL)


def test_corner_count_for_box_doc():
    p = random_interval_problem(np.random.default_rng(509), max_entries=3)
    assert len(enumerate_vertices(p)) <= 2 ** 3
    assert list(itertools.islice(enumerate_vertices(p), 1))
