# %% [markdown]
# A capacity decision made now, with production adjusted once demand is
# known. Several robustness concepts side by side on one scenario set.

# %%
from robustkit import (
    compare_concepts,
    problem_from_dict,
    robustness_gap,
    surrogate_relaxation_bb,
)

capacity = problem_from_dict({
    "name": "capacity", "sense": "min",
    "variables": [
        {"name": "build", "ub": 10},
        {"name": "make", "ub": 10, "stage": "wait-and-see"},
        {"name": "buy", "ub": 10, "stage": "wait-and-see"},
    ],
    "objective": {"coeffs": {"build": 2, "make": 1, "buy": 4}},
    "constraints": [
        {"name": "demand", "coeffs": {"make": 1, "buy": 1}, "sense": ">=", "rhs": 4},
        {"name": "cap", "coeffs": {"make": 1, "build": -1}, "sense": "<=", "rhs": 0},
    ],
    "uncertainty": {"type": "finite", "scenarios": [
        {"name": "low", "rhs": {"demand": 2}, "objective": {"make": 3}},
        {"name": "mid"},
        {"name": "high", "rhs": {"demand": 7}, "objective": {"buy": 5}},
    ], "nominal_index": 1},
})

# %% [markdown]
# Strict robustness fixes production in advance; the adjustable model waits.
# Light robustness and the Mulvey model need their own settings.

# %%
configs = {
    "light": {"weights": {"demand": 1, "cap": 1}, "rho": 2},
    "mulvey": {"probabilities": {"low": 0.3, "mid": 0.5, "high": 0.2}, "omega": 3, "sigma_mode": "expectation"},
}
table = compare_concepts(capacity, ["strict", "light", "adjustable", "mulvey", "candidate"], configs)
print(table.to_csv())
print("robustness gap:", robustness_gap(capacity))

# %% [markdown]
# A binary selection with three cost scenarios, solved exactly by the
# surrogate-relaxation branch and bound.

# %%
pick = problem_from_dict({
    "name": "pick", "sense": "min",
    "variables": [{"name": f"x{i}", "ub": 1, "integer": True} for i in range(6)],
    "objective": {"coeffs": {}},
    "constraints": [{"name": "three", "coeffs": {f"x{i}": 1 for i in range(6)}, "sense": ">=", "rhs": 3}],
    "uncertainty": {"type": "finite", "scenarios": [
        {"name": "s1", "objective": {"x0": 1, "x1": 4, "x2": 2, "x3": 6, "x4": 3, "x5": 5}},
        {"name": "s2", "objective": {"x0": 6, "x1": 1, "x2": 5, "x3": 2, "x4": 4, "x5": 3}},
        {"name": "s3", "objective": {"x0": 3, "x1": 5, "x2": 1, "x3": 4, "x4": 6, "x5": 2}},
    ]},
})
rep = surrogate_relaxation_bb(pick)
print(f"min-max cost {rep.objective}, root bound {rep.info['root_bound']:.3f}, nodes {rep.nodes}")
print("chosen:", sorted(v for v, x in rep.assignment.items() if x > 0.5))
