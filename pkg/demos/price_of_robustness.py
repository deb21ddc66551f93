# %% [markdown]
# How much does protection cost? A small production plan with uncertain
# resource use, solved nominally, with full interval protection and with a
# budget of deviations.

# %%
import numpy as np

from robustkit import (
    BudgetSet,
    IntervalSet,
    cc_counterpart,
    evaluate_solution,
    instantiate,
    nominal_optimum,
    problem_from_dict,
    sample_scenarios,
    solve,
    strict_counterpart,
)

plan = problem_from_dict({
    "name": "plan", "sense": "max",
    "variables": [{"name": p, "ub": 10} for p in ("chairs", "tables", "desks")],
    "objective": {"coeffs": {"chairs": 3, "tables": 5, "desks": 4}},
    "constraints": [
        {"name": "wood", "coeffs": {"chairs": 1, "tables": 3, "desks": 2},
         "deviations": {"chairs": 0.2, "tables": 0.6, "desks": 0.5}, "sense": "<=", "rhs": 20},
        {"name": "labor", "coeffs": {"chairs": 2, "tables": 1, "desks": 2},
         "deviations": {"chairs": 0.5, "tables": 0.3, "desks": 0.4}, "sense": "<=", "rhs": 18},
    ],
    "uncertainty": {"type": "interval"},
})

nominal = nominal_optimum(plan)
print(f"nominal profit {nominal:.3f}")

# %% [markdown]
# Full box protection is the most conservative plan. Letting at most gamma
# coefficients per row deviate interpolates between the two extremes.

# %%
soyster = strict_counterpart(plan.with_uncertainty(IntervalSet())).solve()
print(f"box-protected profit {soyster.objective:.3f}")

for gamma in np.arange(0, 3.5, 0.5):
    rep = cc_counterpart(plan.with_uncertainty(BudgetSet(float(gamma)))).solve()
    print(f"gamma={gamma:3.1f}  profit {rep.objective:7.3f}  price {nominal / rep.objective:5.3f}")

# %% [markdown]
# The nominal plan is cheap but fragile. Sampled box scenarios show how
# often it breaks compared to the protected one.

# %%
scenarios = sample_scenarios(plan, 500, seed=1)
for label, rep in [("nominal", solve(instantiate(plan))),
                   ("box-protected", soyster),
                   ("gamma=1", cc_counterpart(plan.with_uncertainty(BudgetSet(1.0))).solve())]:
    ev = evaluate_solution(plan, rep.assignment, scenarios)
    print(f"{label:14s} violated in {ev.violated_count:3d}/500 samples, worst profit {ev.worst_case:.3f}")
