# %% [markdown]
# Two ways around a compact reformulation: add worst-case scenarios one at a
# time, or draw scenarios at random and attach a probability bound.

# %%
import json

from robustkit import (
    cutting_plane_solve,
    problem_from_dict,
    required_sample_size,
    sample_and_solve,
    sampling_bound,
    strict_counterpart,
    worst_case_oracle,
)
from robustkit.algorithms import cut_log_jsonl

blend = problem_from_dict({
    "name": "blend", "sense": "min",
    "variables": [{"name": "a", "ub": 8}, {"name": "b", "ub": 8}, {"name": "c", "ub": 8}],
    "objective": {"coeffs": {"a": 4, "b": 3, "c": 5}},
    "constraints": [
        {"name": "protein", "coeffs": {"a": 3, "b": 2, "c": 4}, "deviations": {"a": 0.8, "b": 0.6, "c": 0.3},
         "sense": ">=", "rhs": 12},
        {"name": "fiber", "coeffs": {"a": 1, "b": 3, "c": 1}, "deviations": {"b": 1.0},
         "sense": ">=", "rhs": 6, "rhs_deviation": 0.5},
    ],
    "uncertainty": {"type": "interval"},
})

# %% [markdown]
# The oracle answers one question: which admissible data hurts this plan most?

# %%
guess = {"a": 0.0, "b": 2.0, "c": 2.0}
res = worst_case_oracle(blend, guess)
print(f"worst violation {res.violation:.3f} on row {res.row}")

# %% [markdown]
# Cutting planes start from the nominal data and stop once the oracle finds
# nothing violated. The result matches the compact counterpart.

# %%
cp = cutting_plane_solve(blend)
print(cut_log_jsonl(cp.info["cut_log"]), end="")
print(f"cutting planes {cp.objective:.6f} after {cp.cuts} cuts, "
      f"compact {strict_counterpart(blend).solve().objective:.6f}")

# %% [markdown]
# Sampling solves a relaxation, so for a min problem its value can only be
# lower. The bound tells how likely the sampled plan violates more than an
# eps fraction of the scenarios.

# %%
for N in (5, 20, 80):
    rep = sample_and_solve(blend, N, seed=11, epsilons=[0.1, 0.25])
    print(f"N={N:3d} value {rep.objective:.4f} bounds {json.dumps(rep.info['bounds'])}")

n = len(blend.variables)
print("samples needed for eps=0.05, beta=1e-3:", required_sample_size(n, 0.05, 1e-3))
print("check:", sampling_bound(n, required_sample_size(n, 0.05, 1e-3), 0.05) <= 1e-3)
