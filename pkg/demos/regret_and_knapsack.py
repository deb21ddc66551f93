# %% [markdown]
# Two structured problems with dedicated exact algorithms: shortest paths
# with interval lengths under min-max regret, and a knapsack where at most
# gamma weights rise to their upper value.

# %%
import time

import numpy as np

from robustkit import (
    IntervalGraph,
    KnapsackInstance,
    cc_knapsack_dp,
    knapsack_brute_force,
    midpoint_path,
    regret_of_path,
    regret_path_bb,
    regret_path_brute_force,
)

rng = np.random.default_rng(3)
arcs = []
for tail in range(8):
    for head in range(tail + 1, min(tail + 4, 9)):
        lo = int(rng.integers(1, 10))
        arcs.append((tail, head, lo, lo + int(rng.integers(0, 8))))
grid = IntervalGraph(9, 0, 8, tuple(arcs))

# %% [markdown]
# The midpoint path is at most twice the optimal regret. Branch and bound
# closes the gap; the two branching rules differ only in node count.

# %%
mid = midpoint_path(grid)
print(f"midpoint path {mid.arcs} regret {mid.regret} (check {regret_of_path(grid, mid.arcs)})")
for strategy in ("worst-case-branching", "midpoint-branching"):
    sol = regret_path_bb(grid, strategy)
    print(f"{strategy:22s} regret {sol.regret} nodes {sol.nodes} path {sol.arcs}")
print("enumeration:", regret_path_brute_force(grid).regret)

# %% [markdown]
# Knapsack: profit drops as more weights may deviate.

# %%
items = tuple((float(rng.integers(5, 30)), int(rng.integers(2, 12)), int(rng.integers(0, 6))) for _ in range(14))
for gamma in range(5):
    inst = KnapsackInstance(items, 40, gamma)
    dp, bf = cc_knapsack_dp(inst), knapsack_brute_force(inst)
    print(f"gamma={gamma} profit {dp.profit:5.1f} (enumeration {bf.profit:5.1f}) items {dp.chosen}")

big = tuple((float(rng.integers(1, 100)), int(rng.integers(1, 200)), int(rng.integers(0, 100))) for _ in range(1000))
start = time.perf_counter()
res = cc_knapsack_dp(KnapsackInstance(big, 10_000, 10))
print(f"1000 items, capacity 10000, gamma 10: profit {res.profit} in {time.perf_counter() - start:.2f} s")
