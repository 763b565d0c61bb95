"""The labeling oracle: a coarse-to-fine search over power grids.

Finding the cheapest feasible power allocation is a box-constrained search
with a black-box outage constraint. The solver scans a coarse log-spaced
lattice, keeps the best feasible point, and then shrinks the lattice around
it until per-axis spacing drops below the requested resolution. A flat
single-level scan written independently serves as the ground truth at
matched resolution, and tighter resolutions buy real power savings.
"""

import numpy as np

from relayalloc import (
    SubcarrierStats,
    SystemConfig,
    brute_force_reference,
    evaluation_budget,
    solve,
)

config = SystemConfig()  # four subcarriers, two active per pattern
rng = np.random.default_rng(11)
stats = tuple(SubcarrierStats(*rng.uniform(0.5, 5.0, 4)) for _ in range(2))

print("problem: minimize total transmit + relay power for two active")
print(f"subcarriers, outage cap {config.psi_th}, per-axis cap {config.pt_max}")
print()

flat = brute_force_reference(stats, config, 6)
level0 = solve(stats, config, grid0=6, max_levels=0)
print("flat 6-point scan and the level-0 search agree exactly:")
print(f"  totals {flat.total_power!r} vs {level0.total_power!r}")
print(f"  evaluations {flat.evaluations} vs {level0.evaluations}")
print()

print("refinement then sharpens the level-0 answer:")
print(f"{'delta':>8} {'total power':>14} {'outage':>12} {'evals':>8} {'levels':>7}")
for delta in (0.3, 0.1, 0.01):
    result = solve(stats, config, delta, grid0=6)
    print(
        f"{delta:8.2f} {result.total_power:14.4f} {result.achieved_outage:12.3e} "
        f"{result.evaluations:8d} {result.levels:7d}"
    )
print()

budget = evaluation_budget(t=2, grid0=12, refine_points=9, levels=14)
print(f"default full-resolution budget (12-point start, 14 levels): {budget} evaluations")
print()

# infeasible configurations are detected before any searching happens
tight = SystemConfig(psi_th=1e-9, pt_max=1.0, pr_max=1.0)
try:
    solve(stats, tight)
except Exception as err:
    print(f"tight caps are rejected up front: {type(err).__name__}: {err}")
