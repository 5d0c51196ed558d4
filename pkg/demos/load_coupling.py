"""
Load coupling in a random deployment
====================================

Draw a 10-cell network, solve for the cell loads of a demand vector and
find how far that demand can be scaled before some cell saturates.
"""
import numpy as np

from cellload import (
    ScenarioParams,
    generate_scenario,
    is_feasible,
    solve_conditional_eigen,
    solve_fixed_point,
)

params = ScenarioParams(seed=7)
scenario = generate_scenario(params)
print(f"{scenario.num_bs} base stations, {scenario.num_tp} test points")
print("test points per cell:", np.bincount(scenario.assignment, minlength=scenario.num_bs))

###############################################################################
# Loads for one demand vector
# ---------------------------
# Iterating the load map from zero converges to the smallest fixed point.

rng = np.random.default_rng(0)
rates = rng.uniform(params.rate_min, params.rate_max, size=scenario.num_tp)
sol = solve_fixed_point(scenario, rates)
print(f"\nconverged in {sol.iterations} steps, residual {sol.residual:.1e}")
print("loads:", np.round(sol.load, 3))

###############################################################################
# Headroom
# --------
# The conditional eigenvalue tells how much the demand can grow: at
# ``rates / lambda`` the most loaded cell sits exactly at full load.

eig = solve_conditional_eigen(scenario, rates)
print(f"\nlambda* = {eig.eigval:.4f}  ->  demand can be scaled by {1 / eig.eigval:.2f}")
edge = solve_fixed_point(scenario, rates / eig.eigval)
print(f"max load at the edge: {edge.load.max():.6f}")

for factor in (0.5, 1.0, 1.5, 2.0, 3.0):
    verdict = is_feasible(scenario, factor * rates)
    print(f"  x{factor:<4} lambda={verdict.eigval:6.3f}  {'feasible' if verdict else 'infeasible'}")
