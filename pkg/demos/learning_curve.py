"""
Learning curves against two baselines
=====================================

A reduced version of the benchmark: three seeds and a short grid of
training sizes.  The full protocol is ``BenchConfig()`` (ten seeds,
10 000 test points, K up to 600) and takes a few minutes.
"""
import logging

from cellload import BenchConfig, run_benchmark

logging.basicConfig(level=logging.INFO, format="%(message)s")

config = BenchConfig(k_grid=(25, 50, 100, 200), num_test=2000, num_seeds=3,
                     mono_pairs=500, record_timings=False)
report = run_benchmark(config)

###############################################################################
# RMSE per method
# ---------------
# Errors are averaged over base stations and then over seeds.

rmse = report.summary("rmse")
corr = report.summary("pearson")
mono = report.summary("mono_violations")
print("\n   K  method    rmse    pearson  monotonicity violations")
for k in config.k_grid:
    for method in config.methods:
        print(f"{k:4d}  {method:8s} {rmse[(k, method)][0]:.4f}   {corr[(k, method)][0]:.3f}"
              f"    {mono[(k, method)][0]:.1f}")
