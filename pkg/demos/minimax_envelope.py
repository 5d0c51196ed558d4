"""
The minimax envelope on a toy problem
=====================================

A one-dimensional walk through fitting: estimate a slope bound, smooth
noisy observations until a monotone fit exists, and predict with the
midpoint of the tightest upper and lower bounds.
"""
import numpy as np

from cellload import TrainingSet, envelope, fit, smooth_monotone

###############################################################################
# Noisy samples of a monotone function
# ------------------------------------

rng = np.random.default_rng(3)
x = np.sort(rng.uniform(0, 1, 12))[:, None]
truth = 0.2 + 0.5 * x[:, 0] ** 2
eps = 0.05
y = np.clip(truth + rng.uniform(-eps, eps, x.shape[0]), 0, 1)
data = TrainingSet(x, y, noise_bound=eps)

###############################################################################
# Fit
# ---
# The slope estimate discounts ``2 * eps`` from every observed jump; the
# smoothing step then moves observations as little as possible (in total
# absolute change) so that no pair contradicts monotonicity with that slope.

model = fit(data, eps)
print(f"estimated slope bound L = {model.lipschitz[0]:.3f}")
print(f"total shift applied by smoothing: {np.abs(model.values[:, 0] - y).sum():.4f}")

# the tie-breaking of the smoothing LP is visible on the smallest example
two = smooth_monotone(TrainingSet([[1.0], [2.0]], [0.6, 0.5]), [0.0])
print("two decreasing points smoothed to", two.outputs[:, 0])

###############################################################################
# Envelope and prediction
# -----------------------
# Every monotone function with slope at most L through the smoothed points
# lies between ``lower`` and ``upper``; the prediction is their midpoint.

grid = np.linspace(0, 1, 11)[:, None]
env = envelope(model, grid)
print("\n    x   lower   pred   upper   true")
for xi, lo, up in zip(grid[:, 0], env.lower[:, 0], env.upper[:, 0]):
    print(f"{xi:5.2f}  {lo:6.3f}  {(lo + up) / 2:6.3f}  {up:6.3f}  {0.2 + 0.5 * xi ** 2:6.3f}")
