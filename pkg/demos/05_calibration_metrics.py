"""Calibration metrics on synthetic predictors: reliability bins, expected
calibration error, negative log-likelihood, entropy histograms.
"""

import numpy as np

from pilot.calibrate import bin_reliability, ece, entropy_histogram, nll

rng = np.random.default_rng(0)
n = 200_000

# A perfectly calibrated two-class predictor: confidence c, correct with
# probability c. Its ECE tends to zero.
c = rng.uniform(0.5, 1.0, size=n)
calibrated = np.stack([c, 1.0 - c], axis=1)
labels = np.where(rng.random(n) < c, 0, 1)
print(f"perfectly calibrated predictor: ECE = {ece(calibrated, labels, 10):.4f}")

# An overconfident predictor: always says 100%, right 70% of the time.
over = np.tile([1.0, 0.0], (n, 1))
over_labels = np.where(rng.random(n) < 0.7, 0, 1)
print(f"always-confident, 70%-accurate:  ECE = {ece(over, over_labels, 10):.4f}")

# Reliability bins for a moderately miscalibrated predictor.
p = np.clip(c ** 0.5, 0.5, 1.0)           # confidence inflated above accuracy
inflated = np.stack([p, 1.0 - p], axis=1)
print("\nreliability bins (lo, hi, count, acc, conf):")
for b in bin_reliability(inflated, labels, 10):
    if b.count:
        print(f"  ({b.lo:.1f}, {b.hi:.1f}]  {b.count:7d}  {b.acc:.3f}  {b.conf:.3f}")
print(f"inflated-confidence ECE = {ece(inflated, labels, 10):.4f}")

# NLL fixed points.
uniform = np.full((1000, 10), 0.1)
print(f"\nuniform 10-class NLL = {nll(uniform, np.arange(1000) % 10):.6f} (ln 10 = {np.log(10):.6f})")

# Entropy histogram: one-hot rows pile at 0, uniform rows at ln C.
mix = np.vstack([np.tile([1.0, 0.0], (500, 1)), np.full((500, 2), 0.5)])
edges, counts = entropy_histogram(mix, 10)
print("\nentropy histogram counts over [0, ln 2]:", counts.tolist())
