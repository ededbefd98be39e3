"""
How big is the permanent of a random symmetric sign matrix?
===========================================================

The exact second moment comes from counting permutation classes; the
typical size is compared with the (n/2) log n scale by sampling.
"""

import statistics

from permlab import SeedSpec
from permlab.moments import monte_carlo_second_moment, second_moment_exact
from permlab.lab import ExperimentConfig, run_experiment

for n in range(1, 11):
    print(n, second_moment_exact(n))

est = monte_carlo_second_moment(8, 2000, SeedSpec(3))
print("n=8 Monte Carlo:", round(est.mean), "+/-", round(est.stderr), " exact:", second_moment_exact(8))

cfg = ExperimentConfig.build("magnitude-sweep", {"ns": "6,10,14,18", "trials": 60, "method": "glynn"})
rec = run_experiment(cfg, write=False)
for n in (6, 10, 14, 18):
    vals = [r["normalized_log_per"] for r in rec.rows if r["n"] == n]
    zeros = sum(r["per"] == 0 for r in rec.rows if r["n"] == n)
    print(f"n={n:2d}  median normalized log|per| = {statistics.median(vals):.3f}  zeros = {zeros}/60")
