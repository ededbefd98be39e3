"""
Exact permanents and heaviness thresholds
=========================================

Three evaluators agree on random symmetric sign matrices; thresholds of
the form scale * base**exponent are compared without floating point.
"""

import time
from fractions import Fraction

from permlab import HeavinessThreshold, SeedSpec, permanent_glynn, permanent_naive, permanent_ryser, sample_symmetric

M = sample_symmetric(8, seed=SeedSpec(2024))
print(M.entries)
print("naive:", permanent_naive(M), " ryser:", permanent_ryser(M), " glynn:", permanent_glynn(M))

# the inclusion-exclusion kernels stay fast well past where n! is hopeless
for n in (16, 20, 22):
    M = sample_symmetric(n, seed=SeedSpec(7))
    t0 = time.perf_counter()
    per = permanent_glynn(M)
    print(f"n={n:2d}  per={per:>16d}  {time.perf_counter() - t0:.3f}s")

# 3 * 2**(1/2) sits strictly between 4.24 and 4.25
lam = HeavinessThreshold(3, 2, Fraction(1, 2))
print(lam, lam.compare(Fraction(424, 100)), lam.compare(Fraction(425, 100)))
print("halved:", lam / 2, " met by -3?", (lam / 2).met_by(-3))
