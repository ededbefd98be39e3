"""
Growing heavy blocks one exposure at a time
===========================================

Start with a block of nonzero permanent, reveal new rows of the matrix,
and watch the one-step moves and the weak growth process keep it heavy.
"""

from fractions import Fraction

from permlab import IndexSet, SeedSpec, sample_symmetric
from permlab.growth import (
    GrowthParams,
    augment_success_probability,
    corner_success_probability,
    iterative_cover_run,
    weak_growth_run,
)
from permlab.permanent import permanent_submatrix

# exact success chances over every possible next row
M = sample_symmetric(4, seed=SeedSpec(2))
A, B = IndexSet.of([1, 2], 4), IndexSet.of([3, 4], 4)
per = permanent_submatrix(M, A, B)
print("per M[A,B] =", per)
if per:
    print("augment, I={1,2}:", augment_success_probability(M, A, B, IndexSet.of([1, 2], 4), abs(per)))
    print("corner:", corner_success_probability(M, A, B, 3, 1, 2, abs(per), "expansion"))

# weak growth: the case labels drive N (family size) and lam (heaviness).
# At this size R/(8K) < 1, so case (i) never asks for more than one witness.
res = weak_growth_run(GrowthParams(20, R=4, delta=Fraction(1, 20), K=4), SeedSpec(5))
res.trace.check()
print("cases:", "".join({"i": "1", "ii": "2", "iii": "3", "iv": "4"}[c] for c in res.trace.cases))
print("family size:", len(res.family.records) if res.family else 0, " final lam:", res.final_lam)

# covering: fill in the missing columns of a heavy (n-S) x (n-S) block
n, S = 12, 3
M = sample_symmetric(n, seed=SeedSpec(4))
B = IndexSet.interval(1, n - S, n)
per = permanent_submatrix(M, IndexSet.interval(S + 1, n, n), B)
cov = iterative_cover_run(M, B, S, abs(per), SeedSpec(4))
print("cover Q trace:", cov.trace.Q, " moves:", cov.trace.moves, " success:", cov.success)
