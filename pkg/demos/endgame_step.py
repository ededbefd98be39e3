"""
One endgame step
================

A family of heavy, complement-disjoint blocks turns into quadratic
polynomials in the next row; we classify them and see which survive.
"""

from collections import Counter

from permlab import SeedSpec
from permlab.endgame import endgame_trial

trial = endgame_trial(12, 1, 4, SeedSpec(8))
res = trial.result
print("labels:", res.state.labels)
print("values:", res.values)
print("qualifying:", res.qualifying, " needed:", res.needed, " success:", trial.success)
if trial.success:
    for r in res.family.records:
        print(sorted(r.A), sorted(r.B), r.per)

wins = Counter(endgame_trial(12, 1, 4, SeedSpec(s)).success for s in range(40))
print("successes over 40 trials:", wins[True])
