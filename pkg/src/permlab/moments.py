"""The second moment of the permanent of a random symmetric sign matrix.

Write ``per M = sum_pi X_pi`` with ``X_pi = prod_i x_{i,pi(i)}``. For symmetric
Rademacher entries, ``E[X_pi X_pi']`` is 1 when the two permutations have the
same *signature* ``(I, F)`` and 0 otherwise, where ``I`` is the union of the
2-cycles and ``F`` is the family of sets ``{i, pi(i)}`` for ``i`` outside ``I``.
So ``E[per^2]`` is the sum of squared signature-class sizes.

A class is fixed by choosing ``I`` (any perfect matching of ``I`` gives the
same signature) and an unoriented cycle structure without 2-cycles on the
rest (each cycle of length >= 3 can be oriented two ways). Summing over
classes gives

    E[per^2] = sum_{k even} C(n,k) ((k-1)!!)^2 D(n-k),

with ``D(m) = sum over 2-cycle-free permutations of S_m of 2**(#cycles >= 3)``.
:func:`second_moment_exact` uses this by default. The signature-counting
enumeration of ``S_n`` and the average over all matrices remain as oracles.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityError, ContractViolation
from .matrix import IndexSet, SeedSpec, sample_symmetric
from .permanent import permanent_ryser

SIGNATURE_ENUM_MAX_N = 11
MATRIX_ENUM_MAX_N = 5


@dataclass(frozen=True)
class PermutationSignature:
    I: IndexSet
    F: frozenset[frozenset[int]]


def signature(perm: Sequence[int]) -> PermutationSignature:
    """Signature of a permutation given in one-line form: ``perm[i-1] = pi(i)``."""
    n = len(perm)
    if sorted(perm) != list(range(1, n + 1)):
        raise ContractViolation("not a permutation of 1..n")
    two = [i for i in range(1, n + 1) if perm[i - 1] != i and perm[perm[i - 1] - 1] == i]
    I = IndexSet.of(two, n)
    F = frozenset(frozenset((i, perm[i - 1])) for i in range(1, n + 1) if i not in I)
    return PermutationSignature(I, F)


def _signature_key(perm: tuple[int, ...]) -> tuple:
    # compact hashable form of signature() for the counting loop (0-based perm)
    n = len(perm)
    ibits = 0
    pairs = []
    for i in range(n):
        j = perm[i]
        if j != i and perm[j] == i:
            ibits |= 1 << i
        else:
            pairs.append(min(i, j) * n + max(i, j))
    return ibits, tuple(sorted(set(pairs)))


def signature_class_sizes(n: int) -> Counter:
    """Sizes of all signature classes, by enumerating ``S_n``."""
    if n > SIGNATURE_ENUM_MAX_N:
        raise CapacityError(f"enumerating S_n is limited to n <= {SIGNATURE_ENUM_MAX_N}")
    return Counter(_signature_key(p) for p in itertools.permutations(range(n)))


@lru_cache(maxsize=None)
def weighted_no_two_cycles(m: int) -> int:
    """``D(m)``: 2-cycle-free permutations of ``S_m``, each weighted by 2 per cycle of length >= 3."""
    if m < 0:
        return 0
    if m <= 2:
        return 1
    total = weighted_no_two_cycles(m - 1)
    for j in range(3, m + 1):
        total += 2 * math.perm(m - 1, j - 1) * weighted_no_two_cycles(m - j)
    return total


@lru_cache(maxsize=None)
def count_no_two_cycles(m: int) -> int:
    """Number of permutations of ``S_m`` without 2-cycles."""
    if m < 0:
        return 0
    if m <= 2:
        return 1
    total = count_no_two_cycles(m - 1)
    for j in range(3, m + 1):
        total += math.perm(m - 1, j - 1) * count_no_two_cycles(m - j)
    return total


def _double_factorial_odd(k: int) -> int:
    """``(k-1)!!`` for even ``k``: the number of perfect matchings on ``k`` points."""
    return math.prod(range(k - 1, 0, -2))


def second_moment_exact(n: int, method: str = "classes") -> int:
    """``E[(per M_n)^2]`` for symmetric Rademacher ``M_n``.

    ``method="classes"`` sums squared class sizes in closed form (any ``n``);
    ``method="signatures"`` counts classes by enumerating ``S_n``.
    """
    if n < 0:
        raise ContractViolation("n must be non-negative")
    if method == "signatures":
        return sum(c * c for c in signature_class_sizes(n).values())
    if method != "classes":
        raise ContractViolation(f"unknown method {method!r}")
    return sum(
        math.comb(n, k) * _double_factorial_odd(k) ** 2 * weighted_no_two_cycles(n - k)
        for k in range(0, n + 1, 2)
    )


@lru_cache(maxsize=None)
def permanent_distribution(n: int) -> Counter:
    """Counts of ``per M`` over all ``2**(n(n+1)/2)`` symmetric sign matrices."""
    if not 1 <= n <= MATRIX_ENUM_MAX_N:
        raise CapacityError(f"matrix enumeration is limited to 1 <= n <= {MATRIX_ENUM_MAX_N}")
    iu = np.triu_indices(n)
    cells = len(iu[0])
    counts: Counter = Counter()
    a = np.empty((n, n), dtype=np.int64)
    for mask in range(1 << cells):
        vals = 1 - 2 * ((mask >> np.arange(cells)) & 1)
        a[iu] = vals
        a.T[iu] = vals
        counts[permanent_ryser(a)] += 1
    return counts


def second_moment_enumerate(n: int) -> Fraction:
    """Average of ``per^2`` over every symmetric sign matrix of size ``n``."""
    counts = permanent_distribution(n)
    return Fraction(sum(p * p * c for p, c in counts.items()), sum(counts.values()))


class QClassCheck(NamedTuple):
    count: int
    bound: int  # floor of C(n,k) k^(k/2) (n-k)!; an integer count is below the bound iff below its floor

    @property
    def holds(self) -> bool:
        return self.count <= self.bound


def q_class_size(n: int, k: int) -> int:
    """Number of permutations of ``S_n`` whose 2-cycles cover exactly ``k`` points."""
    if k % 2 or not 0 <= k <= n:
        return 0
    return math.comb(n, k) * _double_factorial_odd(k) * count_no_two_cycles(n - k)


def q_class_sizes_enumerate(n: int) -> list[int]:
    """``|Q_k|`` for ``k = 0..n`` by direct enumeration of ``S_n``."""
    if n > SIGNATURE_ENUM_MAX_N:
        raise CapacityError(f"enumerating S_n is limited to n <= {SIGNATURE_ENUM_MAX_N}")
    sizes = [0] * (n + 1)
    for p in itertools.permutations(range(n)):
        sizes[sum(1 for i in range(n) if p[i] != i and p[p[i]] == i)] += 1
    return sizes


def q_class_bound_check(n: int, k: int) -> QClassCheck:
    base = math.comb(n, k) * math.factorial(n - k)
    if k % 2 == 0:
        bound = base * k ** (k // 2)
    else:
        bound = math.isqrt(base * base * k ** k)
    return QClassCheck(q_class_size(n, k), bound)


class SecondMomentChain(NamedTuple):
    exact: int
    class_bound: int  # sum_k |Q_k| 2^(n-k) k^(k/2)
    explicit_bound: int  # sum_k 4^n k^k n^(n-k)

    @property
    def holds(self) -> bool:
        return self.exact <= self.class_bound <= self.explicit_bound


def second_moment_chain(n: int) -> SecondMomentChain:
    """Exact second moment next to the two explicit upper bounds from the class count."""
    mid = sum(q_class_size(n, k) * 2 ** (n - k) * k ** (k // 2) for k in range(0, n + 1, 2))
    top = sum(4 ** n * k ** k * n ** (n - k) for k in range(n + 1))
    return SecondMomentChain(second_moment_exact(n), mid, top)


def _root_bracket(x: int, v: int) -> tuple[int, int]:
    """Integers ``lo <= x**(1/v) <= hi``."""
    lo = _iroot(x, v)
    return lo, lo if lo ** v == x else lo + 1


def _iroot(x: int, v: int) -> int:
    """``floor(x**(1/v))`` for ``x >= 0``."""
    if x < 2:
        return x
    r = 1 << -(-x.bit_length() // v)
    while True:
        s = ((v - 1) * r + x // r ** (v - 1)) // v
        if s >= r:
            break
        r = s
    while r ** v > x:
        r -= 1
    while (r + 1) ** v <= x:
        r += 1
    return r


def power_lower_bound(n: int, e: Fraction, bits: int = 64) -> Fraction:
    """A rational ``L <= n**e``, exact when ``e`` is an integer, else within ``2**-bits`` relative."""
    e = Fraction(e)
    u, v = e.numerator, e.denominator
    if v == 1:
        return Fraction(n) ** u
    if u >= 0:
        lo, _ = _root_bracket(n ** u << (bits * v), v)
        return Fraction(lo, 1 << bits)
    _, hi = _root_bracket(n ** (-u) << (bits * v), v)
    return Fraction(1 << bits, hi)


class MarkovTail(NamedTuple):
    bound: Fraction  # rigorous upper bound on Pr(per^2 >= n^(n+2 eps n))
    exact: bool  # True iff the exponent was integral (no rounding)
    exponent: Fraction


def markov_upper_tail(n: int, eps) -> MarkovTail:
    """``E[per^2] / n^(n + 2 eps n)``, bounding ``Pr(|per M_n| >= n^(n/2 + eps n))``.

    For a non-integral exponent the power is replaced by a rational lower
    bound, so the returned value can only be larger than the true quotient.
    """
    eps = Fraction(repr(eps)) if isinstance(eps, float) else Fraction(eps)
    e = n + 2 * eps * n
    denom = power_lower_bound(n, e)
    return MarkovTail(Fraction(second_moment_exact(n)) / denom, e.denominator == 1, e)


class MarkovRow(NamedTuple):
    threshold: Fraction  # on per^2
    probability: Fraction
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.probability <= self.bound


def markov_exhaustive_check(n: int, thresholds: Sequence) -> list[MarkovRow]:
    """``Pr(per^2 >= s)`` over all symmetric sign matrices beside ``E[per^2]/s``."""
    counts = permanent_distribution(n)
    total = sum(counts.values())
    E = second_moment_exact(n)
    rows = []
    for s in thresholds:
        s = Fraction(s)
        if s <= 0:
            raise ContractViolation("thresholds must be positive")
        hit = sum(c for p, c in counts.items() if p * p >= s)
        rows.append(MarkovRow(s, Fraction(hit, total), E / s))
    return rows


class MonteCarloEstimate(NamedTuple):
    mean: float
    stderr: float
    samples: int


def monte_carlo_second_moment(n: int, samples: int, seed: SeedSpec = SeedSpec(0)) -> MonteCarloEstimate:
    """Sample mean and standard error of ``per^2``; sample ``t`` uses stream ``seed.stream_id + t``."""
    sq = np.empty(samples, dtype=np.float64)
    for t in range(samples):
        M = sample_symmetric(n, seed=seed.stream(seed.stream_id + t))
        sq[t] = float(permanent_ryser(M) ** 2)
    return MonteCarloEstimate(float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(samples)), samples)
