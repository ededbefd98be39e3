"""Exact integer permanents, heaviness tests and the row/double expansion identities.

Three evaluators share one interface and return Python ints:

* :func:`permanent_naive` sums over all permutations (the oracle, ``n <= 12``);
* :func:`permanent_ryser` uses Ryser's formula in Gray-code order;
* :func:`permanent_glynn` uses Glynn's formula in Gray-code order (about 2x fewer terms).

The compiled kernels accumulate in 128 bits. Before dispatching we bound
every partial product and the final value; when a bound fails the
evaluator falls back to a pure-Python big-integer loop (``mode="auto"``) or
raises :class:`CapacityError` (``mode="fixed"``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import CapacityError, ContractViolation, TheoremViolation
from .matrix import IndexSet, _array, submatrix
from .polynomial import QuadraticPolynomial

NAIVE_MAX_N = 12
_LIMIT63 = 1 << 63
_LIMIT127 = 1 << 127
# numpy abs sums of entries below this cannot overflow for n <= 63
_SMALL_ENTRY = 1 << 50


def _square(M) -> np.ndarray:
    a = _array(M)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"permanent of a non-square {a.shape} array")
    return a


_VECTOR_NAIVE_MAX_N = 9


@lru_cache(maxsize=None)
def _all_permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def _fits_int64(a: np.ndarray) -> bool:
    if a.dtype.kind not in "iu":
        return False
    peak = max(int(np.abs(a).max()), 1)
    return math.factorial(a.shape[0]) * peak ** a.shape[0] < 1 << 62


def permanent_naive(M) -> int:
    """Sum over all ``n!`` permutations of the products ``prod_i M[i, pi(i)]``."""
    a = _square(M)
    n = a.shape[0]
    if n > NAIVE_MAX_N:
        raise CapacityError(f"naive permanent limited to n <= {NAIVE_MAX_N}")
    if n <= _VECTOR_NAIVE_MAX_N and n and _fits_int64(a):
        # every permutation still contributes; numpy just does the products
        return int(a[np.arange(n), _all_permutations(n)].prod(axis=1).sum())
    rows = a.tolist()
    total = 0
    for perm in itertools.permutations(range(n)):
        p = 1
        for i, j in enumerate(perm):
            p *= rows[i][j]
            if not p:
                break
        total += p
    return total


def _abs_sums(a: np.ndarray, axis: int) -> list[int]:
    if a.size and int(np.abs(a).max()) < _SMALL_ENTRY:
        return np.abs(a).sum(axis=axis).tolist()
    obj = a.astype(object)
    return [sum(abs(v) for v in line) for line in (obj if axis == 1 else obj.T)]


def _balanced_split(bounds: list[int]) -> int | None:
    """An index s with prod(bounds[:s]) and prod(bounds[s:]) both below 2**63, if one exists."""
    total = math.prod(bounds)
    prefix = 1
    for s in range(len(bounds) + 1):
        if prefix >= _LIMIT63:
            return None
        if total // prefix < _LIMIT63:
            return s
        if s < len(bounds):
            prefix *= bounds[s]
    return None


def _ryser_python(rows: list[list[int]]) -> int:
    n = len(rows)
    rowsum = [0] * n
    total = 0
    gray = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        s = -1 if gray >> j & 1 else 1
        for i in range(n):
            rowsum[i] += s * rows[i][j]
        gray ^= 1 << j
        p = math.prod(rowsum)
        total += -p if k & 1 else p
    return -total if n & 1 else total


def _glynn_python(rows: list[list[int]]) -> int:
    n = len(rows)
    cs = [sum(rows[i][j] for i in range(n)) for j in range(n)]
    total = math.prod(cs)
    gray = 0
    for k in range(1, 1 << (n - 1)):
        b = (k & -k).bit_length() - 1
        c = 2 if gray >> b & 1 else -2
        row = rows[b + 1]
        for j in range(n):
            cs[j] += c * row[j]
        gray ^= 1 << b
        p = math.prod(cs)
        total += -p if k & 1 else p
    assert total % (1 << (n - 1)) == 0
    return total >> (n - 1)


def _primes_below_2_31(count: int) -> list[int]:
    out = []
    c = (1 << 31) - 1
    while len(out) < count:
        if all(c % d for d in range(3, math.isqrt(c) + 1, 2)):
            out.append(c)
        c -= 2
    return out


_CRT_PRIMES: list[int] = []
# pure-Python Gray-code loops are fine up to here
_PYTHON_MAX_N = 14


def _ryser_crt(a: np.ndarray, bound: int) -> int:
    """Ryser by residues modulo enough 31-bit primes to pin down ``|per| <= bound``."""
    need = 1
    primes = []
    i = 0
    while need <= 2 * bound:
        if i == len(_CRT_PRIMES):
            _CRT_PRIMES.extend(_primes_below_2_31(len(_CRT_PRIMES) + 8)[len(_CRT_PRIMES):])
        primes.append(_CRT_PRIMES[i])
        need *= _CRT_PRIMES[i]
        i += 1
    res = _kernels.ryser_residues(np.ascontiguousarray(a.T), np.array(primes, dtype=np.int64))
    v = 0
    for p, r in zip(primes, res.tolist()):
        m = need // p
        v = (v + r * m * pow(m, -1, p)) % need
    if v > need // 2:
        v -= need
    return -v if a.shape[0] & 1 else v


def _big_fallback(a: np.ndarray, per_bound: int, mode: str) -> int:
    if mode == "fixed":
        raise CapacityError("permanent may exceed the 128-bit fast path; use mode='auto'")
    if a.shape[0] <= _PYTHON_MAX_N or max(_abs_sums(a, axis=1)) >= _LIMIT63 >> 1:
        return _ryser_python(a.tolist())
    return _ryser_crt(a, per_bound)


def _value_bound(a: np.ndarray, rows: list[int], cols: list[int]) -> int:
    """Upper bound on ``|per a|``."""
    n = a.shape[0]
    return min(math.prod(rows), math.prod(cols), math.factorial(n) * int(np.abs(a).max()) ** n)


def _small_or_none(a: np.ndarray):
    n = a.shape[0]
    if n == 0:
        return 1
    if n == 1:
        return int(a[0, 0])
    if n == 2:
        return int(a[0, 0]) * int(a[1, 1]) + int(a[0, 1]) * int(a[1, 0])
    return None


def permanent_ryser(M, mode: str = "auto") -> int:
    """Exact permanent by Ryser's formula.

    ``mode="auto"`` promotes to exact big integers when the 128-bit bounds
    fail; ``mode="fixed"`` raises :class:`CapacityError` instead.
    """
    a = _square(M)
    small = _small_or_none(a)
    if small is not None:
        return small
    bounds = _abs_sums(a, axis=1)
    if 0 in bounds:
        return 0
    per_bound = _value_bound(a, bounds, _abs_sums(a, axis=0))
    split = _balanced_split(bounds) if per_bound < _LIMIT127 else None
    if split is None:
        return _big_fallback(a, per_bound, mode)
    H, L = _kernels.ryser128(np.ascontiguousarray(a.T), split)
    v = _kernels.to_signed(H, L)
    return -v if a.shape[0] & 1 else v


def permanent_glynn(M, mode: str = "auto") -> int:
    """Exact permanent by Glynn's formula (same contract as :func:`permanent_ryser`)."""
    a = _square(M)
    small = _small_or_none(a)
    if small is not None:
        return small
    n = a.shape[0]
    bounds = _abs_sums(a, axis=0)
    if 0 in bounds:
        return 0
    per_bound = _value_bound(a, _abs_sums(a, axis=1), bounds)
    split = None
    if per_bound << (n - 1) < _LIMIT127:
        split = _balanced_split(bounds)
    if split is None:
        if n <= _PYTHON_MAX_N and mode != "fixed":
            return _glynn_python(a.tolist())
        return _big_fallback(a, per_bound, mode)
    H, L = _kernels.glynn128(np.ascontiguousarray(a), split)
    v = _kernels.to_signed(H, L)
    if v % (1 << (n - 1)):
        raise TheoremViolation("Glynn sum not divisible by 2**(n-1)")
    return v >> (n - 1)


_METHODS = {"ryser": permanent_ryser, "glynn": permanent_glynn, "naive": permanent_naive}


def permanent(M, method: str = "ryser") -> int:
    try:
        return _METHODS[method](M)
    except KeyError:
        raise ContractViolation(f"unknown permanent method {method!r}") from None


def permanent_submatrix(M, A: IndexSet, B: IndexSet, method: str = "ryser") -> int:
    if len(A) != len(B):
        raise ContractViolation(f"|A|={len(A)} but |B|={len(B)}")
    return permanent(submatrix(M, A, B), method)


def minor_permanent(M, A: IndexSet, B: IndexSet, i: int, j: int) -> int:
    """Permanent of ``M[A, B]`` with row ``i`` and column ``j`` removed."""
    if len(A) != len(B):
        raise ContractViolation(f"|A|={len(A)} but |B|={len(B)}")
    if i not in A or j not in B:
        raise ContractViolation(f"need {i} in A and {j} in B")
    return permanent_submatrix(M, A.remove(i), B.remove(j))


@dataclass(frozen=True)
class HeavinessThreshold:
    """A positive threshold ``scale * base**exponent`` compared exactly.

    Plain rationals have ``base == 1``. The general form carries thresholds
    such as ``K**(1/2 - delta) * lam`` without rounding: ``x >= t`` is decided
    by raising both sides to the exponent's denominator.
    """

    scale: Fraction
    base: Fraction = Fraction(1)
    exponent: Fraction = Fraction(0)

    def __post_init__(self):
        scale, base, exponent = (Fraction(v) if not isinstance(v, float) else Fraction(repr(v))
                                 for v in (self.scale, self.base, self.exponent))
        if scale <= 0 or base <= 0:
            raise ContractViolation("thresholds must be positive")
        if base == 1 or exponent == 0:
            base, exponent = Fraction(1), Fraction(0)
        elif exponent.denominator == 1:
            scale *= base ** exponent.numerator
            base, exponent = Fraction(1), Fraction(0)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)

    @property
    def is_rational(self) -> bool:
        return self.exponent == 0

    @property
    def numerator(self) -> int:
        if not self.is_rational:
            raise ValueError("threshold is irrational")
        return self.scale.numerator

    @property
    def denominator(self) -> int:
        if not self.is_rational:
            raise ValueError("threshold is irrational")
        return self.scale.denominator

    def compare(self, value) -> int:
        """Sign of ``|value| - self``, computed exactly."""
        r = abs(Fraction(value)) / self.scale
        if self.is_rational:
            lhs, rhs = r, Fraction(1)
        else:
            u, v = self.exponent.numerator, self.exponent.denominator
            if u >= 0:
                lhs, rhs = r ** v, self.base ** u
            else:
                lhs, rhs = r ** v * self.base ** (-u), Fraction(1)
        return (lhs > rhs) - (lhs < rhs)

    def met_by(self, value) -> bool:
        """``|value| >= self`` in exact arithmetic."""
        return self.compare(value) >= 0

    def __mul__(self, c) -> HeavinessThreshold:
        return HeavinessThreshold(self.scale * Fraction(c), self.base, self.exponent)

    __rmul__ = __mul__

    def __truediv__(self, c) -> HeavinessThreshold:
        return HeavinessThreshold(self.scale / Fraction(c), self.base, self.exponent)

    def times_power(self, base, exponent) -> HeavinessThreshold:
        """Multiply by ``base**exponent``; the base must match the one already carried."""
        base, exponent = Fraction(base), Fraction(exponent)
        if self.is_rational:
            return HeavinessThreshold(self.scale, base, exponent)
        if base != self.base:
            raise ContractViolation("cannot mix two irrational bases")
        return HeavinessThreshold(self.scale, base, self.exponent + exponent)

    def __float__(self) -> float:
        return float(self.scale) * float(self.base) ** float(self.exponent)

    def __str__(self) -> str:
        if self.is_rational:
            return str(self.scale)
        return f"{self.scale}*{self.base}^({self.exponent})"


def as_threshold(lam) -> HeavinessThreshold:
    if isinstance(lam, HeavinessThreshold):
        return lam
    return HeavinessThreshold(lam)


def is_heavy(M, A: IndexSet, B: IndexSet, lam) -> bool:
    """True iff ``|per M[A,B]| >= lam`` (boundary inclusive)."""
    return as_threshold(lam).met_by(permanent_submatrix(M, A, B))


def row_expansion(M, A: IndexSet, B: IndexSet) -> dict[int, int]:
    """Coefficients ``per M[A, B - {i}]`` for ``i`` in ``B``.

    For a new row ``x``, ``sum_i x_i * coeff[i]`` is the permanent of the
    block with rows ``A`` plus the new row and columns ``B``.
    """
    if len(B) != len(A) + 1:
        raise ContractViolation(f"need |B| = |A| + 1, got {len(A)} and {len(B)}")
    return {i: permanent_submatrix(M, A, B.remove(i)) for i in B}


def double_expansion(M, A: IndexSet, B: IndexSet, z: int) -> QuadraticPolynomial:
    """The permanent of ``M'[A + {n+1}, B + {n+1}]`` as a polynomial in the new row.

    ``M'`` appends the row ``(x_1, ..., x_n, z)`` and the equal column, so the
    result is ``z per M[A,B] + sum_{i in A, j in B} x_i x_j per M[A,B]^(i,j)``
    with squares replaced by 1.
    """
    if len(A) != len(B):
        raise ContractViolation(f"|A|={len(A)} but |B|={len(B)}")
    n = _array(M).shape[0]
    poly = QuadraticPolynomial(n, int(z) * permanent_submatrix(M, A, B))
    for i in A:
        for j in B:
            poly.add_term(minor_permanent(M, A, B, i, j), i, j)
    return poly


class NoncancellingPair(NamedTuple):
    i: int
    j: int
    A_new: IndexSet
    B_new: IndexSet
    coefficient: int  # per M[A',B']^(i,j) + per M[A',B']^(j,i)


def choose_noncancelling_pair(M, A: IndexSet, B: IndexSet, a: int, b1: int, b2: int, lam) -> NoncancellingPair:
    """Pick distinct ``i, j`` from ``{a, b1, b2}`` whose two minors do not cancel.

    With ``A' = A + {a}`` and ``B' = (B - {a}) + {i, j}`` the result satisfies
    ``|per M[A',B']^(i,j) + per M[A',B']^(j,i)| >= lam/2``. The pairs
    ``(b1, a)`` then ``(b2, a)`` are tried first and ``(b1, b2)`` is the fallback.
    """
    lam = as_threshold(lam)
    if len(A) != len(B):
        raise ContractViolation(f"|A|={len(A)} but |B|={len(B)}")
    if a not in B or a in A:
        raise ContractViolation(f"a={a} must lie in B - A")
    if b1 == b2 or any(b not in A or b in B for b in (b1, b2)):
        raise ContractViolation("b1, b2 must be distinct elements of A - B")
    base = permanent_submatrix(M, A, B)
    if not lam.met_by(base):
        raise ContractViolation(f"M[A,B] is not {lam}-heavy (per = {base})")
    sign = 1 if base > 0 else -1
    half = lam / 2
    A_new = A.add(a)
    for b in (b1, b2):
        swapped = permanent_submatrix(M, A.remove(b).add(a), B.remove(a).add(b))
        # first case of the proof: sign * swapped >= -lam/2
        if sign * swapped >= 0 or half.compare(swapped) <= 0:
            i, j = b, a
            break
    else:
        i, j = b1, b2
    B_new = B.remove(a).add(i, j)
    coef = minor_permanent(M, A_new, B_new, i, j) + minor_permanent(M, A_new, B_new, j, i)
    if not half.met_by(coef):
        raise TheoremViolation(f"pair ({i},{j}) gives coefficient {coef} below {half}")
    return NoncancellingPair(i, j, A_new, B_new, coef)

