"""Exact small-ball probabilities of Rademacher polynomials, and the bounds they obey.

Everything here is exact: a polynomial's coefficients are scaled to
integers by their common denominator, its distribution over the hypercube is
enumerated (or, for linear forms, convolved one variable at a time), and
probabilities come back as :class:`~fractions.Fraction`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import NamedTuple

import networkx as nx
import numpy as np

from . import _kernels
from .errors import CapacityError, ContractViolation
from .matrix import IndexSet
from .polynomial import QuadraticPolynomial

MAX_ENUM_VARS = 24
_INT64_SAFE = 1 << 62


def _frac(x) -> Fraction:
    return Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


class _ScaledCounts(NamedTuple):
    scale: int  # common denominator D: value = key / D
    counts: dict  # scaled integer value -> number of points
    k: int  # active variables; total mass is 2**k


def _scaled(f: QuadraticPolynomial):
    coeffs = [f.constant, *f.linear.values(), *f.quadratic.values()]
    D = math.lcm(*(Fraction(c).denominator for c in coeffs))
    s = lambda c: int(Fraction(c) * D)  # noqa: E731
    return D, s


def _counts(f: QuadraticPolynomial, method: str = "auto") -> _ScaledCounts:
    active = f.variables()
    k = len(active)
    D, s = _scaled(f)
    const = s(f.constant)
    mass = abs(const) + sum(abs(s(c)) for c in f.linear.values()) + sum(abs(s(c)) for c in f.quadratic.values())
    if method == "auto":
        method = "convolve" if f.is_linear else "enumerate"
    if method == "convolve":
        if not f.is_linear:
            raise ContractViolation("convolution applies to linear polynomials only")
        return _ScaledCounts(D, _convolve_linear(const, [s(f.linear[v]) for v in active], mass), k)
    if k > MAX_ENUM_VARS:
        raise CapacityError(f"{k} active variables exceeds the enumeration cap {MAX_ENUM_VARS}")
    pos = {v: idx for idx, v in enumerate(active)}
    lin = np.array([s(f.linear.get(v, 0)) for v in active], dtype=object)
    if mass < _INT64_SAFE:
        Q = np.zeros((k, k), dtype=np.int64)
        for (i, j), c in f.quadratic.items():
            Q[pos[i], pos[j]] = Q[pos[j], pos[i]] = s(c)
        vals = _kernels.quadratic_values(np.int64(const), lin.astype(np.int64), Q)
        keys, cnt = np.unique(vals, return_counts=True)
        return _ScaledCounts(D, dict(zip(keys.tolist(), cnt.tolist())), k)
    # big coefficients: plain Python enumeration
    quad = [(pos[i], pos[j], s(c)) for (i, j), c in f.quadratic.items()]
    counts: Counter = Counter()
    for x in product((1, -1), repeat=k):
        v = const + sum(c * xi for c, xi in zip(lin, x)) + sum(c * x[i] * x[j] for i, j, c in quad)
        counts[v] += 1
    return _ScaledCounts(D, dict(counts), k)


def _convolve_linear(const: int, coeffs: list[int], mass: int) -> dict:
    if mass >= _INT64_SAFE:
        dist = Counter({const: 1})
        for c in coeffs:
            nxt: Counter = Counter()
            for v, w in dist.items():
                nxt[v + c] += w
                nxt[v - c] += w
            dist = nxt
        return dict(dist)
    vals = np.array([const], dtype=np.int64)
    cnts = np.array([1], dtype=object)
    for c in coeffs:
        vals2 = np.concatenate([vals + c, vals - c])
        cnts2 = np.concatenate([cnts, cnts])
        keys, inv = np.unique(vals2, return_inverse=True)
        merged = np.zeros(len(keys), dtype=object)
        np.add.at(merged, inv, cnts2)
        vals, cnts = keys, merged
    return dict(zip(vals.tolist(), (int(c) for c in cnts)))


def exact_distribution(f: QuadraticPolynomial, method: str = "auto") -> list[tuple]:
    """Distribution of ``f(xi)`` for uniform ``xi`` in ``{-1,1}^n`` as sorted ``(value, probability)`` pairs.

    ``method`` is ``"enumerate"`` (hypercube walk over the active variables),
    ``"convolve"`` (linear forms only) or ``"auto"``.
    """
    sc = _counts(f, method)
    total = 1 << sc.k
    out = []
    for key in sorted(sc.counts):
        v = Fraction(key, sc.scale)
        out.append((v.numerator if v.denominator == 1 else v, Fraction(sc.counts[key], total)))
    return out


def distribution_witnesses(f: QuadraticPolynomial) -> dict:
    """One ``{var: ±1}`` assignment attaining each value in the support."""
    active = f.variables()
    k = len(active)
    if k > MAX_ENUM_VARS:
        raise CapacityError(f"{k} active variables exceeds the enumeration cap {MAX_ENUM_VARS}")
    out = {}
    for x in product((1, -1), repeat=k):
        point = dict(zip(active, x))
        out.setdefault(f.evaluate(point), point)
    return dict(sorted(out.items()))


def probability_abs_below(f: QuadraticPolynomial, bound, strict: bool = False, method: str = "auto") -> Fraction:
    """``Pr(|f| <= bound)``, or ``Pr(|f| < bound)`` when ``strict``."""
    sc = _counts(f, method)
    b = _frac(bound) * sc.scale
    hit = sum(c for v, c in sc.counts.items() if (abs(v) < b if strict else abs(v) <= b))
    return Fraction(hit, 1 << sc.k)


class EloTail(NamedTuple):
    exact_prob: Fraction
    binomial_bound: Fraction
    simple_bound: float
    m: int
    t: Fraction

    @property
    def chain_holds(self) -> bool:
        """``exact <= binomial <= 3t/sqrt(m)``, the second step compared after squaring."""
        return self.exact_prob <= self.binomial_bound and self.binomial_bound ** 2 * self.m <= 9 * self.t ** 2


def elo_tail(f: QuadraticPolynomial, r, t) -> EloTail:
    """Small-ball probability ``Pr(|f| <= t r)`` of a linear form next to its binomial bounds.

    ``m`` counts the linear coefficients with ``|coeff| >= r``.
    """
    r, t = _frac(r), _frac(t)
    if not f.is_linear:
        raise ContractViolation("elo_tail takes a linear polynomial")
    if t < 1 or r <= 0:
        raise ContractViolation("need t >= 1 and r > 0")
    m = sum(1 for c in f.linear.values() if abs(c) >= r)
    if m == 0:
        raise ContractViolation("no linear coefficient reaches r; the bound is undefined")
    exact = probability_abs_below(f, t * r)
    binom = Fraction((math.ceil(t) + 1) * math.comb(m, m // 2), 1 << m)
    return EloTail(exact, binom, 3 * float(t) / math.sqrt(m), m, t)


def fact_linear_nondegenerate_check(f: QuadraticPolynomial, r) -> bool:
    """Verify ``Pr(|f| < r) <= 1/2`` for a linear form with some coefficient of size ``>= r``."""
    r = _frac(r)
    if not f.is_linear:
        raise ContractViolation("expected a linear polynomial")
    if r <= 0 or not any(abs(c) >= r for c in [f.constant, *f.linear.values()]):
        raise ContractViolation("no coefficient has absolute value >= r")
    return probability_abs_below(f, r, strict=True) <= Fraction(1, 2)


def fact_quadratic_nondegenerate_check(f: QuadraticPolynomial, r) -> bool:
    """Verify ``Pr(|f| < r) <= 3/4`` when some pair coefficient has size ``>= r``."""
    r = _frac(r)
    if r <= 0 or not any(abs(c) >= r for c in f.quadratic.values()):
        raise ContractViolation("no quadratic coefficient has absolute value >= r")
    return probability_abs_below(f, r, strict=True) <= Fraction(3, 4)


@dataclass(frozen=True)
class CoefficientGraph:
    """Graph on the variables with an edge ``ij`` iff ``|coeff(x_i x_j)| >= threshold``."""

    vertices: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    threshold: Fraction

    @property
    def ground_size(self) -> int:
        return max(self.vertices, default=0)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g


def coefficient_graph(f: QuadraticPolynomial, r) -> CoefficientGraph:
    r = _frac(r)
    edges = frozenset(key for key, c in f.quadratic.items() if abs(c) >= r)
    return CoefficientGraph(tuple(range(1, f.n_vars + 1)), edges, r)


def matching_number(G: CoefficientGraph) -> int:
    """Size of a maximum matching (Edmonds' blossom algorithm via networkx)."""
    if not G.edges:
        return 0
    return len(nx.max_weight_matching(G.to_networkx(), maxcardinality=True))


def matching_number_exhaustive(G: CoefficientGraph) -> int:
    """Maximum matching by branching on the lowest vertex; the oracle for small graphs."""
    adj: dict[int, int] = {}
    for i, j in G.edges:
        adj[i] = adj.get(i, 0) | 1 << j
        adj[j] = adj.get(j, 0) | 1 << i

    @lru_cache(maxsize=None)
    def best(alive: int) -> int:
        # lowest alive vertex that still has an alive neighbour
        b = alive
        while b:
            v = (b & -b).bit_length() - 1
            b &= b - 1
            nbrs = adj.get(v, 0) & alive
            if nbrs:
                rest = alive & ~(1 << v)
                top = best(rest)
                while nbrs:
                    u = (nbrs & -nbrs).bit_length() - 1
                    nbrs &= nbrs - 1
                    top = max(top, 1 + best(rest & ~(1 << u)))
                return top
        return 0

    return best(sum(1 << v for v in adj))


def greedy_vertex_cover(G: CoefficientGraph) -> IndexSet:
    """Endpoints of a maximal set of disjoint edges (scanned in sorted order)."""
    covered = 0
    for i, j in sorted(G.edges):
        if not (covered >> i & 1 or covered >> j & 1):
            covered |= 1 << i | 1 << j
    return IndexSet(covered, G.ground_size)


class MnvProbe(NamedTuple):
    exact_prob: Fraction
    bound: float
    nu: int


def mnv_check(f: QuadraticPolynomial, r, C: float) -> MnvProbe:
    """Exact ``Pr(|f| <= r)`` beside ``(log nu)**C / sqrt(nu)``; reported, never asserted."""
    nu = matching_number(coefficient_graph(f, r))
    if nu < 3:
        raise ContractViolation(f"matching number {nu} < 3")
    return MnvProbe(probability_abs_below(f, r), math.log(nu) ** C / math.sqrt(nu), nu)


def markov_fraction_bound(p, q):
    """``(p - q) / (1 - q)``: a lower bound on the chance that a ``q`` fraction of ``p``-likely events co-occur.

    Numbers are handled as exact rationals (floats by their decimal
    literal). Symbolic arguments pass through unchanged; their ordering is
    checked only when it can be decided.
    """
    numeric = all(isinstance(v, (int, float, Fraction)) for v in (p, q))
    if numeric:
        p, q = _frac(p), _frac(q)
    try:
        ordered = bool(1 > p) and bool(p > q) and bool(q > 0)
    except TypeError:
        ordered = True
    if not ordered:
        raise ContractViolation("need 1 > p > q > 0")
    return (p - q) / (1 - q)
