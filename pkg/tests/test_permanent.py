import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from permlab.errors import CapacityError, ContractViolation
from permlab.matrix import IndexSet, SeedSpec, sample_symmetric
from permlab.permanent import (
    HeavinessThreshold,
    choose_noncancelling_pair,
    double_expansion,
    is_heavy,
    minor_permanent,
    permanent,
    permanent_glynn,
    permanent_naive,
    permanent_ryser,
    permanent_submatrix,
    row_expansion,
)

square = st.integers(1, 7).flatmap(
    lambda n: st.lists(st.lists(st.integers(-3, 3), min_size=n, max_size=n), min_size=n, max_size=n)
)


# -- the three evaluators


def test_small_closed_forms():
    assert permanent_naive(np.array([[1]])) == 1
    assert permanent_naive(np.ones((4, 4), dtype=int)) == 24
    for n in range(1, 13, 3):
        assert permanent_naive(np.eye(n, dtype=int)) == 1
    assert permanent_ryser(np.ones((10, 10), dtype=int)) == 3628800
    assert permanent_ryser(np.zeros((0, 0), dtype=int)) == 1


def test_two_by_two_sign_grid():
    for a, b, c, d in itertools.product((-1, 1), repeat=4):
        m = np.array([[a, b], [c, d]])
        assert permanent_ryser(m) == permanent_glynn(m) == a * d + b * c


@given(square)
@settings(max_examples=150)
def test_evaluators_agree_with_oracle(rows):
    m = np.array(rows)
    ref = oracle.per(rows)
    assert permanent_naive(m) == ref
    assert permanent_ryser(m) == ref
    assert permanent_glynn(m) == ref


def test_derangement_counts():
    # per(J - I) counts derangements: 0, 1, 2, 9, 44, 265, ...
    expected = [0, 1, 2, 9, 44, 265, 1854, 14833, 133496, 1334961]
    for n, d in enumerate(expected, start=1):
        a = np.ones((n, n), dtype=int) - np.eye(n, dtype=int)
        assert permanent_ryser(a) == d
        assert permanent_glynn(a) == d


def test_all_ones_at_the_128_bit_edge():
    for n in (18, 20, 22):
        a = np.ones((n, n), dtype=int)
        assert permanent_ryser(a) == math.factorial(n)
    assert permanent_glynn(np.ones((21, 21), dtype=int)) == math.factorial(21)


def test_big_entries_are_exact():
    rng = np.random.default_rng(0)
    big = rng.integers(-(10**12), 10**12, size=(8, 8))
    ref = oracle.per(big.tolist())
    assert permanent_ryser(big) == ref
    assert permanent_glynn(big) == ref
    with pytest.raises(CapacityError):
        permanent_ryser(big, mode="fixed")


def test_residue_tier_for_medium_sizes():
    # 16x16 with entries near 2**20 overflows 128 bits and runs through the residue kernel
    a = sample_symmetric(16, seed=SeedSpec(4)).entries * (1 << 20)
    assert permanent_ryser(a) == permanent_ryser(sample_symmetric(16, seed=SeedSpec(4))) * (1 << 320)


def test_naive_capacity_and_shape_errors():
    with pytest.raises(CapacityError):
        permanent_naive(np.ones((13, 13), dtype=int))
    with pytest.raises(ContractViolation):
        permanent_ryser(np.ones((2, 3), dtype=int))
    with pytest.raises(ContractViolation):
        permanent(np.ones((2, 2), dtype=int), "bogus")


@given(st.integers(2, 9), st.integers(0, 10**6), st.permutations(range(9)))
@settings(max_examples=40)
def test_invariant_under_simultaneous_permutation(n, s, perm):
    M = sample_symmetric(n, seed=SeedSpec(s))
    p = [v + 1 for v in perm if v < n]
    assert permanent_ryser(M.permuted(p)) == permanent_ryser(M)


# -- submatrices and minors


def test_submatrix_permanent_examples():
    M = sample_symmetric(6, seed=SeedSpec(21))
    one = IndexSet.of([4], 6)
    assert permanent_submatrix(M, one, one) == M.entry(4, 4)
    full = IndexSet.full(6)
    assert permanent_submatrix(M, full, full) == permanent_ryser(M)
    with pytest.raises(ContractViolation):
        permanent_submatrix(M, IndexSet.of([1, 2], 6), one)


@given(st.integers(0, 10**6), st.data())
@settings(max_examples=60)
def test_submatrix_and_minor_match_oracle(s, data):
    M = sample_symmetric(6, seed=SeedSpec(s))
    A = data.draw(st.sets(st.integers(1, 6), min_size=4, max_size=4))
    B = data.draw(st.sets(st.integers(1, 6), min_size=4, max_size=4))
    Ai, Bi = IndexSet.of(A, 6), IndexSet.of(B, 6)
    assert permanent_submatrix(M, Ai, Bi) == oracle.per(oracle.block(M.entries, A, B))
    i, j = data.draw(st.sampled_from(sorted(A))), data.draw(st.sampled_from(sorted(B)))
    assert minor_permanent(M, Ai, Bi, i, j) == oracle.per(oracle.block(M.entries, A - {i}, B - {j}))


def test_minor_examples():
    ones = np.ones((5, 5), dtype=int)
    one = IndexSet.of([2], 5)
    assert minor_permanent(ones, one, one, 2, 2) == 1
    S = IndexSet.of([1, 2, 3, 4], 5)
    assert minor_permanent(ones, S, S, 1, 3) == 6
    with pytest.raises(ContractViolation):
        minor_permanent(ones, S, S, 5, 1)


# -- heaviness


def test_threshold_boundaries():
    a = np.array([[1, 1, 1], [1, 1, 1], [1, 1, 1]])  # per 6
    full = IndexSet.full(3)
    assert not is_heavy(a, full, full, Fraction(13, 2))
    assert is_heavy(a, full, full, 6)
    for s in (-1, 1):
        assert is_heavy(np.array([[s]]), IndexSet.full(1), IndexSet.full(1), 1)


def test_irrational_threshold_compares_exactly():
    t = HeavinessThreshold(1, 4, Fraction(1, 2))  # 4**(1/2) = 2
    assert t.compare(2) == 0 and t.compare(-2) == 0
    assert t.compare(Fraction(199, 100)) < 0
    u = HeavinessThreshold(1, 2, Fraction(1, 2))  # sqrt 2
    assert u.met_by(Fraction(14143, 10000)) and not u.met_by(Fraction(14142, 10000))
    assert (u * 2).met_by(Fraction(28285, 10000))
    assert not (u / 2).met_by(Fraction(7071, 10000))
    assert HeavinessThreshold(3, 2, 3).is_rational and HeavinessThreshold(3, 2, 3).scale == 24
    with pytest.raises(ContractViolation):
        HeavinessThreshold(0)


@given(st.fractions(min_value=Fraction(1, 100), max_value=100), st.fractions(min_value=-200, max_value=200))
def test_rational_compare_is_sign_of_difference(lam, v):
    t = HeavinessThreshold(lam)
    d = abs(v) - lam
    assert t.compare(v) == (d > 0) - (d < 0)


# -- expansions


def test_row_expansion_examples():
    M = sample_symmetric(5, seed=SeedSpec(3))
    assert row_expansion(M, IndexSet.empty(5), IndexSet.of([2], 5)) == {2: 1}
    ones = np.ones((5, 5), dtype=int)
    A, B = IndexSet.of([1, 2], 5), IndexSet.of([2, 3, 5], 5)
    assert set(row_expansion(ones, A, B).values()) == {2}
    with pytest.raises(ContractViolation):
        row_expansion(M, A, A)


@given(st.integers(0, 10**6), st.data())
@settings(max_examples=80)
def test_row_expansion_identity(s, data):
    n = 6
    M = sample_symmetric(n, seed=SeedSpec(s))
    k = data.draw(st.integers(0, 4))
    A = data.draw(st.sets(st.integers(1, n), min_size=k, max_size=k))
    B = data.draw(st.sets(st.integers(1, n), min_size=k + 1, max_size=k + 1))
    x = data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n))
    coeff = row_expansion(M, IndexSet.of(A, n), IndexSet.of(B, n))
    rows = oracle.block(M.entries, A, B) + [[x[j - 1] for j in sorted(B)]]
    assert sum(x[i - 1] * c for i, c in coeff.items()) == oracle.per(rows)


def test_double_expansion_empty_block():
    M = sample_symmetric(4, seed=SeedSpec(0))
    e = IndexSet.empty(4)
    p = double_expansion(M, e, e, -1)
    assert p.constant == -1 and not p.linear and not p.quadratic


def test_double_expansion_full_block_is_twice_the_minor():
    M = sample_symmetric(5, seed=SeedSpec(17))
    full = IndexSet.full(5)
    p = double_expansion(M, full, full, 1)
    for i, j in itertools.combinations(range(1, 6), 2):
        assert p.coefficient(i, j) == 2 * minor_permanent(M, full, full, i, j)


@given(st.integers(0, 10**6), st.data())
@settings(max_examples=80)
def test_double_expansion_identity(s, data):
    n = 5
    M = sample_symmetric(n, seed=SeedSpec(s))
    k = data.draw(st.integers(0, 4))
    A = data.draw(st.sets(st.integers(1, n), min_size=k, max_size=k))
    B = data.draw(st.sets(st.integers(1, n), min_size=k, max_size=k))
    z = data.draw(st.sampled_from([-1, 1]))
    p = double_expansion(M, IndexSet.of(A, n), IndexSet.of(B, n), z)
    for x in itertools.product((-1, 1), repeat=n):
        full = [list(r) + [x[i]] for i, r in enumerate(M.entries.tolist())] + [list(x) + [z]]
        rows = oracle.block(full, A | {n + 1}, B | {n + 1})
        assert p.evaluate(x) == oracle.per(rows)


# -- the non-cancelling pair


def test_noncancelling_pair_on_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(300):
        s = int(rng.integers(0, 2**32))
        M = sample_symmetric(8, seed=SeedSpec(s))
        A = IndexSet.of(rng.choice(np.arange(1, 9), 5, replace=False), 8)
        B = IndexSet.of(rng.choice(np.arange(1, 9), 5, replace=False), 8)
        if not (B - A) or len(A - B) < 2:
            continue
        per = permanent_submatrix(M, A, B)
        if per == 0:
            continue
        a, (b1, b2) = (B - A).min(), (A - B).to_list()[:2]
        r = choose_noncancelling_pair(M, A, B, a, b1, b2, abs(per))
        assert {r.i, r.j} <= {a, b1, b2} and r.i != r.j
        assert r.A_new == A.add(a)
        assert r.B_new == B.remove(a).add(r.i, r.j)
        assert 2 * abs(r.coefficient) >= abs(per)


def test_noncancelling_first_case_output():
    # on an all-ones matrix the first candidate (b1, a) already works
    M = np.ones((5, 5), dtype=int)
    A, B = IndexSet.of([1, 2, 4], 5), IndexSet.of([1, 3, 5], 5)
    r = choose_noncancelling_pair(M, A, B, 3, 2, 4, 6)
    assert (r.i, r.j) == (2, 3)
    assert r.A_new == IndexSet.of([1, 2, 3, 4], 5)
    assert r.B_new == IndexSet.of([1, 2, 3, 5], 5)
    assert r.coefficient == 12


def test_noncancelling_contracts():
    M = np.ones((5, 5), dtype=int)
    A, B = IndexSet.of([1, 2, 4], 5), IndexSet.of([1, 3, 5], 5)
    with pytest.raises(ContractViolation):
        choose_noncancelling_pair(M, A, B, 1, 2, 4, 6)  # a not in B - A
    with pytest.raises(ContractViolation):
        choose_noncancelling_pair(M, A, B, 3, 2, 2, 6)
    with pytest.raises(ContractViolation):
        choose_noncancelling_pair(M, A, B, 3, 2, 4, 7)  # block is not 7-heavy


def test_non_integer_entries_rejected():
    with pytest.raises(ContractViolation):
        permanent_naive([[1.5]])
    assert permanent_ryser([[2.0, 1.0], [1.0, 2.0]]) == 5


def test_naive_vectorized_and_loop_paths_agree():
    rng = np.random.default_rng(11)
    for n in range(1, 10):
        a = rng.integers(-3, 4, size=(n, n))
        assert permanent_naive(a) == oracle.per(a.tolist())
    huge = np.full((9, 9), 1 << 20, dtype=np.int64)  # too big for int64 products
    assert permanent_naive(huge) == math.factorial(9) * (1 << 180)
