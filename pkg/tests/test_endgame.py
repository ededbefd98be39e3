import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permlab.anticonc import coefficient_graph, greedy_vertex_cover
from permlab.endgame import (
    EASY,
    INTERESTING,
    SHORT,
    EndgameState,
    build_quadruples,
    classify_indices,
    endgame_step_run,
    endgame_trial,
    find_complement_disjoint_family,
    t_ell_count,
    t_ell_statistics,
)
from permlab.errors import ContractViolation, TheoremViolation
from permlab.growth import HeavyFamily, HeavyRecord
from permlab.matrix import IndexSet, SeedSpec, SymmetricMatrixProcess, complement_disjoint, sample_symmetric
from permlab.permanent import HeavinessThreshold, double_expansion, permanent_submatrix
from permlab.polynomial import QuadraticPolynomial as Q

F = Fraction


def record(M, A, B):
    n = M.n
    A, B = IndexSet.of(A, n), IndexSet.of(B, n)
    return HeavyRecord(A, B, permanent_submatrix(M, A, B))


def heavy_matrix(n, A, B, start=0):
    for s in itertools.count(start):
        M = sample_symmetric(n, seed=SeedSpec(s))
        if permanent_submatrix(M, IndexSet.of(A, n), IndexSet.of(B, n)):
            return M


# -- quadruples


def test_l1_quadruple_doubles_the_permanent():
    A, B = [1, 2, 3], [1, 2, 4]
    M = heavy_matrix(4, A, B)
    r = record(M, A, B)
    fam = HeavyFamily([r], HeavinessThreshold(abs(r.per)))
    (q,) = build_quadruples(M, fam, 1)
    assert (q.i, q.j) == (4, 3)
    assert q.A_star == q.B_star == IndexSet.full(4)
    assert q.coefficient == 2 * r.per


def test_l2_quadruples_have_large_coefficients():
    rng = random.Random(0)
    checked = 0
    for s in rng.sample(range(1 << 20), 200):
        M = sample_symmetric(6, seed=SeedSpec(s))
        fam = find_complement_disjoint_family(M, 2, 1)
        if fam is None:
            continue
        (rec,) = fam.records
        if len(rec.A - rec.B) < 2:
            continue
        (q,) = build_quadruples(M, fam, 2)
        assert 2 * abs(q.coefficient) >= abs(rec.per)
        for z in (-1, 1):
            assert double_expansion(M, q.A_star, q.B_star, z).coefficient(q.i, q.j) == q.coefficient
        assert len(q.A_star) == len(q.B_star) == 5
        checked += 1
    assert checked > 100


def test_pairs_are_distinct_across_records():
    M = sample_symmetric(8, seed=SeedSpec(3))
    fam = find_complement_disjoint_family(M, 1, 2)
    q1, q2 = build_quadruples(M, fam, 1)
    assert not {q1.i, q1.j} & {q2.i, q2.j}


def test_quadruple_contracts():
    full = IndexSet.full(6)
    for s in itertools.count():
        M = sample_symmetric(6, seed=SeedSpec(s))
        r1 = record(M, full.remove(1), full.remove(2))
        r2 = record(M, full.remove(1), full.remove(3))  # shares a missing row with r1
        if r1.per and r2.per:
            break
    lam = HeavinessThreshold(Fraction(1, 10**6))
    with pytest.raises(ContractViolation):
        build_quadruples(M, HeavyFamily([r1, r2], lam), 1)
    with pytest.raises(ContractViolation):
        build_quadruples(M, HeavyFamily([r1], lam), 2)  # wrong size for L = 2
    bogus = HeavyRecord(r1.A, r1.B, r1.per + 1)
    with pytest.raises(ContractViolation):
        build_quadruples(M, HeavyFamily([bogus], lam), 1)


# -- family search


def test_family_search():
    M = sample_symmetric(12, seed=SeedSpec(7))
    fam = find_complement_disjoint_family(M, 1, 4)
    assert len(fam) == 4 and fam.verify(M)
    assert complement_disjoint([s for r in fam.records for s in (r.A, r.B)], 12)
    assert fam.lam == HeavinessThreshold(min(abs(r.per) for r in fam.records))
    pers = [abs(r.per) for r in fam.records]
    assert pers == sorted(pers, reverse=True)
    assert find_complement_disjoint_family(M, 2, 4) is None  # 2Lm > n
    with pytest.raises(ContractViolation):
        find_complement_disjoint_family(M, 7, 1)


# -- classification


def state_from(polys, n, lam=1, assignment=None):
    I = IndexSet.full(n)
    return classify_indices(EndgameState(n, HeavinessThreshold(lam), I, polys, assignment))


def test_no_quadratic_terms_means_nobody_easy():
    n = 4  # sigma = 1/64, tau = 1/1024
    polys = [Q.linear_form([1, 0, 0, 0]), Q.linear_form([0, 1, 1, 0])]
    st_ = state_from(polys, n)
    assert st_.nu == [0, 0]
    assert st_.labels == [SHORT, SHORT]
    st_.check()


def test_single_index_is_consistent():
    P = Q(4, 0, {}, {(1, 2): 1})
    st_ = state_from([P], 4)
    assert st_.labels == [EASY]  # nu = 1 >= 1^(1/6)
    st_.check()


def test_interesting_index_and_t_count():
    # m = 2: "short" means at most 6 * 2^(1/6) ~ 6.7 sigma-large variables, so 8 makes it interesting
    n = 10
    lam = F(1)
    sigma = lam / (4 * n**2)
    big = Q.linear_form([sigma] * 8 + [0, 0])
    small = Q.linear_form([sigma] + [0] * 9)
    st_ = state_from([big, small], n, lam, assignment={k: 1 for k in range(1, n + 1)})
    assert st_.labels == [INTERESTING, SHORT]
    assert t_ell_statistics(st_, 0, {}) == 8
    with pytest.raises(ContractViolation):
        t_ell_statistics(st_, 1, {})
    st_.check()


def test_check_catches_bad_labels():
    st_ = state_from([Q.linear_form([1, 0, 0, 0]), Q(4, 0, {}, {(1, 2): 1})], 4)
    st_.check()
    st_.labels[0] = EASY
    with pytest.raises(TheoremViolation):
        st_.check()


@st.composite
def random_state(draw):
    n = draw(st.integers(3, 8))
    m = draw(st.integers(1, 6))
    lam = F(4 * n**4)  # tau = 1, sigma = n^2
    polys = []
    for _ in range(m):
        P = Q(n)
        for i in range(1, n + 1):
            P.add_term(draw(st.sampled_from([0, 1, n * n, 3 * n * n])), i)
        for i, j in itertools.combinations(range(1, n + 1), 2):
            P.add_term(draw(st.sampled_from([0, 0, F(1, 2), 1, 2, n * n])), i, j)
        polys.append(P)
    values = {k: draw(st.sampled_from([-1, 1])) for k in range(1, n + 1)}
    return n, lam, polys, values


@given(random_state())
@settings(max_examples=80, deadline=None)
def test_random_states_obey_the_counting_bounds(data):
    n, lam, polys, values = data
    st_ = state_from(polys, n, lam, values)
    st_.check()
    for l, label in enumerate(st_.labels):
        if label == EASY:
            continue
        S, G = st_.covers[l], st_.graphs[l]
        assert all(i in S or j in S for i, j in G.edges)
        assert len(S) <= 2 * st_.nu[l]


# -- T counts


def test_t_count_examples():
    n, sigma, tau = 4, F(1, 64), F(1, 1024)
    P = Q(n, 0, {1: 1, 2: 1}, {(1, 2): 1, (3, 4): F(1, 2048)})
    T, Qr, _ = t_ell_count(P, IndexSet.full(n), {1: 1, 2: -1, 3: 1, 4: 1}, sigma, tau, n)
    assert T == 0 and not Qr.linear
    P = Q(n, 0, {1: sigma}, {(2, 3): F(1, 4096)})
    T, Qr, Pstar = t_ell_count(P, IndexSet.empty(n), {}, sigma, tau, n)
    assert T == 1 and Pstar.quadratic == {}
    with pytest.raises(TheoremViolation):
        t_ell_count(Q(n, 0, {}, {(2, 3): tau}), IndexSet.empty(n), {}, sigma, tau, n)


@given(random_state())
@settings(max_examples=80, deadline=None)
def test_t_count_matches_raw_recount(data):
    n, lam, polys, values = data
    sigma, tau = lam / (4 * n**2), lam / (4 * n**4)
    P = polys[0]
    S = greedy_vertex_cover(coefficient_graph(P, tau)).lifted(n)
    T, _, _ = t_ell_count(P, S, values, sigma, tau, n)
    raw = 0
    for k in range(1, n + 1):
        if k in S:
            continue
        c = P.linear.get(k, 0) + sum(P.coefficient(k, s) * values[s] for s in S)
        raw += abs(c) >= sigma
    assert T == raw


# -- one step


def test_endgame_step_at_desk_scale():
    outcomes = []
    for s in range(25):
        trial = endgame_trial(12, 1, 4, SeedSpec(s))
        res = trial.result
        assert res is not None
        assert res.state.sigma == res.state.lam / (4 * 144) and res.state.tau == res.state.lam / (4 * 12**4)
        assert res.needed == 1
        for l, q in enumerate(res.quadruples):
            A1, B1 = q.A_star.lifted(13).add(13), q.B_star.lifted(13).add(13)
            assert res.values[l] == permanent_submatrix(res.matrix, A1, B1)
        if trial.success:
            fam = res.family
            assert fam.verify(res.matrix) and fam.lam == res.state.tau
            assert all(len(r.A) == 12 - 1 + 2 and r.A.ground_size == 13 for r in fam.records)
        outcomes.append(trial.success)
    assert any(outcomes)


def test_endgame_step_with_l2():
    seen = 0
    for s in range(6):
        trial = endgame_trial(10, 2, 2, SeedSpec(s))
        if trial.result is None:
            continue
        seen += 1
        for q in trial.result.quadruples:
            assert len(q.A_star) == 9
        if trial.success:
            assert trial.result.family.verify(trial.result.matrix)
    assert seen


def test_offset_runs_report_but_return_nothing():
    trial = endgame_trial(12, 1, 4, SeedSpec(1), offset=3)
    assert trial.result.family is None
    tau = trial.result.state.tau
    assert trial.result.qualifying == [l for l, v in enumerate(trial.result.values) if tau.met_by(v - 3)]


def test_endgame_needs_sign_entries():
    from permlab.matrix import EntryDistribution

    d = EntryDistribution(((-1, F(1, 2)), (2, F(1, 2))), ((1, 1),))
    M = sample_symmetric(6, d, SeedSpec(0))
    fam = HeavyFamily([], HeavinessThreshold(1))
    with pytest.raises(ContractViolation):
        endgame_step_run(M, fam)


def test_step_is_reproducible():
    a = endgame_trial(12, 1, 4, SeedSpec(9)).result
    b = endgame_trial(12, 1, 4, SeedSpec(9)).result
    assert a.values == b.values and a.qualifying == b.qualifying and a.state.labels == b.state.labels
    assert isinstance(a.matrix, SymmetricMatrixProcess) and np.array_equal(a.matrix.entries, b.matrix.entries)
