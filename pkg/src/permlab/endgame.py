"""One survival step for a complement-disjoint family of heavy blocks.

Given ``m`` complement-disjoint ``lam``-heavy blocks ``M_n[A, B]`` of size
``n - L``, expose row ``n+1`` and keep the blocks
``M_{n+1}[A* + {n+1}, B* + {n+1}]`` whose permanent is still at least
``tau = lam / (4 n^4)``. Each kept permanent is a quadratic polynomial
``P`` in the new row with a large pair coefficient, which is what makes
survival likely.

Besides running the step, this module records the classification that
drives the survival argument: ``easy`` indices (large matching in the
``tau``-coefficient graph), ``short`` ones (few variables in
``sigma``-large terms) and ``interesting`` ones, the good/bad variable
split, and the statistic ``T`` for interesting indices. None of the
probabilistic statements are asserted, only the deterministic counting
bounds.

Comparisons against ``m**(1/6)``, ``m**(1/3)`` and friends are exact: a
count ``c`` is "at least ``m**(1/k)``" iff ``c**k >= m``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .anticonc import CoefficientGraph, greedy_vertex_cover, matching_number
from .errors import CapacityError, ContractViolation, TheoremViolation
from .growth import HeavyFamily, HeavyRecord
from .matrix import (
    IndexSet,
    SeedSpec,
    SymmetricMatrixProcess,
    complement_disjoint,
    extend_symmetric,
    sample_symmetric,
)
from .permanent import (
    HeavinessThreshold,
    as_threshold,
    choose_noncancelling_pair,
    double_expansion,
    minor_permanent,
    permanent_submatrix,
)
from .polynomial import QuadraticPolynomial

EASY, SHORT, INTERESTING = "easy", "short", "interesting"
MAX_FAMILY_CANDIDATES = 200_000


def _root_at_least(count: int, m: int, k: int, factor: int = 1) -> bool:
    """``count >= factor * m**(1/k)``, exactly."""
    return count ** k >= factor ** k * m


def _root_at_most(count: int, m: int, k: int, factor: int = 1) -> bool:
    return count ** k <= factor ** k * m


@dataclass(frozen=True)
class Quadruple:
    A_star: IndexSet
    B_star: IndexSet
    i: int
    j: int
    coefficient: int  # of x_i x_j in per M_{n+1}[A* + {n+1}, B* + {n+1}]


def _check_family(M: SymmetricMatrixProcess, family: HeavyFamily, L: int, lam: HeavinessThreshold) -> None:
    n = M.n
    if not family.records:
        raise ContractViolation("empty family")
    for r in family.records:
        if len(r.A) != n - L or len(r.B) != n - L:
            raise ContractViolation(f"expected sets of size {n - L}, got {len(r.A)} and {len(r.B)}")
        per = permanent_submatrix(M, r.A, r.B)
        if per != r.per:
            raise ContractViolation(f"record permanent {r.per} does not match {per}")
        if not lam.met_by(per):
            raise ContractViolation(f"block with permanent {per} is not {lam}-heavy")
    if not complement_disjoint([s for r in family.records for s in (r.A, r.B)], n):
        raise ContractViolation("family is not complement-disjoint")


def build_quadruples(M: SymmetricMatrixProcess, family: HeavyFamily, L: int | None = None, lam=None) -> list[Quadruple]:
    """Enlarge each block by one row and column and pick a pair ``(i, j)`` with a big coefficient.

    For ``L = 1`` both sets become ``{1..n}`` and ``i``, ``j`` are the
    missing row and column. For ``L >= 2`` the pair comes from
    :func:`~permlab.permanent.choose_noncancelling_pair` with ``a`` the
    smallest element of ``B - A`` and ``b, b'`` the two smallest of ``A - B``.
    """
    n = M.n
    lam = as_threshold(family.lam if lam is None else lam)
    if L is None:
        L = n - len(family.records[0].A) if family.records else 1
    if L < 1:
        raise ContractViolation("L must be at least 1")
    _check_family(M, family, L, lam)
    full = IndexSet.full(n)
    quads = []
    for r in family.records:
        if L == 1:
            (i,) = full - r.A
            (j,) = full - r.B
            coef = minor_permanent(M, full, full, i, j) + minor_permanent(M, full, full, j, i)
            quads.append(Quadruple(full, full, i, j, coef))
        else:
            a = (r.B - r.A).min()
            b1, b2 = (r.A - r.B).to_list()[:2]
            pair = choose_noncancelling_pair(M, r.A, r.B, a, b1, b2, lam)
            quads.append(Quadruple(pair.A_new, pair.B_new, pair.i, pair.j, pair.coefficient))
    _check_quadruples(quads, n, L, lam)
    return quads


def _check_quadruples(quads: Sequence[Quadruple], n: int, L: int, lam: HeavinessThreshold) -> None:
    half = lam / 2
    seen: list[int] = []
    for q in quads:
        if len(q.A_star) != n - L + 1 or len(q.B_star) != n - L + 1:
            raise TheoremViolation(f"quadruple sets have sizes {len(q.A_star)}, {len(q.B_star)}")
        both = q.A_star & q.B_star
        if q.i == q.j or q.i not in both or q.j not in both:
            raise TheoremViolation(f"pair ({q.i},{q.j}) is not inside A* and B*")
        if not half.met_by(q.coefficient):
            raise TheoremViolation(f"pair coefficient {q.coefficient} is below {half}")
        seen += [q.i, q.j]
    if len(set(seen)) != len(seen):
        raise TheoremViolation("pair indices repeat across the family")
    if not complement_disjoint([s for q in quads for s in (q.A_star, q.B_star)], n):
        raise TheoremViolation("enlarged sets are not complement-disjoint")


# ---------------------------------------------------------------- state


@dataclass
class EndgameState:
    """Polynomials ``P_l`` in the pair variables and everything derived from them.

    ``polys[l]`` is ``P_l`` after the variables outside ``I`` are fixed.
    ``assignment`` holds the realized values of the ``I`` variables (needed
    to fix the bad ones); it may be ``None`` when there are none.
    """

    n: int
    lam: HeavinessThreshold
    I: IndexSet
    polys: list[QuadraticPolynomial]
    assignment: dict[int, int] | None = None
    sigma: HeavinessThreshold = field(init=False)
    tau: HeavinessThreshold = field(init=False)
    graphs: list[CoefficientGraph] = field(default_factory=list)
    nu: list[int] = field(default_factory=list)
    covers: list[IndexSet | None] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    bad: IndexSet | None = None
    good_polys: list[QuadraticPolynomial] = field(default_factory=list)
    sigma_vars: list[IndexSet] = field(default_factory=list)
    short_popular: IndexSet | None = None
    t_counts: dict[int, int] = field(default_factory=dict)
    reduced_values: dict[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        self.lam = as_threshold(self.lam)
        self.sigma = self.lam / (4 * self.n ** 2)
        self.tau = self.lam / (4 * self.n ** 4)

    @property
    def m(self) -> int:
        return len(self.polys)

    @property
    def good(self) -> IndexSet:
        return self.I - self.bad

    @property
    def label_histogram(self) -> dict[str, int]:
        c = Counter(self.labels)
        return {k: c.get(k, 0) for k in (EASY, SHORT, INTERESTING)}

    @property
    def X(self) -> int:
        """Interesting indices with ``T >= m**(1/6)``."""
        return sum(1 for t in self.t_counts.values() if _root_at_least(t, self.m, 6))

    @property
    def Y(self) -> int:
        """Those among them whose reduced polynomial is below ``sigma`` at the realized row."""
        return sum(
            1 for l, t in self.t_counts.items()
            if _root_at_least(t, self.m, 6) and self.sigma.compare(self.reduced_values[l]) < 0
        )

    def check(self) -> None:
        """Re-derive every label and counting bound; raise on any inconsistency."""
        m, n = self.m, self.n
        if self.sigma != self.lam / (4 * n ** 2) or self.tau != self.lam / (4 * n ** 4):
            raise TheoremViolation("sigma/tau drifted from lam/(4n^2), lam/(4n^4)")
        if len(self.labels) != m:
            raise TheoremViolation("state is not classified")
        load: Counter = Counter()
        for l in range(m):
            G, nu, S = self.graphs[l], self.nu[l], self.covers[l]
            easy = _root_at_least(nu, m, 6)
            if easy != (self.labels[l] == EASY):
                raise TheoremViolation(f"index {l}: easy label disagrees with nu={nu}")
            if easy:
                continue
            if any(i not in S and j not in S for i, j in G.edges):
                raise TheoremViolation(f"index {l}: cover misses an edge")
            if len(S) > 2 * nu or not _root_at_most(len(S), m, 6, 2):
                raise TheoremViolation(f"index {l}: cover of size {len(S)} too large")
            load.update(S)
        bad = {i for i, c in load.items() if _root_at_least(c, m, 3)}
        if bad != set(self.bad):
            raise TheoremViolation("bad variables disagree with the cover loads")
        if len(bad) ** 6 > 64 * m ** 5:
            raise TheoremViolation(f"{len(bad)} bad variables exceeds 2 m^(5/6)")
        for l in range(m):
            if self.labels[l] == EASY:
                continue
            short = _root_at_most(len(self.sigma_vars[l]), m, 6, 6)
            if short != (self.labels[l] == SHORT):
                raise TheoremViolation(f"index {l}: short label disagrees with the count")
        if len(self.short_popular) ** 6 > 6 ** 6 * m ** 5:
            raise TheoremViolation("too many short-popular variables")


def _tau_graph(P: QuadraticPolynomial, I: IndexSet, tau: HeavinessThreshold) -> CoefficientGraph:
    edges = frozenset(k for k, c in P.quadratic.items() if tau.met_by(c))
    return CoefficientGraph(tuple(I), edges, tau)


def _sigma_variables(P: QuadraticPolynomial, sigma: HeavinessThreshold, ground: int) -> IndexSet:
    vs = {i for i, c in P.linear.items() if sigma.met_by(c)}
    for (i, j), c in P.quadratic.items():
        if sigma.met_by(c):
            vs |= {i, j}
    return IndexSet.of(vs, ground)


def classify_indices(state: EndgameState) -> EndgameState:
    """Label every index easy, short or interesting and split the variables into good and bad."""
    m, n = state.m, state.n
    state.graphs = [_tau_graph(P, state.I, state.tau) for P in state.polys]
    state.nu = [matching_number(G) for G in state.graphs]
    state.covers = []
    state.labels = []
    load: Counter = Counter()
    for G, nu in zip(state.graphs, state.nu):
        if _root_at_least(nu, m, 6):
            state.covers.append(None)
            state.labels.append(EASY)
            continue
        S = greedy_vertex_cover(G).lifted(n) if G.vertices else IndexSet.empty(n)
        state.covers.append(S)
        state.labels.append("")
        load.update(S)
    state.bad = IndexSet.of([i for i, c in load.items() if _root_at_least(c, m, 3)], n)
    if state.bad and state.assignment is None:
        raise ContractViolation("bad variables exist; their realized values are needed")
    bad_values = {i: state.assignment[i] for i in state.bad}
    state.good_polys = [P.restrict(bad_values) for P in state.polys]
    state.sigma_vars = [_sigma_variables(P, state.sigma, n) for P in state.good_polys]
    popular: Counter = Counter()
    for l in range(m):
        if state.labels[l] == EASY:
            continue
        if _root_at_most(len(state.sigma_vars[l]), m, 6, 6):
            state.labels[l] = SHORT
            popular.update(state.sigma_vars[l])
        else:
            state.labels[l] = INTERESTING
    state.short_popular = IndexSet.of([i for i, c in popular.items() if _root_at_least(c, m, 3)], n)
    return state


def t_ell_count(P: QuadraticPolynomial, S: IndexSet, s_values: Mapping[int, int], sigma, tau, n: int):
    """Reduce ``P`` to ``P*`` and count the ``sigma``-large coefficients once ``S`` is fixed.

    ``P*`` drops every pair term with both variables outside ``S``; each such
    coefficient must be below ``tau``. Returns ``(T, Q, P_star)`` where ``Q``
    is ``P*`` with the ``S`` variables set to ``s_values`` (a linear form).
    """
    sigma, tau = as_threshold(sigma), as_threshold(tau)
    P_star = P.copy()
    dropped = Fraction(0)
    for key, c in P.quadratic.items():
        if key[0] in S or key[1] in S:
            continue
        if tau.compare(c) >= 0:
            raise TheoremViolation(f"dropped coefficient {c} of x_{key[0]} x_{key[1]} is not below {tau}")
        del P_star.quadratic[key]
        dropped += abs(Fraction(c))
    pairs = n * (n - 1) // 2
    if dropped and (pairs == 0 or (tau * pairs).compare(dropped) > 0):
        raise TheoremViolation(f"dropped mass {dropped} exceeds tau n(n-1)/2")
    needed = set(S) & set(P.variables())
    if not needed <= set(s_values):
        raise ContractViolation(f"values missing for {sorted(needed - set(s_values))}")
    Q = P_star.restrict({i: s_values[i] for i in needed})
    if not Q.is_linear:
        raise TheoremViolation("reduced polynomial is not linear after fixing the cover")
    T = sum(1 for c in Q.linear.values() if sigma.met_by(c))
    return T, Q, P_star


def t_ell_statistics(state: EndgameState, ell: int, s_values: Mapping[int, int]) -> int:
    """``T`` for an interesting index, given the values of its cover variables."""
    if state.labels[ell] != INTERESTING:
        raise ContractViolation(f"index {ell} is {state.labels[ell]!r}, not interesting")
    S = state.covers[ell] - state.bad
    T, _, _ = t_ell_count(state.good_polys[ell], S, s_values, state.sigma, state.tau, state.n)
    return T


# ---------------------------------------------------------------- one step


@dataclass
class EndgameResult:
    matrix: SymmetricMatrixProcess  # M_{n+1}
    quadruples: list[Quadruple]
    state: EndgameState
    values: list[int]  # P_l at the realized row
    qualifying: list[int]  # indices with |P_l - offset| >= tau
    needed: int  # ceil(m / 36)
    family: HeavyFamily | None

    @property
    def success(self) -> bool:
        return len(self.qualifying) >= self.needed


def _check_rademacher(M: SymmetricMatrixProcess) -> None:
    if sorted(v for v, _ in M.dist.off_diag) != [-1, 1]:
        raise ContractViolation("the endgame needs ±1 off-diagonal entries (squares must equal 1)")


def endgame_step_run(
    M: SymmetricMatrixProcess,
    family: HeavyFamily,
    lam=None,
    seed: SeedSpec = SeedSpec(0),
    L: int | None = None,
    offset: int = 0,
) -> EndgameResult:
    """Expose row ``n+1`` and keep the first ``ceil(m/36)`` blocks that stay ``tau``-heavy.

    ``offset`` shifts every ``P_l`` by a constant before the survival test
    (for small-ball questions around a nonzero value); a shifted run reports
    its counts but never returns a family.
    """
    _check_rademacher(M)
    n, m = M.n, len(family)
    lam = as_threshold(family.lam if lam is None else lam)
    quads = build_quadruples(M, family, L, lam)
    M1 = extend_symmetric(M, seed)
    row = [int(v) for v in M1.entries[n, :n]]
    z = int(M1.entries[n, n])

    I = IndexSet.of([k for q in quads for k in (q.i, q.j)], n)
    outside = {k: row[k - 1] for k in range(1, n + 1) if k not in I}
    assignment = {k: row[k - 1] for k in I}
    polys, values = [], []
    expansions: dict = {}  # for L = 1 every block is the whole matrix
    for q in quads:
        key = (q.A_star, q.B_star)
        if key not in expansions:
            expansions[key] = double_expansion(M, q.A_star, q.B_star, z)
        full = expansions[key]
        if full.coefficient(q.i, q.j) != q.coefficient:
            raise TheoremViolation(f"expansion coefficient of x_{q.i} x_{q.j} disagrees with the quadruple")
        P = full.restrict(outside)
        direct = permanent_submatrix(M1, q.A_star.lifted(n + 1).add(n + 1), q.B_star.lifted(n + 1).add(n + 1))
        value = P.evaluate(assignment)
        if value != direct or full.evaluate(row) != direct:
            raise TheoremViolation(f"P evaluates to {value} but the extended block has permanent {direct}")
        polys.append(P.shifted(offset) if offset else P)
        values.append(direct)

    state = classify_indices(EndgameState(n, lam, I, polys, assignment))
    for l, label in enumerate(state.labels):
        if label != INTERESTING:
            continue
        S = state.covers[l] - state.bad
        T, _, P_star = t_ell_count(state.good_polys[l], S, assignment, state.sigma, state.tau, n)
        state.t_counts[l] = T
        state.reduced_values[l] = Fraction(P_star.evaluate(assignment))
    state.check()

    tau = state.tau
    qualifying = [l for l, v in enumerate(values) if tau.met_by(v - offset)]
    needed = -(-m // 36)
    out = None
    if len(qualifying) >= needed and not offset:
        records = []
        for l in qualifying[:needed]:
            q = quads[l]
            A1 = q.A_star.lifted(n + 1).add(n + 1)
            B1 = q.B_star.lifted(n + 1).add(n + 1)
            records.append(HeavyRecord(A1, B1, values[l]))
        out = HeavyFamily(records, tau, complement_disjoint=True, ground=n + 1)
        if not out.verify(M1):
            raise TheoremViolation("surviving family fails re-verification")
    return EndgameResult(M1, quads, state, values, qualifying, needed, out)


# ---------------------------------------------------------------- families


def find_complement_disjoint_family(M, L: int, m: int, lam=None) -> HeavyFamily | None:
    """Greedily pick ``m`` heavy blocks of size ``n - L`` with pairwise disjoint complements.

    Every pair of disjoint ``L``-sets ``(X, Y)`` gives the block
    ``M[{1..n} - X, {1..n} - Y]``; candidates are scanned by decreasing
    ``|per|`` (ties by ``X``, then ``Y``) and taken while their complements
    stay disjoint from those already chosen. Zero permanents never qualify.
    Without ``lam`` the family threshold is the smallest ``|per|`` chosen.
    Returns ``None`` when fewer than ``m`` blocks can be found.
    """
    n = M.n if isinstance(M, SymmetricMatrixProcess) else len(M)
    if L < 1 or 2 * L > n or m < 1:
        raise ContractViolation("need 1 <= L <= n/2 and m >= 1")
    if 2 * L * m > n:
        return None
    count = math.comb(n, L) * math.comb(n - L, L)
    if count > MAX_FAMILY_CANDIDATES:
        raise CapacityError(f"{count} candidate blocks exceeds {MAX_FAMILY_CANDIDATES}")
    thr = None if lam is None else as_threshold(lam)
    full = IndexSet.full(n)
    cands = []
    for X in itertools.combinations(range(1, n + 1), L):
        rest = [k for k in range(1, n + 1) if k not in X]
        for Y in itertools.combinations(rest, L):
            A, B = full.remove(*X), full.remove(*Y)
            per = permanent_submatrix(M, A, B)
            if per and (thr is None or thr.met_by(per)):
                cands.append((-abs(per), X, Y, A, B, per))
    cands.sort(key=lambda c: c[:3])
    used: set[int] = set()
    records = []
    for _, X, Y, A, B, per in cands:
        if used.isdisjoint(X) and used.isdisjoint(Y):
            used.update(X + Y)
            records.append(HeavyRecord(A, B, per))
            if len(records) == m:
                break
    if len(records) < m:
        return None
    if thr is None:
        thr = HeavinessThreshold(min(abs(r.per) for r in records))
    return HeavyFamily(records, thr, complement_disjoint=True, ground=n)


@dataclass
class EndgameTrial:
    seed: SeedSpec
    result: EndgameResult | None  # None when no family was found

    @property
    def success(self) -> bool:
        return self.result is not None and self.result.success


def endgame_trial(n: int, L: int, m: int, seed: SeedSpec, lam=None, offset: int = 0) -> EndgameTrial:
    """Sample ``M_n``, search for a family and run one endgame step on the coupled next row."""
    M = sample_symmetric(n, seed=seed)
    family = find_complement_disjoint_family(M, L, m, lam)
    if family is None:
        return EndgameTrial(seed, None)
    return EndgameTrial(seed, endgame_step_run(M, family, seed=seed, L=L, offset=offset))
