"""Stochastic growth of heavy submatrices as rows and columns are exposed.

The building blocks are two one-step moves on an extended matrix ``M_n``:
:func:`augment_one_column` (add the new row and one old column, keeping
the threshold) and :func:`corner_step` (add the new row and column plus two
old columns, halving the threshold). On top of them sit three processes:

* :func:`weak_growth_run` tracks a family of heavy ``k x k`` blocks on rows
  ``{R+1, ..., k+R}`` and, case by case, either multiplies their number or
  raises their heaviness;
* :func:`iterative_cover_run` fills in a block until its columns contain ``{1..n}``;
* :func:`iterative_growth_run` trades heaviness for a longer column prefix.

:func:`grow_single_minor_run` chains them. All thresholds are exact; every
witness a process reports has had its permanent computed exactly.

Processes track explicit witnesses rather than the global minima the
analysis is phrased in terms of, so a reported ``Q`` (or family size) is
only ever an upper bound on the true ``Q`` (lower bound on the family size).
When the tracked witness is lost, ``Q`` becomes infinite and the run fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

from .errors import ContractViolation, TheoremViolation
from .matrix import (
    RADEMACHER,
    EntryDistribution,
    IndexSet,
    SeedSpec,
    SymmetricMatrixProcess,
    all_extension_rows,
    complement_disjoint,
    extend_symmetric,
    extend_with_row,
    sample_symmetric,
    submatrix,
)
from .permanent import (
    HeavinessThreshold,
    NoncancellingPair,
    as_threshold,
    choose_noncancelling_pair,
    double_expansion,
    permanent_glynn,
    permanent_submatrix,
    row_expansion,
)

INF = math.inf
DEFAULT_FAMILY_CAP = 1 << 16


def _rows(lo: int, hi: int, ground: int) -> IndexSet:
    return IndexSet.interval(lo, hi, ground)


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class HeavyRecord:
    A: IndexSet
    B: IndexSet
    per: int


@dataclass
class HeavyFamily:
    """Blocks ``M[A, B]`` claimed to be ``lam``-heavy, with their permanents.

    When ``complement_disjoint`` is set, the complements of all the row and
    column sets together (``2 * len(records)`` sets) must be pairwise disjoint.
    """

    records: list[HeavyRecord]
    lam: HeavinessThreshold
    complement_disjoint: bool = False
    ground: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def verify(self, M) -> bool:
        """Recompute every permanent with Glynn's formula and re-check all invariants."""
        for r in self.records:
            if len(r.A) != len(r.B):
                return False
            per = permanent_glynn(submatrix(M, r.A, r.B))
            if per != r.per or not self.lam.met_by(per):
                return False
        if self.complement_disjoint:
            ground = self.ground if self.ground is not None else _array_n(M)
            return complement_disjoint([s for r in self.records for s in (r.A, r.B)], ground)
        return True


def _array_n(M) -> int:
    return M.n if isinstance(M, SymmetricMatrixProcess) else len(M)


@dataclass(frozen=True)
class GrowthParams:
    """Explicit parameters for the growth processes.

    Only the fields a process uses are read. ``strict`` additionally
    enforces the asymptotic side conditions (``delta*n <= R <= 2*delta*n``
    and ``delta < 1/16``), which most desk-scale settings violate.
    """

    n: int
    R: int = 1
    L: int = 0
    S: int = 0
    T: int = 0
    delta: Fraction = Fraction(1, 20)
    eps: Fraction = Fraction(0)
    K: Fraction = Fraction(4)
    lam: HeavinessThreshold = HeavinessThreshold(1)
    dist: EntryDistribution = RADEMACHER
    family_cap: int = DEFAULT_FAMILY_CAP
    strict: bool = False

    def __post_init__(self):
        for name in ("delta", "eps", "K"):
            v = getattr(self, name)
            object.__setattr__(self, name, Fraction(repr(v)) if isinstance(v, float) else Fraction(v))
        object.__setattr__(self, "lam", as_threshold(self.lam))

    def check_weak(self) -> None:
        if not 0 < self.delta < Fraction(1, 2):
            raise ContractViolation("need 0 < delta < 1/2")
        if self.K <= 1:
            raise ContractViolation("need K > 1")
        if not 1 <= self.R < self.n:
            raise ContractViolation("need 1 <= R < n")
        if not self.dist.nontrivial:
            raise ContractViolation("entry law must have at least two support points")
        if self.strict:
            if not self.delta < Fraction(1, 16):
                raise ContractViolation("strict mode: need delta < 1/16")
            if not self.delta * self.n <= self.R <= 2 * self.delta * self.n:
                raise ContractViolation("strict mode: need delta*n <= R <= 2*delta*n")


# ---------------------------------------------------------------- one-step moves


def augment_one_column(M_ext: SymmetricMatrixProcess, A: IndexSet, B: IndexSet, I: IndexSet, lam, check: bool = True) -> int | None:
    """Smallest ``i`` in ``I`` with ``M_ext[A + {n}, B + {i}]`` ``lam``-heavy, or ``None``.

    ``n`` is the last (just exposed) index of ``M_ext``.
    """
    lam = as_threshold(lam)
    n = M_ext.n
    old = IndexSet.full(n - 1)
    if len(A) != len(B) or not (A.issubset(old) and B.issubset(old)):
        raise ContractViolation("need |A| = |B| and A, B inside {1..n-1}")
    if not I or not I.issubset(old) or not I.isdisjoint(B):
        raise ContractViolation("I must be a nonempty subset of {1..n-1} - B")
    if check and not lam.met_by(permanent_submatrix(M_ext, A, B)):
        raise ContractViolation(f"M[A,B] is not {lam}-heavy")
    rows = A.add(n)
    for i in I:
        if lam.met_by(permanent_submatrix(M_ext, rows, B.add(i))):
            return i
    return None


class CornerResult(NamedTuple):
    A: IndexSet
    B: IndexSet
    i: int
    j: int
    per: int


def corner_step(
    M_ext: SymmetricMatrixProcess, A: IndexSet, B: IndexSet, a: int, b1: int, b2: int, lam, pair: NoncancellingPair | None = None
) -> CornerResult | None:
    """Grow ``M[A,B]`` by two rows and columns at half the threshold, or return ``None``.

    The pair ``(i, j)`` is chosen on the pre-extension matrix (pass ``pair``
    to reuse one already chosen); the move succeeds when
    ``M_ext[A + {a, n}, (B - {a}) + {i, j, n}]`` is ``lam/2``-heavy.
    """
    lam = as_threshold(lam)
    n = M_ext.n
    if pair is None:
        pair = choose_noncancelling_pair(M_ext.prefix(n - 1), A, B, a, b1, b2, lam)
    A2 = A.add(a, n)
    B2 = B.remove(a).add(pair.i, pair.j, n)
    per = permanent_submatrix(M_ext, A2, B2)
    if (lam / 2).met_by(per):
        return CornerResult(A2, B2, pair.i, pair.j, per)
    return None


def augment_success_probability(
    M: SymmetricMatrixProcess, A: IndexSet, B: IndexSet, I: IndexSet, lam, method: str = "direct"
) -> Fraction:
    """Exact chance over the next exposure that :func:`augment_one_column` succeeds.

    ``method="expansion"`` expands each candidate block along the new row
    instead of recomputing its permanent for every extension.
    """
    lam = as_threshold(lam)
    total = Fraction(0)
    if method == "expansion":
        if not I or not I.isdisjoint(B):
            raise ContractViolation("I must be a nonempty subset of {1..n} - B")
        coeffs = [row_expansion(M, A, B.add(i)) for i in I]
        for x, _, p in all_extension_rows(M):
            if any(lam.met_by(sum(c * x[k - 1] for k, c in cf.items())) for cf in coeffs):
                total += p
        return total
    if method != "direct":
        raise ContractViolation(f"unknown method {method!r}")
    for x, z, p in all_extension_rows(M):
        M_ext = extend_with_row(M, x, z)
        if augment_one_column(M_ext, A, B, I.lifted(M_ext.n), lam, check=False) is not None:
            total += p
    return total


def corner_success_probability(
    M: SymmetricMatrixProcess, A: IndexSet, B: IndexSet, a: int, b1: int, b2: int, lam, method: str = "direct"
) -> Fraction:
    """Exact chance over the next exposure that :func:`corner_step` succeeds.

    ``method="direct"`` runs :func:`corner_step` on every extended matrix;
    ``"expansion"`` evaluates the double expansion of the target block instead.
    """
    lam = as_threshold(lam)
    pair = choose_noncancelling_pair(M, A, B, a, b1, b2, lam)
    total = Fraction(0)
    if method == "expansion":
        half = lam / 2
        polys = {z: double_expansion(M, pair.A_new, pair.B_new, z) for z, _ in M.dist.diag}
        for x, z, p in all_extension_rows(M):
            if half.met_by(polys[z].evaluate(x)):
                total += p
        return total
    if method != "direct":
        raise ContractViolation(f"unknown method {method!r}")
    A, B = A.lifted(M.n + 1), B.lifted(M.n + 1)
    for x, z, p in all_extension_rows(M):
        M_ext = extend_with_row(M, x, z)
        if corner_step(M_ext, A, B, a, b1, b2, lam, pair) is not None:
            total += p
    return total


# ---------------------------------------------------------------- weak growth


class StepClassification(NamedTuple):
    histogram: dict[int, int]  # q -> |S_q|
    branch: str  # "E'" or "E''"
    children: dict[int, int]  # child bitmask -> number of parents in the family
    low_mass: int  # sum_{q < K} q |S_q|
    high_mass: int  # sum_{q >= K} q |S_q|


def classify_growth_step(M: SymmetricMatrixProcess, family: Sequence[IndexSet], R: int, K) -> StepClassification:
    """Parent-count histogram of the children of ``family`` and the resulting branch.

    ``family`` holds ``N`` column sets of size ``k`` inside ``{1..k+R}``
    (``k + R = M.n``); a child adds one more column from that range.
    """
    K = Fraction(K)
    ground = M.n
    if not family:
        raise ContractViolation("empty family")
    k = len(family[0])
    if k + R != ground:
        raise ContractViolation(f"column sets of size {k} need a {k + R}x{k + R} matrix")
    full = IndexSet.full(ground)
    children: dict[int, int] = {}
    seen = set()
    for B in family:
        if len(B) != k or not B.issubset(full):
            raise ContractViolation(f"{B!r} is not a {k}-subset of 1..{ground}")
        if B.bits in seen:
            raise ContractViolation("family repeats a set")
        seen.add(B.bits)
        for j in full - B:
            c = B.bits | 1 << j
            children[c] = children.get(c, 0) + 1
    histogram: dict[int, int] = {}
    for q in children.values():
        histogram[q] = histogram.get(q, 0) + 1
    low = sum(q * s for q, s in histogram.items() if q < K)
    high = sum(q * s for q, s in histogram.items() if q >= K)
    if low + high != R * len(family):
        raise TheoremViolation("double counting of parents failed")
    branch = "E'" if 2 * low >= R * len(family) else "E''"
    return StepClassification(dict(sorted(histogram.items())), branch, children, low, high)


@dataclass(frozen=True)
class GrowthStep:
    k: int
    branch: str
    case: str  # "i", "ii", "iii" or "iv"
    histogram: dict[int, int]
    low_mass: int
    high_mass: int
    family_size: int
    heavy_children: int  # children that are lam_k-heavy
    boosted_children: int  # children that are lam_k^+-heavy
    truncated: bool


@dataclass
class GrowthTrace:
    """``N[k-1]``, ``lam[k-1]``, ``W[k-1]`` hold ``N_k``, ``lam_k``, ``W_k``.

    After an abort ``N`` and ``lam`` stop, while ``W`` continues frozen up to ``k = n - R``.
    """

    params: GrowthParams
    N: list[Fraction] = field(default_factory=list)
    lam: list[HeavinessThreshold] = field(default_factory=list)
    W: list[Fraction] = field(default_factory=list)
    steps: list[GrowthStep] = field(default_factory=list)
    aborted_at: int | None = None

    @property
    def cases(self) -> list[str]:
        return [s.case for s in self.steps]

    def check(self) -> None:
        """Re-derive every recurrence from the case labels; raise on any mismatch."""
        p = self.params
        N_plus = Fraction(p.R, 8) / p.K
        N_minus = Fraction(p.R, 8 * p.n)
        drop = {"i": 3, "ii": 1, "iii": 0, "iv": 0}
        if self.N[0] != 1 or self.lam[0] != HeavinessThreshold(1) or self.W[0] != 0:
            raise TheoremViolation("process must start from N = lam = 1, W = 0")
        frozen = False
        for idx, step in enumerate(self.steps):
            k = idx + 1
            if frozen:
                raise TheoremViolation("steps recorded after an abort")
            expected_W = self.W[k - 1] + (1 - p.delta) - drop[step.case]
            if self.W[k] != expected_W:
                raise TheoremViolation(f"W recurrence broken at k={k}")
            if step.case == "iv":
                frozen = True
                continue
            ratio = self.N[k] / self.N[k - 1]
            lam_next = self.lam[k]
            if step.case == "i" and (ratio != N_plus or lam_next != self.lam[k - 1]):
                raise TheoremViolation(f"case (i) arithmetic broken at k={k}")
            if step.case == "ii" and (ratio != N_minus or lam_next != self.lam[k - 1].times_power(p.K, Fraction(1, 2) - p.delta)):
                raise TheoremViolation(f"case (ii) arithmetic broken at k={k}")
            if step.case == "iii" and (ratio != N_minus or lam_next != self.lam[k - 1]):
                raise TheoremViolation(f"case (iii) arithmetic broken at k={k}")
            if self.N[k] > 2 ** (k + p.R):
                raise TheoremViolation(f"N_{k} exceeds the number of subsets")
        if self.aborted_at is not None and len(set(self.W[self.aborted_at:])) > 1:
            raise TheoremViolation("W moved after the abort")


@dataclass
class WeakGrowthResult:
    trace: GrowthTrace
    matrix: SymmetricMatrixProcess
    family: HeavyFamily | None  # witnesses for E(n-R, N_{n-R}, lam_{n-R}); None after an abort

    @property
    def aborted(self) -> bool:
        return self.trace.aborted_at is not None

    @property
    def final_lam(self) -> HeavinessThreshold | None:
        return None if self.aborted else self.trace.lam[-1]


def _ceil(x: Fraction) -> int:
    return max(1, math.ceil(x))


def weak_growth_run(params: GrowthParams, seed: SeedSpec) -> WeakGrowthResult:
    """Run the case (i)-(iv) process from ``k = 1`` to ``k = n - R``.

    The matrix starts as ``M_{R+1}`` and gains one exposure per step. The
    events ``E(k+1, N, lam)`` are decided on the children of the tracked
    family, keeping the lexicographically first ``ceil(N)`` heavy ones
    (at most ``family_cap``).
    """
    p = params
    p.check_weak()
    n, R, K = p.n, p.R, p.K
    lam_step = Fraction(1, 2) - p.delta
    M = sample_symmetric(R + 1, p.dist, seed)
    trace = GrowthTrace(p, [Fraction(1)], [HeavinessThreshold(1)], [Fraction(0)])
    # E(1, 1, 1): any nonzero entry of row R+1 will do; with a +-1 law every entry is
    row = _rows(R + 1, R + 1, R + 1)
    first = None
    for b in range(1, R + 2):
        per = M.entry(R + 1, b)
        if per != 0:
            first = HeavyRecord(row, IndexSet.of([b], R + 1), per)
            break
    if first is None:
        # no heavy 1x1 block: the process cannot start
        trace.aborted_at = 1
        trace.W.extend([Fraction(0)] * (n - R - 1))
        return WeakGrowthResult(trace, _expose_to(M, n, seed), None)
    family = [first]
    for k in range(1, n - R):
        N, lam, W = trace.N[-1], trace.lam[-1], trace.W[-1]
        cls = classify_growth_step(M, [r.B for r in family], R, K)
        M = extend_symmetric(M, seed)
        rows = _rows(R + 1, k + R + 1, M.n)
        lam_plus = lam.times_power(K, lam_step)
        heavy, boosted = [], []
        for bits in sorted(cls.children, key=lambda b: tuple(IndexSet(b, M.n))):
            B2 = IndexSet(bits, M.n)
            per = permanent_submatrix(M, rows, B2)
            if lam.met_by(per):
                heavy.append(HeavyRecord(rows, B2, per))
                if lam_plus.met_by(per):
                    boosted.append(HeavyRecord(rows, B2, per))
        N_plus = R * N / (8 * K)
        N_minus = R * N / (8 * n)
        if cls.branch == "E'" and len(heavy) >= _ceil(N_plus):
            case, N_next, lam_next, pool = "i", N_plus, lam, heavy
        elif cls.branch == "E''" and len(boosted) >= _ceil(N_minus):
            case, N_next, lam_next, pool = "ii", N_minus, lam_plus, boosted
        elif len(heavy) >= _ceil(N_minus):
            case, N_next, lam_next, pool = "iii", N_minus, lam, heavy
        else:
            case, pool = "iv", []
        want = _ceil(N_next) if case != "iv" else 0
        keep = min(want, p.family_cap)
        step = GrowthStep(k, cls.branch, case, cls.histogram, cls.low_mass, cls.high_mass,
                          len(family), len(heavy), len(boosted), want > p.family_cap)
        trace.steps.append(step)
        trace.W.append(W + (1 - p.delta) - {"i": 3, "ii": 1, "iii": 0, "iv": 0}[case])
        if case == "iv":
            trace.aborted_at = k + 1
            trace.W.extend([trace.W[-1]] * (n - R - 1 - k))
            return WeakGrowthResult(trace, _expose_to(M, n, seed), None)
        if want > p.family_cap:
            # a truncated family cannot witness E(k+1, N, lam): fewer than ceil(N) sets kept
            trace.aborted_at = k + 1
            trace.W.extend([trace.W[-1]] * (n - R - 1 - k))
            return WeakGrowthResult(trace, _expose_to(M, n, seed), None)
        family = pool[:keep]
        trace.N.append(N_next)
        trace.lam.append(lam_next)
    final = HeavyFamily(family, trace.lam[-1], ground=n)
    return WeakGrowthResult(trace, M, final)


def _expose_to(M: SymmetricMatrixProcess, n: int, seed: SeedSpec) -> SymmetricMatrixProcess:
    while M.n < n:
        M = extend_symmetric(M, seed)
    return M


# ---------------------------------------------------------------- cover and growth


@dataclass
class CoverTrace:
    """``Q[0]`` is the starting value; ``Q[t]`` follows exposure ``t``.

    ``variant`` is ``"cover"`` (target 0) or ``"growth"`` (target ``T``).
    """

    variant: str
    target: int
    Q: list[float] = field(default_factory=list)
    progress: list[bool] = field(default_factory=list)
    failure: list[bool] = field(default_factory=list)
    moves: list[str] = field(default_factory=list)  # "augment", "corner", "lost" or "none"

    def record(self, q_new, move: str) -> None:
        q_old = self.Q[-1]
        self.Q.append(q_new)
        self.failure.append(q_new > q_old)
        self.progress.append(q_new < q_old or q_new == q_old == self.target or q_old == INF)
        self.moves.append(move)

    def check(self) -> None:
        """Failure flags match increases of ``Q``; ``Q`` is otherwise non-increasing."""
        for t in range(1, len(self.Q)):
            up = self.Q[t] > self.Q[t - 1]
            if up != self.failure[t - 1]:
                raise TheoremViolation(f"failure flag wrong at step {t}")
            if self.Q[t] != INF and self.Q[t] < self.target:
                raise TheoremViolation(f"Q fell below its floor at step {t}")

    @property
    def succeeded(self) -> bool:
        return self.Q[-1] == self.target


@dataclass
class CoverResult:
    trace: CoverTrace
    matrix: SymmetricMatrixProcess
    B: IndexSet | None
    rows: IndexSet | None
    lam: HeavinessThreshold
    per: int | None

    @property
    def success(self) -> bool:
        return self.B is not None


def iterative_cover_run(M: SymmetricMatrixProcess, B: IndexSet, S: int, lam, seed: SeedSpec, steps: int | None = None) -> CoverResult:
    """Expose ``steps`` (default ``3S``) rows, keeping rows ``{S+1..m}`` heavy while ``B`` swallows ``{1..n}``.

    ``Q`` is ``|{1..n} - B'|`` for the tracked witness ``B'``; progress adds
    a missing column from ``{1..n}``, otherwise any column keeps ``Q`` level.
    """
    lam = as_threshold(lam)
    n = M.n
    if not 1 <= S < n or len(B) != n - S or not B.issubset(IndexSet.full(n)):
        raise ContractViolation("need 1 <= S < n and B a (n-S)-subset of {1..n}")
    rows = _rows(S + 1, n, n)
    per = permanent_submatrix(M, rows, B)
    if not lam.met_by(per):
        raise ContractViolation(f"starting block is not {lam}-heavy")
    base = IndexSet.full(n)
    steps = 3 * S if steps is None else steps
    trace = CoverTrace("cover", 0, [len(base - B)])
    Bw: IndexSet | None = B
    for _ in range(steps):
        M = extend_symmetric(M, seed)
        m = M.n
        if Bw is None:
            trace.record(INF, "none")
            continue
        A = _rows(S + 1, m - 1, m)
        Bw = Bw.lifted(m)
        i = augment_one_column(M, A, Bw, IndexSet.full(m - 1) - Bw, lam, check=False)
        if i is None:
            Bw = None
            trace.record(INF, "lost")
        else:
            Bw = Bw.add(i)
            trace.record(len(base.lifted(m) - Bw), "augment")
    trace.check()
    if Bw is None or trace.Q[-1] != 0:
        return CoverResult(trace, M, None, None, lam, None)
    rows = _rows(S + 1, M.n, M.n)
    return CoverResult(trace, M, Bw, rows, lam, permanent_submatrix(M, rows, Bw))


def _two_smallest(s: IndexSet) -> tuple[int, int]:
    it = iter(s)
    return next(it), next(it)


def iterative_growth_run(M: SymmetricMatrixProcess, B: IndexSet, S: int, T: int, lam, seed: SeedSpec, steps: int | None = None) -> CoverResult:
    """Expose ``steps`` (default ``5S``) rows, pushing the row start ``Q`` from ``S`` down to ``T``.

    The tracked witness is ``B'`` with ``{1..Q} <= B'`` and rows ``{Q+1..m}``,
    heavy at ``lam / 2**(S-Q)``. Progress is a :func:`corner_step` with
    ``a = Q`` and ``b1, b2`` the two smallest rows missing from ``B'``.
    """
    lam = as_threshold(lam)
    n = M.n
    if not 2 <= T < S < n:
        raise ContractViolation("need 2 <= T < S < n")
    if len(B) != n - S or not IndexSet.interval(1, S, n).issubset(B) or not B.issubset(IndexSet.full(n)):
        raise ContractViolation("need {1..S} <= B <= {1..n} with |B| = n - S")
    per = permanent_submatrix(M, _rows(S + 1, n, n), B)
    if not lam.met_by(per):
        raise ContractViolation(f"starting block is not {lam}-heavy")
    steps = 5 * S if steps is None else steps
    trace = CoverTrace("growth", T, [S])
    Bw: IndexSet | None = B
    Q = S
    for _ in range(steps):
        M = extend_symmetric(M, seed)
        m = M.n
        if Bw is None:
            trace.record(INF, "none")
            continue
        Bw = Bw.lifted(m)
        A = _rows(Q + 1, m - 1, m)
        level = lam / 2 ** (S - Q)
        if Q > T:
            b1, b2 = _two_smallest(A - Bw)
            res = corner_step(M, A, Bw, Q, b1, b2, level)
            if res is not None:
                Bw, Q = res.B, Q - 1
                trace.record(Q, "corner")
                continue
        i = augment_one_column(M, A, Bw, IndexSet.full(m - 1) - Bw, level, check=False)
        if i is None:
            Bw, Q = None, INF
            trace.record(INF, "lost")
        else:
            Bw = Bw.add(i)
            trace.record(Q, "augment")
    trace.check()
    final = lam / 2 ** (S - T)
    if Bw is None or Q != T:
        return CoverResult(trace, M, None, None, final, None)
    rows = _rows(T + 1, M.n, M.n)
    return CoverResult(trace, M, Bw, rows, final, permanent_submatrix(M, rows, Bw))


# ---------------------------------------------------------------- composition


@dataclass
class StageOutcome:
    name: str
    success: bool
    start_dim: int
    end_dim: int
    rows_in: IndexSet | None
    rows_out: IndexSet | None
    lam: HeavinessThreshold | None
    trace: object


@dataclass
class SingleMinorResult:
    success: bool
    B: IndexSet | None  # in the caller's labels
    rows: IndexSet | None  # {1..n} - X
    lam: HeavinessThreshold | None
    matrix: SymmetricMatrixProcess  # in the caller's labels
    stages: list[StageOutcome]
    failed_stage: str | None
    per: int | None = None


def default_stage_steps(R: int, L: int) -> tuple[int, int, int, int]:
    return (3 * R, 5 * R, 5 * L * L, 3 * L)


def grow_single_minor_run(
    n: int,
    X: IndexSet,
    Y: IndexSet,
    params: GrowthParams,
    seed: SeedSpec,
    stage_steps: tuple[int, int, int, int] | None = None,
) -> SingleMinorResult:
    """Weak growth on ``n'`` exposures, then cover, growth, growth and cover up to ``n``.

    On success ``M_n[{1..n} - X, B]`` is ``lam / 2**(R-L)``-heavy with
    ``|B| = n - L`` and ``{1..n} - Y <= B``, where ``lam`` is the heaviness
    the weak stage reached. ``stage_steps`` overrides the exposure budgets
    ``(3R, 5R, 5L^2, 3L)``; ``n' = n - sum(stage_steps)``.
    """
    R, L = params.R, params.L
    if L < 2:
        raise ContractViolation("need L >= 2 (the second growth stage uses T = L)")
    if not L * L < R:
        raise ContractViolation("need L^2 < R")
    if len(X) != L or len(Y) != 3 * L or not X.isdisjoint(Y):
        raise ContractViolation("need disjoint X, Y with |X| = L and |Y| = 3L")
    steps = default_stage_steps(R, L) if stage_steps is None else tuple(stage_steps)
    if steps[3] > 3 * L or steps[3] < 0 or min(steps) < 0:
        raise ContractViolation("the final cover may use at most 3L exposures")
    n0 = n - sum(steps)
    if n0 <= R:
        raise ContractViolation(f"n' = {n0} leaves no room for weak growth; pass smaller stage_steps")
    # canonical labels: X -> {1..L}, Y -> {n-3L+1..n}, the rest in order between them
    middle = [v for v in range(1, n + 1) if v not in X and v not in Y]
    to_actual = [*X, *middle, *Y]  # canonical label c maps to to_actual[c-1]

    stages: list[StageOutcome] = []
    weak = weak_growth_run(replace(params, n=n0), seed)
    rows0 = _rows(R + 1, n0, n0)
    ok = not weak.aborted and len(weak.family) > 0
    stages.append(StageOutcome("weak", ok, R + 1, n0, None, rows0 if ok else None, weak.final_lam, weak.trace))
    M = weak.matrix

    def fail(name):
        return SingleMinorResult(False, None, None, None, _relabel(_expose_to(M, n, seed), to_actual), stages, name)

    if not ok:
        return fail("weak")
    lam = weak.final_lam
    B = weak.family.records[0].B
    plan = [
        ("cover1", "cover", R, None, lam, steps[0]),
        ("growth1", "growth", R, L * L, lam, steps[1]),
        ("growth2", "growth", L * L, L, lam / 2 ** (R - L * L), steps[2]),
        ("cover2", "cover", L, None, lam / 2 ** (R - L), steps[3]),
    ]
    rows_in = rows0
    for name, kind, S, T, level, budget in plan:
        start = M.n
        if kind == "cover":
            res = iterative_cover_run(M, B, S, level, seed, steps=budget)
        else:
            if not S < M.n:
                raise ContractViolation(f"stage {name}: S={S} must be below the dimension {M.n}")
            res = iterative_growth_run(M, B, S, T, level, seed, steps=budget)
        M = res.matrix
        stages.append(StageOutcome(name, res.success, start, M.n, rows_in, res.rows, res.lam, res.trace))
        if not res.success:
            return fail(name)
        B, rows_in = res.B, res.rows
    assert M.n == n
    if not IndexSet.full(n - 3 * L).lifted(n).issubset(B) or len(B) != n - L:
        raise TheoremViolation("final column set has the wrong shape")
    final_lam = lam / 2 ** (R - L)
    rows = _rows(L + 1, n, n)
    per = permanent_submatrix(M, rows, B)
    if not final_lam.met_by(per):
        raise TheoremViolation("composed block lost its heaviness")
    actual = _relabel(M, to_actual)
    B_act = IndexSet.of((to_actual[c - 1] for c in B), n)
    rows_act = IndexSet.full(n) - X.lifted(n)
    return SingleMinorResult(True, B_act, rows_act, final_lam, actual, stages, None, per)


def _relabel(M: SymmetricMatrixProcess, to_actual: Sequence[int]) -> SymmetricMatrixProcess:
    """The matrix whose entry ``(to_actual[i], to_actual[j])`` is ``M``'s ``(i+1, j+1)``."""
    inverse = [0] * len(to_actual)
    for c, a in enumerate(to_actual, start=1):
        inverse[a - 1] = c
    return M.permuted(inverse)
