"""Symmetric random matrices, their row-by-row growth, and index sets.

Indices are 1-based throughout, matching the way submatrices are written
(rows ``{R+1, ..., n}`` and so on). A matrix of dimension ``n`` is grown one
exposure step at a time: step ``k`` draws row/column ``k`` from a generator
keyed by ``(root_seed, stream_id, k)``, so ``M_k`` is always the top-left
block of ``M_{k+1}`` and ``sample_symmetric(8, ...)`` equals
``sample_symmetric(3, ...)`` extended five times with the same seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, ContractViolation

FAST_MODE_MAX_N = 63


@dataclass(frozen=True)
class IndexSet:
    """A subset of ``{1, ..., ground_size}`` stored as a bitmask (bit i <-> index i)."""

    bits: int
    ground_size: int

    def __post_init__(self):
        if self.bits < 0 or self.bits & 1:
            raise ContractViolation("index sets hold positive indices only")
        if self.bits >> (self.ground_size + 1):
            raise ContractViolation(
                f"index {self.bits.bit_length() - 1} outside ground set of size {self.ground_size}"
            )

    @classmethod
    def of(cls, elements: Iterable[int], ground_size: int) -> IndexSet:
        bits = 0
        for e in elements:
            e = int(e)
            if not 1 <= e <= ground_size:
                raise ContractViolation(f"index {e} outside 1..{ground_size}")
            bits |= 1 << e
        return cls(bits, ground_size)

    @classmethod
    def full(cls, n: int) -> IndexSet:
        return cls(((1 << n) - 1) << 1, n)

    @classmethod
    def empty(cls, n: int) -> IndexSet:
        return cls(0, n)

    @classmethod
    def interval(cls, lo: int, hi: int, ground_size: int) -> IndexSet:
        """The set ``{lo, ..., hi}`` (empty when ``hi < lo``)."""
        if hi < lo:
            return cls(0, ground_size)
        return cls.of(range(lo, hi + 1), ground_size)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __iter__(self) -> Iterator[int]:
        b = self.bits
        while b:
            low = b & -b
            yield low.bit_length() - 1
            b ^= low

    def __contains__(self, i) -> bool:
        return i >= 1 and bool(self.bits >> i & 1)

    def __bool__(self) -> bool:
        return self.bits != 0

    def _coerce(self, other: IndexSet) -> int:
        return max(self.ground_size, other.ground_size)

    def __or__(self, other: IndexSet) -> IndexSet:
        return IndexSet(self.bits | other.bits, self._coerce(other))

    def __and__(self, other: IndexSet) -> IndexSet:
        return IndexSet(self.bits & other.bits, self._coerce(other))

    def __sub__(self, other: IndexSet) -> IndexSet:
        return IndexSet(self.bits & ~other.bits, self._coerce(other))

    def complement(self) -> IndexSet:
        return IndexSet(IndexSet.full(self.ground_size).bits & ~self.bits, self.ground_size)

    def add(self, *elements: int) -> IndexSet:
        ground = max([self.ground_size, *elements])
        return self | IndexSet.of(elements, ground)

    def remove(self, *elements: int) -> IndexSet:
        bits = self.bits
        for e in elements:
            bits &= ~(1 << e)
        return IndexSet(bits, self.ground_size)

    def lifted(self, ground_size: int) -> IndexSet:
        """Same elements viewed inside a larger ground set."""
        return IndexSet(self.bits, ground_size)

    def issubset(self, other: IndexSet) -> bool:
        return self.bits & ~other.bits == 0

    def isdisjoint(self, other: IndexSet) -> bool:
        return self.bits & other.bits == 0

    def min(self) -> int:
        if not self.bits:
            raise ValueError("empty index set")
        return (self.bits & -self.bits).bit_length() - 1

    def to_list(self) -> list[int]:
        return list(self)

    def __repr__(self) -> str:
        return f"IndexSet({{{', '.join(map(str, self))}}}, n={self.ground_size})"

    def __str__(self) -> str:
        return "{" + " ".join(map(str, self)) + "}"


def complement_disjoint(sets: Sequence[IndexSet], ground: int) -> bool:
    """True iff the complements of ``sets`` inside ``{1..ground}`` are pairwise disjoint."""
    full = IndexSet.full(ground).bits
    seen = 0
    for s in sets:
        if s.bits & ~full:
            raise ContractViolation(f"{s!r} is not inside ground set of size {ground}")
        comp = full & ~s.bits
        if comp & seen:
            return False
        seen |= comp
    return True


def _as_fraction(p) -> Fraction:
    if isinstance(p, float):
        # decimal literal semantics: 0.3 means 3/10
        return Fraction(repr(p))
    return Fraction(p)


@dataclass(frozen=True)
class EntryDistribution:
    """Finite discrete laws for off-diagonal (``off_diag``) and diagonal (``diag``) entries."""

    off_diag: tuple[tuple[int, Fraction], ...]
    diag: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        for name in ("off_diag", "diag"):
            law = tuple((int(v), _as_fraction(p)) for v, p in getattr(self, name))
            if not law:
                raise ContractViolation(f"{name} law is empty")
            if any(p <= 0 for _, p in law):
                raise ContractViolation(f"{name} law has a non-positive probability")
            if sum(p for _, p in law) != 1:
                raise ContractViolation(f"{name} probabilities do not sum to 1")
            if len({v for v, _ in law}) != len(law):
                raise ContractViolation(f"{name} law repeats a support point")
            object.__setattr__(self, name, law)

    @classmethod
    def rademacher(cls) -> EntryDistribution:
        half = Fraction(1, 2)
        return cls(((-1, half), (1, half)), ((-1, half), (1, half)))

    @classmethod
    def uniform(cls, values: Sequence[int], diag_values: Sequence[int] | None = None) -> EntryDistribution:
        diag_values = values if diag_values is None else diag_values
        return cls(
            tuple((v, Fraction(1, len(values))) for v in values),
            tuple((v, Fraction(1, len(diag_values))) for v in diag_values),
        )

    @property
    def is_rademacher(self) -> bool:
        return self == EntryDistribution.rademacher()

    @property
    def nontrivial(self) -> bool:
        """Off-diagonal law supported on at least two points."""
        return len(self.off_diag) >= 2

    @property
    def max_abs(self) -> int:
        return max(abs(v) for v, _ in self.off_diag + self.diag)

    @staticmethod
    def _draw(law, rng: np.random.Generator, size: int) -> np.ndarray:
        denom = math.lcm(*(p.denominator for _, p in law))
        if denom >= 1 << 62:
            raise CapacityError("probability denominators too large for exact sampling")
        cum = np.cumsum([p.numerator * (denom // p.denominator) for _, p in law])
        values = np.array([v for v, _ in law], dtype=np.int64)
        u = rng.integers(0, denom, size=size, dtype=np.int64)
        return values[np.searchsorted(cum, u, side="right")]

    def draw_off_diagonal(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._draw(self.off_diag, rng, size)

    def draw_diagonal(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._draw(self.diag, rng, size)


RADEMACHER = EntryDistribution.rademacher()


@dataclass(frozen=True)
class SeedSpec:
    """Key of a counter-based generator: ``(root_seed, stream_id)`` plus a step counter."""

    root_seed: int
    stream_id: int = 0
    step: int = 0

    def __post_init__(self):
        for name in ("root_seed", "stream_id", "step"):
            if not 0 <= getattr(self, name) < 1 << 64:
                raise ContractViolation(f"{name} must fit in an unsigned 64-bit integer")

    def at(self, step: int) -> SeedSpec:
        return SeedSpec(self.root_seed, self.stream_id, step)

    def stream(self, stream_id: int) -> SeedSpec:
        return SeedSpec(self.root_seed, stream_id, 0)

    def generator(self) -> np.random.Generator:
        # Philox: key = (root, stream); the step sits in the top counter word so
        # draws within one step never reach the next step's counter range
        bitgen = np.random.Philox(
            key=np.array([self.root_seed, self.stream_id], dtype=np.uint64),
            counter=np.array([0, 0, 0, self.step], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)


@dataclass(frozen=True, eq=False)
class SymmetricMatrixProcess:
    """An immutable symmetric integer matrix together with how it was exposed.

    ``entries`` is the full n x n array (read-only); ``seed_path[k-1]`` is the
    seed that generated row/column ``k`` (``None`` when the row was supplied
    explicitly via :func:`extend_with_row`).
    """

    entries: np.ndarray
    dist: EntryDistribution = RADEMACHER
    seed_path: tuple = ()
    big_sets: bool = False

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.int64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractViolation("entries must be a square matrix")
        if not np.array_equal(a, a.T):
            raise ContractViolation("entries must be symmetric")
        if a.shape[0] > FAST_MODE_MAX_N and not self.big_sets:
            raise CapacityError(
                f"n={a.shape[0]} exceeds the fast-mode cap {FAST_MODE_MAX_N}; pass big_sets=True"
            )
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        if len(self.seed_path) not in (0, a.shape[0]):
            raise ContractViolation("seed_path must record one seed per exposure step")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def entry(self, i: int, j: int) -> int:
        return int(self.entries[i - 1, j - 1])

    def lower_triangle(self) -> np.ndarray:
        return np.tril(self.entries)

    def prefix(self, k: int) -> SymmetricMatrixProcess:
        """The coupled ``M_k`` (top-left ``k x k`` block)."""
        if not 0 <= k <= self.n:
            raise ContractViolation(f"prefix {k} of a {self.n}x{self.n} matrix")
        path = self.seed_path[:k] if self.seed_path else ()
        return SymmetricMatrixProcess(self.entries[:k, :k], self.dist, path, self.big_sets)

    def permuted(self, perm: Sequence[int]) -> SymmetricMatrixProcess:
        """Relabel: the result has entry ``(perm[i], perm[j])`` at position ``(i, j)`` (1-based)."""
        idx = np.asarray(perm, dtype=np.int64) - 1
        return SymmetricMatrixProcess(self.entries[np.ix_(idx, idx)], self.dist, (), self.big_sets)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymmetricMatrixProcess):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self) -> str:
        return f"SymmetricMatrixProcess(n={self.n})"


def _check_capacity(n: int, big_sets: bool) -> None:
    if n > FAST_MODE_MAX_N and not big_sets:
        raise CapacityError(f"n={n} exceeds the fast-mode cap {FAST_MODE_MAX_N}; pass big_sets=True")


def extend_with_row(M: SymmetricMatrixProcess, row: Sequence[int], z: int, seed: SeedSpec | None = None) -> SymmetricMatrixProcess:
    """Append the row/column ``(row[0], ..., row[n-1], z)`` to ``M``."""
    n = M.n
    row = np.asarray(row, dtype=np.int64)
    if row.shape != (n,):
        raise ContractViolation(f"new row must have {n} entries")
    _check_capacity(n + 1, M.big_sets)
    a = np.empty((n + 1, n + 1), dtype=np.int64)
    a[:n, :n] = M.entries
    a[n, :n] = row
    a[:n, n] = row
    a[n, n] = z
    path = M.seed_path + (seed,) if (M.seed_path or n == 0) else ()
    out = SymmetricMatrixProcess(a, M.dist, path, M.big_sets)
    assert np.array_equal(out.entries[:n, :n], M.entries)
    return out


def _exposure_row(n_before: int, dist: EntryDistribution, seed: SeedSpec):
    rng = seed.generator()
    x = dist.draw_off_diagonal(rng, n_before)
    z = int(dist.draw_diagonal(rng, 1)[0])
    return x, z


def extend_symmetric(M: SymmetricMatrixProcess, seed: SeedSpec) -> SymmetricMatrixProcess:
    """Expose row/column ``n+1`` of the coupled infinite matrix."""
    step_seed = seed.at(M.n + 1)
    x, z = _exposure_row(M.n, M.dist, step_seed)
    return extend_with_row(M, x, z, step_seed)


def empty_process(dist: EntryDistribution = RADEMACHER, big_sets: bool = False) -> SymmetricMatrixProcess:
    return SymmetricMatrixProcess(np.zeros((0, 0), dtype=np.int64), dist, (), big_sets)


def sample_symmetric(
    n: int,
    dist: EntryDistribution = RADEMACHER,
    seed: SeedSpec = SeedSpec(0),
    big_sets: bool = False,
) -> SymmetricMatrixProcess:
    """Sample ``M_n``: entries on and above the diagonal independent, the rest mirrored."""
    if n < 1:
        raise ContractViolation("n must be at least 1")
    _check_capacity(n, big_sets)
    a = np.zeros((n, n), dtype=np.int64)
    path = []
    for k in range(1, n + 1):
        step_seed = seed.at(k)
        x, z = _exposure_row(k - 1, dist, step_seed)
        a[k - 1, : k - 1] = x
        a[: k - 1, k - 1] = x
        a[k - 1, k - 1] = z
        path.append(step_seed)
    return SymmetricMatrixProcess(a, dist, tuple(path), big_sets)


def _array(M) -> np.ndarray:
    if isinstance(M, SymmetricMatrixProcess):
        return M.entries
    raw = np.asarray(M)
    if raw.dtype.kind not in "iub" and not np.array_equal(raw, np.round(raw)):
        raise ContractViolation("entries must be integers")
    return raw.astype(np.int64)


def submatrix(M, A: IndexSet, B: IndexSet) -> np.ndarray:
    """Rows ``A`` and columns ``B`` of ``M`` in ascending index order."""
    a = _array(M)
    rows = A.to_list()
    cols = B.to_list()
    if (rows and rows[-1] > a.shape[0]) or (cols and cols[-1] > a.shape[1]):
        raise ContractViolation(f"index set out of range for a {a.shape[0]}x{a.shape[1]} matrix")
    return a[np.ix_(np.asarray(rows, dtype=np.int64) - 1, np.asarray(cols, dtype=np.int64) - 1)]


def all_extension_rows(M: SymmetricMatrixProcess):
    """Every possible new row ``(x, z)`` with its probability, for exact averages over one exposure step."""
    off = M.dist.off_diag
    for xs in itertools.product(off, repeat=M.n):
        px = math.prod((p for _, p in xs), start=Fraction(1))
        for z, pz in M.dist.diag:
            yield [v for v, _ in xs], z, px * pz
