"""Multilinear polynomials of degree at most two in ±1 variables."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import ContractViolation

Number = int | Fraction


def _num(c) -> Number:
    if isinstance(c, int):
        return c
    if isinstance(c, float):
        c = Fraction(repr(c))
    c = Fraction(c)
    return c.numerator if c.denominator == 1 else c


@dataclass
class QuadraticPolynomial:
    """``constant + sum linear[i] x_i + sum quadratic[(i, j)] x_i x_j`` over variables ``1..n_vars``.

    Quadratic keys are unordered pairs stored as ``(i, j)`` with ``i < j``.
    Squares never appear: for ±1 variables ``x_i**2 == 1``, so
    :meth:`add_term` folds them into the constant. Zero coefficients are dropped.
    """

    n_vars: int
    constant: Number = 0
    linear: dict[int, Number] = field(default_factory=dict)
    quadratic: dict[tuple[int, int], Number] = field(default_factory=dict)

    def __post_init__(self):
        lin, quad = self.linear, self.quadratic
        self.constant = _num(self.constant)
        self.linear, self.quadratic = {}, {}
        for i, c in lin.items():
            self.add_term(c, i)
        for (i, j), c in quad.items():
            self.add_term(c, i, j)

    @classmethod
    def linear_form(cls, coeffs: Mapping[int, Number] | Sequence[Number], constant: Number = 0, n_vars: int | None = None):
        if not isinstance(coeffs, Mapping):
            coeffs = {i + 1: c for i, c in enumerate(coeffs)}
        if n_vars is None:
            n_vars = max(coeffs, default=0)
        return cls(n_vars, constant, dict(coeffs))

    def _check_var(self, i: int) -> None:
        if not 1 <= i <= self.n_vars:
            raise ContractViolation(f"variable {i} outside 1..{self.n_vars}")

    def add_term(self, coef: Number, i: int | None = None, j: int | None = None) -> None:
        """Add ``coef * x_i * x_j`` (``j`` or both may be omitted)."""
        coef = _num(coef)
        if coef == 0:
            return
        if i is None:
            self.constant = _num(self.constant + coef)
            return
        self._check_var(i)
        if j is None:
            table, key = self.linear, i
        else:
            self._check_var(j)
            if i == j:
                self.constant = _num(self.constant + coef)
                return
            table, key = self.quadratic, (min(i, j), max(i, j))
        v = _num(table.get(key, 0) + coef)
        if v == 0:
            table.pop(key, None)
        else:
            table[key] = v

    def coefficient(self, i: int | None = None, j: int | None = None) -> Number:
        if i is None:
            return self.constant
        if j is None:
            return self.linear.get(i, 0)
        if i == j:
            raise ContractViolation("squares are folded into the constant")
        return self.quadratic.get((min(i, j), max(i, j)), 0)

    @property
    def is_linear(self) -> bool:
        return not self.quadratic

    def variables(self) -> list[int]:
        """Variables that appear with a nonzero coefficient, ascending."""
        vs = set(self.linear)
        for i, j in self.quadratic:
            vs.add(i)
            vs.add(j)
        return sorted(vs)

    def evaluate(self, x: Mapping[int, int] | Sequence[int]) -> Number:
        """Exact value at ``x`` (a 1-based mapping, or a sequence whose entry k-1 is x_k)."""
        if not isinstance(x, Mapping):
            x = {k + 1: int(v) for k, v in enumerate(x)}
        total = self.constant
        for i, c in self.linear.items():
            total += c * x[i]
        for (i, j), c in self.quadratic.items():
            total += c * x[i] * x[j]
        return _num(total)

    def restrict(self, fixed: Mapping[int, int]) -> QuadraticPolynomial:
        """Substitute the given ±1 values and return the polynomial in the remaining variables."""
        out = QuadraticPolynomial(self.n_vars, self.constant)
        for i, c in self.linear.items():
            if i in fixed:
                out.add_term(c * fixed[i])
            else:
                out.add_term(c, i)
        for (i, j), c in self.quadratic.items():
            fi, fj = i in fixed, j in fixed
            if fi and fj:
                out.add_term(c * fixed[i] * fixed[j])
            elif fi:
                out.add_term(c * fixed[i], j)
            elif fj:
                out.add_term(c * fixed[j], i)
            else:
                out.add_term(c, i, j)
        return out

    def shifted(self, offset: Number) -> QuadraticPolynomial:
        out = self.copy()
        out.add_term(-_num(offset))
        return out

    def copy(self) -> QuadraticPolynomial:
        return QuadraticPolynomial(self.n_vars, self.constant, dict(self.linear), dict(self.quadratic))

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuadraticPolynomial):
            return NotImplemented
        return (self.constant, self.linear, self.quadratic) == (other.constant, other.linear, other.quadratic)

    def __repr__(self) -> str:
        parts = [str(self.constant)] if self.constant else []
        parts += [f"{c}*x{i}" for i, c in sorted(self.linear.items())]
        parts += [f"{c}*x{i}*x{j}" for (i, j), c in sorted(self.quadratic.items())]
        return f"QuadraticPolynomial({' + '.join(parts) or '0'})"
