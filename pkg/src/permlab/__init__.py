"""Exact experiments on permanents of random symmetric sign matrices."""

__version__ = "0.1.0"

from .errors import CapacityError, ContractViolation, TheoremViolation
from .matrix import (
    RADEMACHER,
    EntryDistribution,
    IndexSet,
    SeedSpec,
    SymmetricMatrixProcess,
    complement_disjoint,
    extend_symmetric,
    extend_with_row,
    sample_symmetric,
    submatrix,
)
from .polynomial import QuadraticPolynomial
from .permanent import (
    HeavinessThreshold,
    choose_noncancelling_pair,
    double_expansion,
    is_heavy,
    permanent,
    permanent_glynn,
    permanent_naive,
    permanent_ryser,
    permanent_submatrix,
    row_expansion,
)

__all__ = [
    "CapacityError",
    "ContractViolation",
    "TheoremViolation",
    "RADEMACHER",
    "EntryDistribution",
    "IndexSet",
    "SeedSpec",
    "SymmetricMatrixProcess",
    "complement_disjoint",
    "extend_symmetric",
    "extend_with_row",
    "sample_symmetric",
    "submatrix",
    "QuadraticPolynomial",
    "HeavinessThreshold",
    "choose_noncancelling_pair",
    "double_expansion",
    "is_heavy",
    "permanent",
    "permanent_glynn",
    "permanent_naive",
    "permanent_ryser",
    "permanent_submatrix",
    "row_expansion",
]
