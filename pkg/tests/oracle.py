"""Reference implementations that share no code with the package under test."""

import itertools
import math


def per(rows):
    """Permanent by summing over every permutation (rows: list of lists)."""
    n = len(rows)
    return sum(math.prod(rows[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def block(a, A, B):
    """Rows ``A`` and columns ``B`` (1-based, ascending) of a nested list or array."""
    return [[int(a[i - 1][j - 1]) for j in sorted(B)] for i in sorted(A)]


def sym_from_bits(n, mask):
    """The symmetric sign matrix whose upper triangle (row-major, diagonal included) is ``mask``."""
    a = [[0] * n for _ in range(n)]
    k = 0
    for i in range(n):
        for j in range(i, n):
            a[i][j] = a[j][i] = -1 if mask >> k & 1 else 1
            k += 1
    return a
