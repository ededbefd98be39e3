"""Compiled permanent kernels with an exact 128-bit accumulator.

Each Gray-code term is a product of n small integers. The caller picks a
split so both half-products fit in int64; their product is formed exactly as
an unsigned 128-bit value from 32-bit limbs and added (two's complement) to
a (hi, lo) pair of uint64 words. The sum is therefore exact modulo 2**128,
which recovers the true signed value whenever it is below 2**127 in
magnitude. The caller checks that bound before dispatching here.
"""

import numpy as np
from numba import njit

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@njit(cache=True, nogil=True, inline="always")
def _acc_signed_product(H, L, h1, h2, flip):
    """Add ``(-1)**flip * h1 * h2`` to the 128-bit pair ``(H, L)``."""
    s1 = h1 >> 63
    s2 = h2 >> 63
    u1 = np.uint64((h1 ^ s1) - s1)
    u2 = np.uint64((h2 ^ s2) - s2)
    neg = np.uint64((flip ^ s1 ^ s2) & 1)
    a1 = u1 >> _S32
    b1 = u1 & _M32
    a2 = u2 >> _S32
    b2 = u2 & _M32
    ll = b1 * b2
    lh = b1 * a2
    hl = a1 * b2
    hh = a1 * a2
    mid = (ll >> _S32) + (lh & _M32) + (hl & _M32)
    lo = (ll & _M32) | (mid << _S32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    # branchless two's-complement negation when neg == 1
    m = np.uint64(0) - neg
    lo = (lo ^ m) + neg
    hi = (hi ^ m) + (neg & np.uint64(lo == 0))
    L2 = L + lo
    H = H + hi + np.uint64(L2 < L)
    return H, L2


@njit(cache=True, nogil=True)
def ryser128(at, split):
    """Ryser's inclusion-exclusion sum over column subsets in Gray-code order.

    ``at`` is the transposed matrix (so a column is a contiguous row of
    ``at``). Returns ``(H, L)`` with ``H*2**64 + L == (-1)**n * per (mod 2**128)``.
    """
    n = at.shape[0]
    rowsum = np.zeros(n, dtype=np.int64)
    H = np.uint64(0)
    L = np.uint64(0)
    gray = 0
    for k in range(1, 1 << n):
        j = 0
        t = k
        while (t & 1) == 0:
            t >>= 1
            j += 1
        col = at[j]
        s = -1 if (gray >> j) & 1 else 1
        for i in range(n):
            rowsum[i] += s * col[i]
        gray ^= 1 << j
        h1 = np.int64(1)
        h2 = np.int64(1)
        for i in range(split):
            h1 *= rowsum[i]
        for i in range(split, n):
            h2 *= rowsum[i]
        # popcount(gray(k)) has the parity of k
        H, L = _acc_signed_product(H, L, h1, h2, k)
    return H, L


@njit(cache=True, nogil=True)
def glynn128(a, split):
    """Glynn's formula: sum over sign vectors with the first sign fixed to +1.

    Returns ``(H, L)`` with ``H*2**64 + L == 2**(n-1) * per (mod 2**128)``.
    """
    n = a.shape[0]
    cs = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            cs[j] += a[i, j]
    H = np.uint64(0)
    L = np.uint64(0)
    gray = 0
    for k in range(0, 1 << (n - 1)):
        if k > 0:
            t = k
            b = 0
            while (t & 1) == 0:
                t >>= 1
                b += 1
            # flipping the sign of row b+1 moves its contribution by -2 or +2
            c = 4 * ((gray >> b) & 1) - 2
            row = a[b + 1]
            for j in range(n):
                cs[j] += c * row[j]
            gray ^= 1 << b
        h1 = np.int64(1)
        h2 = np.int64(1)
        for j in range(split):
            h1 *= cs[j]
        for j in range(split, n):
            h2 *= cs[j]
        H, L = _acc_signed_product(H, L, h1, h2, k)
    return H, L


def to_signed(H, L) -> int:
    v = (int(H) << 64) | int(L)
    return v - (1 << 128) if v >= 1 << 127 else v


@njit(cache=True, nogil=True)
def ryser_residues(at, primes):
    """Ryser's signed sum modulo each prime (primes below 2**31).

    Used when 128 bits may not hold the answer; the caller reconstructs the
    value by the CRT from enough primes.
    """
    n = at.shape[0]
    k_p = primes.shape[0]
    rowsum = np.zeros(n, dtype=np.int64)
    acc = np.zeros(k_p, dtype=np.int64)
    gray = 0
    for k in range(1, 1 << n):
        j = 0
        t = k
        while (t & 1) == 0:
            t >>= 1
            j += 1
        col = at[j]
        s = -1 if (gray >> j) & 1 else 1
        for i in range(n):
            rowsum[i] += s * col[i]
        gray ^= 1 << j
        for q in range(k_p):
            p = primes[q]
            r = np.int64(1)
            for i in range(n):
                r = r * (rowsum[i] % p) % p
            if k & 1:
                acc[q] -= r
                if acc[q] < 0:
                    acc[q] += p
            else:
                acc[q] += r
                if acc[q] >= p:
                    acc[q] -= p
    return acc


@njit(cache=True, nogil=True)
def quadratic_values(const, lin, Q):
    """Values of ``const + lin.x + sum_{u<v} Q[u,v] x_u x_v`` over all of {-1,1}^k.

    Entry ``g`` of the output is the value at the point where ``x_b = -1``
    exactly for the set bits ``b`` of ``g ^ (g >> 1)``, i.e. points come
    out in Gray-code order. ``Q`` is symmetric with a zero diagonal.
    """
    k = lin.shape[0]
    x = np.ones(k, dtype=np.int64)
    v = const + lin.sum()
    for u in range(k):
        for w in range(u + 1, k):
            v += Q[u, w]
    out = np.empty(1 << k, dtype=np.int64)
    out[0] = v
    for g in range(1, 1 << k):
        b = 0
        t = g
        while (t & 1) == 0:
            t >>= 1
            b += 1
        s = lin[b]
        row = Q[b]
        for u in range(k):
            s += row[u] * x[u]
        v -= 2 * x[b] * s
        x[b] = -x[b]
        out[g] = v
    return out
