"""Slow, direct reference computations used to cross-check the vectorised library code.

Everything here is written from the definitions with plain loops and exact
arithmetic where it matters; nothing imports the algorithms under test.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import product

import numpy as np


def interval_bounds(level: int, offset: int) -> tuple[Fraction, Fraction]:
    size = Fraction(2) ** (-level)
    return offset * size, (offset + 1) * size


def brute_family(level: int, offset: int, e: int, m: int, lo: Fraction, hi: Fraction) -> list[tuple[int, int]]:
    """Every same-level dyadic J meeting [lo, hi) whose diameter ratio with I lies in [m, m+1)."""
    a0, a1 = interval_bounds(level, offset)
    jl = level + e
    size = Fraction(2) ** (-jl)
    out = []
    first = int((lo / size).__floor__()) - 1
    last = int((hi / size).__ceil__()) + 1
    for o in range(first, last + 1):
        b0, b1 = o * size, (o + 1) * size
        if not (b1 > lo and b0 < hi):
            continue
        diam = max(a1, b1) - min(a0, b0)
        ratio = diam / max(a1 - a0, size)
        if m <= ratio < m + 1:
            out.append((jl, o))
    return out


def haar_function(W0: float, W1: float, J: int, depth: int, off: int) -> np.ndarray:
    """Cell values of h_I for the depth/offset interval below the window [W0, W1)."""
    n = 1 << J
    h = (W1 - W0) / n
    L = (W1 - W0) / (1 << depth)
    left = W0 + off * L
    v = np.zeros(n)
    for c in range(n):
        x = W0 + (c + 0.5) * h
        if left <= x < left + L / 2:
            v[c] = L ** -0.5
        elif left + L / 2 <= x < left + L:
            v[c] = -(L ** -0.5)
    return v


def haar_basis(W0: float, W1: float, J: int) -> np.ndarray:
    """Rows are the orthonormal basis vectors in the library's index layout (scaled by sqrt(cell))."""
    n = 1 << J
    rows = [np.full(n, (W1 - W0) ** -0.5)]
    for depth in range(J):
        for off in range(1 << depth):
            rows.append(haar_function(W0, W1, J, depth, off))
    return np.array(rows)


def naive_haar_coeffs(values: np.ndarray, W0: float, W1: float) -> np.ndarray:
    J = int(np.log2(values.size))
    h = (W1 - W0) / values.size
    return haar_basis(W0, W1, J) @ values * h


def naive_square_fn(values: np.ndarray, W0: float, W1: float) -> np.ndarray:
    """S f on cells: sqrt(sum_I <f,h_I>^2 chi_I / |I|) with the coarse term dropped."""
    J = int(np.log2(values.size))
    n = values.size
    h = (W1 - W0) / n
    acc = np.zeros(n)
    for depth in range(J):
        L = (W1 - W0) / (1 << depth)
        for off in range(1 << depth):
            c = float(haar_function(W0, W1, J, depth, off) @ values * h)
            cells = slice(off * (n >> depth), (off + 1) * (n >> depth))
            acc[cells] += c * c / L
    return np.sqrt(acc)


def brute_maximal_intervals(values: np.ndarray, lam: float) -> list[tuple[int, int]]:
    """(depth, offset) of maximal dyadic subintervals with mean |f| above lam, by checking every interval."""
    n = values.size
    J = int(np.log2(n))
    hits = []
    for depth in range(J + 1):
        w = n >> depth
        for off in range(1 << depth):
            if np.abs(values[off * w:(off + 1) * w]).mean() > lam:
                hits.append((depth, off))
    maximal = []
    for d, o in hits:
        covered = any(d2 < d and (o >> (d - d2)) == o2 for d2, o2 in hits)
        if not covered:
            maximal.append((d, o))
    return sorted(maximal)


def direct_bilinear(M: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """sum_{p,q} a_p M[p,q] b_q by explicit loops over nonzero entries."""
    total = 0.0
    P, Q = np.nonzero(M)
    for p, q in zip(P, Q):
        total += a[p] * M[p, q] * b[q]
    return total


def support_relation(dp: int, op: int, dq: int, oq: int) -> str:
    """Relation of interval q to interval p, both given as (depth, offset) below a common window.

    The coarse index is passed with depth -1 and behaves like a strict ancestor of everything.
    """
    if (dp, op) == (dq, oq):
        return "eq"
    if dp == -1:
        return "p_contains"
    if dq == -1:
        return "q_contains"
    if dp < dq and (oq >> (dq - dp)) == op:
        return "p_contains"
    if dq < dp and (op >> (dp - dq)) == oq:
        return "q_contains"
    return "disjoint"


def index_to_depth_offset(idx: int) -> tuple[int, int]:
    if idx == 0:
        return -1, 0
    d = idx.bit_length() - 1
    return d, idx - (1 << d)


def all_pairs(n1: int, n2: int):
    return product(range(n1), range(n2))
