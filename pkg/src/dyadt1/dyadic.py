"""Dyadic intervals, rectangles and the eccentricity / relative-distance classes.

All geometry is kept in integer (level, offset) form.  An interval with level
``l`` and offset ``o`` is ``[o * 2**-l, (o + 1) * 2**-l)``.  Real numbers only
appear when a length or a diameter is reported, and those are dyadic rationals
so they are exact in double precision for every scale used here.

Two class conventions are available for ``family``:

``"literal"``
    J belongs to the class of I when ``|I| = 2**e |J|`` and
    ``m <= diam(I u J) / max(|I|, |J|) < m + 1``.

``"tiled"``
    The smaller interval is first replaced by its dyadic ancestor at the scale
    of the larger one, and the diameter condition is applied to that pair.
    The members of a class then tile whole intervals of the larger scale,
    which is what makes the scaling identity of the class square functions
    exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

CONVENTIONS = ("literal", "tiled")


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """The interval ``[offset * 2**-level, (offset + 1) * 2**-level)``."""

    level: int
    offset: int

    def __post_init__(self):
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "offset", int(self.offset))

    @classmethod
    def from_endpoints(cls, left, right) -> "DyadicInterval":
        left, right = Fraction(left), Fraction(right)
        length = right - left
        if length <= 0:
            raise ValueError("empty interval")
        level = -(length.numerator.bit_length() - 1) if length >= 1 else length.denominator.bit_length() - 1
        if Fraction(2) ** (-level) != length:
            raise ValueError(f"length {length} is not a power of two")
        off = left / length
        if off.denominator != 1:
            raise ValueError(f"[{left}, {right}) is not dyadic")
        return cls(level, int(off))

    @property
    def length(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def left(self) -> float:
        return self.offset * self.length

    @property
    def right(self) -> float:
        return (self.offset + 1) * self.length

    @property
    def center(self) -> float:
        return (self.offset + 0.5) * self.length

    def exact_left(self) -> Fraction:
        return Fraction(self.offset) * Fraction(2) ** (-self.level)

    def exact_right(self) -> Fraction:
        return Fraction(self.offset + 1) * Fraction(2) ** (-self.level)

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.level - 1, self.offset >> 1)

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return DyadicInterval(self.level + 1, 2 * self.offset), DyadicInterval(self.level + 1, 2 * self.offset + 1)

    def child_left(self) -> "DyadicInterval":
        return self.children()[0]

    def child_right(self) -> "DyadicInterval":
        return self.children()[1]

    def ancestor(self, level: int) -> "DyadicInterval":
        if level > self.level:
            raise ValueError("ancestor level must not be finer than the interval")
        return DyadicInterval(level, self.offset >> (self.level - level))

    def contains(self, other: "DyadicInterval") -> bool:
        """Non-strict containment ``other`` inside ``self``."""
        if other.level < self.level:
            return False
        return (other.offset >> (other.level - self.level)) == self.offset

    def strictly_contains(self, other: "DyadicInterval") -> bool:
        return other.level > self.level and self.contains(other)

    def intersects(self, other: "DyadicInterval") -> bool:
        """Open intersection; for dyadic intervals this means nested."""
        return self.contains(other) or other.contains(self)

    def dilate(self, factor: float) -> tuple[float, float]:
        """Endpoints of the interval with the same centre and ``factor`` times the length."""
        half = 0.5 * factor * self.length
        return self.center - half, self.center + half

    def descendants(self, depth: int) -> list["DyadicInterval"]:
        lvl = self.level + depth
        base = self.offset << depth
        return [DyadicInterval(lvl, base + i) for i in range(1 << depth)]

    def __repr__(self):
        return f"[{self.exact_left()}, {self.exact_right()})"


@dataclass(frozen=True, order=True)
class DyadicRectangle:
    i1: DyadicInterval
    i2: DyadicInterval

    @property
    def area(self) -> float:
        return self.i1.length * self.i2.length

    def contains(self, other: "DyadicRectangle") -> bool:
        return self.i1.contains(other.i1) and self.i2.contains(other.i2)

    def intersects(self, other: "DyadicRectangle") -> bool:
        return self.i1.intersects(other.i1) and self.i2.intersects(other.i2)

    @property
    def center(self) -> tuple[float, float]:
        return self.i1.center, self.i2.center

    def __getitem__(self, i):
        return (self.i1, self.i2)[i]

    def __repr__(self):
        return f"{self.i1!r}x{self.i2!r}"


def unit_window() -> DyadicInterval:
    return DyadicInterval(0, 0)


def diam_union(a: DyadicInterval, b: DyadicInterval) -> float:
    """Length of the smallest closed interval containing ``a`` and ``b``."""
    return float(max(a.exact_right(), b.exact_right()) - min(a.exact_left(), b.exact_left()))


def relative_distance(a: DyadicInterval, b: DyadicInterval) -> float:
    return diam_union(a, b) / max(a.length, b.length)


def in_class(I: DyadicInterval, J: DyadicInterval, e: int, m: int, convention: str = "literal") -> bool:
    """Membership predicate ``J in I_{e,m}`` written directly from its definition."""
    if J.level != I.level + e:
        return False
    if convention == "literal":
        ratio = Fraction(diam_union(I, J)) / Fraction(max(I.length, J.length))
        return m <= ratio < m + 1
    if convention == "tiled":
        lvl = min(I.level, J.level)
        a, b = I.ancestor(lvl), J.ancestor(lvl)
        ratio = Fraction(diam_union(a, b)) / Fraction(a.length)
        return m <= ratio < m + 1
    raise ValueError(f"unknown convention {convention!r}")


@lru_cache(maxsize=4096)
def _relative_class(e: int, m: int, convention: str, phase: int) -> tuple[int, ...]:
    """Offsets of the class members of the canonical interval ``(0, phase)``.

    For ``e >= 0`` only ``phase = 0`` is used and members of ``(l, o)`` are
    ``o * 2**e + rel``.  For ``e < 0`` the class depends on ``o mod 2**-e`` and
    members of ``(l, o)`` are ``o // 2**-e + rel``.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    # work in units of the smaller length
    if e >= 0:
        A, B = 1 << e, 1
        a = phase * A
    else:
        A, B = 1, 1 << (-e)
        a = phase
    M = max(A, B)
    lo = (a - (m + 2) * M) // B - 1
    hi = (a + A + (m + 2) * M) // B + 1
    offs = np.arange(lo, hi + 1, dtype=np.int64)
    b = offs * B
    if convention == "literal":
        diam = np.maximum(a + A, b + B) - np.minimum(a, b)
        keep = (diam >= m * M) & (diam < (m + 1) * M)
    else:
        ia = a // M
        jb = b // M
        keep = np.abs(ia - jb) == (m - 1)
    return tuple(int(o) for o in offs[keep])


def class_offsets(levels, offsets, e: int, m: int, convention: str = "literal"):
    """Vectorised class enumeration.

    Returns ``(jlevels, base, rel)`` where the class of the i-th interval is
    ``{(jlevels[i], base[i] + r) : r in rel[i]}``.  ``rel`` is a list of tuples.
    """
    levels = np.asarray(levels, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    if e >= 0:
        rel = _relative_class(e, m, convention, 0)
        base = offsets << e
        rels = [rel] * len(offsets)
    else:
        M = 1 << (-e)
        base = offsets >> (-e)
        phase = offsets & (M - 1)
        table = {p: _relative_class(e, m, convention, int(p)) for p in np.unique(phase)}
        rels = [table[int(p)] for p in phase]
    return levels + e, base, rels


def window_bounds(window) -> tuple[Fraction, Fraction]:
    """Exact endpoints of a window given as a DyadicInterval or a ``(left, right)`` pair."""
    if isinstance(window, DyadicInterval):
        return window.exact_left(), window.exact_right()
    left, right = window
    return Fraction(left), Fraction(right)


def symmetric_window(W: int) -> tuple[Fraction, Fraction]:
    """The enumeration window ``[-2**W, 2**W)``."""
    return -Fraction(2) ** W, Fraction(2) ** W


def _window_contains(window, I: DyadicInterval) -> bool:
    if isinstance(window, DyadicInterval):
        return window.contains(I)
    a, b = window_bounds(window)
    return a <= I.exact_left() and I.exact_right() <= b


def family(I: DyadicInterval, e: int, m: int, window=None,
           convention: str = "literal") -> list[DyadicInterval]:
    """All dyadic J with ``|I| = 2**e |J|`` in relative-distance band ``m``.

    ``window`` is a DyadicInterval or a ``(left, right)`` pair such as
    ``symmetric_window(2)``.  When given, the enumeration keeps only the J
    meeting it, and the window must contain I.  The result is ordered left to
    right.
    """
    if window is not None and not _window_contains(window, I):
        raise ValueError("window must contain I")
    if e >= 0:
        base = I.offset << e
        rel = _relative_class(e, m, convention, 0)
    else:
        M = 1 << (-e)
        base = I.offset >> (-e)
        rel = _relative_class(e, m, convention, I.offset & (M - 1))
    lvl = I.level + e
    out = [DyadicInterval(lvl, base + r) for r in sorted(rel)]
    if window is not None:
        a, b = window_bounds(window)
        out = [J for J in out if J.exact_right() > a and J.exact_left() < b]
    return out


def rect_family(R: DyadicRectangle, e: Sequence[int], m: Sequence[int],
                window=None, convention: str = "literal") -> list[DyadicRectangle]:
    """Cartesian product of the per-coordinate classes.

    ``window`` is a DyadicRectangle or a pair of per-coordinate windows.
    """
    w1 = window[0] if window is not None else None
    w2 = window[1] if window is not None else None
    f1 = family(R.i1, e[0], m[0], w1, convention)
    f2 = family(R.i2, e[1], m[1], w2, convention)
    return [DyadicRectangle(a, b) for a in f1 for b in f2]


def intervals_at_level(window: DyadicInterval, level: int) -> list[DyadicInterval]:
    return window.descendants(level - window.level)


def intervals_in(window: DyadicInterval, depth: int) -> list[DyadicInterval]:
    """All dyadic subintervals of ``window`` down to ``depth`` levels below it (exclusive)."""
    out = []
    for d in range(depth):
        out.extend(window.descendants(d))
    return out


def class_cardinality_bound(e: int) -> int:
    """Order-of-growth count ``2**max(e, 0)`` for the members of one class."""
    return 1 << max(e, 0)


def iter_pairs_by_class(intervals: Iterable[DyadicInterval], others: Iterable[DyadicInterval]):
    """Yield ``(I, J, e, m)`` with J in the literal class ``I_{e,m}``."""
    others = list(others)
    for I in intervals:
        for J in others:
            e = J.level - I.level
            r = Fraction(diam_union(I, J)) / Fraction(max(I.length, J.length))
            yield I, J, e, int(r)
