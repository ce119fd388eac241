from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dyadt1.dyadic import (
    DyadicInterval as D,
    DyadicRectangle,
    diam_union,
    family,
    in_class,
    rect_family,
    symmetric_window,
)
from oracles import brute_family


def test_interval_geometry_is_exact():
    I = D(2, 3)
    assert I.exact_left() == Fraction(3, 4) and I.exact_right() == Fraction(1)
    assert I.parent() == D(1, 1)
    assert I.children() == (D(3, 6), D(3, 7))
    assert D(-3, 0).length == 8.0
    assert D.from_endpoints(Fraction(3, 4), 1) == I
    with pytest.raises(ValueError):
        D.from_endpoints(0, 3)
    with pytest.raises(ValueError):
        D.from_endpoints(Fraction(1, 4), Fraction(3, 4))


def test_ancestor_and_containment():
    I = D(4, 13)
    assert I.ancestor(0) == D(0, 0)
    assert D(0, 0).contains(I) and D(0, 0).strictly_contains(I)
    assert I.contains(I) and not I.strictly_contains(I)
    assert not D(1, 0).intersects(D(1, 1))


@pytest.mark.parametrize("a,b,expected", [
    (D(0, 0), D(0, 0), 1.0),
    (D(0, 0), D(0, 1), 2.0),
    (D(2, 0), D(1, 6), 3.5),
])
def test_diam_union_examples(a, b, expected):
    assert diam_union(a, b) == expected


def test_family_examples():
    window = (Fraction(-4), Fraction(4))
    assert family(D(0, 0), 0, 1, window) == [D(0, 0)]
    assert family(D(0, 0), 0, 2, window) == [D(0, -1), D(0, 1)]
    n = len(family(D(0, 0), 3, 2, window))
    assert 4 <= n <= 16


@pytest.mark.parametrize("e", [-3, -1, 0, 1, 2, 3])
@pytest.mark.parametrize("m", [1, 2, 3, 5])
@pytest.mark.parametrize("offset", [0, 1, 5])
def test_family_matches_brute_force(e, m, offset):
    lo, hi = symmetric_window(4)
    I = D(1, offset)
    got = [(J.level, J.offset) for J in family(I, e, m, (lo, hi))]
    assert got == brute_family(1, offset, e, m, lo, hi)


@settings(max_examples=60, deadline=None)
@given(st.integers(-2, 4), st.integers(-8, 8), st.integers(-3, 3), st.integers(1, 6))
def test_family_members_satisfy_predicate(level, offset, e, m):
    I = D(level, offset)
    for J in family(I, e, m):
        assert in_class(I, J, e, m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(-2, 2), st.integers(1, 4))
def test_tiled_convention_predicate(level, offset, e, m):
    I = D(level, offset)
    fam = family(I, e, m, convention="tiled")
    assert fam
    assert all(in_class(I, J, e, m, "tiled") for J in fam)


def test_rect_family_identity_and_product():
    R = DyadicRectangle(D(1, 0), D(2, 1))
    window = (D(-2, 0), D(-2, 0))
    assert rect_family(R, (0, 0), (1, 1), window) == [R]
    fam = rect_family(R, (1, -1), (2, 3), window)
    assert len(fam) == len(family(R.i1, 1, 2, window[0])) * len(family(R.i2, -1, 3, window[1]))


def test_rect_family_symmetry_brute_force():
    # all rectangles at resolution 2^4 inside the unit square, a few eccentricities
    ivs = [D(l, o) for l in range(0, 3) for o in range(1 << l)]
    rects = [DyadicRectangle(a, b) for a in ivs for b in ivs]
    W = (D(0, 0), D(0, 0))
    for e in [(0, 1), (1, -1), (2, 0)]:
        for m in [(1, 1), (1, 2)]:
            for R in rects:
                for S in rect_family(R, e, m, W):
                    if W[0].contains(S.i1) and W[1].contains(S.i2):
                        assert R in rect_family(S, (-e[0], -e[1]), m, W)
