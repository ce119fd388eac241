from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadt1.dyadic import DyadicInterval as D, DyadicRectangle
from dyadt1.errors import PreconditionError
from dyadt1.norms import dyadic_bmo_norm, lp_norm, make_preatom, product_bmo_lowerbound, rect_bmo_norm
from dyadt1.signals import Signal1D, Signal2D, haar_forward

U = D(0, 0)
U2 = DyadicRectangle(U, U)


def brute_bmo(f: Signal1D) -> float:
    """Mean oscillation definition: sup_I (|I|^-1 int_I |f - f_I|^2)^{1/2}."""
    best = 0.0
    n = f.values.size
    for depth in range(f.J):
        w = n >> depth
        for o in range(1 << depth):
            seg = f.values[o * w:(o + 1) * w]
            best = max(best, float(np.mean((seg - seg.mean()) ** 2)))
    return best ** 0.5


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0, np.inf])
def test_lp_norm_of_unit_indicator(p):
    assert lp_norm(Signal1D(U, 4, np.ones(16)), p) == pytest.approx(1.0, abs=1e-15)


def test_lp_norm_examples():
    assert lp_norm(Signal1D.haar(U, 5, D(2, 1)), 2) == pytest.approx(1.0, abs=1e-14)
    assert lp_norm(Signal1D.indicator(U, 4, D(2, 0), 2.0), 1) == 0.5
    with pytest.raises(ValueError):
        lp_norm(Signal1D(U, 2, np.ones(4)), 0.5)


def test_bmo_examples():
    assert dyadic_bmo_norm(Signal1D(U, 5, np.full(32, 3.0))) == 0.0
    assert dyadic_bmo_norm(Signal1D.haar(U, 5, U)) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=32, max_size=32), st.floats(-10, 10))
def test_bmo_matches_mean_oscillation_and_is_homogeneous(v, c):
    f = Signal1D(U, 5, np.array(v))
    b = dyadic_bmo_norm(f)
    assert b == pytest.approx(brute_bmo(f), rel=1e-9, abs=1e-9)
    assert dyadic_bmo_norm(c * f) == pytest.approx(abs(c) * b, rel=1e-9, abs=1e-9)


def test_rect_and_product_bmo_of_unit_haar():
    f = Signal2D.tensor(Signal1D.haar(U, 4, U), Signal1D.haar(U, 4, U))
    assert rect_bmo_norm(f) == pytest.approx(1.0, abs=1e-13)
    assert product_bmo_lowerbound(f) == pytest.approx(1.0, abs=1e-13)
    assert product_bmo_lowerbound(Signal2D(U2, 3, 3, np.full((8, 8), 2.0))) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_rect_below_product_and_budget_monotone(seed):
    r = np.random.default_rng(seed)
    f = Signal2D(U2, 3, 3, r.standard_normal((8, 8)))
    rect = rect_bmo_norm(f)
    vals = [product_bmo_lowerbound(f, b) for b in (1, 2, 4, 8, 16)]
    assert rect <= vals[0] + 1e-12
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_tensor_rect_norm_factorises(rng):
    g1 = Signal1D(U, 4, rng.standard_normal(16))
    g2 = Signal1D(U, 4, rng.standard_normal(16))
    g1 = g1 * (1 / dyadic_bmo_norm(g1))
    g2 = g2 * (1 / dyadic_bmo_norm(g2))
    assert rect_bmo_norm(Signal2D.tensor(g1, g2)) == pytest.approx(1.0, rel=1e-12)


def test_preatom_properties():
    R = DyadicRectangle(D(1, 1), D(2, 2))
    W = DyadicRectangle(D(-1, 0), D(0, 0))
    a = make_preatom(R, W, 9, 9)
    m1, m2 = a.marginal_errors()
    assert m1 <= 1e-12 and m2 <= 1e-12
    assert a.slack == pytest.approx(1.0, rel=1e-12)
    assert all(v <= 1 + 1e-12 for v in a.derivative_bounds().values())
    f = a.values
    assert f.inner(f) ** 0.5 <= 1 + 1e-6
    c = haar_forward(f).array
    assert np.abs(c[0, :]).max() < 1e-12 and np.abs(c[:, 0]).max() < 1e-12


def test_preatom_window_precondition():
    R = DyadicRectangle(D(0, 0), D(0, 0))
    with pytest.raises(PreconditionError):
        make_preatom(R, U2, 8, 8)
