from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadt1.dyadic import DyadicInterval as D, DyadicRectangle
from dyadt1.errors import ConfigError
from dyadt1.signals import Signal1D, Signal2D, StepFunction2D, haar_forward, max_abs_diff
from dyadt1.square_functions import (
    ShiftSpec,
    class_comparison,
    double_class_square_fn,
    double_modified_square_fn,
    double_shift_op,
    double_square_fn,
    double_square_fn_line,
    empirical_opnorm,
    identity_spec,
    injective_spec,
    lp_bound,
    modified_square_fn,
    shift_op,
    shifted_levels,
    square_fn,
    square_fn_line,
)
from oracles import naive_square_fn

U = D(0, 0)
U2 = DyadicRectangle(U, U)


def step2(f: Signal2D) -> StepFunction2D:
    a1, a2 = f.axes
    return StepFunction2D(a1.edges, a2.edges, f.values)


def test_square_fn_of_single_haar():
    np.testing.assert_allclose(square_fn(Signal1D.haar(U, 4, U)).values, 1.0, atol=1e-14)


def test_square_fn_of_two_disjoint_haars():
    f = Signal1D.haar(U, 4, D(1, 0)) + Signal1D.haar(U, 4, D(1, 1))
    np.testing.assert_allclose(square_fn(f).values, np.sqrt(2.0), atol=1e-14)


@pytest.mark.parametrize("window", [D(0, 0), D(-1, 1), D(2, 3)])
def test_square_fn_matches_naive_oracle(window, rng):
    f = Signal1D(window, 6, rng.standard_normal(64))
    np.testing.assert_allclose(square_fn(f).values, naive_square_fn(f.values, window.left, window.right), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=32, max_size=32))
def test_square_fn_plancherel(v):
    f = Signal1D(U, 5, np.array(v))
    detail = f - Signal1D(U, 5, np.full(32, np.mean(v)))
    s = square_fn(f)
    assert abs(s.inner(s) - detail.inner(detail)) <= 1e-10 * max(1.0, f.inner(f))


def test_identity_modified_square_fn_is_classical(rng):
    f = Signal1D(U, 7, rng.standard_normal(128))
    assert max_abs_diff(modified_square_fn(f, identity_spec()), square_fn(f).to_step()) <= 1e-12


def test_identity_shift_is_detail_projection(rng):
    f = Signal1D(U, 6, rng.standard_normal(64))
    g = shift_op(f, identity_spec()).to_signal(U, 6)
    np.testing.assert_allclose(g.values, f.values - f.values.mean(), atol=1e-12)


def test_single_coefficient_shift_k1():
    I = D(2, 1)
    spec = ShiftSpec(1, 1)
    J = spec.select_one(I)
    assert J.level == 3
    S = modified_square_fn(Signal1D.haar(U, 6, I), spec)
    np.testing.assert_allclose(S.evaluate([J.center]), [np.sqrt(2.0) * I.length ** -0.5], rtol=1e-13)
    assert S.evaluate([I.left - 5.0])[0] == 0.0


@pytest.mark.parametrize("k", range(-4, 5))
@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_square_of_shift_equals_modified_square(k, n, rng):
    f = Signal1D(U, 7, rng.standard_normal(128))
    spec = injective_spec(k, n)
    lhs = square_fn_line(shift_op(f, spec), shifted_levels(f, spec))
    assert max_abs_diff(lhs, modified_square_fn(f, spec)) <= 1e-12 * max(1.0, np.abs(f.values).max())


@pytest.mark.parametrize("k", range(-4, 5))
@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_shift_adjoint(k, n, rng):
    f = Signal1D(U, 7, rng.standard_normal(128))
    g = Signal1D(U, 7, rng.standard_normal(128))
    spec = injective_spec(k, n)
    lhs = shift_op(f, spec).inner(g)
    rhs = f.to_step().inner(shift_op(g, spec.reverse()))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@pytest.mark.parametrize("k", [0, 1, 3])
@pytest.mark.parametrize("n", [1, 2, 5])
def test_leftmost_shift_is_isometry_on_details(k, n, rng):
    f = Signal1D(U, 6, rng.standard_normal(64))
    T = shift_op(f, ShiftSpec(k, n))
    c = haar_forward(f).array
    assert T.inner(T) == pytest.approx(float(np.sum(c[1:] ** 2)), rel=1e-12)


def test_non_injective_selector_breaks_the_square_identity(rng):
    # two sibling intervals sent to the same coarser interval add coefficients before squaring
    f = Signal1D(U, 7, rng.standard_normal(128))
    spec = ShiftSpec(-2, 1)
    lhs = square_fn_line(shift_op(f, spec), shifted_levels(f, spec))
    assert max_abs_diff(lhs, modified_square_fn(f, spec)) > 1e-3


def test_random_selector_is_seeded(rng):
    f = Signal1D(U, 6, rng.standard_normal(64))
    a = modified_square_fn(f, ShiftSpec(-2, 3, "random", seed=5))
    b = modified_square_fn(f, ShiftSpec(-2, 3, "random", seed=5))
    assert max_abs_diff(a, b) == 0.0
    with pytest.raises(ConfigError):
        ShiftSpec(-2, 3, "random").reverse()


def test_bad_specs():
    with pytest.raises(ConfigError):
        ShiftSpec(1, 1, "identity")
    with pytest.raises(ConfigError):
        ShiftSpec(0, 0)
    with pytest.raises(ConfigError):
        ShiftSpec(0, 1, "nearest")


@pytest.mark.parametrize("k", [-3, -1, 0])
@pytest.mark.parametrize("n", [1, 3])
def test_class_comparison_pointwise(k, n, rng):
    f = Signal1D(U, 6, rng.standard_normal(64))
    lhs, rhs, card = class_comparison(f, k, n)
    xb = np.union1d(lhs.breaks, rhs.breaks)
    assert np.all(lhs.refine(xb) <= rhs.refine(xb) * (1 + 1e-12) + 1e-12)
    assert card >= 1


def test_double_square_fn_of_haar_rectangle():
    R = DyadicRectangle(D(1, 0), D(2, 3))
    f = Signal2D.tensor(Signal1D.haar(U, 4, R.i1), Signal1D.haar(U, 4, R.i2))
    S = double_square_fn(f).values
    inside = np.outer(Signal1D.indicator(U, 4, R.i1).values, Signal1D.indicator(U, 4, R.i2).values)
    np.testing.assert_allclose(S, inside * R.area ** -0.5, atol=1e-13)
    unit = Signal2D.tensor(Signal1D.haar(U, 4, U), Signal1D.haar(U, 4, U))
    np.testing.assert_allclose(double_square_fn(unit).values, 1.0, atol=1e-13)


@pytest.mark.parametrize("k", [(0, 0), (1, 0), (2, 3), (4, 1)])
@pytest.mark.parametrize("n", [(1, 1), (2, 4), (8, 1)])
def test_double_class_scaling_identity(k, n, rng):
    f = Signal2D(U2, 5, 5, rng.standard_normal((32, 32)))
    lhs = double_class_square_fn(f, k, n, convention="tiled")
    base = double_class_square_fn(f, (0, 0), n, convention="tiled")
    scaled = base.map(lambda v: v * 2.0 ** ((k[0] + k[1]) / 2))
    assert lhs.max_abs_diff(scaled) <= 1e-12 * max(1.0, np.abs(scaled.values).max())


@pytest.mark.parametrize("k", [(-2, 1), (0, 0), (3, -1)])
@pytest.mark.parametrize("n", [(1, 2), (4, 8)])
def test_double_shift_factorisation_and_square(k, n, rng):
    f = Signal2D(U2, 4, 4, rng.standard_normal((16, 16)))
    s1, s2 = injective_spec(k[0], n[0]), injective_spec(k[1], n[1])
    a = double_shift_op(f, s1, s2, order="21")
    b = double_shift_op(f, s1, s2, order="12")
    assert a.max_abs_diff(b) <= 1e-12
    lv1 = range(k[0], k[0] + 4)
    lv2 = range(k[1], k[1] + 4)
    lhs = double_square_fn_line(a, lv1, lv2)
    assert lhs.max_abs_diff(double_modified_square_fn(f, s1, s2)) <= 1e-12


@pytest.mark.parametrize("k", [(-2, 1), (1, 1), (3, -4)])
@pytest.mark.parametrize("n", [(1, 2), (8, 4)])
def test_double_shift_adjoint(k, n, rng):
    f = Signal2D(U2, 4, 4, rng.standard_normal((16, 16)))
    g = Signal2D(U2, 4, 4, rng.standard_normal((16, 16)))
    s1, s2 = injective_spec(k[0], n[0]), injective_spec(k[1], n[1])
    lhs = double_shift_op(f, s1, s2).inner(step2(g))
    rhs = step2(f).inner(double_shift_op(g, s1.reverse(), s2.reverse()))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_opnorm_identity_and_square_fn():
    assert empirical_opnorm(lambda f: f, 3.0, 12, 0) == pytest.approx(1.0, abs=1e-12)
    assert empirical_opnorm(square_fn, 2.0, 12, 0) <= 1 + 1e-9


def test_opnorm_is_deterministic():
    op = lambda f: modified_square_fn(f, ShiftSpec(2, 4))
    assert empirical_opnorm(op, 4.0, 9, 3) == empirical_opnorm(op, 4.0, 9, 3)


@pytest.mark.slow
def test_lp_growth_shape_small_grid():
    ratios = []
    for k in range(0, 7, 2):
        for n in (2, 8, 64):
            op = lambda f, s=ShiftSpec(k, n): modified_square_fn(f, s)
            ratios.append(empirical_opnorm(op, 4.0, 9, 11, J=8) / lp_bound(k, n, 4.0))
    assert max(ratios) <= 10.0


def test_lp_bound_formula():
    assert lp_bound(0, 1, 2.0) == pytest.approx(np.sqrt(np.log(2) + 1))
    assert lp_bound(-3, 1, 2.0) == 1.0
    assert lp_bound(-3, 1, 4.0) == pytest.approx((8 + np.log(2) + 1) ** 0.5)
