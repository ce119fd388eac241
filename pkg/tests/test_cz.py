from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadt1.cz import (
    check_cz,
    cz_decompose,
    low_oscillation_sum,
    weak_type_bound,
    weak_type_constant,
    weak_type_experiment,
)
from dyadt1.dyadic import DyadicInterval as D
from dyadt1.errors import PreconditionError
from dyadt1.signals import Signal1D, cell_range
from dyadt1.square_functions import ShiftSpec
from oracles import brute_maximal_intervals

U = D(0, 0)


def test_large_lambda_gives_no_bad_part(rng):
    f = Signal1D(U, 6, rng.standard_normal(64))
    s = cz_decompose(f, float(np.abs(f.values).max()))
    assert s.bad_pieces == [] and s.bad_set_measure == 0
    np.testing.assert_array_equal(s.good.values, f.values)


def test_hand_worked_tree_walk():
    f = Signal1D.indicator(U, 4, D(2, 0), 4.0)
    s = cz_decompose(f, 2.0)
    assert s.intervals == [D(2, 0)]
    np.testing.assert_array_equal(s.good.values, f.values)
    assert np.abs(s.bad().values).max() == 0
    assert s.bad_set_measure == 0.25 <= 0.5


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1.001, 20.0))
def test_invariants_and_maximal_family(seed, factor):
    r = np.random.default_rng(seed)
    v = r.standard_normal(64) * (r.random(64) < 0.3) * r.exponential(5.0, 64)
    f = Signal1D(U, 6, v)
    avg = float(np.abs(v).mean())
    lam = max(avg, 1e-9) * factor
    s = cz_decompose(f, lam)
    report = check_cz(f, s)
    # m + (f - m) can differ from f by one rounding
    assert report["additivity"] <= 4e-16
    assert report["good_sup_excess"] == 0.0
    assert report["measure_excess"] == 0.0
    assert report["mean_zero"] <= 1e-12 and report["support"] == 0.0 and report["overlap"] == 0.0
    expected = [D(d, o) for d, o in brute_maximal_intervals(v, lam)]
    assert sorted(s.intervals) == sorted(expected)


def test_lambda_must_be_positive_and_above_average():
    f = Signal1D(U, 3, np.ones(8))
    with pytest.raises(PreconditionError):
        cz_decompose(f, 0.0)
    with pytest.raises(PreconditionError):
        cz_decompose(f, 0.5)


def test_low_oscillation_haar_is_zero():
    W = D(-2, 0)
    Ip = D(1, 3)
    f = Signal1D.haar(W, 10, Ip)
    total, ratio = low_oscillation_sum(f, Ip, bumps="haar")
    assert total == 0.0 and ratio == 0.0


def test_low_oscillation_is_homogeneous():
    W = D(-2, 0)
    Ip = D(1, 3)
    f = Signal1D.haar(W, 10, Ip)
    base, _ = low_oscillation_sum(f, Ip)
    scaled, _ = low_oscillation_sum(-3.5 * f, Ip)
    assert scaled == pytest.approx(3.5 * base, rel=1e-13)


def spike_pair(W: D, J: int, Ip: D) -> Signal1D:
    lo, hi = cell_range(W, J, Ip)
    f = Signal1D.zeros(W, J)
    f.values[lo] = 1.0
    f.values[hi - 1] = -1.0
    return f


def test_low_oscillation_ratio_is_scale_stable():
    W = D(-2, 0)
    ratios = []
    for lvl in range(1, 6):
        Ip = D(lvl, 3 << (lvl - 1))  # left edge at 1.5
        _, r = low_oscillation_sum(spike_pair(W, 12, Ip), Ip)
        ratios.append(r)
    assert max(ratios) < 5.0
    assert max(ratios) / min(ratios) < 3.0


def test_low_oscillation_preconditions():
    W = D(-2, 0)
    f = Signal1D.indicator(W, 8, D(1, 3))
    with pytest.raises(PreconditionError):
        low_oscillation_sum(f, D(1, 3))
    with pytest.raises(PreconditionError):
        low_oscillation_sum(spike_pair(W, 8, D(1, 3)), D(1, 1))


def test_haar_weak_type_constant_closed_form():
    I = D(2, 1)
    f = Signal1D.haar(U, 8, I)
    # S f = |I|^{-1/2} on I, ||f||_1 = |I|^{1/2}: lambda |{S f > lambda}| / ||f||_1 -> 1 from below
    c = weak_type_constant(f, ShiftSpec(0, 1))
    assert c == pytest.approx(1.0, rel=1e-12)


def test_weak_type_homogeneity(rng):
    f = Signal1D(U, 7, rng.standard_normal(128))
    spec = ShiftSpec(-1, 3)
    assert weak_type_constant(2 * f, spec) == pytest.approx(weak_type_constant(f, spec), rel=1e-12)


def test_weak_type_experiment_serial_equals_parallel():
    from concurrent.futures import ThreadPoolExecutor

    serial = weak_type_experiment([-1, 2], [1, 4], 3, 7, J=7)
    with ThreadPoolExecutor(2) as ex:
        parallel = weak_type_experiment([-1, 2], [1, 4], 3, 7, J=7, executor=ex)
    assert serial == parallel
    for k, n, c, _ in serial:
        assert c / weak_type_bound(k, n) <= 10.0


def test_weak_type_bound_formula():
    assert weak_type_bound(0, 1) == 2.0
    assert weak_type_bound(-3, 4) == 33.0
    assert math.isclose(weak_type_bound(2, 4), 2.0)
