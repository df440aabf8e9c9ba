"""Tests for sampled functions and monotone inversion"""
import numpy as np
import pytest

from debond.errors import DomainError, RangeError
from debond.func1d import (
    MonotoneMap,
    SampledFunction,
    antiderivative,
    cumulative_integral,
    definite_integral,
    derivative,
    evaluate,
    invert,
    linear_combination,
)


def test_evaluate_constant():
    assert evaluate(SampledFunction.constant(2.0, 0.0, 1.0), 0.5) == 2.0


def test_evaluate_interpolates_linearly():
    assert evaluate(SampledFunction([0, 1], [0, 1]), 0.25) == pytest.approx(0.25)
    assert evaluate(SampledFunction([0, 2], [0, 4]), 1.0) == pytest.approx(2.0)


def test_evaluate_vectorised():
    fn = SampledFunction([0, 2], [0, 4])
    np.testing.assert_allclose(fn(np.array([0.0, 0.5, 2.0])), [0.0, 1.0, 4.0])


def test_evaluate_outside_domain_raises():
    fn = SampledFunction([0, 1], [0, 1])
    with pytest.raises(DomainError):
        fn(1.5)
    with pytest.raises(DomainError):
        fn(-0.1)


def test_endpoint_roundoff_is_absorbed():
    fn = SampledFunction([0, 1], [0, 1])
    assert fn(1.0 + 1e-13) == pytest.approx(1.0)


def test_rejects_bad_samples():
    with pytest.raises(ValueError):
        SampledFunction([0, 0], [1, 2])
    with pytest.raises(ValueError):
        SampledFunction([0], [1])
    with pytest.raises(ValueError):
        SampledFunction([0, 1], [0, np.nan])


def test_definite_integral_examples():
    two = SampledFunction.constant(2.0, 0.0, 1.0)
    assert definite_integral(two, 0, 1) == pytest.approx(2.0)
    assert definite_integral(two, 1, 0) == pytest.approx(-2.0)
    assert definite_integral(SampledFunction([0, 2], [0, 4]), 0, 2) == pytest.approx(4.0)


def test_definite_integral_partial_segments():
    fn = SampledFunction([0, 1, 2], [0, 1, 0])
    assert fn.integral(0.5, 1.5) == pytest.approx(0.75)


def test_antiderivative_scalar_and_array():
    fn = SampledFunction([0, 1, 2], [0, 1, 0])
    assert antiderivative(fn, 1.5) == pytest.approx(0.875)
    np.testing.assert_allclose(antiderivative(fn, np.array([0.0, 1.0, 2.0])), [0.0, 0.5, 1.0])
    with pytest.raises(DomainError):
        antiderivative(fn, 2.5)


def test_integral_outside_domain_raises():
    with pytest.raises(DomainError):
        definite_integral(SampledFunction([0, 1], [0, 1]), 0, 2)


def test_cumulative_integral_matches_definite_integral():
    x = np.linspace(0, 1, 51)
    fn = SampledFunction(x, np.cos(3 * x))
    anti = cumulative_integral(fn, c0=1.0)
    for b in (0.2, 0.5, 1.0):
        assert anti(b) == pytest.approx(1.0 + fn.integral(0, b), abs=1e-12)


def test_derivative_examples():
    assert np.all(derivative(SampledFunction.constant(3.0, 0, 1)).values == 0.0)
    np.testing.assert_allclose(derivative(SampledFunction([0, 1], [0, 2])).values, 2.0)

    x = np.arange(0, 1.0005, 1e-3)
    assert derivative(SampledFunction(x, x ** 2))(0.5) == pytest.approx(1.0, abs=1e-3)


def test_linear_combination_uses_union_grid():
    f = SampledFunction([0, 1], [0, 1])
    g = SampledFunction([0, 0.5, 1], [0, 1, 0])
    h = linear_combination(1.0, f, -2.0, g)
    np.testing.assert_allclose(h.abscissae, [0, 0.5, 1])
    np.testing.assert_allclose(h.values, [0, -1.5, 1])


def test_restrict_keeps_values():
    fn = SampledFunction([0, 1, 2], [0, 2, 0])
    r = fn.restrict(0.5, 1.5)
    assert r.domain == (0.5, 1.5)
    assert r(1.0) == pytest.approx(2.0)


def test_invert_examples():
    identity = MonotoneMap.from_samples([0, 1], [0, 1])
    assert invert(identity, 0.7) == pytest.approx(0.7)

    t = np.linspace(0, 5, 11)
    tau_plus = MonotoneMap.from_samples(t, t + 1.0)
    assert invert(tau_plus, 3.0) == pytest.approx(2.0)

    tau_minus = MonotoneMap.from_samples(t, 0.4 * t - 1.0)
    assert invert(tau_minus, 0.0) == pytest.approx(2.5)


def test_invert_outside_range_raises():
    m = MonotoneMap.from_samples([0, 1], [0, 2])
    with pytest.raises(RangeError):
        m.inverse(2.5)


def test_monotone_map_requires_increasing_values():
    with pytest.raises(ValueError):
        MonotoneMap.from_samples([0, 1, 2], [0, 1, 1])


def test_inverse_round_trip_random_maps():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(2, 200))
        x = np.cumsum(rng.uniform(0.01, 1.0, n))
        v = np.cumsum(rng.uniform(0.01, 2.0, n))
        m = MonotoneMap.from_samples(x, v)
        t = rng.uniform(x[0], x[-1], 1000)
        span = x[-1] - x[0]
        np.testing.assert_allclose(m.inverse(m(t)), t, atol=1e-10 * span)
