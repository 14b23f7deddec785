"""Gaussian smoothing estimators, their costs and the bound audits."""
from __future__ import annotations

import math

import numpy as np
import pytest

from sosputil import *
from sosputil.benchmarks import quadratic


def sq_norm_pair(d=3):
    F = lambda X: np.sum(np.square(X), axis=-1)
    truth = TruthBundle(value=F, grad=lambda x: 2 * x, hess=lambda x: 2 * np.eye(d), values=F, rho=1.0)
    return make_pair(F, d, F_eval=truth, grad_eval=lambda x: 2 * x, vectorized=True)


def test_grad_sample_costs_two_queries():
    pair = sq_norm_pair()
    g = grad_sample(pair.queries, np.ones(3), np.array([0.1, 0.0, 0.0]), 0.1)
    assert pair.query_counter == 2
    # z (f(x+z) - f(x)) / sigma^2 with f(x+z) - f(x) = 2 * 0.1 + 0.01
    np.testing.assert_allclose(g, [0.1 * 0.21 / 0.01, 0.0, 0.0])


def test_grad_estimate_costs_m_plus_one():
    pair = sq_norm_pair()
    grad_estimate(pair.queries, np.zeros(3), SmoothingConfig(sigma=0.1, batch=50), RngStream(0))
    assert pair.query_counter == 51


def test_grad_estimate_unbiased_on_squared_norm():
    pair = sq_norm_pair()
    rng = RngStream(11)
    cfg = SmoothingConfig(sigma=0.1, batch=200_000)
    for x in rng.uniform(-1, 1, size=(3, 3)):
        est = grad_estimate_with_error(pair.queries, x, cfg, rng)
        assert np.all(np.abs(est.mean - 2 * x) <= 5 * est.stderr)
        assert est.samples == 200_000


def test_slow_grad_estimate_ten_points_million_samples():
    pair = sq_norm_pair()
    rng = RngStream(1)
    cfg = SmoothingConfig(sigma=0.1, batch=1_000_000)
    for x in rng.uniform(-1, 1, size=(10, 3)):
        est = grad_estimate_with_error(pair.queries, x, cfg, rng)
        assert np.max(np.abs(est.mean - 2 * x)) <= 0.01


def test_smoothed_value_adds_d_sigma_squared():
    pair = sq_norm_pair()
    value = smoothed_value_estimate(pair.queries, np.zeros(3), SmoothingConfig(sigma=0.1, batch=100_000), RngStream(2))
    assert value == pytest.approx(3 * 0.01, abs=1e-3)
    assert pair.query_counter == 100_000


def test_smoothed_hessian_of_quadratic():
    pair = sq_norm_pair()
    est = smoothed_hessian_with_error(pair.queries, np.zeros(3), SmoothingConfig(sigma=0.2, batch=200_000), RngStream(3))
    np.testing.assert_array_equal(est.mean, est.mean.T)
    assert np.all(np.abs(est.mean - 2 * np.eye(3)) <= 5 * est.stderr + 1e-9)


def test_fpsgd_estimate_needs_gradient_oracle():
    pair = make_pair(lambda x: 0.0, 2)
    with pytest.raises(MissingGradientOracle):
        fpsgd_grad_estimate(pair.queries, np.zeros(2), SmoothingConfig(sigma=0.1, batch=2), RngStream(0))


def test_fpsgd_estimate_averages_gradients():
    pair = sq_norm_pair()
    x = np.array([0.5, -0.5, 1.0])
    g = fpsgd_grad_estimate(pair.queries, x, SmoothingConfig(sigma=0.1, batch=10_000), RngStream(4))
    assert pair.query_counter == 10_000
    np.testing.assert_allclose(g, 2 * x, atol=5 * 0.2 / math.sqrt(10_000))


def test_smoothing_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        SmoothingConfig(sigma=0.0)
    with pytest.raises(ConfigError):
        SmoothingConfig(sigma=0.1, batch=0)


def test_bounds_formulas():
    assert gradient_bound(2.0, 0.1, 0.5, 3) == pytest.approx(math.sqrt(2 / math.pi) * 0.2 + 2.0 * 3 * 0.25)
    assert hessian_bound(2.0, 0.1, 0.5, 4) == pytest.approx(2.0 * 2 * 0.5 + 0.8)


def test_verify_smoothing_bounds_on_rippled_quadratic():
    bench = quadratic(d=2, nu=0.01, tau=0.01)
    report = verify_smoothing_bounds(bench.pair, 0.01, 0.1, 5, RngStream(5), inner_samples=20_000)
    assert report.passed
    assert report.points == 5
    assert report.max_grad_deviation <= report.grad_bound + 1.0


def test_slow_smoothing_audit_full_size():
    bench = quadratic(d=2, nu=0.01, tau=0.01)
    report = verify_smoothing_bounds(bench.pair, 0.01, 0.1, 100, RngStream(6), inner_samples=1_000_000)
    assert report.passed


def test_subgaussian_tail_of_linear_function():
    a = np.array([1.0, 0.0])
    oracle = make_pair(lambda X: np.asarray(X) @ a, 2, vectorized=True).queries
    report = subgaussian_tail_audit(oracle, np.zeros(2), 0.5, 1.0, RngStream(7), direction=a, samples=50_000)
    assert report.thresholds == pytest.approx([2.0, 4.0, 6.0])
    assert report.passed


def test_variance_falls_like_one_over_m():
    pair = sq_norm_pair(d=2)
    out = variance_scaling(pair.queries, np.array([0.5, 0.5]), 0.1, RngStream(8), batches=(10, 100, 1000), repeats=60)
    assert out["slope"] == pytest.approx(-1.0, abs=0.3)
