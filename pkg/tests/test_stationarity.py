"""SOSP verification on the truth view."""
from __future__ import annotations

import math

import numpy as np
import pytest

from sosputil import *
from sosputil.benchmarks import double_well, quadratic, saddle


def test_minimum_of_quadratic_is_sosp():
    bench = quadratic(d=3)
    report = check_sosp(bench.pair.truth_view, np.zeros(3), 0.1, 1.0)
    assert report.verdict
    assert report.method == "analytic"
    assert report.grad_norm == 0.0
    assert report.min_eig == pytest.approx(1.0)


def test_strict_saddle_is_rejected_only_for_small_eps():
    truth = saddle(d=3, gamma=0.1).pair.truth_view
    strict = check_sosp(truth, np.zeros(3), 1e-4, 1.0)
    assert not strict.verdict
    assert strict.min_eig == pytest.approx(-0.1)
    # sqrt(rho eps) = 0.316 tolerates the -0.1 direction
    assert check_sosp(truth, np.zeros(3), 0.1, 1.0).verdict


def test_large_gradient_fails():
    report = check_sosp(quadratic(d=2).pair.truth_view, np.array([1.0, 0.0]), 0.5, 1.0)
    assert not report.verdict
    assert report.grad_norm == pytest.approx(1.0)


def test_finite_difference_path_matches_analytic():
    bench = double_well()
    x = np.array([0.3, -0.2])
    analytic = check_sosp(bench.pair.truth_view, x, 0.1, 24.0)
    value_only = TruthBundle(value=lambda p: float(bench.pair.truth_view.value(p)))
    numeric = check_sosp(value_only, x, 0.1, 24.0)
    assert numeric.method == "finite-difference"
    assert numeric.grad_norm == pytest.approx(analytic.grad_norm, rel=1e-6)
    assert numeric.min_eig == pytest.approx(analytic.min_eig, abs=1e-3)


def test_hessian_from_grad_is_symmetric():
    grad = lambda x: np.array([2 * x[0] + x[1], x[0] + 6 * x[1] ** 2])
    H = hessian_from_grad(grad, np.array([0.5, 1.0]))
    np.testing.assert_allclose(H, H.T)
    np.testing.assert_allclose(H, [[2.0, 1.0], [1.0, 12.0]], atol=1e-6)


def test_finite_diff_grad_of_cubic():
    F = lambda x: float(x[0] ** 3 + x[0] * x[1])
    np.testing.assert_allclose(finite_diff_grad(F, np.array([1.0, 2.0])), [5.0, 1.0], atol=1e-8)
    with pytest.raises(ConfigError):
        finite_diff_grad(F, np.zeros(2), h=0.0)


def test_matrix_free_in_high_dimension():
    d = 100
    diag = np.linspace(-0.5, 2.0, d)
    truth = TruthBundle(value=lambda x: 0.5 * float(diag @ x**2), grad=lambda x: diag * x, hvp=lambda x, u: diag * u)
    report = check_sosp(truth, np.zeros(d), 0.01, 1.0)
    assert report.method == "matrix-free"
    assert report.min_eig == pytest.approx(-0.5, abs=1e-6)
    assert not report.verdict


def test_matrix_free_small_operator_is_dense():
    assert min_eig_matrix_free(lambda u: -3.0 * u, 1) == pytest.approx(-3.0)
    with pytest.raises(ConfigError):
        min_eig_matrix_free(lambda u: u, 0)


def test_hvp_of_zero_direction():
    np.testing.assert_array_equal(hvp_from_grad(lambda x: x, np.ones(2), np.zeros(2)), np.zeros(2))


def test_non_finite_gradient_raises():
    truth = TruthBundle(value=lambda x: 0.0, grad=lambda x: np.full(2, np.nan), hess=lambda x: np.eye(2))
    with pytest.raises(NonFiniteDerivative):
        check_sosp(truth, np.zeros(2), 0.1, 1.0)


def test_bad_tolerances():
    truth = quadratic(d=2).pair.truth_view
    with pytest.raises(ConfigError):
        check_sosp(truth, np.zeros(2), 0.0, 1.0)
    with pytest.raises(ConfigError):
        check_sosp(truth, np.zeros(2), 0.1, -1.0)


def test_report_serialises():
    out = check_sosp(quadratic(d=2).pair.truth_view, np.zeros(2), 0.1, 1.0).to_dict()
    assert set(out) == {"grad_norm", "min_eig", "eps", "rho", "verdict", "method", "eig_tol"}
    assert math.isfinite(out["eig_tol"])
