"""Benchmark registry and the declared landscapes."""
from __future__ import annotations

import math

import numpy as np
import pytest

from sosputil import *
from sosputil.benchmarks import add_benchmark, benchmark_names, corrupted_quadratic, ripple


def test_registry_lists_builders():
    assert benchmark_names() == sorted(
        ["constant", "corrupted-quadratic", "double-well", "quadratic", "quartic-ripple", "saddle"]
    )
    with pytest.raises(ConfigError):
        build_benchmark("nope")
    with pytest.raises(ConfigError):
        add_benchmark("quadratic")(lambda: None)


@pytest.mark.parametrize("name", ["quadratic", "double-well", "quartic-ripple", "saddle", "corrupted-quadratic"])
def test_truth_derivatives_are_consistent(name):
    bench = build_benchmark(name)
    truth = bench.pair.truth_view
    x = np.linspace(0.2, 0.7, bench.dim)
    np.testing.assert_allclose(truth.grad(x), finite_diff_grad(truth.value, x), atol=1e-7)
    np.testing.assert_allclose(truth.hess(x), hessian_from_grad(truth.grad, x), atol=1e-6)


@pytest.mark.parametrize("name", ["quadratic", "double-well", "quartic-ripple"])
def test_ripple_stays_within_nu(name):
    bench = build_benchmark(name, nu=0.01)
    X = RngStream(41).uniform(-1, 1, size=(1000, bench.dim))
    gap = np.abs(bench.pair.queries.values(X) - bench.pair.truth_view.evaluate_many(X))
    assert np.max(gap) <= 0.01 + 1e-15
    assert bench.pair.nu == 0.01


def test_ripple_gradient_matches_values():
    bench = build_benchmark("double-well", nu=0.01, tau=0.05)
    oracle = bench.pair.queries
    x = np.array([0.3, -0.4])
    np.testing.assert_allclose(oracle.grad(x), finite_diff_grad(oracle.value, x, h=1e-6), atol=1e-6)
    assert ripple(np.zeros((3, 2)), 0.5, 0.1).tolist() == [0.5, 0.5, 0.5]


def test_double_well_landscape():
    truth = build_benchmark("double-well").pair.truth_view
    assert not check_sosp(truth, np.zeros(2), 0.1, 24.0).verdict
    assert check_sosp(truth, np.array([1.0, 0.0]), 0.1, 24.0).verdict


def test_corrupted_quadratic_gradient_is_off():
    bench = corrupted_quadratic(d=2, corruption=0.1, omega=1000.0)
    x = np.full(2, math.pi / 2000.0)
    diff = bench.pair.queries.grad(x) - bench.pair.truth_view.grad(x)
    assert np.linalg.norm(diff) == pytest.approx(0.1)
    X = RngStream(42).uniform(-1, 1, size=(500, 2))
    gap = np.abs(bench.pair.queries.values(X) - bench.pair.truth_view.evaluate_many(X))
    assert np.max(gap) <= bench.pair.nu


def test_constant_and_saddle_shapes():
    const = build_benchmark("constant", d=3, value=2.0)
    assert const.pair.queries.values(np.zeros((4, 3))).tolist() == [2.0] * 4
    assert const.pair.truth_view.value(np.ones(3)) == 2.0
    with pytest.raises(ConfigError):
        build_benchmark("saddle", d=1)
    with pytest.raises(ConfigError):
        build_benchmark("quadratic", nu=-1.0)


def test_random_start_and_describe():
    bench = build_benchmark("double-well")
    x = bench.random_start(RngStream(43))
    assert x.shape == (2,)
    assert np.all(np.abs(x) <= 1.5)
    desc = bench.describe()
    assert desc["name"] == "double-well"
    assert desc["x0"] == [0.0, 0.5]
    assert bench.bound_B == pytest.approx(1.5)
    assert bench.pair.truth_view.bound_B == bench.bound_B
    assert np.linalg.norm(bench.x0) < bench.bound_B
