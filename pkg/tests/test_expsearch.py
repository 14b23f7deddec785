"""Covers, probe fits and the exhaustive certifier."""
from __future__ import annotations

import math

import numpy as np
import pytest

from sosputil import *
from sosputil.benchmarks import quadratic, quartic_ripple
from sosputil.expsearch import (
    ProbeDesign,
    ball_cover,
    feasibility_probe,
    iter_ball_cover,
    matrix_cover,
    sphere_cover,
)


def nearest_distance(points, cover):
    return np.min(np.linalg.norm(points[:, None, :] - cover[None, :, :], axis=2), axis=1)


def test_ball_cover_resolution():
    cover = ball_cover(2, 1.0, 0.3)
    pts = RngStream(31).uniform_ball(2, 1.0, count=500)
    assert np.max(nearest_distance(pts, cover)) <= 0.3


def test_ball_cover_is_lexicographic():
    blocks = list(iter_ball_cover(2, 1.0, 0.5, block=7))
    assert [start for start, _ in blocks] == list(range(0, blocks[-1][0] + 1, 7))
    pts = np.vstack([p for _, p in blocks])
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    np.testing.assert_array_equal(order, np.arange(pts.shape[0]))


def test_cover_cap():
    with pytest.raises(CoverTooLarge):
        ball_cover(3, 10.0, 0.01, cap=1000)


def test_matrix_cover_size_and_resolution():
    cover = matrix_cover(2, 1.0, 1.0)
    assert cover.shape == (2401, 2, 2)
    rng = RngStream(32)
    for _ in range(5):
        M = rng.normal((2, 2))
        M = 0.5 * (M + M.T)
        M /= max(1.0, np.linalg.norm(M, 2))
        dist = min(np.linalg.norm(C - M, 2) for C in cover)
        assert dist <= 1.0


def test_sphere_cover():
    assert sphere_cover(1).tolist() == [[-1.0], [1.0]]
    cover = sphere_cover(2, 0.1)
    np.testing.assert_allclose(np.linalg.norm(cover, axis=1), 1.0)
    mirrored = {tuple(np.round(-z, 12)) for z in cover}
    assert mirrored == {tuple(np.round(z, 12)) for z in cover}
    u = RngStream(33).unit_vectors(500, 2)
    assert np.max(nearest_distance(u, cover)) <= 0.1


def test_probe_fit_recovers_quadratic_model():
    A = np.array([[2.0, 0.5], [0.5, -1.0]])
    b = np.array([0.3, -0.2])
    pair = make_pair(lambda X: 1.0 + X @ b + 0.5 * np.einsum("...i,ij,...j->...", X, A, X), 2, vectorized=True)
    x = np.array([0.4, 0.1])
    sphere = sphere_cover(2, 0.1)
    result = feasibility_probe(pair.queries, x, 0.2, sphere, nu=0.0, rho=1.0)
    assert result is not None
    np.testing.assert_allclose(result.g, b + A @ x, atol=1e-9)
    np.testing.assert_allclose(result.H, A, atol=1e-8)
    assert pair.query_counter == 1 + sphere.shape[0]
    assert result.in_guarantee_regime


def test_probe_rejects_strong_cubic():
    pair = make_pair(lambda X: 1000.0 * X[..., 0] ** 3, 2, vectorized=True)
    assert feasibility_probe(pair.queries, np.zeros(2), 0.1, sphere_cover(2, 0.1), nu=0.0, rho=1e-3) is None


def test_degenerate_probe_design():
    with pytest.raises(IllConditionedProbe):
        ProbeDesign(np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]]), 0.1)
    with pytest.raises(ConfigError):
        ProbeDesign(sphere_cover(2, 0.1), 0.0)


def test_search_on_quartic_ripple():
    bench = quartic_ripple(nu=1e-6)
    result = exhaustive_sosp_search(bench.pair.queries, 1, 0.3, bench.ell, bench.rho, bench.bound_B, nu=1e-6)
    assert result.cover_size == 269
    assert result.index == result.points_tried - 1
    assert -0.85 < result.point[0] < -0.75
    assert result.queries == 256 * 3
    truth = bench.pair.truth_view
    assert abs(truth.grad(result.point)[0]) <= 2 * 0.3
    assert truth.hess(result.point)[0, 0] >= -2 * math.sqrt(24 * 0.3)


def test_enumeration_mode_accepts_no_later_point():
    bench = quartic_ripple(nu=1e-6)
    args = (1, 0.3, bench.ell, bench.rho, bench.bound_B)
    fitted = exhaustive_sosp_search(bench.pair.queries, *args, nu=1e-6)
    listed = exhaustive_sosp_search(bench.pair.queries, *args, nu=1e-6, mode="enumerate")
    assert listed.index <= fitted.index
    assert listed.H.shape == (1, 1)


def test_search_on_quadratic_in_two_dimensions():
    bench = quadratic(d=2)
    result = exhaustive_sosp_search(bench.pair.queries, 2, 0.5, 1.5, 1.0, 1.0, nu=0.0)
    spacing = 0.5 / (1.5 * math.sqrt(2))
    np.testing.assert_allclose(result.point, [-4 * spacing, -spacing])
    np.testing.assert_allclose(result.H, np.eye(2), atol=1e-8)
    assert np.linalg.norm(result.g) <= 1.0


def test_search_exhausted_on_steep_slope():
    oracle = make_pair(lambda X: 10.0 * X[..., 0], 1, vectorized=True).queries
    with pytest.raises(SearchExhausted):
        exhaustive_sosp_search(oracle, 1, 0.3, 1.0, 1.0, 0.3, nu=0.0)


def test_search_argument_checks():
    oracle = quadratic(d=2).pair.queries
    with pytest.raises(ConfigError):
        exhaustive_sosp_search(oracle, 4, 0.1, 1.0, 1.0, 1.0, nu=0.0)
    with pytest.raises(ConfigError):
        exhaustive_sosp_search(oracle, 2, 0.1, 1.0, 1.0, 1.0, nu=0.0, mode="enumerate")
    with pytest.raises(CoverTooLarge):
        exhaustive_sosp_search(oracle, 2, 0.1, 1.0, 1.0, 1.0, nu=0.0, cap=10)
