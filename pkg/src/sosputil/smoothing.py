"""
Gaussian smoothing of f.

For z ~ N(0, sigma^2 I) the smoothed surrogate f~(x) = E f(x + z) is differentiable even
when f is not, and its derivatives can be estimated from value queries alone:

    grad f~(x) = E[ z (f(x+z) - f(x)) ] / sigma^2
    hess f~(x) = E[ (z z^T - sigma^2 I) f(x+z) ] / sigma^4

All estimators run through one chunked accumulator that keeps a running mean and
sum of squared deviations, so large batches never materialise m x d x d arrays and
every estimate comes with its standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, MissingGradientOracle
from .logger import logs
from .oracle import FunctionPairOracle, Matrix, QueryOracle, RngStream, Vector, draw_gaussian
from .stationarity import finite_diff_grad, finite_diff_hessian, hessian_from_grad
from .util import loglog_slope

CHUNK_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class SmoothingConfig:
    """Smoothing radius sigma and mini-batch size m."""

    sigma: float
    batch: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("sigma", self.sigma, "sigma > 0")
        if self.batch < 1:
            raise ConfigError("batch", self.batch, "batch >= 1")


@dataclass
class Estimate:
    """Monte Carlo mean with per-entry standard error."""

    mean: np.ndarray
    stderr: np.ndarray
    samples: int


class _RunningMoments:
    """Chunk-wise mean / M2 accumulator (pairwise update), deterministic for a fixed chunking."""

    def __init__(self, width: int):
        self.n = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def push(self, chunk: np.ndarray) -> None:
        nb = chunk.shape[0]
        if nb == 0:
            return
        chunk_mean = chunk.mean(axis=0)
        chunk_m2 = ((chunk - chunk_mean) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, chunk_mean, chunk_m2
            return
        total = self.n + nb
        delta = chunk_mean - self.mean
        self.mean = self.mean + delta * (nb / total)
        self.m2 = self.m2 + chunk_m2 + delta**2 * (self.n * nb / total)
        self.n = total

    def result(self) -> Estimate:
        if self.n > 1:
            stderr = np.sqrt(self.m2 / (self.n - 1) / self.n)
        else:
            stderr = np.full_like(self.mean, np.inf)
        return Estimate(mean=self.mean, stderr=stderr, samples=self.n)


def _chunk_size(width: int) -> int:
    return max(1, CHUNK_ELEMENTS // max(1, width))


def _check_batch(count: int) -> None:
    if count < 1:
        raise ConfigError("batch", count, "batch >= 1")


def _accumulate(
    oracle: QueryOracle,
    x: Vector,
    sigma: float,
    count: int,
    rng: RngStream,
    kind: str,
) -> Estimate:
    _check_batch(count)
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    width = {"grad": d, "fo_grad": d, "value": 1, "hessian": d * d}[kind]
    chunk = _chunk_size(width * 2)
    moments = _RunningMoments(width)
    fx = oracle.value(x) if kind == "grad" else 0.0
    eye = np.eye(d)
    remaining = count
    while remaining > 0:
        n = min(chunk, remaining)
        z = draw_gaussian(rng, d, sigma, count=n)
        if kind == "fo_grad":
            samples = oracle.grads(x + z)
        else:
            fz = oracle.values(x + z)
            if kind == "grad":
                samples = z * ((fz - fx) / sigma**2)[:, None]
            elif kind == "value":
                samples = fz[:, None]
            else:
                outer = z[:, :, None] * z[:, None, :] - sigma**2 * eye
                samples = (outer * (fz / sigma**4)[:, None, None]).reshape(n, d * d)
        moments.push(samples)
        remaining -= n
    return moments.result()


def grad_sample(oracle: QueryOracle, x: Vector, z: Vector, sigma: float) -> Vector:
    """Single-sample estimator z (f(x+z) - f(x)) / sigma^2; costs exactly two value queries."""
    if not sigma > 0:
        raise ConfigError("sigma", sigma, "sigma > 0")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ConfigError("z", z, "finite perturbation")
    fx = oracle.value(x)
    fxz = oracle.value(x + z)
    return z * ((fxz - fx) / sigma**2)


def grad_estimate_with_error(oracle: QueryOracle, x: Vector, cfg: SmoothingConfig, rng: RngStream) -> Estimate:
    return _accumulate(oracle, x, cfg.sigma, cfg.batch, rng, "grad")


def grad_estimate(oracle: QueryOracle, x: Vector, cfg: SmoothingConfig, rng: RngStream) -> Vector:
    """
    Mini-batch estimate of grad f~_sigma(x): the mean of m single-sample estimators
    sharing one evaluation of f(x). Costs m + 1 value queries.
    """
    return grad_estimate_with_error(oracle, x, cfg, rng).mean


def smoothed_value_estimate(oracle: QueryOracle, x: Vector, cfg: SmoothingConfig, rng: RngStream) -> float:
    """Unbiased estimate of f~_sigma(x) from m draws; m value queries."""
    return float(_accumulate(oracle, x, cfg.sigma, cfg.batch, rng, "value").mean[0])


def smoothed_hessian_with_error(oracle: QueryOracle, x: Vector, cfg: SmoothingConfig, rng: RngStream) -> Estimate:
    est = _accumulate(oracle, x, cfg.sigma, cfg.batch, rng, "hessian")
    d = np.asarray(x).shape[0]
    mean = est.mean.reshape(d, d)
    est.mean = 0.5 * (mean + mean.T)
    est.stderr = est.stderr.reshape(d, d)
    return est


def smoothed_hessian_estimate(oracle: QueryOracle, x: Vector, cfg: SmoothingConfig, rng: RngStream) -> Matrix:
    """Estimate of the Hessian of f~_sigma at x from m value queries, symmetrised after averaging."""
    return smoothed_hessian_with_error(oracle, x, cfg, rng).mean


def fpsgd_grad_estimate(oracle: QueryOracle, x: Vector, cfg: SmoothingConfig, rng: RngStream) -> Vector:
    """Mean of m gradient-oracle calls at x + z, z ~ N(0, sigma^2 I); m gradient queries."""
    if not oracle.has_grad:
        raise MissingGradientOracle("fpsgd_grad_estimate")
    return _accumulate(oracle, x, cfg.sigma, cfg.batch, rng, "fo_grad").mean


def gradient_bound(rho: float, nu: float, sigma: float, d: int) -> float:
    """Deviation bound between grad f~_sigma and grad F: sqrt(2/pi) nu / sigma + rho d sigma^2."""
    return math.sqrt(2.0 / math.pi) * nu / sigma + rho * d * sigma**2


def hessian_bound(rho: float, nu: float, sigma: float, d: int) -> float:
    """Deviation bound between hess f~_sigma and hess F: rho sqrt(d) sigma + 2 nu / sigma^2."""
    return rho * math.sqrt(d) * sigma + 2.0 * nu / sigma**2


@dataclass
class SmoothingBoundsReport:
    sigma: float
    nu: float
    rho: float
    grad_bound: float
    hess_bound: float
    max_grad_deviation: float = 0.0
    max_hess_deviation: float = 0.0
    points: int = 0
    violations: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_smoothing_bounds(
    pair: FunctionPairOracle,
    nu: float,
    sigma: float,
    sample_count: int,
    rng: RngStream,
    rho: Optional[float] = None,
    inner_samples: int = 1_000_000,
    sampler: Optional[Callable[[RngStream, int], Matrix]] = None,
    check_hessian: bool = True,
) -> SmoothingBoundsReport:
    """
    Compare Monte Carlo smoothing of f against the true derivatives of F at sampled
    points, against the explicit smoothing bounds. A point is a violation only when
    the observed deviation exceeds the bound by more than 4 standard errors.
    """
    truth = pair.require_truth("verify_smoothing_bounds")
    if rho is None:
        rho = truth.rho if truth.rho is not None else 0.0
    d = pair.dim
    cfg = SmoothingConfig(sigma=sigma, batch=inner_samples)
    report = SmoothingBoundsReport(
        sigma=sigma,
        nu=nu,
        rho=rho,
        grad_bound=gradient_bound(rho, nu, sigma, d),
        hess_bound=hessian_bound(rho, nu, sigma, d),
    )
    if sampler is None:
        points = rng.uniform_ball(d, 1.0, count=sample_count)
    else:
        points = np.atleast_2d(sampler(rng, sample_count))
    for idx, x in enumerate(points):
        inner = rng.spawn(rng.stream_id * 1_000_003 + idx + 1)
        true_grad = truth.grad(x) if truth.grad is not None else finite_diff_grad(truth.value, x)
        g_est = grad_estimate_with_error(pair.queries, x, cfg, inner)
        g_dev = float(np.linalg.norm(g_est.mean - true_grad))
        g_slack = 4.0 * float(np.linalg.norm(g_est.stderr))
        report.max_grad_deviation = max(report.max_grad_deviation, g_dev)
        if g_dev > report.grad_bound + g_slack:
            report.violations.append({"point": x.tolist(), "kind": "gradient", "deviation": g_dev, "slack": g_slack})
        if not check_hessian:
            continue
        if truth.hess is not None:
            true_hess = truth.hess(x)
        elif truth.grad is not None:
            true_hess = hessian_from_grad(truth.grad, x)
        else:
            true_hess = finite_diff_hessian(truth.value, x)
        h_est = smoothed_hessian_with_error(pair.queries, x, cfg, inner)
        h_dev = float(np.linalg.norm(h_est.mean - true_hess, 2))
        h_slack = 4.0 * float(np.linalg.norm(h_est.stderr))
        report.max_hess_deviation = max(report.max_hess_deviation, h_dev)
        if h_dev > report.hess_bound + h_slack:
            report.violations.append({"point": x.tolist(), "kind": "hessian", "deviation": h_dev, "slack": h_slack})
    report.points = int(points.shape[0])
    if report.violations:
        logs.warning("smoothing audit found %d violations", len(report.violations))
    return report


@dataclass
class TailReport:
    thresholds: List[float]
    empirical: List[float]
    bounds: List[float]
    slack: List[float]

    @property
    def passed(self) -> bool:
        return all(e <= b + s for e, b, s in zip(self.empirical, self.bounds, self.slack))


def subgaussian_tail_audit(
    oracle: QueryOracle,
    x: Vector,
    sigma: float,
    bound_B: float,
    rng: RngStream,
    direction: Optional[Vector] = None,
    samples: int = 100_000,
    multiples: Sequence[float] = (1.0, 2.0, 3.0),
) -> TailReport:
    """Empirical tail of <u, g(x; z)> against 2 exp(-s^2 sigma^2 / (2 B^2)) at s = k B / sigma."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    u = rng.unit_vector(d) if direction is None else np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    fx = oracle.value(x)
    z = draw_gaussian(rng, d, sigma, count=samples)
    g = z * ((oracle.values(x + z) - fx) / sigma**2)[:, None]
    proj = np.abs(g @ u)
    thresholds, empirical, bounds, slack = [], [], [], []
    for k in multiples:
        s = k * bound_B / sigma
        frac = float(np.mean(proj > s))
        bound = min(1.0, 2.0 * math.exp(-(s**2) * sigma**2 / (2.0 * bound_B**2)))
        thresholds.append(s)
        empirical.append(frac)
        bounds.append(bound)
        slack.append(4.0 * math.sqrt(max(bound * (1 - bound), 1.0 / samples) / samples))
    return TailReport(thresholds=thresholds, empirical=empirical, bounds=bounds, slack=slack)


def variance_scaling(
    oracle: QueryOracle,
    x: Vector,
    sigma: float,
    rng: RngStream,
    batches: Sequence[int] = (10, 100, 1000, 10000),
    repeats: int = 50,
) -> dict:
    """Coordinatewise variance of grad_estimate across repeats for each batch size, and its log-log slope."""
    variances = []
    for m in batches:
        cfg = SmoothingConfig(sigma=sigma, batch=m)
        draws = np.array([grad_estimate(oracle, x, cfg, rng) for _ in range(repeats)])
        variances.append(float(draws.var(axis=0, ddof=1).mean()))
    return {"batches": list(batches), "variances": variances, "slope": loglog_slope(batches, variances)}
