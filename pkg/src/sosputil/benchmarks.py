"""
Small benchmark pairs (f, F) with known landscapes.

Every builder returns a Benchmark whose pair carries a truth view of F with analytic
gradient and Hessian, plus the regularity constants the optimizer schedules need.
Value functions act on the last axis so the same callable serves one point or a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .errors import ConfigError
from .logger import logs
from .oracle import FunctionPairOracle, RngStream, TruthBundle, Vector, make_pair


@dataclass(frozen=True, eq=False)
class Benchmark:
    """A pair with a default start, a box for random starts and declared (ell, rho, B)."""

    name: str
    pair: FunctionPairOracle
    x0: Vector
    ell: float
    rho: float
    bound_B: float
    start_box: float = 1.0

    @property
    def dim(self) -> int:
        return self.pair.dim

    def random_start(self, rng: RngStream) -> Vector:
        return rng.uniform(-self.start_box, self.start_box, size=self.dim)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "nu": self.pair.nu,
            "ell": self.ell,
            "rho": self.rho,
            "bound_B": self.bound_B,
            "x0": [float(v) for v in self.x0],
        }


BenchmarkBuilder = Callable[..., Benchmark]
benchmarks: Dict[str, BenchmarkBuilder] = {}


def add_benchmark(name: str) -> Callable[[BenchmarkBuilder], BenchmarkBuilder]:
    """Register a builder under name; names are unique."""

    def decorator(builder: BenchmarkBuilder) -> BenchmarkBuilder:
        if name in benchmarks:
            raise ConfigError("benchmark", name, "unique benchmark name")
        benchmarks[name] = builder
        return builder

    return decorator


def benchmark_names() -> List[str]:
    return sorted(benchmarks)


def build_benchmark(name: str, **kwargs) -> Benchmark:
    if name not in benchmarks:
        raise ConfigError("problem", name, f"one of {benchmark_names()}")
    bench = benchmarks[name](**kwargs)
    logs.info("benchmark built: %s", bench.describe())
    return bench


def ripple(X, nu: float, tau: float):
    """nu * mean(cos(x_i / tau)); bounded by nu everywhere."""
    X = np.asarray(X, dtype=float)
    return nu * np.mean(np.cos(X / tau), axis=-1)


def ripple_grad(x: Vector, nu: float, tau: float) -> Vector:
    x = np.asarray(x, dtype=float)
    return -nu / (x.shape[-1] * tau) * np.sin(x / tau)


def _check_ripple(nu: float, tau: float) -> None:
    if nu < 0:
        raise ConfigError("nu", nu, "nu >= 0")
    if not tau > 0:
        raise ConfigError("tau", tau, "tau > 0")


def _rippled_pair(
    dim: int,
    F: Callable,
    F_grad: Callable,
    F_hess: Callable,
    nu: float,
    tau: float,
    ell: float,
    rho: float,
    bound_B: float,
) -> FunctionPairOracle:
    truth = TruthBundle(value=F, grad=F_grad, hess=F_hess, values=F, rho=rho, ell=ell, bound_B=bound_B)
    return make_pair(
        lambda X: F(X) + ripple(X, nu, tau),
        dim,
        F_eval=truth,
        nu=nu,
        grad_eval=lambda x: F_grad(x) + ripple_grad(x, nu, tau),
        vectorized=True,
    )


@add_benchmark("quadratic")
def quadratic(d: int = 2, nu: float = 0.0, tau: float = 0.05) -> Benchmark:
    """F = 1/2 ||x||^2, f = F + ripple."""
    _check_ripple(nu, tau)

    def F(X):
        return 0.5 * np.sum(np.square(X), axis=-1)

    pair = _rippled_pair(
        d, F, lambda x: np.asarray(x, dtype=float), lambda x: np.eye(d), nu, tau, ell=1.0, rho=1.0, bound_B=1.0
    )
    return Benchmark("quadratic", pair, np.ones(d), ell=1.0, rho=1.0, bound_B=1.0, start_box=2.0)


@add_benchmark("double-well")
def double_well(nu: float = 0.0, tau: float = 0.005) -> Benchmark:
    """
    F(x) = (x1^2 - 1)^2 + x2^2 in two dimensions: minima at (+-1, 0), a strict saddle at 0.
    The fine ripple plants spurious local minima in f that smoothing averages away.
    """
    _check_ripple(nu, tau)

    def F(X):
        X = np.asarray(X, dtype=float)
        return np.square(np.square(X[..., 0]) - 1.0) + np.square(X[..., 1])

    def F_grad(x):
        x = np.asarray(x, dtype=float)
        return np.array([4.0 * x[0] * (x[0] ** 2 - 1.0), 2.0 * x[1]])

    def F_hess(x):
        x = np.asarray(x, dtype=float)
        return np.diag([12.0 * x[0] ** 2 - 4.0, 2.0])

    x0 = np.array([0.0, 0.5])
    # iterates leave x0 for a minimum at distance 1 from the saddle
    bound_B = float(np.linalg.norm(x0)) + 1.0
    pair = _rippled_pair(2, F, F_grad, F_hess, nu, tau, ell=24.0, rho=24.0, bound_B=bound_B)
    return Benchmark("double-well", pair, x0, ell=24.0, rho=24.0, bound_B=bound_B, start_box=1.5)


@add_benchmark("quartic-ripple")
def quartic_ripple(nu: float = 0.0, tau: float = 0.01) -> Benchmark:
    """One-dimensional F(x) = x^4 - x^2 with a local maximum at 0 and minima at +-1/sqrt(2)."""
    _check_ripple(nu, tau)

    def F(X):
        X = np.asarray(X, dtype=float)[..., 0]
        return X**4 - X**2

    def F_grad(x):
        x = np.asarray(x, dtype=float)
        return 4.0 * x**3 - 2.0 * x

    def F_hess(x):
        x = np.asarray(x, dtype=float)
        return np.array([[12.0 * x[0] ** 2 - 2.0]])

    pair = _rippled_pair(1, F, F_grad, F_hess, nu, tau, ell=12.0, rho=24.0, bound_B=1.0)
    return Benchmark("quartic-ripple", pair, np.array([0.05]), ell=12.0, rho=24.0, bound_B=1.0)


@add_benchmark("saddle")
def saddle(d: int = 2, gamma: float = 0.1) -> Benchmark:
    """F = 1/2 (x1^2 - gamma sum_{i>1} x_i^2); unbounded below, started next to the saddle."""
    if d < 2:
        raise ConfigError("d", d, "d >= 2 for a saddle")
    if not gamma > 0:
        raise ConfigError("gamma", gamma, "gamma > 0")
    curvature = np.full(d, -gamma)
    curvature[0] = 1.0

    def F(X):
        return 0.5 * np.sum(curvature * np.square(X), axis=-1)

    truth = TruthBundle(
        value=F,
        grad=lambda x: curvature * np.asarray(x, dtype=float),
        hess=lambda x: np.diag(curvature),
        values=F,
        rho=0.1,
        ell=1.0,
        bound_B=1.0,
    )
    pair = make_pair(F, d, F_eval=truth, grad_eval=truth.grad, vectorized=True)
    x0 = np.zeros(d)
    x0[0] = 1e-6
    return Benchmark("saddle", pair, x0, ell=1.0, rho=0.1, bound_B=1.0)


@add_benchmark("corrupted-quadratic")
def corrupted_quadratic(d: int = 2, corruption: float = 0.1, omega: float = 1000.0) -> Benchmark:
    """
    f = F - c / (omega sqrt d) sum cos(omega x_i) with F = 1/2 ||x||^2. Values stay within
    c sqrt(d) / omega of F while the gradient of f is off by up to c in norm.
    """
    if corruption < 0:
        raise ConfigError("corruption", corruption, "corruption >= 0")
    if not omega > 0:
        raise ConfigError("omega", omega, "omega > 0")
    scale = corruption / math.sqrt(d)

    def F(X):
        return 0.5 * np.sum(np.square(X), axis=-1)

    def f(X):
        X = np.asarray(X, dtype=float)
        return F(X) - scale / omega * np.sum(np.cos(omega * X), axis=-1)

    truth = TruthBundle(
        value=F,
        grad=lambda x: np.asarray(x, dtype=float),
        hess=lambda x: np.eye(d),
        values=F,
        rho=1.0,
        ell=1.0,
        bound_B=1.0,
    )
    pair = make_pair(
        f,
        d,
        F_eval=truth,
        nu=scale * d / omega,
        grad_eval=lambda x: np.asarray(x, dtype=float) + scale * np.sin(omega * np.asarray(x, dtype=float)),
        vectorized=True,
    )
    return Benchmark("corrupted-quadratic", pair, np.ones(d), ell=1.0, rho=1.0, bound_B=1.0)


@add_benchmark("constant")
def constant(d: int = 2, value: float = 0.0) -> Benchmark:
    def F(X):
        X = np.asarray(X, dtype=float)
        return np.full(X.shape[:-1], value, dtype=float)

    truth = TruthBundle(
        value=lambda x: float(value),
        grad=lambda x: np.zeros(d),
        hess=lambda x: np.zeros((d, d)),
        values=F,
        rho=1.0,
        ell=1.0,
        bound_B=1.0,
    )
    pair = make_pair(F, d, F_eval=truth, grad_eval=truth.grad, vectorized=True)
    return Benchmark("constant", pair, np.zeros(d), ell=1.0, rho=1.0, bound_B=1.0)
