"""
Function-pair oracles.

Optimizers only ever receive a :class:`QueryOracle`: zeroth-order (and optionally
first-order) queries of the surrogate f, with exact query accounting. The hidden
function F lives in a :class:`TruthBundle` that is attached to the
:class:`FunctionPairOracle` next to the query oracle, never inside it, so code that
is handed ``pair.queries`` has no path to F.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import numpy.typing as npt

from .errors import ConfigError, MissingGradientOracle, MissingTruthView, OracleError
from .logger import logs

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]
ValueFn = Callable[[Vector], float]
GradFn = Callable[[Vector], Vector]
QueryObserver = Callable[[Matrix], None]


class RngStream:
    """
    A reproducible random stream built on numpy's counter-based Philox generator.

    The 128-bit Philox key is (seed, stream_id), so identical pairs replay identical
    draws and distinct stream ids give independent streams. A stream is owned by one
    worker; use :meth:`spawn` to hand each worker its own.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if stream_id < 0:
            raise ConfigError("stream_id", stream_id, "stream_id >= 0")
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self.generator.normal(0.0, scale, size=size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size=size)

    def unit_vector(self, dim: int) -> Vector:
        u = self.generator.standard_normal(dim)
        return u / np.linalg.norm(u)

    def unit_vectors(self, count: int, dim: int) -> Matrix:
        u = self.generator.standard_normal((count, dim))
        return u / np.linalg.norm(u, axis=1, keepdims=True)

    def uniform_ball(self, dim: int, radius: float, count: Optional[int] = None) -> np.ndarray:
        """Uniform draws from the ball of the given radius: Gaussian direction, radius * U^(1/d)."""
        n = 1 if count is None else count
        directions = self.unit_vectors(n, dim)
        radii = radius * self.generator.uniform(0.0, 1.0, size=n) ** (1.0 / dim)
        points = directions * radii[:, None]
        return points[0] if count is None else points

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def draw_gaussian(rng: RngStream, dim: int, sigma: float, count: Optional[int] = None) -> np.ndarray:
    """Draw N(0, sigma^2 I) vector(s) of length dim from the stream."""
    if not sigma > 0:
        raise ConfigError("sigma", sigma, "sigma > 0")
    shape = dim if count is None else (count, dim)
    return rng.normal(shape, sigma)


@dataclass(frozen=True)
class TruthBundle:
    """
    Privileged evaluator of the hidden function F. Only verification code reads it.

    Attributes:
        value: F(x).
        grad: optional analytic gradient of F.
        hess: optional analytic Hessian of F.
        hvp: optional Hessian-vector product (x, u) -> Hessian(F)(x) u.
        values: optional vectorised F over the rows of an (n, d) array.
        rho, ell, bound_B: declared regularity of F (Hessian-Lipschitz, gradient-Lipschitz, bound).
    """

    value: ValueFn
    grad: Optional[GradFn] = None
    hess: Optional[Callable[[Vector], Matrix]] = None
    hvp: Optional[Callable[[Vector, Vector], Vector]] = None
    values: Optional[Callable[[Matrix], Vector]] = None
    rho: Optional[float] = None
    ell: Optional[float] = None
    bound_B: Optional[float] = None

    def evaluate_many(self, points: Matrix) -> Vector:
        points = np.atleast_2d(points)
        if self.values is not None:
            return np.asarray(self.values(points), dtype=float)
        return np.array([self.value(p) for p in points], dtype=float)


class QueryOracle:
    """
    Query-counted access to f (and optionally its gradient field).

    Every value or gradient query adds exactly one to ``query_counter``; a batch of m
    points adds m. The counter is guarded by a lock so concurrent batches account
    exactly; the order of concurrent queries is not specified.
    """

    def __init__(
        self,
        dim: int,
        value_fn: ValueFn,
        grad_fn: Optional[GradFn] = None,
        nu: float = 0.0,
        vectorized: bool = False,
        workers: int = 1,
    ):
        if dim <= 0:
            raise OracleError(f"dimension must be positive, got {dim}.")
        if nu < 0:
            raise ConfigError("nu", nu, "nu >= 0")
        self.dim = int(dim)
        self.nu = float(nu)
        self._value_fn = value_fn
        self._grad_fn = grad_fn
        self.vectorized = vectorized
        self.workers = max(1, int(workers))
        self._count = 0
        self._lock = threading.Lock()
        self.observer: Optional[QueryObserver] = None

    @property
    def has_grad(self) -> bool:
        return self._grad_fn is not None

    @property
    def query_counter(self) -> int:
        return self._count

    def _charge(self, n: int, points: Matrix) -> None:
        with self._lock:
            self._count += n
        if self.observer is not None:
            self.observer(points)

    def reset_counter(self) -> None:
        with self._lock:
            self._count = 0

    def value(self, x: Vector) -> float:
        x = np.asarray(x, dtype=float)
        self._charge(1, x[None, :])
        if self.vectorized:
            return float(np.asarray(self._value_fn(x[None, :]))[0])
        return float(self._value_fn(x))

    def values(self, points: Matrix) -> Vector:
        """Evaluate f at every row of points; charges one query per row."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self._charge(points.shape[0], points)
        if self.vectorized:
            return np.asarray(self._value_fn(points), dtype=float)
        if self.workers > 1 and points.shape[0] > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return np.fromiter(pool.map(self._value_fn, points), dtype=float, count=points.shape[0])
        return np.fromiter((self._value_fn(p) for p in points), dtype=float, count=points.shape[0])

    def grad(self, x: Vector) -> Vector:
        if self._grad_fn is None:
            raise MissingGradientOracle("grad_query")
        x = np.asarray(x, dtype=float)
        self._charge(1, x[None, :])
        return np.asarray(self._grad_fn(x), dtype=float)

    def grads(self, points: Matrix) -> Matrix:
        if self._grad_fn is None:
            raise MissingGradientOracle("grad_query")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self._charge(points.shape[0], points)
        if self.workers > 1 and points.shape[0] > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(self._grad_fn, points))
        else:
            rows = [self._grad_fn(p) for p in points]
        return np.asarray(rows, dtype=float).reshape(points.shape[0], self.dim)


@dataclass
class FunctionPairOracle:
    """The pair (f, F): a query oracle for f and an optional truth view of F."""

    queries: QueryOracle
    truth_view: Optional[TruthBundle] = None

    @property
    def dim(self) -> int:
        return self.queries.dim

    @property
    def nu(self) -> float:
        return self.queries.nu

    @property
    def query_counter(self) -> int:
        return self.queries.query_counter

    def require_truth(self, consumer: str) -> TruthBundle:
        if self.truth_view is None:
            raise MissingTruthView(consumer)
        return self.truth_view


def make_pair(
    f_eval: ValueFn,
    dim: int,
    F_eval: Optional[Union[TruthBundle, ValueFn]] = None,
    nu: float = 0.0,
    grad_eval: Optional[GradFn] = None,
    vectorized: bool = False,
    workers: int = 1,
) -> FunctionPairOracle:
    """
    Build a function pair with a fresh query counter.

    Args:
        f_eval: the surrogate f. With ``vectorized=True`` it maps an (n, d) array to n values.
        dim: ambient dimension d, must be positive.
        F_eval: the hidden F, either a TruthBundle or a bare value function.
        nu: declared pointwise closeness |f - F| <= nu.
        grad_eval: optional gradient field of f (for first-order methods).
    """
    queries = QueryOracle(dim, f_eval, grad_fn=grad_eval, nu=nu, vectorized=vectorized, workers=workers)
    truth = F_eval
    if truth is not None and not isinstance(truth, TruthBundle):
        truth = TruthBundle(value=truth)
    logs.info("function pair built: d=%s nu=%s truth=%s grad=%s", dim, nu, truth is not None, grad_eval is not None)
    return FunctionPairOracle(queries=queries, truth_view=truth)


def reset_counter(oracle: Union[QueryOracle, FunctionPairOracle]) -> None:
    if isinstance(oracle, FunctionPairOracle):
        oracle.queries.reset_counter()
    else:
        oracle.reset_counter()


@dataclass(frozen=True)
class ClosenessReport:
    max_gap: float
    nu: float
    samples: int
    passed: bool
    worst_point: Optional[list] = None


def closeness_audit(
    pair: FunctionPairOracle,
    sampler: Callable[[RngStream, int], Matrix],
    count: int,
    rng: RngStream,
    slack: float = 1e-12,
) -> ClosenessReport:
    """
    Sample points, compare f against F and report max |f - F| against the declared nu.
    The audit's samples are charged to the pair's counter like any other query.
    """
    truth = pair.require_truth("closeness_audit")
    points = np.atleast_2d(sampler(rng, count))
    f_vals = pair.queries.values(points)
    F_vals = truth.evaluate_many(points)
    gaps = np.abs(f_vals - F_vals)
    worst = int(np.argmax(gaps))
    max_gap = float(gaps[worst])
    return ClosenessReport(
        max_gap=max_gap,
        nu=pair.nu,
        samples=int(points.shape[0]),
        passed=bool(max_gap <= pair.nu + slack),
        worst_point=points[worst].tolist(),
    )
