"""
Single ReLU unit: empirical versus population risk.

Data are x ~ N(0, I), y = ReLU(x.w*) + zeta with zeta ~ N(0, 1), and the loss is
R_n(w) = (1 / 2n) sum (y_i - ReLU(x_i.w))^2. The population risk has the closed form

    R(w) = 1/4 ||w||^2 + 5/4 - (1 / 2 pi) ||w|| (sin t + (pi - t) cos t),  t = angle(w, w*).

The constant 5/4 is kept as published even though the expectation of the 1/2n loss
carries 3/4; only risk differences and derivatives are ever compared against data.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, DegenerateInput
from .logger import logs
from .oracle import FunctionPairOracle, Matrix, RngStream, TruthBundle, Vector, make_pair
from .util import commitment, loglog_slope

POPULATION_CONSTANT = 1.25


def relu(t):
    return np.maximum(t, 0.0)


@dataclass(frozen=True, eq=False)
class ReluInstance:
    """A dataset of n labelled Gaussian points for the unit w*."""

    d: int
    w_star: np.ndarray
    n: int
    X: np.ndarray
    y: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.w_star)) - 1.0) > 1e-12:
            raise ConfigError("w_star", float(np.linalg.norm(self.w_star)), "||w_star|| = 1")
        if self.X.shape != (self.n, self.d) or self.y.shape != (self.n,) or self.w_star.shape != (self.d,):
            raise ConfigError("shapes", (self.X.shape, self.y.shape, self.w_star.shape), f"n={self.n}, d={self.d}")

    @classmethod
    def generate(
        cls, d: int, n: int, seed: int = 0, w_star: Optional[Vector] = None, stream_id: int = 0
    ) -> "ReluInstance":
        if d < 1:
            raise ConfigError("d", d, "d >= 1")
        if n < 1:
            raise ConfigError("n", n, "n >= 1")
        rng = RngStream(seed, stream_id)
        if w_star is None:
            w_star = rng.unit_vector(d)
        w_star = np.asarray(w_star, dtype=float)
        X = rng.normal((n, d))
        y = relu(X @ w_star) + rng.normal(n)
        return cls(d=d, w_star=w_star, n=n, X=X, y=y, seed=seed)


def empirical_risk(inst: ReluInstance, w: Vector) -> float:
    r = inst.y - relu(inst.X @ np.asarray(w, dtype=float))
    return float(r @ r) / (2.0 * inst.n)


def empirical_risk_many(inst: ReluInstance, W: Matrix) -> Vector:
    """Empirical risk at every row of W."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    resid = inst.y[:, None] - relu(inst.X @ W.T)
    return np.sum(resid * resid, axis=0) / (2.0 * inst.n)


def empirical_risk_grad(inst: ReluInstance, w: Vector) -> Vector:
    """Gradient of R_n; the ReLU slope at exactly 0 is taken as 0."""
    pre = inst.X @ np.asarray(w, dtype=float)
    resid = relu(pre) - inst.y
    return inst.X.T @ (resid * (pre > 0)) / inst.n


def _angle(u: Vector, v: Vector) -> Tuple[float, float, float]:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInput("the angle between u and v is undefined when either is zero.")
    uh, vh = u / nu, v / nv
    cos = float(uh @ vh)
    sin = float(np.linalg.norm(vh - cos * uh))
    return math.atan2(sin, cos), nu, nv


def arc_cosine_kernel(u: Vector, v: Vector) -> float:
    """E[ReLU(x.u) ReLU(x.v)] = (1 / 2 pi) ||u|| ||v|| (sin t + (pi - t) cos t)."""
    theta, nu, nv = _angle(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    return nu * nv * (math.sin(theta) + (math.pi - theta) * math.cos(theta)) / (2.0 * math.pi)


def _check_w(w: Vector) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if float(np.linalg.norm(w)) == 0.0:
        raise DegenerateInput("population risk is not differentiable at w = 0.")
    return w


def population_risk(w: Vector, w_star: Vector) -> float:
    w = _check_w(w)
    return 0.25 * float(w @ w) + POPULATION_CONSTANT - arc_cosine_kernel(w, w_star)


def population_grad(w: Vector, w_star: Vector) -> Vector:
    """1/2 (w - w*) + (1 / 2 pi) (t w* - sin t w_hat)."""
    w = _check_w(w)
    w_star = np.asarray(w_star, dtype=float)
    theta, nw, _ = _angle(w, w_star)
    return 0.5 * (w - w_star) + (theta * w_star - math.sin(theta) * w / nw) / (2.0 * math.pi)


def population_hess(w: Vector, w_star: Vector) -> Matrix:
    """1/2 I - (sin t / 2 pi ||w||) (I + u u^T - w_hat w_hat^T), with u the unit of w* - w_hat cos t."""
    w = _check_w(w)
    w_star = np.asarray(w_star, dtype=float)
    d = w.shape[0]
    theta, nw, _ = _angle(w, w_star)
    if theta == 0.0:
        return 0.5 * np.eye(d)
    wh = w / nw
    u = w_star - wh * math.cos(theta)
    u = u / np.linalg.norm(u)
    return 0.5 * np.eye(d) - math.sin(theta) / (2.0 * math.pi * nw) * (np.eye(d) + np.outer(u, u) - np.outer(wh, wh))


def population_truth(w_star: Vector) -> TruthBundle:
    """Truth view of R with the regularity constants used by the recovery experiment."""
    d = np.asarray(w_star).shape[0]
    return TruthBundle(
        value=lambda w: population_risk(w, w_star),
        grad=lambda w: population_grad(w, w_star),
        hess=lambda w: population_hess(w, w_star),
        rho=float(d),
        ell=math.sqrt(d),
        bound_B=1.0,
    )


def make_relu_pair(inst: ReluInstance, nu: float = 0.0) -> FunctionPairOracle:
    """Empirical risk as the queried f, population risk as the truth F."""
    return make_pair(
        lambda W: empirical_risk_many(inst, W),
        inst.d,
        F_eval=population_truth(inst.w_star),
        nu=nu,
        grad_eval=lambda w: empirical_risk_grad(inst, w),
        vectorized=True,
    )


# --------------------------------------------------------------------------- region


def in_region(w: Vector, w_star: Vector) -> bool:
    """Membership in B = {w : w.w* >= 1/sqrt(d)} intersected with {||w|| <= 2}."""
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    return bool(float(w @ w_star) >= 1.0 / math.sqrt(d) and float(np.linalg.norm(w)) <= 2.0)


def region_mask(W: Matrix, w_star: Vector) -> np.ndarray:
    W = np.atleast_2d(W)
    d = W.shape[1]
    return (W @ w_star >= 1.0 / math.sqrt(d)) & (np.linalg.norm(W, axis=1) <= 2.0)


def sample_region(d: int, w_star: Vector, count: int, rng: RngStream) -> Matrix:
    """Uniform samples of B by rejection from the radius-2 ball."""
    kept: List[np.ndarray] = []
    have = 0
    while have < count:
        batch = rng.uniform_ball(d, 2.0, count=max(64, 2 * (count - have)))
        batch = batch[region_mask(batch, w_star)]
        kept.append(batch)
        have += batch.shape[0]
    return np.vstack(kept)[:count]


@dataclass
class ConvexityReport:
    samples: int
    min_margin: float
    violations: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def one_point_convexity_audit(w_star: Vector, sample_count: int, rng: RngStream, c: float = 0.1) -> ConvexityReport:
    """Check <-grad R(w), w* - w> >= c ||w - w*||^2 at uniform samples of B."""
    w_star = np.asarray(w_star, dtype=float)
    W = sample_region(w_star.shape[0], w_star, sample_count, rng)
    report = ConvexityReport(samples=sample_count, min_margin=math.inf)
    for w in W:
        diff = w_star - w
        lhs = float(-population_grad(w, w_star) @ diff)
        margin = lhs - c * float(diff @ diff)
        report.min_margin = min(report.min_margin, margin)
        if margin < -1e-12:
            report.violations.append({"w": w.tolist(), "lhs": lhs, "rhs": c * float(diff @ diff)})
    return report


def nonconvexity_witness(w_star: Vector, direction: Optional[Vector] = None, t: float = 0.6, h: float = 1e-3) -> dict:
    """
    Along w(t) = (w* + t e) / 5 with e a unit vector orthogonal to w*, R restricts to
    t^2/100 - t/(10 pi) + arctan(t)/(10 pi) + const, whose second derivative
    1/50 - (1 / 5 pi) t / (1 + t^2)^2 is negative at t = 0.6.
    """
    w_star = np.asarray(w_star, dtype=float)
    if direction is None:
        direction = np.zeros_like(w_star)
        direction[int(np.argmin(np.abs(w_star)))] = 1.0
    e = np.asarray(direction, dtype=float)
    e = e - (e @ w_star) * w_star
    e = e / np.linalg.norm(e)

    def along(s: float) -> float:
        return population_risk((w_star + s * e) / 5.0, w_star)

    analytic = 1.0 / 50.0 - t / (5.0 * math.pi * (1.0 + t * t) ** 2)
    numeric = (along(t + h) - 2.0 * along(t) + along(t - h)) / h**2
    return {"t": t, "second_derivative": analytic, "numeric_second_derivative": numeric, "nonconvex": analytic < 0}


# --------------------------------------------------------------------------- data checks


@dataclass
class RiskDifference:
    empirical: float
    population: float
    monte_carlo: float
    mc_stderr: float

    @property
    def mc_consistent(self) -> bool:
        return abs(self.monte_carlo - self.population) <= 4.0 * self.mc_stderr

    @property
    def gap(self) -> float:
        return abs(self.empirical - self.population)


def risk_difference_check(
    inst: ReluInstance, w: Vector, w_other: Vector, mc_samples: int, rng: RngStream, chunk: int = 100_000
) -> RiskDifference:
    """Compare R_n(w) - R_n(w') with R(w) - R(w') and with a fresh Monte Carlo estimate of it."""
    w = np.asarray(w, dtype=float)
    w_other = np.asarray(w_other, dtype=float)
    total, total_sq, seen = 0.0, 0.0, 0
    while seen < mc_samples:
        n = min(chunk, mc_samples - seen)
        X = rng.normal((n, inst.d))
        y = relu(X @ inst.w_star) + rng.normal(n)
        diff = 0.5 * ((y - relu(X @ w)) ** 2 - (y - relu(X @ w_other)) ** 2)
        total += float(diff.sum())
        total_sq += float((diff * diff).sum())
        seen += n
    mean = total / seen
    var = max(total_sq / seen - mean * mean, 0.0) * seen / max(seen - 1, 1)
    return RiskDifference(
        empirical=empirical_risk(inst, w) - empirical_risk(inst, w_other),
        population=population_risk(w, inst.w_star) - population_risk(w_other, inst.w_star),
        monte_carlo=mean,
        mc_stderr=math.sqrt(var / seen),
    )


@dataclass
class GapTable:
    d: int
    n_list: List[int]
    mean_gaps: List[float]
    stderr: List[float]
    slope: float

    def rows(self) -> List[dict]:
        return [{"n": n, "mean_gap": g, "stderr": s} for n, g, s in zip(self.n_list, self.mean_gaps, self.stderr)]


def uniform_gap_experiment(
    d: int,
    n_list: Sequence[int],
    trials: int,
    seed: int = 0,
    grid_size: int = 256,
) -> GapTable:
    """
    Mean over fresh datasets of sup_w |[R_n(w) - R_n(w*)] - [R(w) - R(w*)]| on a fixed grid of B,
    per n, and the log-log slope of that mean against n.
    """
    rng = RngStream(seed, 0)
    w_star = rng.unit_vector(d)
    grid = sample_region(d, w_star, grid_size, rng)
    pop = np.array([population_risk(w, w_star) for w in grid]) - population_risk(w_star, w_star)
    means, errs = [], []
    for i, n in enumerate(n_list):
        gaps = []
        for trial in range(trials):
            inst = ReluInstance.generate(d, n, seed=seed, w_star=w_star, stream_id=1 + i * trials + trial)
            emp = empirical_risk_many(inst, grid) - empirical_risk(inst, w_star)
            gaps.append(float(np.max(np.abs(emp - pop))))
        means.append(float(np.mean(gaps)))
        errs.append(float(np.std(gaps, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0)
        logs.info("uniform gap d=%s n=%s: %.4g", d, n, means[-1])
    slope = loglog_slope(n_list, means) if len(n_list) > 1 else float("nan")
    return GapTable(d=d, n_list=list(n_list), mean_gaps=means, stderr=errs, slope=slope)


@dataclass
class RecoveryReport:
    d: int
    n: int
    eps: float
    trials: int
    successes: int
    distances: List[float]
    containment: float
    left_region_fraction: float
    config: dict

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    def to_dict(self) -> dict:
        return {**self.__dict__, "success_rate": self.success_rate}


def initial_point(d: int, w_star: Vector, rng: RngStream, max_draws: int = 100_000) -> Vector:
    """w0 ~ N(0, I/d), redrawn until it lies in B."""
    for _ in range(max_draws):
        w0 = rng.normal(d, 1.0 / math.sqrt(d))
        if in_region(w0, w_star):
            return w0
    raise DegenerateInput(f"no initial point in the region after {max_draws} draws.")


def relu_recovery_experiment(
    d: int,
    n: int,
    eps: float,
    trials: int,
    seed: int = 0,
    batch: int = 0,
    iters: int = 0,
    population: bool = False,
    workers: int = 1,
) -> RecoveryReport:
    """
    ZPSGD on R_n (or on R itself with ``population``) from a random start in B; success is
    ||w - w*|| <= eps. Also reports how many iterates stayed in B.

    The schedule takes ell = sqrt(d), rho = d, B = 1 at accuracy eps / 4; a positive ``batch``
    or ``iters`` overrides its m or T.
    """
    from .optim import default_config, zpsgd

    cfg = default_config(d, eps / 4.0, math.sqrt(d), float(d), 1.0, 0.1, seed=seed)
    changes = {}
    if batch > 0:
        changes["batch"] = batch
    if iters > 0:
        changes["max_iters"] = iters
    if changes:
        cfg = cfg.replace(**changes)
    w_star = RngStream(seed, 0).unit_vector(d)

    def trial(k: int) -> Tuple[float, int, int]:
        rng = RngStream(seed, k + 1)
        if population:
            pair = make_pair(lambda w: population_risk(w, w_star), d, F_eval=population_truth(w_star))
        else:
            pair = make_relu_pair(ReluInstance.generate(d, n, seed=seed, w_star=w_star, stream_id=k + 1))
        w0 = initial_point(d, w_star, rng)
        record = zpsgd(pair.queries, w0, cfg, rng)
        inside = int(np.count_nonzero(region_mask(record.iterates[1:], w_star)))
        return float(np.linalg.norm(record.final - w_star)), inside, record.steps

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(trial, range(trials)))
    else:
        results = [trial(k) for k in range(trials)]
    distances = [r[0] for r in results]
    inside = sum(r[1] for r in results)
    steps = sum(r[2] for r in results)
    containment = inside / steps if steps else 1.0
    report = RecoveryReport(
        d=d,
        n=n,
        eps=eps,
        trials=trials,
        successes=sum(dist <= eps for dist in distances),
        distances=distances,
        containment=containment,
        left_region_fraction=1.0 - containment,
        config=cfg.to_dict(),
    )
    logs.info("relu recovery d=%s n=%s: success %.2f containment %.3f", d, n, report.success_rate, containment)
    return report


# --------------------------------------------------------------------------- dataset files


def save_dataset(inst: ReluInstance, prefix: Union[str, Path]) -> Tuple[Path, Path]:
    """Write <prefix>.npz (X, y, w_star) and <prefix>.json metadata."""
    prefix = Path(prefix)
    data_path = prefix.with_suffix(".npz")
    meta_path = prefix.with_suffix(".json")
    np.savez(data_path, X=inst.X, y=inst.y, w_star=inst.w_star)
    meta = {"d": inst.d, "n": inst.n, "seed": inst.seed, "w_star_commitment": commitment(inst.w_star)}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return data_path, meta_path


def load_dataset(prefix: Union[str, Path]) -> ReluInstance:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    with np.load(prefix.with_suffix(".npz")) as data:
        X, y, w_star = data["X"], data["y"], data["w_star"]
    if commitment(w_star) != meta["w_star_commitment"]:
        raise ConfigError("w_star", "dataset file", "w_star matching the metadata commitment")
    return ReluInstance(d=int(meta["d"]), w_star=w_star, n=int(meta["n"]), X=X, y=y, seed=int(meta["seed"]))
