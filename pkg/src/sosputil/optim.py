"""
Perturbed stochastic gradient methods.

zpsgd, fpsgd and psgd share one loop

    x_{t+1} = x_t - eta * (g_t + xi_t),   xi_t uniform in the ball of radius r,

and differ only in how g_t is produced: zeroth-order smoothing, smoothed gradient
queries, or a caller-supplied stochastic gradient sampler. gd_baseline is the
unperturbed control arm. Every method runs a fixed number of steps and returns a
:class:`RunRecord`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import ConfigError, MissingGradientOracle, NonFiniteIterate
from .logger import logs
from .oracle import FunctionPairOracle, GradFn, QueryOracle, RngStream, ValueFn, Vector
from .smoothing import SmoothingConfig, fpsgd_grad_estimate, grad_estimate
from .stationarity import StationarityReport, check_sosp

Sampler = Callable[[Vector, RngStream], Vector]
StopHook = Callable[[Vector], bool]

DEFAULT_C = 3.0
DEFAULT_BATCH_CAP = 10_000
DEFAULT_ITERS_CAP = 100_000


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Hyperparameters of the perturbed methods plus the declared regularity of F.

    ``chi`` and ``c`` are the schedule's log factor and constant; ``batch_theory`` and
    ``iters_theory`` keep the uncapped values default_config derived.
    """

    eta: float
    perturb_radius: float
    sigma: float
    batch: int
    max_iters: int
    epsilon: float
    ell: float
    rho: float
    bound_B: float
    delta: float = 0.1
    seed: int = 0
    chi: float = 1.0
    c: float = DEFAULT_C
    batch_theory: Optional[int] = None
    iters_theory: Optional[int] = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError("eta", self.eta, "eta > 0")
        if not self.perturb_radius >= 0:
            raise ConfigError("perturb_radius", self.perturb_radius, "perturb_radius >= 0")
        if not self.sigma >= 0:
            raise ConfigError("sigma", self.sigma, "sigma >= 0")
        if self.batch < 1:
            raise ConfigError("batch", self.batch, "batch >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters", self.max_iters, "max_iters >= 1")
        for name in ("epsilon", "ell", "rho", "bound_B", "chi", "c"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(name, value, f"{name} > 0")
        if not 0 < self.delta < 1:
            raise ConfigError("delta", self.delta, "0 < delta < 1")

    @property
    def escape_horizon(self) -> float:
        """Steps within which a saddle is escaped: chi c / (eta sqrt(rho eps))."""
        return self.chi * self.c / (self.eta * math.sqrt(self.rho * self.epsilon))

    @property
    def escape_decrease(self) -> float:
        """Function decrease guaranteed by an escape: sqrt(eps^3 / rho) chi^-3 c^-5."""
        return math.sqrt(self.epsilon**3 / self.rho) * self.chi**-3 * self.c**-5

    def replace(self, **changes) -> "OptimizerConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["escape_horizon"] = self.escape_horizon
        out["escape_decrease"] = self.escape_decrease
        return out


def default_config(
    d: int,
    epsilon: float,
    ell: float,
    rho: float,
    bound_B: float,
    delta: float,
    c: float = DEFAULT_C,
    batch_cap: int = DEFAULT_BATCH_CAP,
    iters_cap: int = DEFAULT_ITERS_CAP,
    seed: int = 0,
) -> OptimizerConfig:
    """
    The hyperparameter schedule of the perturbed methods.

    sigma = sqrt(eps / (rho d)), eta = 1/ell, chi = max(1, log(d ell Delta / (rho eps delta)))
    with Delta = 2B, r = eps chi^-3 c^-6, T = ceil(2 Delta chi^4 ell / eps^2), and the
    mini-batch m = ceil(2 (chi c)^2 (B / sigma)^2 log(d / delta) / eps^2). m and T are
    capped; the uncapped values stay on the config.
    """
    if d < 1:
        raise ConfigError("d", d, "d >= 1")
    for name, value in (("epsilon", epsilon), ("ell", ell), ("rho", rho), ("bound_B", bound_B), ("c", c)):
        if not value > 0:
            raise ConfigError(name, value, f"{name} > 0")
    if not 0 < delta < 1:
        raise ConfigError("delta", delta, "0 < delta < 1")
    delta_f = 2.0 * bound_B
    sigma = math.sqrt(epsilon / (rho * d))
    eta = 1.0 / ell
    chi = max(1.0, math.log(d * ell * delta_f / (rho * epsilon * delta)))
    radius = epsilon * chi**-3 * c**-6
    iters_theory = int(math.ceil(2.0 * delta_f * chi**4 * ell / epsilon**2))
    lam = chi * c
    subgaussian = bound_B / sigma
    batch_theory = int(math.ceil(2.0 * lam**2 * subgaussian**2 * math.log(d / delta) / epsilon**2))
    batch_theory = max(1, batch_theory)
    batch = min(batch_theory, batch_cap)
    iters = min(iters_theory, iters_cap)
    if batch < batch_theory:
        logs.warning("mini-batch size capped at %s (schedule asks for %s)", batch, batch_theory)
    if iters < iters_theory:
        logs.warning("iteration count capped at %s (schedule asks for %s)", iters, iters_theory)
    cfg = OptimizerConfig(
        eta=eta,
        perturb_radius=radius,
        sigma=sigma,
        batch=batch,
        max_iters=iters,
        epsilon=epsilon,
        ell=ell,
        rho=rho,
        bound_B=bound_B,
        delta=delta,
        seed=seed,
        chi=chi,
        c=c,
        batch_theory=batch_theory,
        iters_theory=iters_theory,
    )
    logs.info("default_config: sigma=%.4g eta=%.4g r=%.4g m=%s T=%s chi=%.4g", sigma, eta, radius, batch, iters, chi)
    return cfg


@dataclass(frozen=True)
class RunRecord:
    """Trajectory and diagnostics of one optimizer run. Arrays are read-only."""

    method: str
    iterates: np.ndarray
    queries_used: int
    grad_norms: np.ndarray
    perturb_norms: np.ndarray
    values: Optional[np.ndarray] = None
    terminal: Optional[StationarityReport] = None
    config: Optional[OptimizerConfig] = None
    extra: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.iterates, self.grad_norms, self.perturb_norms, self.values):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def final(self) -> Vector:
        return self.iterates[-1]

    @property
    def steps(self) -> int:
        return int(self.iterates.shape[0] - 1)

    @property
    def step_diagnostics(self) -> List[dict]:
        return [
            {"grad_norm": float(g), "perturb_norm": float(p)} for g, p in zip(self.grad_norms, self.perturb_norms)
        ]

    def with_terminal(self, report: StationarityReport) -> "RunRecord":
        return replace(self, terminal=report)

    def as_rows(self, max_coords: int = 10) -> List[dict]:
        """
        One row per iterate: step, coordinates (or the iterate norm when d > max_coords),
        the gradient-estimate norm that produced the step, and the optional f probe.
        """
        d = self.iterates.shape[1]
        rows = []
        for t, x in enumerate(self.iterates):
            row: dict = {"step": t}
            if d <= max_coords:
                for i, xi in enumerate(x):
                    row[f"x{i + 1}"] = float(xi)
            else:
                row["x_norm"] = float(np.linalg.norm(x))
            row["grad_norm"] = float(self.grad_norms[t - 1]) if t > 0 else ""
            row["f_probe"] = float(self.values[t]) if self.values is not None else ""
            rows.append(row)
        return rows

    def to_summary(self) -> dict:
        return {
            "method": self.method,
            "steps": self.steps,
            "queries_used": self.queries_used,
            "final": self.final.tolist(),
            "terminal": self.terminal.to_dict() if self.terminal is not None else None,
            "config": self.config.to_dict() if self.config is not None else None,
            **self.extra,
        }


def _perturbed_descent(
    method: str,
    direction: Callable[[Vector], Vector],
    x0: Vector,
    eta: float,
    radius: float,
    steps: int,
    rng: RngStream,
    used: Callable[[], int],
    cfg: Optional[OptimizerConfig],
    stop_when: Optional[StopHook],
    probe: Optional[ValueFn],
) -> RunRecord:
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteIterate(0, x.tolist(), method)
    d = x.shape[0]
    start = used()
    iterates = [x.copy()]
    grad_norms: List[float] = []
    perturb_norms: List[float] = []
    values = [probe(x)] if probe is not None else None
    for t in range(1, steps + 1):
        g = np.asarray(direction(x), dtype=float)
        xi = rng.uniform_ball(d, radius) if radius > 0 else np.zeros(d)
        x = x - eta * (g + xi)
        if not np.all(np.isfinite(x)):
            logs.error("%s diverged at step %s", method, t)
            raise NonFiniteIterate(t, x.tolist(), method)
        iterates.append(x.copy())
        grad_norms.append(float(np.linalg.norm(g)))
        perturb_norms.append(float(np.linalg.norm(xi)))
        if values is not None:
            values.append(probe(x))
        if stop_when is not None and stop_when(x):
            logs.info("%s stopped early at step %s", method, t)
            break
    return RunRecord(
        method=method,
        iterates=np.array(iterates),
        queries_used=used() - start,
        grad_norms=np.array(grad_norms),
        perturb_norms=np.array(perturb_norms),
        values=np.array(values) if values is not None else None,
        config=cfg,
    )


def zpsgd(
    oracle: QueryOracle,
    x0: Vector,
    cfg: OptimizerConfig,
    rng: RngStream,
    stop_when: Optional[StopHook] = None,
    probe: Optional[ValueFn] = None,
) -> RunRecord:
    """
    Zeroth-order perturbed SGD: g_t is the mini-batch smoothing estimate of grad f~_sigma.
    Costs exactly T (m + 1) value queries.
    """
    if not cfg.sigma > 0:
        raise ConfigError("sigma", cfg.sigma, "sigma > 0 for zeroth-order smoothing")
    smoothing = SmoothingConfig(sigma=cfg.sigma, batch=cfg.batch)
    return _perturbed_descent(
        "zpsgd",
        lambda x: grad_estimate(oracle, x, smoothing, rng),
        x0,
        cfg.eta,
        cfg.perturb_radius,
        cfg.max_iters,
        rng,
        lambda: oracle.query_counter,
        cfg,
        stop_when,
        probe,
    )


def fpsgd(
    oracle: QueryOracle,
    x0: Vector,
    cfg: OptimizerConfig,
    rng: RngStream,
    stop_when: Optional[StopHook] = None,
    probe: Optional[ValueFn] = None,
) -> RunRecord:
    """First-order perturbed SGD on the smoothed gradient field; T m gradient queries. sigma = 0 queries at x itself."""
    if not oracle.has_grad:
        raise MissingGradientOracle("fpsgd")
    if cfg.sigma > 0:
        smoothing = SmoothingConfig(sigma=cfg.sigma, batch=cfg.batch)

        def direction(x):
            return fpsgd_grad_estimate(oracle, x, smoothing, rng)

    else:

        def direction(x):
            return oracle.grads(np.repeat(x[None, :], cfg.batch, axis=0)).mean(axis=0)

    return _perturbed_descent(
        "fpsgd",
        direction,
        x0,
        cfg.eta,
        cfg.perturb_radius,
        cfg.max_iters,
        rng,
        lambda: oracle.query_counter,
        cfg,
        stop_when,
        probe,
    )


def psgd(
    sampler: Sampler,
    x0: Vector,
    cfg: OptimizerConfig,
    rng: RngStream,
    stop_when: Optional[StopHook] = None,
    probe: Optional[ValueFn] = None,
) -> RunRecord:
    """Mini-batch perturbed SGD over a stochastic gradient sampler with E g(x; theta) = grad f(x)."""
    calls = [0]

    def direction(x):
        total = np.zeros_like(x)
        for _ in range(cfg.batch):
            total += np.asarray(sampler(x, rng), dtype=float)
        calls[0] += cfg.batch
        return total / cfg.batch

    return _perturbed_descent(
        "psgd",
        direction,
        x0,
        cfg.eta,
        cfg.perturb_radius,
        cfg.max_iters,
        rng,
        lambda: calls[0],
        cfg,
        stop_when,
        probe,
    )


def gd_baseline(
    oracle: QueryOracle,
    x0: Vector,
    eta: float,
    T: int,
    stop_when: Optional[StopHook] = None,
    probe: Optional[ValueFn] = None,
) -> RunRecord:
    """Plain gradient descent x_{t+1} = x_t - eta grad f(x_t); the unperturbed control arm."""
    if not oracle.has_grad:
        raise MissingGradientOracle("gd_baseline")
    if not eta > 0:
        raise ConfigError("eta", eta, "eta > 0")
    if T < 1:
        raise ConfigError("T", T, "T >= 1")
    return _perturbed_descent(
        "gd",
        oracle.grad,
        x0,
        eta,
        0.0,
        T,
        RngStream(0),
        lambda: oracle.query_counter,
        None,
        stop_when,
        probe,
    )


def exact_gradient_sampler(grad: GradFn) -> Sampler:
    return lambda x, rng: grad(x)


def gaussian_noise_sampler(grad: GradFn, noise_std: float) -> Sampler:
    """Gradient plus N(0, noise_std^2 / d) noise per coordinate."""
    if not noise_std >= 0:
        raise ConfigError("noise_std", noise_std, "noise_std >= 0")

    def sample(x, rng):
        g = np.asarray(grad(x), dtype=float)
        return g + rng.normal(g.shape[0], noise_std / math.sqrt(g.shape[0]))

    return sample


def attach_terminal(record: RunRecord, pair: FunctionPairOracle, eps: float, rho: float) -> RunRecord:
    """Verify the final iterate against F when the pair carries a truth view."""
    if pair.truth_view is None:
        return record
    return record.with_terminal(check_sosp(pair.truth_view, record.final, eps, rho))
