"""
Experiment drivers and artifact writing.

Each experiment kind is a method of :class:`SospExperiments`, registered with the
ExperimentKind decorator; its signature is the kind's parameter schema. :func:`run`
resolves an :class:`ExperimentSpec` against that schema, calls the kind and writes

    <out>.csv           trajectory or result table
    <out>.summary.json  spec echo, resolved parameters, derived schedule, results
    <out>.meta.json     reproducibility block

All randomness comes from RngStream(seed, stream_id); trial k uses stream k + 1.
"""

import csv
import inspect
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional

import numpy as np
import scipy

from . import __version__
from .benchmarks import Benchmark, benchmarks, build_benchmark
from .errors import ConfigError, DegenerateInput, SospLibError
from .experimentlib import ExperimentKind, ExperimentLibrary, ExpParam, ExpParamSpec
from .expsearch import exhaustive_sosp_search
from .hardfn import (
    HardInstanceParams,
    Variant,
    adaptive_query_experiment,
    band_gap_audit,
    boundary_smoothness,
    descriptor,
    fixed_point_concentration,
    make_hard_pair,
    smoothness_audit,
    write_descriptor,
    write_secret,
    zpsgd_optimizer,
)
from .logger import logs
from .oracle import FunctionPairOracle, RngStream, Vector
from .optim import (
    OptimizerConfig,
    RunRecord,
    attach_terminal,
    default_config,
    fpsgd,
    gaussian_noise_sampler,
    gd_baseline,
    psgd,
    zpsgd,
)
from .relu import ReluInstance, make_relu_pair, relu_recovery_experiment, uniform_gap_experiment
from .smoothing import subgaussian_tail_audit, variance_scaling, verify_smoothing_bounds
from .stationarity import check_sosp
from .util import jsonable

Problem = Literal["quadratic", "double-well", "quartic-ripple", "saddle", "corrupted-quadratic", "constant"]
AuditProblem = Literal[
    "quadratic", "double-well", "quartic-ripple", "saddle", "corrupted-quadratic", "constant", "hard-instance"
]
LandscapeProblem = Literal[
    "quadratic", "double-well", "quartic-ripple", "saddle", "corrupted-quadratic", "constant", "hard-instance", "relu"
]

RNG_ALGORITHM = "numpy.random.Philox(key=[seed, stream_id])"


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment invocation: a kind, its parameters and where the artifacts go."""

    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_path: str = "run"
    record_wall_time: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed", self.seed, "seed >= 0")
        if self.workers < 1:
            raise ConfigError("workers", self.workers, "workers >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_summary(cls, summary: Dict[str, Any]) -> "ExperimentSpec":
        """Rebuild the spec of a finished run from its summary JSON; parameters come back fully resolved."""
        spec = summary["spec"]
        return cls(
            kind=spec["kind"],
            params=dict(summary["resolved"]),
            seed=int(spec["seed"]),
            output_path=spec["output_path"],
            record_wall_time=bool(spec.get("record_wall_time", False)),
            workers=int(spec.get("workers", 1)),
        )


@dataclass
class ExperimentResult:
    rows: List[dict]
    summary: Dict[str, Any]
    derived: Dict[str, Any] = field(default_factory=dict)
    stream_ids: List[int] = field(default_factory=list)


# --------------------------------------------------------------------------- helpers


def build_problem(problem: str, d: int, nu: float = 0.0, tau: float = 0.0, corruption: float = 0.0) -> Benchmark:
    """
    Build a registered benchmark, passing only the knobs it takes. tau <= 0 keeps its default
    ripple width and corruption <= 0 its default gradient corruption.
    """
    accepted = inspect.signature(benchmarks[problem]).parameters
    kwargs = {"d": d, "nu": nu}
    if tau > 0:
        kwargs["tau"] = tau
    if corruption > 0:
        kwargs["corruption"] = corruption
    kwargs = {k: v for k, v in kwargs.items() if k in accepted}
    if "nu" not in accepted and nu > 0:
        raise ConfigError("nu", nu, f"nu = 0 for '{problem}'")
    if "corruption" not in accepted and corruption > 0:
        raise ConfigError("corruption", corruption, f"corruption = 0 for '{problem}'")
    bench = build_benchmark(problem, **kwargs)
    if bench.dim != d:
        raise ConfigError("d", d, f"d = {bench.dim} for '{problem}'")
    return bench


def resolve_schedule(
    bench: Benchmark,
    eps: float,
    seed: int,
    rho: float = 0.0,
    ell: float = 0.0,
    bound_B: float = 0.0,
    delta: float = 0.1,
    c: float = 3.0,
    sigma: float = 0.0,
    eta: float = 0.0,
    perturb_r: float = -1.0,
    batch_m: int = 0,
    iters: int = 0,
    batch_cap: int = 10_000,
    iters_cap: int = 100_000,
) -> OptimizerConfig:
    """default_config for the benchmark; zero (or negative for r) means "from the schedule"."""
    cfg = default_config(
        bench.dim,
        eps,
        ell if ell > 0 else bench.ell,
        rho if rho > 0 else bench.rho,
        bound_B if bound_B > 0 else bench.bound_B,
        delta,
        c=c,
        batch_cap=batch_cap,
        iters_cap=iters_cap,
        seed=seed,
    )
    changes: Dict[str, Any] = {}
    if sigma > 0:
        changes["sigma"] = sigma
    if eta > 0:
        changes["eta"] = eta
    if perturb_r >= 0:
        changes["perturb_radius"] = perturb_r
    if batch_m > 0:
        changes["batch"] = batch_m
    if iters > 0:
        changes["max_iters"] = iters
    return cfg.replace(**changes) if changes else cfg


def in_trial_order(fn: Callable[[int], Any], trials: int, workers: int) -> List[Any]:
    if workers > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(trials)))
    return [fn(k) for k in range(trials)]


def _truth_values(pair: FunctionPairOracle, X: np.ndarray) -> np.ndarray:
    truth = pair.require_truth("emit_landscape_grid")
    try:
        return truth.evaluate_many(X)
    except DegenerateInput:
        out = np.empty(X.shape[0])
        for i, x in enumerate(X):
            try:
                out[i] = truth.value(x)
            except DegenerateInput:
                out[i] = np.nan
        return out


def emit_landscape_grid(
    pair: FunctionPairOracle,
    lo: float,
    hi: float,
    points: int,
    slice_axes: Optional[List[int]] = None,
    base: Optional[Vector] = None,
) -> List[dict]:
    """
    Tabulate F and f over a regular grid on one or two coordinate axes. The other
    coordinates are held at ``base`` (zero by default). Points where F is undefined get NaN.

    Raises:
        ConfigError: for d > 2 without slice axes, or an invalid slice.
    """
    d = pair.dim
    if not hi > lo:
        raise ConfigError("hi", hi, f"hi > lo = {lo}")
    if points < 2:
        raise ConfigError("points", points, "points >= 2")
    if not slice_axes:
        if d > 2:
            raise ConfigError("slice_axes", slice_axes, "one or two axes when d > 2")
        axes = list(range(d))
    else:
        axes = [int(a) for a in slice_axes]
        if len(axes) > 2 or len(set(axes)) != len(axes) or not all(0 <= a < d for a in axes):
            raise ConfigError("slice_axes", slice_axes, f"one or two distinct axes in [0, {d})")
    origin = np.zeros(d) if base is None or len(base) == 0 else np.asarray(base, dtype=float)
    if origin.shape != (d,):
        raise ConfigError("base", list(origin.shape), f"length {d}")
    axis = np.linspace(lo, hi, points)
    mesh = np.meshgrid(*([axis] * len(axes)), indexing="ij")
    X = np.tile(origin, (mesh[0].size, 1))
    for column, a in zip(mesh, axes):
        X[:, a] = column.ravel()
    f_vals = pair.queries.values(X)
    F_vals = _truth_values(pair, X)
    rows = []
    for x, F, f in zip(X, F_vals, f_vals):
        row = {f"x{a + 1}": float(x[a]) for a in axes}
        row["F"] = float(F)
        row["f"] = float(f)
        rows.append(row)
    logs.info("landscape grid: %s points over axes %s", len(rows), axes)
    return rows


def _run_row(k: int, record: RunRecord, max_coords: int = 10) -> dict:
    row: dict = {"trial": k}
    x = record.final
    if x.shape[0] <= max_coords:
        row.update({f"x{i + 1}": float(v) for i, v in enumerate(x)})
    else:
        row["x_norm"] = float(np.linalg.norm(x))
    terminal = record.terminal
    row["grad_norm"] = terminal.grad_norm if terminal else ""
    row["min_eig"] = terminal.min_eig if terminal else ""
    row["sosp"] = terminal.verdict if terminal else ""
    row["queries"] = record.queries_used
    row["steps"] = record.steps
    row["F_final"] = record.extra.get("F_final", "")
    return row


# --------------------------------------------------------------------------- experiment kinds


class SospExperiments(ExperimentLibrary):
    """
    The experiment kinds of sosputil. ``seed``, ``workers`` and ``output_path`` are set by
    :func:`run` from the spec before a kind is called.
    """

    def __init__(self, seed: int = 0, workers: int = 1, output_path: str = "run"):
        super().__init__()
        self.do_expression = True
        self.seed = seed
        self.workers = workers
        self.output_path = output_path

    def _optimizer_runs(
        self,
        method: str,
        problem: str,
        d: int,
        eps: float,
        nu: float,
        tau: float,
        trials: int,
        random_start: bool,
        x0: List[float],
        check_rho: float,
        stop_on_escape: bool = False,
        noise_std: float = 0.0,
        corruption: float = 0.0,
        **schedule,
    ) -> ExperimentResult:
        probe_bench = build_problem(problem, d, nu, tau, corruption)
        cfg = resolve_schedule(probe_bench, eps, self.seed, **schedule)
        rho_check = check_rho if check_rho > 0 else cfg.rho
        if x0 and len(x0) != d:
            raise ConfigError("x0", x0, f"length {d}")

        def trial(k: int) -> RunRecord:
            rng = RngStream(self.seed, k + 1)
            bench = build_problem(problem, d, nu, tau, corruption)
            truth = bench.pair.require_truth(method)
            if x0:
                start = np.asarray(x0, dtype=float)
            elif random_start:
                start = bench.random_start(rng)
            else:
                start = bench.x0
            F_start = float(truth.value(start))
            stop = None
            if stop_on_escape:
                target = F_start - cfg.escape_decrease
                stop = lambda x: truth.value(x) <= target  # noqa: E731
            if method == "zpsgd":
                record = zpsgd(bench.pair.queries, start, cfg, rng, stop_when=stop, probe=truth.value)
            elif method == "fpsgd":
                record = fpsgd(bench.pair.queries, start, cfg, rng, stop_when=stop, probe=truth.value)
            elif method == "psgd":
                sampler = gaussian_noise_sampler(bench.pair.queries.grad, noise_std)
                record = psgd(sampler, start, cfg, rng, stop_when=stop, probe=truth.value)
            else:
                record = gd_baseline(bench.pair.queries, start, cfg.eta, cfg.max_iters, stop_when=stop, probe=truth.value)
            record = attach_terminal(record, bench.pair, eps, rho_check)
            F_final = float(truth.value(record.final))
            record.extra.update(
                {
                    "F_start": F_start,
                    "F_final": F_final,
                    "decrease": F_start - F_final,
                    "escaped": F_final <= F_start - cfg.escape_decrease,
                }
            )
            return record

        records = in_trial_order(trial, trials, self.workers)
        derived = cfg.to_dict()
        derived["check_rho"] = rho_check
        if corruption > 0:
            derived["corruption"] = corruption
        if trials == 1:
            return ExperimentResult(records[0].as_rows(), records[0].to_summary(), derived, [1])
        sosp = sum(bool(r.terminal and r.terminal.verdict) for r in records)
        escaped = sum(bool(r.extra["escaped"]) for r in records)
        summary = {
            "method": method,
            "trials": trials,
            "sosp_count": sosp,
            "sosp_rate": sosp / trials,
            "escaped_count": escaped,
            "queries_used": sum(r.queries_used for r in records),
            "runs": [{k: v for k, v in r.to_summary().items() if k != "config"} for r in records],
        }
        rows = [_run_row(k, r) for k, r in enumerate(records)]
        return ExperimentResult(rows, summary, derived, list(range(1, trials + 1)))

    @ExperimentKind(
        name="zpsgd-run",
        description="Zeroth-order perturbed SGD on a benchmark pair, verified against F.",
        cli=["run-zpsgd"],
    )
    @ExpParam(
        problem="benchmark pair",
        nu="ripple amplitude |f - F| <= nu",
        tau="ripple width; 0 keeps the benchmark default",
        x0="start point; empty uses the benchmark start",
        random_start="draw the start uniformly from the benchmark box",
        check_rho="rho of the terminal eps-SOSP check; 0 uses the schedule rho",
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("eps", "target accuracy epsilon", exclusiveMinimum=0)
    @ExpParamSpec("trials", "independent runs, each on its own stream", minimum=1)
    @ExpParamSpec("sigma", "smoothing radius; 0 uses sqrt(eps / (rho d))", minimum=0)
    @ExpParamSpec("eta", "step size; 0 uses 1/ell", minimum=0)
    @ExpParamSpec("perturb_r", "perturbation radius; negative uses the schedule")
    @ExpParamSpec("batch_m", "mini-batch size; 0 uses the schedule", minimum=0)
    @ExpParamSpec("iters", "iteration count; 0 uses the schedule", minimum=0)
    def zpsgd_run(
        self,
        problem: Problem = "double-well",
        d: int = 2,
        eps: float = 0.1,
        nu: float = 0.0,
        tau: float = 0.0,
        trials: int = 1,
        random_start: bool = False,
        x0: List[float] = (),
        rho: float = 0.0,
        ell: float = 0.0,
        bound_B: float = 0.0,
        delta: float = 0.1,
        c: float = 3.0,
        sigma: float = 0.0,
        eta: float = 0.0,
        perturb_r: float = -1.0,
        batch_m: int = 0,
        iters: int = 0,
        batch_cap: int = 10_000,
        iters_cap: int = 100_000,
        check_rho: float = 0.0,
    ) -> ExperimentResult:
        return self._optimizer_runs(
            "zpsgd", problem, d, eps, nu, tau, trials, random_start, x0, check_rho,
            rho=rho, ell=ell, bound_B=bound_B, delta=delta, c=c, sigma=sigma, eta=eta,
            perturb_r=perturb_r, batch_m=batch_m, iters=iters, batch_cap=batch_cap, iters_cap=iters_cap,
        )

    @ExperimentKind(
        name="fpsgd-run",
        description="First-order perturbed SGD on the smoothed gradient field of a benchmark pair.",
        cli=["run-fpsgd"],
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("eps", "target accuracy epsilon", exclusiveMinimum=0)
    @ExpParamSpec("trials", "independent runs", minimum=1)
    @ExpParamSpec("sigma", "smoothing radius; 0 queries gradients at x itself", minimum=0)
    @ExpParamSpec("corruption", "gradient corruption of corrupted-quadratic; 0 uses eps / (2 sqrt d)", minimum=0)
    def fpsgd_run(
        self,
        problem: Problem = "corrupted-quadratic",
        d: int = 2,
        eps: float = 0.1,
        nu: float = 0.0,
        tau: float = 0.0,
        trials: int = 1,
        random_start: bool = False,
        x0: List[float] = (),
        corruption: float = 0.0,
        rho: float = 0.0,
        ell: float = 0.0,
        bound_B: float = 0.0,
        delta: float = 0.1,
        c: float = 3.0,
        sigma: float = 0.0,
        eta: float = 0.0,
        perturb_r: float = -1.0,
        batch_m: int = 0,
        iters: int = 0,
        batch_cap: int = 10_000,
        iters_cap: int = 100_000,
        check_rho: float = 0.0,
    ) -> ExperimentResult:
        if corruption == 0 and problem == "corrupted-quadratic":
            corruption = eps / (2.0 * math.sqrt(d))
        return self._optimizer_runs(
            "fpsgd", problem, d, eps, nu, tau, trials, random_start, x0, check_rho,
            corruption=corruption,
            rho=rho, ell=ell, bound_B=bound_B, delta=delta, c=c, sigma=sigma, eta=eta,
            perturb_r=perturb_r, batch_m=batch_m, iters=iters, batch_cap=batch_cap, iters_cap=iters_cap,
        )

    @ExperimentKind(
        name="psgd-run",
        description="Perturbed SGD over noisy gradients of f; can stop once the escape decrease is reached.",
        cli=["run-psgd"],
    )
    @ExpParam(noise_std="norm scale of the Gaussian gradient noise", stop_on_escape="stop at F <= F(x0) - escape_decrease")
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("eps", "target accuracy epsilon", exclusiveMinimum=0)
    @ExpParamSpec("trials", "independent runs", minimum=1)
    def psgd_run(
        self,
        problem: Problem = "saddle",
        d: int = 2,
        eps: float = 0.1,
        nu: float = 0.0,
        tau: float = 0.0,
        trials: int = 1,
        random_start: bool = False,
        x0: List[float] = (),
        noise_std: float = 0.0,
        stop_on_escape: bool = False,
        rho: float = 0.0,
        ell: float = 0.0,
        bound_B: float = 0.0,
        delta: float = 0.1,
        c: float = 3.0,
        eta: float = 0.0,
        perturb_r: float = -1.0,
        batch_m: int = 1,
        iters: int = 0,
        iters_cap: int = 100_000,
        check_rho: float = 0.0,
    ) -> ExperimentResult:
        return self._optimizer_runs(
            "psgd", problem, d, eps, nu, tau, trials, random_start, x0, check_rho,
            stop_on_escape=stop_on_escape, noise_std=noise_std,
            rho=rho, ell=ell, bound_B=bound_B, delta=delta, c=c, eta=eta,
            perturb_r=perturb_r, batch_m=batch_m, iters=iters, iters_cap=iters_cap,
        )

    @ExperimentKind(
        name="gd-run",
        description="Plain gradient descent on f, the unperturbed control arm.",
        cli=["run-gd"],
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("eps", "accuracy of the terminal check", exclusiveMinimum=0)
    @ExpParamSpec("trials", "independent runs", minimum=1)
    def gd_run(
        self,
        problem: Problem = "double-well",
        d: int = 2,
        eps: float = 0.1,
        nu: float = 0.0,
        tau: float = 0.0,
        trials: int = 1,
        random_start: bool = False,
        x0: List[float] = (),
        eta: float = 0.0,
        iters: int = 0,
        iters_cap: int = 100_000,
        check_rho: float = 0.0,
    ) -> ExperimentResult:
        return self._optimizer_runs(
            "gd", problem, d, eps, nu, tau, trials, random_start, x0, check_rho,
            eta=eta, iters=iters, iters_cap=iters_cap,
        )

    @ExperimentKind(
        name="hard-instance",
        description="Build the hard pair; optionally audit it and run the lower-bound experiment.",
    )
    @ExpParam(
        audit="run smoothness_audit and band_gap_audit",
        symbolic="include the symbolic boundary-smoothness check of g1 and g2",
        lower_bound="run ZPSGD against fresh hidden directions and classify its queries",
        write_files="write the instance descriptor and the secret v next to the output",
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("eps", "epsilon", exclusiveMinimum=0)
    @ExpParamSpec("rho", "Hessian-Lipschitz constant", exclusiveMinimum=0)
    @ExpParamSpec("mu", "ring scale of h", minimum=3)
    @ExpParamSpec("samples", "smoothness audit samples", minimum=1)
    @ExpParamSpec("band_samples", "band gap audit samples", minimum=1)
    @ExpParamSpec("query_budget", "queries per lower-bound run", minimum=1)
    @ExpParamSpec("draws", "hidden directions in the lower-bound experiment", minimum=1)
    def hard_instance(
        self,
        d: int = 4,
        eps: float = 1.0,
        rho: float = 1.0,
        mu: float = 300.0,
        variant: Variant = "polynomial-query",
        audit: bool = False,
        symbolic: bool = False,
        samples: int = 1000,
        band_samples: int = 10_000,
        lower_bound: bool = False,
        query_budget: int = 10_000,
        draws: int = 20,
        write_files: bool = False,
    ) -> ExperimentResult:
        params = HardInstanceParams.draw(d, eps, rho, mu=mu, variant=variant, seed=self.seed, stream_id=0)
        rows: List[dict] = []
        summary: Dict[str, Any] = {
            "instance": descriptor(params),
            "band_covers_ball": params.band_covers_ball,
            "declared_regularity": list(params.declared_regularity()),
        }
        streams = [0]
        if write_files:
            out = Path(self.output_path)
            summary["descriptor_file"] = str(write_descriptor(params, artifact_path(out, ".instance.json")))
            summary["secret_file"] = str(write_secret(params, artifact_path(out, ".secret.json")))
        if symbolic:
            summary["boundary_smoothness"] = boundary_smoothness()
        if audit:
            smooth = smoothness_audit(params, samples, RngStream(self.seed, 1))
            gap = band_gap_audit(params, band_samples, RngStream(self.seed, 2))
            streams += [1, 2]
            summary["smoothness_audit"] = smooth.to_dict()
            summary["band_gap_audit"] = gap.to_dict()
            rows.append({"check": "smoothness", "passed": smooth.passed, "value": smooth.max_hess_norm})
            rows.append({"check": "band_gap", "passed": gap.passed, "value": gap.max_gap})
        if lower_bound:
            optimizer = zpsgd_optimizer(params, query_budget)

            def draw(k: int) -> dict:
                hidden = HardInstanceParams.draw(
                    d, eps, rho, mu=mu, variant=variant, seed=self.seed, stream_id=2 * k + 3
                )
                return adaptive_query_experiment(
                    optimizer, hidden, query_budget, RngStream(self.seed, 2 * k + 4)
                ).to_dict()

            reports = in_trial_order(draw, draws, self.workers)
            streams += [s for k in range(draws) for s in (2 * k + 3, 2 * k + 4)]
            total = sum(r["queries"] for r in reports)
            informative = sum(r["informative_queries"] for r in reports)
            summary["lower_bound"] = {
                "draws": draws,
                "success_rate": sum(r["final_is_sosp"] for r in reports) / draws,
                "non_informative_fraction": 1.0 - informative / total if total else 1.0,
                "runs": reports,
            }
            for k, r in enumerate(reports):
                rows.append(
                    {
                        "check": f"lower_bound_{k}",
                        "passed": not r["final_is_sosp"],
                        "value": r["non_informative_fraction"],
                    }
                )
        return ExperimentResult(rows, summary, {"scale_r": params.scale_r, "nu": eps * params.scale_r}, streams)

    @ExperimentKind(
        name="relu-recovery",
        description="ZPSGD on the empirical risk of a single ReLU unit; success is ||w - w*|| <= eps.",
    )
    @ExpParam(
        population="optimize the population risk instead of the empirical one",
        n_list="sample sizes for a success-versus-n table; empty runs n only",
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("n", "sample size", minimum=1)
    @ExpParamSpec("eps", "success radius", exclusiveMinimum=0)
    @ExpParamSpec("trials", "independent datasets and starts", minimum=1)
    @ExpParamSpec("batch_m", "mini-batch size", flags=["--batch"], minimum=1)
    @ExpParamSpec("iters", "iterations", minimum=1)
    def relu_recovery(
        self,
        d: int = 2,
        n: int = 10_000,
        eps: float = 0.2,
        trials: int = 20,
        batch_m: int = 100,
        iters: int = 200,
        population: bool = False,
        n_list: List[int] = (),
    ) -> ExperimentResult:
        sizes = list(n_list) or [n]
        reports = [
            relu_recovery_experiment(
                d, size, eps, trials, seed=self.seed, batch=batch_m, iters=iters,
                population=population, workers=self.workers,
            )
            for size in sizes
        ]
        if len(reports) == 1:
            report = reports[0]
            rows = [{"trial": k, "distance": dist, "success": dist <= eps} for k, dist in enumerate(report.distances)]
            summary = report.to_dict()
        else:
            rows = [
                {"n": r.n, "success_rate": r.success_rate, "containment": r.containment} for r in reports
            ]
            rates = [r.success_rate for r in reports]
            summary = {
                "tables": [r.to_dict() for r in reports],
                "monotone": all(a <= b for a, b in zip(rates, rates[1:])),
            }
        return ExperimentResult(rows, summary, reports[0].config, list(range(trials + 1)))

    @ExperimentKind(
        name="relu-gap",
        description="Centred sup-gap between empirical and population risk versus n, with its log-log slope.",
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("n_list", "sample sizes", minItems=1)
    @ExpParamSpec("trials", "datasets per sample size", minimum=1)
    @ExpParamSpec("grid_size", "points of the region the sup is taken over", minimum=1)
    def relu_gap(
        self,
        d: int = 5,
        n_list: List[int] = (100, 1000, 10_000),
        trials: int = 20,
        grid_size: int = 256,
    ) -> ExperimentResult:
        table = uniform_gap_experiment(d, n_list, trials, seed=self.seed, grid_size=grid_size)
        summary = {"slope": table.slope, "mean_gaps": table.mean_gaps, "stderr": table.stderr}
        return ExperimentResult(table.rows(), summary, {}, list(range(len(n_list) * trials + 1)))

    @ExperimentKind(
        name="concentration",
        description="Fraction of hidden directions that put a fixed point of the cube outside the band.",
    )
    @ExpParam(worst_case="use the unit direction of sin x")
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=2)
    @ExpParamSpec("trials", "hidden directions drawn", minimum=1)
    @ExpParamSpec("mu", "ring scale", minimum=3)
    def concentration(
        self, d: int = 100, trials: int = 1_000_000, mu: float = 300.0, worst_case: bool = False
    ) -> ExperimentResult:
        report = fixed_point_concentration(d, trials, RngStream(self.seed, 1), mu=mu, worst_case=worst_case)
        summary = report.to_dict()
        row = {k: summary[k] for k in ("d", "trials", "misses", "fraction", "bound", "passed")}
        return ExperimentResult([row], summary, {}, [1])

    @ExperimentKind(
        name="exp-search",
        description="Exhaustive cover search for an approximate SOSP of F from queries of f.",
    )
    @ExpParam(
        problem="benchmark pair (d <= 3)",
        nu="ripple amplitude; negative uses sqrt(eps^3 / rho) / 1000",
        check_factor="the returned point is checked as a (check_factor eps)-SOSP of F",
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1, maximum=3)
    @ExpParamSpec("eps", "epsilon", exclusiveMinimum=0)
    @ExpParamSpec("kappa", "probe residual multiplier", exclusiveMinimum=0)
    @ExpParamSpec("cap", "largest cover allowed", minimum=1)
    def exp_search(
        self,
        problem: Problem = "quartic-ripple",
        d: int = 1,
        eps: float = 0.3,
        nu: float = -1.0,
        tau: float = 0.0,
        rho: float = 0.0,
        ell: float = 0.0,
        bound_B: float = 0.0,
        kappa: float = 6.0,
        probe_factor: float = 1.0,
        sphere_eps: float = 0.1,
        cap: int = 10_000_000,
        mode: Literal["least-squares", "enumerate"] = "least-squares",
        check_factor: float = 2.0,
    ) -> ExperimentResult:
        probe = build_problem(problem, d)
        rho = rho if rho > 0 else probe.rho
        ell = ell if ell > 0 else probe.ell
        bound_B = bound_B if bound_B > 0 else probe.bound_B
        if nu < 0:
            nu = math.sqrt(eps**3 / rho) / 1000.0
        bench = build_problem(problem, d, nu, tau)
        result = exhaustive_sosp_search(
            bench.pair.queries, d, eps, ell, rho, bound_B, nu,
            kappa=kappa, probe_factor=probe_factor, sphere_eps=sphere_eps, cap=cap, mode=mode,
        )
        report = check_sosp(bench.pair.require_truth("exp_search"), result.point, check_factor * eps, rho)
        row = {f"x{i + 1}": float(v) for i, v in enumerate(result.point)}
        row.update({"index": result.index, "grad_norm": report.grad_norm, "min_eig": report.min_eig})
        row["sosp"] = report.verdict
        summary = {
            "point": result.point,
            "index": result.index,
            "points_tried": result.points_tried,
            "queries_used": result.queries,
            "cover_size": result.cover_size,
            "model_g": result.g,
            "model_H": result.H,
            "terminal": report.to_dict(),
        }
        derived = {"nu": nu, "rho": rho, "ell": ell, "bound_B": bound_B, "radius": bound_B / eps, "resolution": eps / ell}
        return ExperimentResult([row], summary, derived, [])

    @ExperimentKind(
        name="smoothing-audit",
        description="Monte Carlo audit of the smoothed derivatives of f against the derivatives of F.",
    )
    @ExpParam(
        tail="also audit the sub-Gaussian tail and the variance scaling of the estimator",
        check_hessian="also audit the smoothed Hessian",
        eps="epsilon of the hard instance",
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("sigma", "smoothing radius", exclusiveMinimum=0)
    @ExpParamSpec("points", "sampled points", minimum=1)
    @ExpParamSpec("inner_samples", "Monte Carlo samples per point", minimum=2)
    def smoothing_audit(
        self,
        problem: AuditProblem = "quadratic",
        d: int = 2,
        nu: float = 0.01,
        tau: float = 0.0,
        sigma: float = 0.1,
        points: int = 100,
        inner_samples: int = 1_000_000,
        check_hessian: bool = True,
        tail: bool = False,
        eps: float = 1.0,
        rho: float = 1.0,
        mu: float = 300.0,
    ) -> ExperimentResult:
        sampler = None
        if problem == "hard-instance":
            params = HardInstanceParams.draw(d, eps, rho, mu=mu, seed=self.seed, stream_id=0)
            pair = make_hard_pair(params, workers=self.workers)
            nu = eps * params.scale_r
            radius = params.scale_r * params.ball_radius
            bound_B = nu

            def sampler(rng: RngStream, count: int) -> np.ndarray:
                return rng.uniform_ball(d, radius, count=count)

        else:
            bench = build_problem(problem, d, nu, tau)
            pair, nu, bound_B = bench.pair, bench.pair.nu, bench.bound_B
        report = verify_smoothing_bounds(
            pair, nu, sigma, points, RngStream(self.seed, 1),
            inner_samples=inner_samples, sampler=sampler, check_hessian=check_hessian,
        )
        summary: Dict[str, Any] = {
            "passed": report.passed,
            "grad_bound": report.grad_bound,
            "hess_bound": report.hess_bound,
            "max_grad_deviation": report.max_grad_deviation,
            "max_hess_deviation": report.max_hess_deviation,
            "points": report.points,
            "violations": report.violations,
        }
        streams = [1]
        if tail:
            x = np.zeros(d)
            tails = subgaussian_tail_audit(pair.queries, x, sigma, bound_B, RngStream(self.seed, 2))
            summary["tail_audit"] = {**asdict(tails), "passed": tails.passed}
            summary["variance_scaling"] = variance_scaling(pair.queries, x, sigma, RngStream(self.seed, 3))
            streams += [2, 3]
        row = {
            "points": report.points,
            "violations": len(report.violations),
            "max_grad_deviation": report.max_grad_deviation,
            "grad_bound": report.grad_bound,
            "max_hess_deviation": report.max_hess_deviation,
            "hess_bound": report.hess_bound,
        }
        return ExperimentResult([row], summary, {"sigma": sigma, "nu": nu, "rho": report.rho}, streams)

    @ExperimentKind(
        name="landscape",
        description="Grid of (x, F, f) values over one or two axes for external surface plotting.",
    )
    @ExpParam(
        slice_axes="zero-based axes to vary; required when d > 2",
        base="values of the fixed coordinates; empty means zero",
        n="ReLU sample size",
    )
    @ExpParamSpec("d", "dimension", flags=["--dim"], minimum=1)
    @ExpParamSpec("points", "grid points per axis", minimum=2)
    def landscape(
        self,
        problem: LandscapeProblem = "double-well",
        d: int = 2,
        lo: float = -2.0,
        hi: float = 2.0,
        points: int = 40,
        slice_axes: List[int] = (),
        base: List[float] = (),
        nu: float = 0.0,
        tau: float = 0.0,
        n: int = 1000,
        eps: float = 1.0,
        rho: float = 1.0,
        mu: float = 10.0,
    ) -> ExperimentResult:
        if problem == "relu":
            inst = ReluInstance.generate(d, n, seed=self.seed, stream_id=1)
            pair = make_relu_pair(inst)
        elif problem == "hard-instance":
            pair = make_hard_pair(HardInstanceParams.draw(d, eps, rho, mu=mu, seed=self.seed, stream_id=0))
        else:
            pair = build_problem(problem, d, nu, tau).pair
        rows = emit_landscape_grid(pair, lo, hi, points, list(slice_axes), list(base))
        F_vals = np.array([r["F"] for r in rows])
        summary = {"grid_points": len(rows), "F_min": np.nanmin(F_vals), "F_max": np.nanmax(F_vals)}
        return ExperimentResult(rows, summary, {}, [0, 1] if problem == "relu" else [0])


# --------------------------------------------------------------------------- artifacts


def artifact_path(out: Path, suffix: str) -> Path:
    """<out><suffix>, keeping any dots already in the output name."""
    return out.parent / (out.name + suffix)


def write_csv(rows: List[dict], path: Path) -> Path:
    fields: List[str] = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields, restval="", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return path


def write_json(doc: Any, path: Path) -> Path:
    path.write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def meta_block(spec: ExperimentSpec, stream_ids: List[int]) -> dict:
    return {
        "package": "sosputil",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": spec.seed,
        "rng": RNG_ALGORITHM,
        "stream_ids": stream_ids,
    }


def error_document(error: Exception, kind: str) -> dict:
    return {"error": type(error).__name__, "message": str(error), "kind": kind}


def _report_error(error: Exception, kind: str, out: Path) -> int:
    doc = error_document(error, kind)
    write_json(doc, artifact_path(out, ".error.json"))
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")
    return 2


def run(spec: ExperimentSpec, library: Optional[SospExperiments] = None) -> int:
    """
    Resolve and run one experiment, writing its artifacts next to ``spec.output_path``.

    Returns 0 on success. Any error, library or not, is written as a JSON error document to
    stdout and to <out>.error.json, and 2 is returned.
    """
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    library = library or SospExperiments()
    library.seed, library.workers, library.output_path = spec.seed, spec.workers, str(out)
    try:
        kind, params = library.resolve({"kind": spec.kind, "params": spec.params})
        logs.info("run %s seed=%s params=%s", kind, spec.seed, params)
        started = time.perf_counter()
        result: ExperimentResult = library.KindDict[kind].command(library, **params)
        elapsed = time.perf_counter() - started
    except SospLibError as e:
        logs.error("experiment %s failed: %s", spec.kind, e, exc_info=True)
        return _report_error(e, spec.kind, out)
    except Exception as e:
        logs.error("experiment %s raised %s", spec.kind, type(e).__name__, exc_info=True)
        return _report_error(e, spec.kind, out)
    resolved_spec = ExperimentSpec(
        kind=kind,
        params=params,
        seed=spec.seed,
        output_path=spec.output_path,
        record_wall_time=spec.record_wall_time,
        workers=spec.workers,
    )
    summary = {
        "spec": resolved_spec.to_dict(),
        "resolved": params,
        "derived": result.derived,
        "results": result.summary,
    }
    if spec.record_wall_time:
        summary["wall_time"] = elapsed
    write_csv(result.rows, artifact_path(out, ".csv"))
    write_json(summary, artifact_path(out, ".summary.json"))
    write_json(meta_block(spec, result.stream_ids), artifact_path(out, ".meta.json"))
    logs.info("run %s finished: %s", kind, out)
    return 0
