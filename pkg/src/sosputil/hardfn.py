"""
The adversarial hard instance.

Scale-free pair on the cube H = [-pi/2, pi/2)^d:

    F(x) = h(sin x) + ||sin x||^2,     h(y) = g1(mu v.y) g2(mu sqrt(||y||^2 - (v.y)^2)),

where the ball S = {||x|| <= 3/mu} hides a direction v of negative curvature, and the
surrogate f agrees with ||sin x||^2 wherever F carries no information about v (the band
S_v = {x in S : |<sin x, v>| <= log d / sqrt(d)}, or the whole ball for the
information-theoretic variant) and with F elsewhere.

The scaled pair is F~(x) = eps r F(x / r), f~(x) = eps r f(x / r) with r = sqrt(eps / rho).
Every evaluation reduces x / r into H first, so both are exactly (pi r)-periodic.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
import sympy as sp

from .errors import ConfigError
from .logger import logs
from .oracle import FunctionPairOracle, Matrix, QueryOracle, RngStream, TruthBundle, Vector, make_pair
from .stationarity import check_sosp
from .util import commitment

PROOF_MU = 300.0
GRAD_LIPSCHITZ_CONST = 7e6
HESS_LIPSCHITZ_CONST = 2.8e10
CERT_GRAD = 1e-3
CERT_EIG = -0.3

Variant = Literal["polynomial-query", "information-theoretic"]
VARIANTS = ("polynomial-query", "information-theoretic")


# --------------------------------------------------------------------------- scalar polynomials


def g1(x):
    """(-16|x|^5 + 48x^4 - 48|x|^3 + 16x^2) 1{|x| < 1} = 16 s^2 (1 - s)^3 on s = |x| < 1."""
    s = np.abs(x)
    return np.where(s < 1.0, 16.0 * s**2 * (1.0 - s) ** 3, 0.0)


def g2(x):
    """(3x^4 - 8|x|^3 + 6x^2 - 1) 1{|x| < 1} = -(1 - s)^3 (1 + 3s) on s = |x| < 1."""
    s = np.abs(x)
    return np.where(s < 1.0, -((1.0 - s) ** 3) * (1.0 + 3.0 * s), 0.0)


def g1_prime(x):
    s = np.abs(x)
    return np.where(s < 1.0, 16.0 * x * (1.0 - s) ** 2 * (2.0 - 5.0 * s), 0.0)


def g1_second(x):
    s = np.abs(x)
    return np.where(s < 1.0, 16.0 * (1.0 - s) * (2.0 - 16.0 * s + 20.0 * s**2), 0.0)


def g2_prime(x):
    s = np.abs(x)
    return np.where(s < 1.0, 12.0 * x * (1.0 - s) ** 2, 0.0)


def g2_second(x):
    s = np.abs(x)
    return np.where(s < 1.0, 12.0 * (1.0 - s) * (1.0 - 3.0 * s), 0.0)


def boundary_smoothness() -> dict:
    """
    Symbolic check that g1, g2 and their first two derivatives vanish at |x| = 1, and
    that the closed-form derivatives above agree with sympy's.
    """
    s = sp.symbols("s", nonnegative=True)
    polys = {
        "g1": (-16 * s**5 + 48 * s**4 - 48 * s**3 + 16 * s**2, 16 * s * (1 - s) ** 2 * (2 - 5 * s),
               16 * (1 - s) * (2 - 16 * s + 20 * s**2)),
        "g2": (3 * s**4 - 8 * s**3 + 6 * s**2 - 1, 12 * s * (1 - s) ** 2, 12 * (1 - s) * (1 - 3 * s)),
    }
    out: dict = {}
    forms_match = True
    for name, (expr, first, second) in polys.items():
        d1 = sp.diff(expr, s)
        d2 = sp.diff(expr, s, 2)
        out[name] = [int(expr.subs(s, 1)), int(d1.subs(s, 1)), int(d2.subs(s, 1))]
        forms_match &= sp.expand(d1 - first) == 0 and sp.expand(d2 - second) == 0
    out["closed_forms_match"] = bool(forms_match)
    out["smooth"] = bool(forms_match and all(v == 0 for k in ("g1", "g2") for v in out[k]))
    return out


# --------------------------------------------------------------------------- parameters


@dataclass(frozen=True, eq=False)
class HardInstanceParams:
    """
    Parameters of the hard pair. ``v`` is the hidden unit direction; it never leaves
    this object except through :func:`write_secret`.
    """

    d: int
    epsilon: float
    rho: float
    v: np.ndarray = field(repr=False)
    mu: float = PROOF_MU
    variant: Variant = "polynomial-query"
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("d", self.d, "d >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", self.epsilon, "epsilon > 0")
        if not self.rho > 0:
            raise ConfigError("rho", self.rho, "rho > 0")
        if not self.mu >= 3:
            raise ConfigError("mu", self.mu, "mu >= 3")
        if self.variant not in VARIANTS:
            raise ConfigError("variant", self.variant, f"one of {VARIANTS}")
        v = np.asarray(self.v, dtype=float)
        if v.shape != (self.d,):
            raise ConfigError("v", v.shape, f"shape ({self.d},)")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ConfigError("v", float(np.linalg.norm(v)), "||v|| = 1")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        if self.mu < PROOF_MU:
            logs.warning("mu=%s is below %s; the proof constants assume mu=%s", self.mu, PROOF_MU, PROOF_MU)

    @classmethod
    def draw(
        cls,
        d: int,
        epsilon: float,
        rho: float,
        mu: float = PROOF_MU,
        variant: Variant = "polynomial-query",
        seed: int = 0,
        stream_id: int = 0,
    ) -> "HardInstanceParams":
        """Draw the hidden direction uniformly from the sphere with RngStream(seed, stream_id)."""
        v = RngStream(seed, stream_id).unit_vector(d)
        v = v / np.linalg.norm(v)
        return cls(d=d, epsilon=epsilon, rho=rho, v=v, mu=mu, variant=variant, seed=seed)

    @property
    def scale_r(self) -> float:
        return math.sqrt(self.epsilon / self.rho)

    @property
    def ball_radius(self) -> float:
        """Radius 3/mu of the ball S in scale-free coordinates."""
        return 3.0 / self.mu

    @property
    def band_threshold(self) -> float:
        return math.log(self.d) / math.sqrt(self.d)

    @property
    def band_covers_ball(self) -> bool:
        """True when every point of S lies in the band, i.e. log d / sqrt(d) >= 3 / mu."""
        return self.band_threshold >= self.ball_radius

    def declared_regularity(self) -> Tuple[float, float, float]:
        """(ell, rho, B) of F~ from the scale-free proof constants."""
        scale = math.sqrt(self.rho * self.epsilon)
        return (
            GRAD_LIPSCHITZ_CONST * scale,
            HESS_LIPSCHITZ_CONST * self.rho,
            self.epsilon * self.scale_r * (1.0 + self.d),
        )


def certificate_tolerances(params: HardInstanceParams) -> Tuple[float, float]:
    """
    (eps_c, rho_c) for the eps-SOSP check of F~ that the no-SOSP certificate supports:
    eps_c = 5e-4 eps, sqrt(rho_c eps_c) = 0.25 sqrt(rho eps).
    """
    eps_c = 0.5 * CERT_GRAD * params.epsilon
    rho_c = (0.25 * math.sqrt(params.rho * params.epsilon)) ** 2 / eps_c
    return eps_c, rho_c


# --------------------------------------------------------------------------- h and F (scale-free)


def reduce_to_cube(w: np.ndarray) -> np.ndarray:
    """Range-reduce coordinates into [-pi/2, pi/2)."""
    return w - np.pi * np.floor(w / np.pi + 0.5)


def _split(y: np.ndarray, v: Vector) -> Tuple[np.ndarray, np.ndarray]:
    a = y @ v
    z = np.sqrt(np.maximum(np.sum(y * y, axis=-1) - a * a, 0.0))
    return a, z


def h_value(y, v: Vector, mu: float = PROOF_MU):
    """h(y) = g1(mu v.y) g2(mu ||y - (v.y) v||) for y of shape (d,) or (n, d)."""
    y = np.asarray(y, dtype=float)
    a, z = _split(y, v)
    out = g1(mu * a) * g2(mu * z)
    return float(out) if y.ndim == 1 else out


class _HTerms:
    """Scalar factors of grad h and hess h at one point y."""

    def __init__(self, y: Vector, v: Vector, mu: float):
        a, z = _split(y, v)
        a, z = float(a), float(z)
        s1, s2 = mu * a, mu * z
        self.v = v
        self.h1 = float(g1(s1))
        self.h1p = mu * float(g1_prime(s1))
        self.h1pp = mu**2 * float(g1_second(s1))
        self.h2 = float(g2(s2))
        self.h2p = mu * float(g2_prime(s2))
        self.h2pp = mu**2 * float(g2_second(s2))
        # h2'(z) / z, continuous at z = 0
        self.q = 12.0 * mu**2 * (1.0 - s2) ** 2 if s2 < 1.0 else 0.0
        self.u = (y - a * v) / z if z > 0 else np.zeros_like(y)

    def grad(self) -> Vector:
        return self.h1p * self.h2 * self.v + self.h1 * self.h2p * self.u

    def hvp(self, w: Vector) -> Vector:
        v, u = self.v, self.u
        vw = float(v @ w)
        uw = float(u @ w)
        pw = w - v * vw
        return (
            self.h1pp * self.h2 * vw * v
            + self.h1p * self.h2p * (uw * v + vw * u)
            + self.h1 * (self.h2pp * uw * u + self.q * (pw - uw * u))
        )

    def hess(self) -> Matrix:
        v, u = self.v, self.u
        d = v.shape[0]
        proj = np.eye(d) - np.outer(v, v)
        uu = np.outer(u, u)
        return (
            self.h1pp * self.h2 * np.outer(v, v)
            + self.h1p * self.h2p * (np.outer(v, u) + np.outer(u, v))
            + self.h1 * (self.h2pp * uu + self.q * (proj - uu))
        )


def h_grad(y: Vector, v: Vector, mu: float = PROOF_MU) -> Vector:
    return _HTerms(np.asarray(y, dtype=float), v, mu).grad()


def h_hess(y: Vector, v: Vector, mu: float = PROOF_MU) -> Matrix:
    return _HTerms(np.asarray(y, dtype=float), v, mu).hess()


def scale_free_F(W: np.ndarray, v: Vector, mu: float) -> np.ndarray:
    """F(x) = h(sin x) + ||sin x||^2 on already reduced rows."""
    S = np.sin(W)
    return h_value(np.atleast_2d(S), v, mu) + np.sum(S * S, axis=-1)


def scale_free_grad(w: Vector, v: Vector, mu: float) -> Vector:
    S, C = np.sin(w), np.cos(w)
    return _HTerms(S, v, mu).grad() * C + np.sin(2.0 * w)


def scale_free_hess(w: Vector, v: Vector, mu: float) -> Matrix:
    S, C = np.sin(w), np.cos(w)
    terms = _HTerms(S, v, mu)
    gh = terms.grad()
    return C[:, None] * terms.hess() * C[None, :] + np.diag(2.0 * np.cos(2.0 * w) - gh * S)


def scale_free_hvp(w: Vector, v: Vector, mu: float, u: Vector) -> Vector:
    S, C = np.sin(w), np.cos(w)
    terms = _HTerms(S, v, mu)
    return C * terms.hvp(C * u) + (2.0 * np.cos(2.0 * w) - terms.grad() * S) * u


# --------------------------------------------------------------------------- regions


class RegionLabel(enum.Enum):
    """
    BAND and PADDING are the non-informative regions; BALL is the informative rest of
    the ball S (points of S outside the band). Together they partition the cube.
    """

    BALL = "ball"
    BAND = "band"
    PADDING = "padding"


@dataclass(frozen=True)
class Region:
    label: RegionLabel
    in_ball: bool
    in_band: bool
    reduced: bool

    @property
    def informative(self) -> bool:
        return self.label is RegionLabel.BALL


def _masks(W: np.ndarray, params: HardInstanceParams) -> Tuple[np.ndarray, np.ndarray]:
    in_ball = np.linalg.norm(W, axis=-1) <= params.ball_radius
    in_band = in_ball & (np.abs(np.sin(W) @ params.v) <= params.band_threshold)
    return in_ball, in_band


def _reduced(X, params: HardInstanceParams) -> np.ndarray:
    return reduce_to_cube(np.atleast_2d(np.asarray(X, dtype=float)) / params.scale_r)


def classify(x: Vector, params: HardInstanceParams) -> Region:
    """Region of x in the scaled instance, after reducing x / r into the fundamental cube."""
    x = np.asarray(x, dtype=float)
    w = x / params.scale_r
    W = reduce_to_cube(w)
    in_ball, in_band = _masks(W[None, :], params)
    if in_band[0]:
        label = RegionLabel.BAND
    elif in_ball[0]:
        label = RegionLabel.BALL
    else:
        label = RegionLabel.PADDING
    return Region(label=label, in_ball=bool(in_ball[0]), in_band=bool(in_band[0]), reduced=bool(np.any(W != w)))


def informative_mask(X: Matrix, params: HardInstanceParams) -> np.ndarray:
    """Boolean mask of rows lying in the informative region (ball minus band)."""
    in_ball, in_band = _masks(_reduced(X, params), params)
    return in_ball & ~in_band


# --------------------------------------------------------------------------- scaled pair


def hard_F_many(X: Matrix, params: HardInstanceParams) -> Vector:
    W = _reduced(X, params)
    return params.epsilon * params.scale_r * scale_free_F(W, params.v, params.mu)


def hard_f_many(X: Matrix, params: HardInstanceParams) -> Vector:
    W = _reduced(X, params)
    S = np.sin(W)
    base = np.sum(S * S, axis=-1)
    F = h_value(S, params.v, params.mu) + base
    in_ball, in_band = _masks(W, params)
    mask = in_band if params.variant == "polynomial-query" else in_ball
    return params.epsilon * params.scale_r * np.where(mask, base, F)


def hard_F(x: Vector, params: HardInstanceParams) -> float:
    return float(hard_F_many(np.asarray(x, dtype=float)[None, :], params)[0])


def hard_f(x: Vector, params: HardInstanceParams) -> float:
    return float(hard_f_many(np.asarray(x, dtype=float)[None, :], params)[0])


def hard_grad(x: Vector, params: HardInstanceParams) -> Vector:
    w = _reduced(x, params)[0]
    return params.epsilon * scale_free_grad(w, params.v, params.mu)


def hard_hess(x: Vector, params: HardInstanceParams) -> Matrix:
    w = _reduced(x, params)[0]
    return (params.epsilon / params.scale_r) * scale_free_hess(w, params.v, params.mu)


def hard_hvp(x: Vector, u: Vector, params: HardInstanceParams) -> Vector:
    w = _reduced(x, params)[0]
    return (params.epsilon / params.scale_r) * scale_free_hvp(w, params.v, params.mu, np.asarray(u, dtype=float))


def make_hard_pair(params: HardInstanceParams, workers: int = 1) -> FunctionPairOracle:
    """The scaled pair (f~, F~) with analytic derivatives of F~ in the truth view; declared nu = eps r."""
    ell, rho, bound = params.declared_regularity()
    truth = TruthBundle(
        value=lambda x: hard_F(x, params),
        grad=lambda x: hard_grad(x, params),
        hess=lambda x: hard_hess(x, params),
        hvp=lambda x, u: hard_hvp(x, u, params),
        values=lambda X: hard_F_many(X, params),
        rho=rho,
        ell=ell,
        bound_B=bound,
    )
    logs.info(
        "hard pair: d=%s variant=%s mu=%s band_covers_ball=%s", params.d, params.variant, params.mu,
        params.band_covers_ball,
    )
    return make_pair(
        lambda X: hard_f_many(X, params),
        params.d,
        F_eval=truth,
        nu=params.epsilon * params.scale_r,
        vectorized=True,
        workers=workers,
    )


# --------------------------------------------------------------------------- descriptor files


def descriptor(params: HardInstanceParams) -> dict:
    """Public description of an instance; v appears only as its commitment."""
    return {
        "d": params.d,
        "epsilon": params.epsilon,
        "rho": params.rho,
        "mu": params.mu,
        "variant": params.variant,
        "v_commitment": commitment(params.v),
        "seed": params.seed,
    }


def write_descriptor(params: HardInstanceParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(descriptor(params), indent=2, sort_keys=True))
    return path


def write_secret(params: HardInstanceParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"v": params.v.tolist(), "v_commitment": commitment(params.v)}, indent=2))
    return path


def load_instance(descriptor_path: Union[str, Path], secret_path: Union[str, Path]) -> HardInstanceParams:
    """Rebuild parameters from a descriptor and its secret file, checking the commitment."""
    desc = json.loads(Path(descriptor_path).read_text())
    secret = json.loads(Path(secret_path).read_text())
    v = np.asarray(secret["v"], dtype=float)
    if commitment(v) != desc["v_commitment"]:
        raise ConfigError("v", "secret file", "v matching the descriptor's commitment")
    return HardInstanceParams(
        d=int(desc["d"]),
        epsilon=float(desc["epsilon"]),
        rho=float(desc["rho"]),
        v=v,
        mu=float(desc["mu"]),
        variant=desc["variant"],
        seed=int(desc["seed"]),
    )


# --------------------------------------------------------------------------- audits


def _chunks(total: int, d: int, budget: int = 1 << 22):
    size = max(1, budget // max(1, d))
    done = 0
    while done < total:
        n = min(size, total - done)
        yield n
        done += n


@dataclass
class BandGapReport:
    max_gap: float
    bound: float
    trivial_bound: float
    band_samples: int
    outside_samples: int
    outside_max_gap: float

    @property
    def ratio(self) -> float:
        return self.max_gap / self.trivial_bound

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.trivial_bound * (1 + 1e-12) and self.outside_max_gap == 0.0

    def to_dict(self) -> dict:
        return {**self.__dict__, "ratio": self.ratio, "passed": self.passed}


def band_gap_audit(
    params: HardInstanceParams,
    sample_count: int,
    rng: RngStream,
    outside_count: Optional[int] = None,
) -> BandGapReport:
    """
    Max |f~ - F~| over sampled band points against eps r min(1, 16 mu^2 log^2 d / d), plus
    an exact-equality check at points outside the band.
    """
    er = params.epsilon * params.scale_r
    bound = er * min(1.0, 16.0 * params.mu**2 * math.log(params.d) ** 2 / params.d)
    r, d = params.scale_r, params.d
    max_gap, band_seen = 0.0, 0
    attempts = 0
    while band_seen < sample_count and attempts < 50:
        for n in _chunks(sample_count - band_seen, d):
            X = rng.uniform_ball(d, r * params.ball_radius, count=n)
            _, in_band = _masks(_reduced(X, params), params)
            X = X[in_band]
            if X.shape[0]:
                gap = np.abs(hard_f_many(X, params) - hard_F_many(X, params))
                max_gap = max(max_gap, float(gap.max()))
            band_seen += int(X.shape[0])
        attempts += 1
    outside_count = sample_count if outside_count is None else outside_count
    outside_gap, outside_seen = 0.0, 0
    for n in _chunks(outside_count, d):
        X = rng.uniform(-np.pi * r / 2, np.pi * r / 2, size=(n, d))
        in_ball, in_band = _masks(_reduced(X, params), params)
        replaced = in_band if params.variant == "polynomial-query" else in_ball
        X = X[~replaced]
        if X.shape[0]:
            outside_gap = max(outside_gap, float(np.max(np.abs(hard_f_many(X, params) - hard_F_many(X, params)))))
        outside_seen += int(X.shape[0])
    report = BandGapReport(
        max_gap=max_gap,
        bound=bound,
        trivial_bound=er,
        band_samples=band_seen,
        outside_samples=outside_seen,
        outside_max_gap=outside_gap,
    )
    logs.info("band_gap_audit d=%s: max gap %.3e (bound %.3e)", d, max_gap, bound)
    return report


@dataclass
class ConcentrationReport:
    d: int
    trials: int
    misses: int
    bound: float
    worst_case: bool

    @property
    def fraction(self) -> float:
        return self.misses / self.trials

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0

    @property
    def stderr(self) -> float:
        p = min(self.bound, 1.0)
        return math.sqrt(max(p * (1 - p), 1.0 / self.trials) / self.trials)

    @property
    def passed(self) -> bool:
        return self.vacuous or self.fraction <= self.bound + 4.0 * self.stderr

    def to_dict(self) -> dict:
        return {**self.__dict__, "fraction": self.fraction, "vacuous": self.vacuous, "passed": self.passed}


def fixed_point_concentration(
    d: int,
    trials: int,
    rng: RngStream,
    x: Optional[Vector] = None,
    mu: float = PROOF_MU,
    worst_case: bool = False,
) -> ConcentrationReport:
    """
    For a fixed x, the fraction of uniformly drawn hidden directions v with
    |<y, v>| > log d / sqrt(d), against 2 exp(-(log d)^2 / 2).

    Without ``x`` the point is drawn uniformly from the cube [-pi/2, pi/2)^d and y is the unit
    direction of sin x, the reduction the sphere bound is stated for. A given x is tested with
    y = sin x unless ``worst_case`` asks for the unit direction; with y = sin x, a point of the
    ball of radius 3/mu never misses.
    """
    if d < 2:
        raise ConfigError("d", d, "d >= 2")
    if x is None:
        x = rng.uniform(-math.pi / 2, math.pi / 2, size=d)
        worst_case = True
    elif np.linalg.norm(x) > 3.0 / mu and not worst_case:
        logs.warning("x lies outside the ball of radius 3/mu=%.3g", 3.0 / mu)
    y = np.sin(np.asarray(x, dtype=float))
    if worst_case:
        norm = np.linalg.norm(y)
        y = y / norm if norm > 0 else y
    threshold = math.log(d) / math.sqrt(d)
    bound = 2.0 * math.exp(-(math.log(d) ** 2) / 2.0)
    if bound >= 1.0:
        logs.warning("concentration bound %.3g is vacuous at d=%s", bound, d)
    misses = 0
    for n in _chunks(trials, d, budget=1 << 23):
        V = rng.unit_vectors(n, d)
        misses += int(np.count_nonzero(np.abs(V @ y) > threshold))
    return ConcentrationReport(d=d, trials=trials, misses=misses, bound=bound, worst_case=worst_case)


@dataclass
class SmoothnessReport:
    samples: int
    max_abs_h: float = 0.0
    max_grad_h_over_mu: float = 0.0
    max_abs_F_minus_bound: float = -math.inf
    max_hess_norm: float = 0.0
    max_hess_lipschitz: float = 0.0
    certificate_points: int = 0
    violations: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def smoothness_audit(
    params: HardInstanceParams,
    sample_count: int,
    rng: RngStream,
    pair_distance: float = 1e-4,
) -> SmoothnessReport:
    """
    Check the scale-free instance against its proof constants at sampled points:
    |h| <= 1, ||grad h|| <= 3 mu, |F| <= 1 + d, ||hess F|| <= 7e6, Hessian-Lipschitz
    ratio <= 2.8e10 on nearby pairs, and at non-informative points the no-SOSP
    certificate ||grad F|| >= 1e-3 or lambda_min(hess F) <= -0.3.

    Half of the points are drawn where h is active (radius sqrt(2)/mu), half across the cube.
    """
    d, mu, v = params.d, params.mu, params.v
    report = SmoothnessReport(samples=sample_count)
    near = sample_count // 2
    points = np.vstack(
        [
            rng.uniform_ball(d, math.sqrt(2.0) / mu, count=near),
            rng.uniform(-np.pi / 2, np.pi / 2, size=(sample_count - near, d)),
        ]
    )
    directions = rng.unit_vectors(sample_count, d)
    in_ball = np.linalg.norm(points, axis=1) <= params.ball_radius
    in_band = in_ball & (np.abs(np.sin(points) @ v) <= params.band_threshold)
    for i, w in enumerate(points):
        S = np.sin(w)
        terms = _HTerms(S, v, mu)
        h = h_value(S, v, mu)
        gh = float(np.linalg.norm(terms.grad()))
        F = float(scale_free_F(w[None, :], v, mu)[0])
        H = scale_free_hess(w, v, mu)
        eigs = np.linalg.eigvalsh(H)
        hess_norm = float(np.max(np.abs(eigs)))
        w2 = reduce_to_cube(w + pair_distance * directions[i])
        lip = float(np.linalg.norm(scale_free_hess(w2, v, mu) - H, 2)) / pair_distance
        report.max_abs_h = max(report.max_abs_h, abs(h))
        report.max_grad_h_over_mu = max(report.max_grad_h_over_mu, gh / mu)
        report.max_abs_F_minus_bound = max(report.max_abs_F_minus_bound, abs(F) - (1 + d))
        report.max_hess_norm = max(report.max_hess_norm, hess_norm)
        report.max_hess_lipschitz = max(report.max_hess_lipschitz, lip)
        point = w.tolist()
        if abs(h) > 1.0:
            report.violations.append({"kind": "|h| <= 1", "point": point, "value": h})
        if gh > 3.0 * mu:
            report.violations.append({"kind": "||grad h|| <= 3 mu", "point": point, "value": gh})
        if abs(F) > 1 + d:
            report.violations.append({"kind": "|F| <= 1 + d", "point": point, "value": F})
        if hess_norm > GRAD_LIPSCHITZ_CONST:
            report.violations.append({"kind": "||hess F|| <= 7e6", "point": point, "value": hess_norm})
        if lip > HESS_LIPSCHITZ_CONST:
            report.violations.append(
                {"kind": "hessian lipschitz", "point": point, "pair": w2.tolist(), "value": lip}
            )
        if in_band[i] or not in_ball[i]:
            report.certificate_points += 1
            g_norm = float(np.linalg.norm(scale_free_grad(w, v, mu)))
            if g_norm < CERT_GRAD and eigs[0] > CERT_EIG:
                report.violations.append(
                    {"kind": "no-SOSP certificate", "point": point, "grad_norm": g_norm, "min_eig": float(eigs[0])}
                )
    if report.violations:
        logs.warning("smoothness audit: %d violations", len(report.violations))
    return report


# --------------------------------------------------------------------------- lower-bound experiment

Optimizer = Callable[[QueryOracle, Vector, RngStream], Vector]


@dataclass
class AdaptiveQueryReport:
    d: int
    queries: int
    informative_queries: int
    final_point: list
    final_region: str
    final_is_sosp: bool
    certificate_eps: float
    certificate_rho: float
    v_commitment: str
    claim_applies: bool

    @property
    def non_informative_fraction(self) -> float:
        return 1.0 - self.informative_queries / self.queries if self.queries else 1.0

    @property
    def left_non_informative(self) -> bool:
        return self.informative_queries > 0

    def to_dict(self) -> dict:
        return {
            **self.__dict__,
            "non_informative_fraction": self.non_informative_fraction,
            "left_non_informative": self.left_non_informative,
        }


def uniform_cube_start(params: HardInstanceParams, rng: RngStream) -> Vector:
    half = np.pi * params.scale_r / 2
    return rng.uniform(-half, half, size=params.d)


def adaptive_query_experiment(
    optimizer: Optimizer,
    params: HardInstanceParams,
    query_budget: int,
    rng: RngStream,
    x0: Optional[Vector] = None,
) -> AdaptiveQueryReport:
    """
    Run an optimizer against f~ through the query interface only, classify every query,
    and check whether the returned point is an eps-SOSP of F~ at the certificate tolerances.
    """
    pair = make_hard_pair(params)
    informative = [0]

    def observe(points: Matrix) -> None:
        informative[0] += int(np.count_nonzero(informative_mask(points, params)))

    pair.queries.observer = observe
    if x0 is None:
        x0 = uniform_cube_start(params, rng)
    x_final = np.asarray(optimizer(pair.queries, x0, rng), dtype=float)
    used = pair.query_counter
    if used > query_budget:
        logs.warning("optimizer used %s queries, above the budget of %s", used, query_budget)
    eps_c, rho_c = certificate_tolerances(params)
    report = check_sosp(pair.require_truth("adaptive_query_experiment"), x_final, eps_c, rho_c)
    claim_applies = 2.0 * math.exp(-(math.log(params.d) ** 2) / 2.0) < 1.0
    if not claim_applies:
        logs.warning("d=%s is too small for the concentration bound; reporting only", params.d)
    return AdaptiveQueryReport(
        d=params.d,
        queries=used,
        informative_queries=informative[0],
        final_point=x_final.tolist(),
        final_region=classify(x_final, params).label.value,
        final_is_sosp=report.verdict,
        certificate_eps=eps_c,
        certificate_rho=rho_c,
        v_commitment=commitment(params.v),
        claim_applies=claim_applies,
    )


def zpsgd_optimizer(params: HardInstanceParams, query_budget: int, batch: int = 10) -> Optimizer:
    """
    ZPSGD sized to a query budget: the schedule's sigma, eta and r for a landscape of
    curvature ~2 sqrt(rho eps), with T = budget // (m + 1) steps.
    """
    from .optim import default_config, zpsgd

    curvature = 2.0 * math.sqrt(params.rho * params.epsilon)
    bound = params.epsilon * params.scale_r
    cfg = default_config(params.d, params.epsilon, curvature, params.rho, bound, 0.1)
    steps = max(1, query_budget // (batch + 1))
    cfg = cfg.replace(batch=batch, max_iters=steps)

    def run(oracle: QueryOracle, x0: Vector, rng: RngStream) -> Vector:
        return zpsgd(oracle, x0, cfg, rng).final

    return run
