"""
Exponential-time SOSP certifier for small d.

Every point x of an eps/ell-cover of the search ball is probed on a sphere of radius
r = c' sqrt(eps / rho) around it, and a local quadratic model (g, H) is fitted to the
probe values by least squares. The fit is accepted when every probe constraint

    |f(x) + r g.z + 1/2 r^2 z^T H z - f(x + r z)| <= kappa (rho r^3 + nu)

holds, and x is returned when ||g|| <= 2 eps and lambda_min(H) >= -2 sqrt(rho eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal, Optional, Tuple

import numpy as np

from .errors import ConfigError, CoverTooLarge, IllConditionedProbe, SearchExhausted
from .logger import logs
from .oracle import Matrix, QueryOracle, Vector

DEFAULT_CAP = 10_000_000
DEFAULT_KAPPA = 6.0
DEFAULT_SPHERE_EPS = 0.1
MAX_CONDITION = 1e8
MAX_SEARCH_DIM = 3

Metric = Literal["euclidean", "sup-entrywise"]
CoverObject = Literal["ball", "sphere", "matrix-ball"]


@dataclass(frozen=True)
class CoverSpec:
    radius: float
    resolution: float
    metric: Metric = "euclidean"
    object: CoverObject = "ball"

    def __post_init__(self):
        if not self.resolution > 0:
            raise ConfigError("resolution", self.resolution, "resolution > 0")
        if not self.radius > 0:
            raise ConfigError("radius", self.radius, "radius > 0")


def _grid_axis(extent: float, spacing: float) -> np.ndarray:
    j_max = int(math.floor(extent / spacing + 1.0))
    return np.arange(-j_max, j_max + 1) * spacing


def _check_cap(per_axis: int, axes: int, cap: int, what: str) -> int:
    size = per_axis**axes
    if size > cap:
        raise CoverTooLarge(size, cap, what)
    return size


def ball_cover_axis(d: int, R: float, eps_c: float) -> np.ndarray:
    """Axis values j eps_c / sqrt(d) for j in [-R sqrt(d)/eps_c - 1, R sqrt(d)/eps_c + 1]."""
    if d < 1:
        raise ConfigError("d", d, "d >= 1")
    CoverSpec(radius=R, resolution=eps_c)
    spacing = eps_c / math.sqrt(d)
    return _grid_axis(R, spacing)


def iter_ball_cover(d: int, R: float, eps_c: float, block: int = 4096, cap: int = DEFAULT_CAP) -> Iterator[Tuple[int, Matrix]]:
    """
    Yield (start index, points) blocks of the ball cover in ascending lexicographic order,
    first coordinate most significant.
    """
    axis = ball_cover_axis(d, R, eps_c)
    k = axis.shape[0]
    size = _check_cap(k, d, cap, "ball cover")
    for start in range(0, size, block):
        idx = np.arange(start, min(start + block, size))
        digits = np.empty((idx.shape[0], d), dtype=np.int64)
        rest = idx.copy()
        for col in range(d - 1, -1, -1):
            digits[:, col] = rest % k
            rest //= k
        yield start, axis[digits]


def ball_cover(d: int, R: float, eps_c: float, cap: int = DEFAULT_CAP) -> Matrix:
    """Axis-aligned grid of spacing eps_c / sqrt(d); its covering radius over the ball is at most eps_c."""
    blocks = [points for _, points in iter_ball_cover(d, R, eps_c, block=1 << 16, cap=cap)]
    return np.vstack(blocks)


def matrix_cover(d: int, ell: float, eps_c: float, cap: int = DEFAULT_CAP) -> np.ndarray:
    """
    Entrywise grid M_ik = j eps_c / d with j in [-ell d / eps_c - 1, ell d / eps_c + 1]; the
    Frobenius norm dominates the spectral norm, so the spectral covering radius is at most eps_c.
    That is (2 floor(ell d / eps_c + 1) + 1)^(d^2) matrices, e.g. 7^4 = 2401 for d = 2 and ell = eps_c = 1.
    """
    if d < 1:
        raise ConfigError("d", d, "d >= 1")
    CoverSpec(radius=ell, resolution=eps_c, metric="sup-entrywise", object="matrix-ball")
    j_max = int(math.floor(ell * d / eps_c + 1.0))
    axis = np.arange(-j_max, j_max + 1) * (eps_c / d)
    _check_cap(axis.shape[0], d * d, cap, "matrix cover")
    grids = np.meshgrid(*([axis] * (d * d)), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).reshape(-1, d, d)


def sphere_cover(d: int, eps_prime: float = DEFAULT_SPHERE_EPS, cap: int = DEFAULT_CAP) -> Matrix:
    """
    eps'-cover of the unit sphere: grid points of spacing eps'/sqrt(d) within eps'/2 of the
    sphere, projected onto it. The grid is symmetric, so the cover is closed under z -> -z.
    """
    if d < 1:
        raise ConfigError("d", d, "d >= 1")
    CoverSpec(radius=1.0, resolution=eps_prime, object="sphere")
    if d == 1:
        return np.array([[-1.0], [1.0]])
    axis = _grid_axis(1.0 + eps_prime / 2, eps_prime / math.sqrt(d))
    _check_cap(axis.shape[0], d, cap, "sphere grid")
    grid = np.stack([g.ravel() for g in np.meshgrid(*([axis] * d), indexing="ij")], axis=1)
    norms = np.linalg.norm(grid, axis=1)
    keep = np.abs(norms - 1.0) <= eps_prime / 2
    points = grid[keep] / norms[keep, None]
    return np.unique(np.round(points, 12), axis=0)


# --------------------------------------------------------------------------- probes


def _design(Z: Matrix, r: float) -> np.ndarray:
    """Rows [r z, 1/2 r^2 (z_i z_j, doubled off the diagonal)] for the unknowns (g, upper(H))."""
    d = Z.shape[1]
    iu, ju = np.triu_indices(d)
    quad = Z[:, iu] * Z[:, ju] * np.where(iu == ju, 1.0, 2.0)
    return np.hstack([r * Z, 0.5 * r * r * quad])


def _unpack(coef: np.ndarray, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """Split (..., d + d(d+1)/2) coefficient rows into g (..., d) and symmetric H (..., d, d)."""
    g = coef[..., :d]
    iu, ju = np.triu_indices(d)
    H = np.zeros(coef.shape[:-1] + (d, d))
    H[..., iu, ju] = coef[..., d:]
    H[..., ju, iu] = coef[..., d:]
    return g, H


class ProbeDesign:
    """The shared least-squares system of a sphere cover at probe radius r."""

    def __init__(self, sphere: Matrix, r: float):
        if not r > 0:
            raise ConfigError("r_probe", r, "r_probe > 0")
        self.sphere = np.asarray(sphere, dtype=float)
        self.r = r
        self.d = self.sphere.shape[1]
        self.A = _design(self.sphere, r)
        condition = float(np.linalg.cond(self.A))
        if not np.isfinite(condition) or condition > MAX_CONDITION:
            raise IllConditionedProbe(condition)
        self.condition = condition
        self.pinv = np.linalg.pinv(self.A)

    @property
    def probes(self) -> int:
        return self.sphere.shape[0]

    def fit(self, fx: np.ndarray, fy: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Least-squares (g, H) and the max constraint residual, for rows of f(x) and f(x + r z)."""
        b = fy - fx[:, None]
        coef = b @ self.pinv.T
        residual = np.max(np.abs(b - coef @ self.A.T), axis=1)
        g, H = _unpack(coef, self.d)
        return g, H, residual


@dataclass(frozen=True)
class ProbeResult:
    g: np.ndarray
    H: np.ndarray
    max_residual: float
    tolerance: float
    in_guarantee_regime: bool


def probe_tolerance(rho: float, r: float, nu: float, kappa: float = DEFAULT_KAPPA) -> float:
    return kappa * (rho * r**3 + nu)


def probe_radius(eps: float, rho: float, factor: float = 1.0) -> float:
    """r = c' sqrt(eps / rho)."""
    return factor * math.sqrt(eps / rho)


def feasibility_probe(
    oracle: QueryOracle,
    x: Vector,
    r_probe: float,
    sphere_cover: Matrix,
    nu: float,
    rho: float,
    kappa: float = DEFAULT_KAPPA,
) -> Optional[ProbeResult]:
    """
    Fit (g, H) at x from the sphere probes and verify every constraint; None when the
    fitted model violates the tolerance. Costs one query at x plus one per probe.
    """
    design = ProbeDesign(sphere_cover, r_probe)
    x = np.asarray(x, dtype=float)
    fx = np.array([oracle.value(x)])
    fy = oracle.values(x + r_probe * design.sphere)[None, :]
    g, H, residual = design.fit(fx, fy)
    tol = probe_tolerance(rho, r_probe, nu, kappa)
    in_regime = nu <= rho * r_probe**3
    if not in_regime:
        logs.warning("probe outside guarantee regime: nu=%.3g above rho r^3=%.3g", nu, rho * r_probe**3)
    if residual[0] > tol:
        return None
    return ProbeResult(g=g[0], H=H[0], max_residual=float(residual[0]), tolerance=tol, in_guarantee_regime=in_regime)


def enumerate_feasible(
    oracle: QueryOracle,
    x: Vector,
    eps: float,
    ell: float,
    rho: float,
    nu: float,
    r_probe: Optional[float] = None,
    kappa: float = DEFAULT_KAPPA,
) -> Optional[ProbeResult]:
    """
    Pure enumeration over covers of g (radius 2 eps, resolution rho r^2) and H (radius ell,
    resolution rho r) for d = 1; returns the first feasible pair meeting the acceptance thresholds.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != 1:
        raise ConfigError("d", x.shape[0], "d = 1 for enumeration mode")
    r = probe_radius(eps, rho) if r_probe is None else r_probe
    sphere = sphere_cover(1)
    fx = oracle.value(x)
    fy = oracle.values(x + r * sphere)
    g_cover = ball_cover(1, 2.0 * eps, rho * r * r)[:, 0]
    h_cover = matrix_cover(1, ell, rho * r)[:, 0, 0]
    z = sphere[:, 0]
    tol = probe_tolerance(rho, r, nu, kappa)
    for g in g_cover:
        for h in h_cover:
            residual = np.abs(fx + r * g * z + 0.5 * r * r * h * z * z - fy)
            if residual.max() <= tol and abs(g) <= 2 * eps and h >= -2 * math.sqrt(rho * eps):
                return ProbeResult(
                    g=np.array([g]),
                    H=np.array([[h]]),
                    max_residual=float(residual.max()),
                    tolerance=tol,
                    in_guarantee_regime=nu <= rho * r**3,
                )
    return None


@dataclass(frozen=True)
class SearchResult:
    point: np.ndarray
    index: int
    points_tried: int
    g: np.ndarray
    H: np.ndarray
    queries: int
    cover_size: int


def exhaustive_sosp_search(
    oracle: QueryOracle,
    d: int,
    eps: float,
    ell: float,
    rho: float,
    bound_B: float,
    nu: float,
    kappa: float = DEFAULT_KAPPA,
    probe_factor: float = 1.0,
    sphere_eps: float = DEFAULT_SPHERE_EPS,
    cap: int = DEFAULT_CAP,
    block: int = 256,
    mode: Literal["least-squares", "enumerate"] = "least-squares",
) -> SearchResult:
    """
    Scan the eps/ell-cover of the ball of radius B/eps in order and return the first
    point whose probe model is feasible with ||g|| <= 2 eps and lambda_min(H) >= -2 sqrt(rho eps).

    Raises:
        SearchExhausted: when no cover point is accepted.
    """
    if not 1 <= d <= MAX_SEARCH_DIM:
        raise ConfigError("d", d, f"1 <= d <= {MAX_SEARCH_DIM}")
    for name, value in (("eps", eps), ("ell", ell), ("rho", rho), ("bound_B", bound_B)):
        if not value > 0:
            raise ConfigError(name, value, f"{name} > 0")
    if mode == "enumerate" and d != 1:
        raise ConfigError("mode", mode, "enumerate only for d = 1")
    radius = bound_B / eps
    resolution = eps / ell
    r = probe_radius(eps, rho, probe_factor)
    grad_limit = 2.0 * eps
    eig_limit = -2.0 * math.sqrt(rho * eps)
    axis_len = ball_cover_axis(d, radius, resolution).shape[0]
    cover_size = _check_cap(axis_len, d, cap, "ball cover")
    logs.info("exhaustive search: %s cover points, probe radius %.4g", cover_size, r)
    if nu > rho * r**3:
        logs.warning("probe outside guarantee regime: nu=%.3g above rho r^3=%.3g", nu, rho * r**3)
    start_count = oracle.query_counter
    tried = 0

    if mode == "enumerate":
        for start, points in iter_ball_cover(d, radius, resolution, block=block, cap=cap):
            for offset, x in enumerate(points):
                tried += 1
                found = enumerate_feasible(oracle, x, eps, ell, rho, nu, r, kappa)
                if found is not None:
                    return SearchResult(
                        point=x, index=start + offset, points_tried=tried, g=found.g, H=found.H,
                        queries=oracle.query_counter - start_count, cover_size=cover_size,
                    )
        raise SearchExhausted(tried)

    design = ProbeDesign(sphere_cover(d, sphere_eps), r)
    tol = probe_tolerance(rho, r, nu, kappa)
    for start, points in iter_ball_cover(d, radius, resolution, block=block, cap=cap):
        n = points.shape[0]
        fx = oracle.values(points)
        probes = (points[:, None, :] + r * design.sphere[None, :, :]).reshape(-1, d)
        fy = oracle.values(probes).reshape(n, design.probes)
        g, H, residual = design.fit(fx, fy)
        min_eig = np.linalg.eigvalsh(H)[:, 0]
        accepted = (residual <= tol) & (np.linalg.norm(g, axis=1) <= grad_limit) & (min_eig >= eig_limit)
        hits = np.flatnonzero(accepted)
        if hits.size:
            k = int(hits[0])
            tried += k + 1
            logs.info("exhaustive search accepted cover point %s after %s points", start + k, tried)
            return SearchResult(
                point=points[k], index=start + k, points_tried=tried, g=g[k], H=H[k],
                queries=oracle.query_counter - start_count, cover_size=cover_size,
            )
        tried += n
    raise SearchExhausted(tried)
