"""
Second-order stationarity checks.

A point x is an eps-second-order stationary point (eps-SOSP) of a rho-Hessian-Lipschitz
F when ||grad F(x)|| <= eps and lambda_min(hess F(x)) >= -sqrt(rho * eps).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Literal, Optional

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import ConfigError, EigenNonConvergence, NonFiniteDerivative
from .logger import logs
from .oracle import GradFn, Matrix, TruthBundle, ValueFn, Vector

DENSE_LIMIT = 64

Method = Literal["analytic", "finite-difference", "matrix-free"]


@dataclass(frozen=True)
class StationarityReport:
    grad_norm: float
    min_eig: float
    eps: float
    rho: float
    verdict: bool
    method: str
    eig_tol: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def default_step(x: Vector) -> float:
    return max(1e-5, 1e-5 * float(np.linalg.norm(x)))


def sosp_verdict(grad_norm: float, min_eig: float, eps: float, rho: float, eig_tol: float = 0.0) -> bool:
    return bool(grad_norm <= eps and min_eig >= -math.sqrt(rho * eps) - eig_tol)


def finite_diff_grad(F: ValueFn, x: Vector, h: Optional[float] = None) -> Vector:
    """Central differences per coordinate, O(h^2) accurate for C^3 functions."""
    x = np.asarray(x, dtype=float)
    h = default_step(x) if h is None else h
    if not h > 0:
        raise ConfigError("h", h, "h > 0")
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (F(x + e) - F(x - e)) / (2.0 * h)
    return g


def hessian_from_grad(grad: GradFn, x: Vector, h: Optional[float] = None) -> Matrix:
    """Central-difference Hessian built column by column from a gradient field, then symmetrised."""
    x = np.asarray(x, dtype=float)
    h = default_step(x) if h is None else h
    d = x.shape[0]
    H = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        H[:, i] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2.0 * h)
    return 0.5 * (H + H.T)


def finite_diff_hessian(F: ValueFn, x: Vector, h: Optional[float] = None) -> Matrix:
    """Second central differences of a value function; uses a larger default step than the gradient."""
    x = np.asarray(x, dtype=float)
    h = max(1e-4, 1e-4 * float(np.linalg.norm(x))) if h is None else h
    d = x.shape[0]
    eye = np.eye(d) * h
    f0 = F(x)
    H = np.empty((d, d))
    for i in range(d):
        H[i, i] = (F(x + eye[i]) - 2.0 * f0 + F(x - eye[i])) / h**2
        for j in range(i + 1, d):
            val = (
                F(x + eye[i] + eye[j]) - F(x + eye[i] - eye[j]) - F(x - eye[i] + eye[j]) + F(x - eye[i] - eye[j])
            ) / (4.0 * h**2)
            H[i, j] = H[j, i] = val
    return H


def hvp_from_grad(grad: GradFn, x: Vector, u: Vector, h: Optional[float] = None) -> Vector:
    """Directional difference (grad(x + h u) - grad(x - h u)) / 2h along the unit direction of u."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    scale = float(np.linalg.norm(u))
    if scale == 0.0:
        return np.zeros_like(x)
    h = default_step(x) if h is None else h
    direction = u / scale
    return scale * (np.asarray(grad(x + h * direction)) - np.asarray(grad(x - h * direction))) / (2.0 * h)


def _start_vector(d: int) -> Vector:
    v0 = np.linspace(1.0, 2.0, d)
    return v0 / np.linalg.norm(v0)


def min_eig_matrix_free(
    hvp: Callable[[Vector], Vector],
    d: int,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> float:
    """
    Smallest eigenvalue of a symmetric operator known only through products H u.

    The spectral norm is estimated first, then Lanczos (ARPACK) finds the largest
    eigenvalue of the shifted operator (norm * I - H). Tiny operators are densified.
    """
    if d <= 0:
        raise ConfigError("d", d, "d >= 1")
    if d <= 2:
        H = np.column_stack([hvp(e) for e in np.eye(d)])
        return float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])
    max_iter = max_iter or max(1000, 20 * d)
    op = LinearOperator((d, d), matvec=lambda u: np.asarray(hvp(np.ravel(u)), dtype=float), dtype=float)
    v0 = _start_vector(d)
    try:
        norm = float(abs(eigsh(op, k=1, which="LM", tol=tol, maxiter=max_iter, v0=v0, return_eigenvectors=False)[0]))
        shift = norm if norm > 0 else 1.0
        shifted = LinearOperator((d, d), matvec=lambda u: shift * np.ravel(u) - op.matvec(np.ravel(u)), dtype=float)
        vals, vecs = eigsh(shifted, k=1, which="LA", tol=tol, maxiter=max_iter, v0=v0)
    except ArpackNoConvergence as er:
        raise EigenNonConvergence(float("nan"), max_iter) from er
    lam = shift - float(vals[0])
    vec = vecs[:, 0]
    residual = float(np.linalg.norm(op.matvec(vec) - lam * vec))
    if residual > max(1e-6, 1e3 * tol) * max(1.0, shift):
        raise EigenNonConvergence(residual, max_iter)
    return lam


def _dense_min_eig(H: Matrix) -> tuple:
    eigs = scipy.linalg.eigh(0.5 * (H + H.T), eigvals_only=True)
    return float(eigs[0]), float(np.max(np.abs(eigs)))


def check_sosp(
    truth: TruthBundle,
    x: Vector,
    eps: float,
    rho: float,
    eig_tol: Optional[float] = None,
    h: Optional[float] = None,
) -> StationarityReport:
    """
    Evaluate the eps-SOSP conditions of F at x.

    Analytic derivatives are used when the bundle carries them, central differences
    otherwise. The smallest Hessian eigenvalue is dense for d <= 64 and matrix-free above.

    Raises:
        NonFiniteDerivative: if the gradient or curvature evaluation is NaN or infinite.
    """
    if not eps > 0:
        raise ConfigError("eps", eps, "eps > 0")
    if not rho > 0:
        raise ConfigError("rho", rho, "rho > 0")
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    method: str = "analytic"
    if truth.grad is not None:
        g = np.asarray(truth.grad(x), dtype=float)
    else:
        g = finite_diff_grad(truth.value, x, h)
        method = "finite-difference"
    if not np.all(np.isfinite(g)):
        raise NonFiniteDerivative("gradient", x.tolist())
    grad_norm = float(np.linalg.norm(g))

    if d <= DENSE_LIMIT:
        if truth.hess is not None:
            H = np.asarray(truth.hess(x), dtype=float)
        elif truth.grad is not None:
            H = hessian_from_grad(truth.grad, x, h)
            method = "finite-difference"
        else:
            H = finite_diff_hessian(truth.value, x)
        if not np.all(np.isfinite(H)):
            raise NonFiniteDerivative("hessian", x.tolist())
        min_eig, spectral = _dense_min_eig(H)
    else:
        if truth.hvp is not None:
            hvp = lambda u: truth.hvp(x, u)  # noqa: E731
        elif truth.hess is not None:
            Hx = np.asarray(truth.hess(x), dtype=float)
            hvp = lambda u: Hx @ u  # noqa: E731
        elif truth.grad is not None:
            hvp = lambda u: hvp_from_grad(truth.grad, x, u, h)  # noqa: E731
        else:
            Hx = finite_diff_hessian(truth.value, x)
            hvp = lambda u: Hx @ u  # noqa: E731
        method = "matrix-free"
        min_eig = min_eig_matrix_free(hvp, d)
        probe = hvp(_start_vector(d))
        spectral = max(abs(min_eig), float(np.linalg.norm(probe)))
    if not math.isfinite(min_eig):
        raise NonFiniteDerivative("hessian eigenvalue", x.tolist())

    tol = 1e-6 * max(1.0, spectral) if eig_tol is None else eig_tol
    verdict = sosp_verdict(grad_norm, min_eig, eps, rho, tol)
    logs.info("check_sosp: |g|=%.3e lambda_min=%.3e verdict=%s (%s)", grad_norm, min_eig, verdict, method)
    return StationarityReport(
        grad_norm=grad_norm, min_eig=min_eig, eps=eps, rho=rho, verdict=verdict, method=method, eig_tol=tol
    )
