"""Kernel machinery and variational fitting of membership-mapping regressors.

A membership-mapping regressor interpolates outputs through an anisotropic
squared-exponential kernel evaluated against M inducing points chosen by
k-means. Fitting selects M by shrinking from a caller-supplied maximum until
the Nystrom residual per degree of freedom exceeds a threshold, scales the
kernel variance against the output variance, and then solves regularised
normal equations whose noise precision is re-estimated until it settles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kmeans import kmeans
from ._linalg import NumericalError, spd_factor, spd_solve, spd_solve_factored

DEFAULT_NU = 2.1

# Inducing-point count shrinks while the Nystrom residual stays below this.
SHRINK_THRESHOLD = 1e-1

_BETA_REL_TOL = 1e-4
_BETA_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class KernelParams:
    """Anisotropic squared-exponential kernel.

    ``sigma2`` is the variance (the value at zero distance), ``w`` holds one
    non-negative inverse-squared bandwidth per input dimension, and ``nu`` is
    the degrees-of-freedom constant used by the size-selection heuristic.
    """

    sigma2: float
    w: np.ndarray
    nu: float = DEFAULT_NU

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.w.ndim != 1:
            raise ValueError("w must be a 1-D array")
        if np.any(self.w < 0.0):
            raise ValueError("bandwidth weights must be non-negative")
        if not self.nu > 2.0:
            raise ValueError(f"nu must exceed 2, got {self.nu}")


@dataclass(frozen=True, eq=False)
class MembershipMappingModel:
    """Fitted regressor: kernel weights ``alpha`` over ``aux_points``."""

    alpha: np.ndarray  # (M, p)
    aux_points: np.ndarray  # (M, n)
    kernel: KernelParams
    beta: float = math.inf  # final disturbance precision from the fit

    @property
    def m(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_features(self) -> int:
        return self.aux_points.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.alpha.shape[1]


def kernel_eval(x: np.ndarray, x2: np.ndarray, params: KernelParams) -> float:
    """Kernel value sigma2 * exp(-0.5 * sum_k w_k |x_k - x2_k|^2)."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape or x.shape != params.w.shape:
        raise ValueError(
            f"dimension mismatch: x {x.shape}, x2 {x2.shape}, w {params.w.shape}"
        )
    d2 = float(np.sum(params.w * (x - x2) ** 2))
    return params.sigma2 * math.exp(-0.5 * d2)


def kernel_matrix(a: np.ndarray, b: np.ndarray, params: KernelParams) -> np.ndarray:
    """Kernel evaluated between every row of ``a`` and every row of ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1] or a.shape[1] != params.w.shape[0]:
        raise ValueError(
            f"dimension mismatch: a {a.shape}, b {b.shape}, w {params.w.shape}"
        )
    scale = np.sqrt(params.w)
    aw = a * scale
    bw = b * scale
    d2 = (
        np.sum(aw * aw, axis=1)[:, None]
        + np.sum(bw * bw, axis=1)[None, :]
        - 2.0 * (aw @ bw.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return params.sigma2 * np.exp(-0.5 * d2)


def feature_row(x: np.ndarray, model: MembershipMappingModel) -> np.ndarray:
    """Kernel of ``x`` against every inducing point, shape (M,)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError(
            f"expected input of dimension {model.n_features}, got shape {x.shape}"
        )
    return kernel_matrix(x[None, :], model.aux_points, model.kernel)[0]


def feature_matrix(x: np.ndarray, model: MembershipMappingModel) -> np.ndarray:
    """Feature rows for a batch of inputs, shape (N, M)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.n_features:
        raise ValueError(
            f"expected inputs of dimension {model.n_features}, got {x.shape[1]}"
        )
    return kernel_matrix(x, model.aux_points, model.kernel)


def choose_bandwidths(x: np.ndarray) -> np.ndarray:
    """Per-dimension weights (max - min)^-2; constant columns get weight 0."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if len(x) < 2:
        raise ValueError("bandwidth selection needs at least 2 samples")
    span = x.max(axis=0) - x.min(axis=0)
    w = np.zeros(x.shape[1])
    nonzero = span > 0.0
    w[nonzero] = span[nonzero] ** -2.0
    return w


def select_inducing(x: np.ndarray, m: int, seed: int) -> np.ndarray:
    """k-means centroids of the rows of ``x``; deterministic for a seed."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not 1 <= m <= len(x):
        raise ValueError(f"m must be in [1, {len(x)}], got {m}")
    return kmeans(x, m, seed)[0]


def _nystrom_trace(k_aa: np.ndarray, k_xa: np.ndarray) -> float:
    """Tr(K_aa^{-1} K_xa^T K_xa) via one factorization of K_aa."""
    factor = spd_factor(k_aa)
    v = spd_solve_factored(factor, k_xa.T)
    return float(np.sum(v * k_xa.T))


def tau(x: np.ndarray, a: np.ndarray, params: KernelParams) -> float:
    """Nystrom trace residual per degree of freedom.

    (Tr(K_xx) - Tr(K_aa^{-1} K_xa^T K_xa)) / (nu + M - 2); non-negative up to
    the jitter applied when factoring K_aa.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    k_aa = kernel_matrix(a, a, params)
    k_xa = kernel_matrix(x, a, params)
    trace_xx = len(x) * params.sigma2
    return (trace_xx - _nystrom_trace(k_aa, k_xa)) / (params.nu + len(a) - 2.0)


def fit_membership_mapping(
    x: np.ndarray, y: np.ndarray, m_max: int, seed: int = 0
) -> MembershipMappingModel:
    """Fit a membership-mapping regressor from ``x`` (N, n) to ``y`` (N, p).

    The inducing-point count starts at ``m_max`` and shrinks by the factor
    0.9 (ceiling) while the unit-variance Nystrom residual stays below
    ``SHRINK_THRESHOLD``; the loop also stops once the count stops decreasing
    (which happens at 9 and below) or reaches 1. The kernel variance is the
    mean output variance divided by that residual, floored at 1 when the
    residual already exceeds it. The kernel weights are then solved from
    regularised normal equations, alternating with a noise-precision update
    until the precision settles.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    n_samples = len(x)
    if len(y) != n_samples:
        raise ValueError(f"x has {n_samples} rows but y has {len(y)}")
    if n_samples < 2:
        raise ValueError("fitting needs at least 2 samples")
    if not 1 <= m_max <= n_samples:
        raise ValueError(f"m_max must be in [1, {n_samples}], got {m_max}")

    w = choose_bandwidths(x)
    probe = KernelParams(1.0, w)
    centroid_cache: dict[int, np.ndarray] = {}

    def centroids_for(m: int) -> np.ndarray:
        if m not in centroid_cache:
            centroid_cache[m] = kmeans(x, m, seed)[0]
        return centroid_cache[m]

    def unit_tau(m: int) -> float:
        return tau(x, centroids_for(m), probe)

    m = int(m_max)
    while unit_tau(m) < SHRINK_THRESHOLD:
        m_next = math.ceil(0.9 * m)
        if m_next >= m:
            break
        m = m_next

    tau_unit = unit_tau(m)
    avg_var = float(np.mean(np.var(y, axis=0)))  # population convention
    if tau_unit >= avg_var or tau_unit <= 0.0:
        sigma2 = 1.0
    else:
        sigma2 = avg_var / tau_unit

    kern = KernelParams(sigma2, w, probe.nu)
    aux = centroids_for(m)
    k_aa = kernel_matrix(aux, aux, kern)
    k_xa = kernel_matrix(x, aux, kern)
    trace_xx = n_samples * sigma2
    residual = trace_xx - _nystrom_trace(k_aa, k_xa)
    ridge = (residual / (kern.nu + m - 2.0)) * k_aa
    gram = k_xa.T @ k_xa
    rhs = k_xa.T @ y

    tiny = np.finfo(float).tiny

    def solve_alpha(beta_val: float) -> np.ndarray:
        return spd_solve(gram + ridge + k_aa / beta_val, rhs)

    beta = 1.0
    for _ in range(_BETA_MAX_ITER):
        alpha = solve_alpha(beta)
        mean_sq = float(np.mean((y - k_xa @ alpha) ** 2))
        beta_new = 1.0 / max(mean_sq, tiny)
        converged = abs(beta_new - beta) / beta < _BETA_REL_TOL
        beta = beta_new
        if converged:
            break
    alpha = solve_alpha(beta)
    return MembershipMappingModel(alpha=alpha, aux_points=aux, kernel=kern, beta=beta)


def mm_predict(model: MembershipMappingModel, x: np.ndarray) -> np.ndarray:
    """Predicted output alpha^T G(x)^T for one input vector."""
    return feature_row(x, model) @ model.alpha


def mm_predict_batch(model: MembershipMappingModel, x: np.ndarray) -> np.ndarray:
    """Predicted outputs for a batch of inputs, shape (N, p)."""
    return feature_matrix(x, model) @ model.alpha
