"""Differentially private perturbation of datasets.

Noise is drawn by pushing open-interval uniforms through a piecewise inverse
CDF: log branches on both tails scaled by d/epsilon and a flat interval of
mass delta that leaves values untouched. ``epsilon = inf`` is accepted as the
no-noise sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .deep_models import ClassifierModel, fit_classifier


@dataclass(frozen=True)
class DpParams:
    """Sensitivity bound ``d``, privacy-loss bound ``epsilon``, failure
    probability ``delta``."""

    d: float
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.d > 0.0:
            raise ValueError(f"d must be positive, got {self.d}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def _lower_tail(r: np.ndarray, params: DpParams) -> np.ndarray:
    """Quantile values for r in (0, 0.5]; zero inside the flat interval."""
    cut = (1.0 - params.delta) / 2.0
    scale = params.d / params.epsilon
    safe = np.where(r < cut, r, cut)
    values = scale * np.log(2.0 * safe / (1.0 - params.delta))
    return np.where(r < cut, values, 0.0)


def dp_quantile(r, params: DpParams):
    """Noise quantile at ``r`` in (0, 1); scalar in, scalar out.

    Odd-symmetric by construction: the upper tail is evaluated as the negated
    lower tail at ``1 - r``, so ``dp_quantile(1 - r) == -dp_quantile(r)``
    holds exactly in floating point.
    """
    arr = np.asarray(r, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    if math.isinf(params.epsilon):
        out = np.zeros_like(arr)
    else:
        lower = arr <= 0.5
        folded = np.where(lower, arr, 1.0 - arr)
        magnitude = _lower_tail(folded, params)
        out = np.where(lower, magnitude, -magnitude)
    return float(out[0]) if scalar else out


def dp_perturb(y: np.ndarray, params: DpParams, seed: int = 0) -> np.ndarray:
    """Add independent quantile noise to every entry; deterministic per seed."""
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    u = rng.random(y.shape)
    while True:
        zero = u == 0.0
        if not zero.any():
            break
        u[zero] = rng.random(int(zero.sum()))
    return y + dp_quantile(u, params)


def fit_private_classifier(
    perturbed_class_matrices, n: int, r_max: float, layers: int, seed: int = 0
) -> ClassifierModel:
    """Classifier on already-perturbed data; post-processing keeps the
    privacy guarantee of the perturbation."""
    return fit_classifier(perturbed_class_matrices, n, r_max, layers, seed)
