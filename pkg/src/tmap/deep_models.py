"""Conditionally deep autoencoders and reconstruction-error classifiers.

A conditionally deep autoencoder stacks membership-mapping layers: layer l
projects its input onto the leading ``max(n - l + 1, 1)`` covariance
eigenvectors of the training data and regresses the original vectors back
from that encoding. Filtering returns the best-reconstructing layer. A wide
model is a parallel bank of such autoencoders fitted on k-means cells, and a
classifier keeps one wide model per class, assigning the label whose model
reconstructs the query best. Every argmin breaks ties to the lowest index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._kmeans import kmeans
from .mm_core import MembershipMappingModel, fit_membership_mapping, mm_predict_batch

CELL_SIZE = 1000  # wide models use ceil(N / CELL_SIZE) k-means cells


@dataclass(frozen=True, eq=False)
class CdmmaModel:
    """Layer stack: one regressor and one orthonormal projection per layer."""

    layers: tuple[MembershipMappingModel, ...]
    projections: tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.projections[0].shape[1]


@dataclass(frozen=True, eq=False)
class WideCdmmaModel:
    """Parallel bank of autoencoders; filtering picks the best member."""

    members: tuple[CdmmaModel, ...]

    @property
    def dim(self) -> int:
        return self.members[0].dim


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """One wide autoencoder per class, labels 1..C."""

    per_class: tuple[WideCdmmaModel, ...]

    def __post_init__(self):
        if len(self.per_class) < 2:
            raise ValueError("a classifier needs at least 2 classes")

    @property
    def num_classes(self) -> int:
        return len(self.per_class)

    @property
    def dim(self) -> int:
        return self.per_class[0].dim


def pca_projection(y: np.ndarray, m: int) -> np.ndarray:
    """Rows are the leading ``m`` unit eigenvectors of the sample covariance.

    Rows are orthonormal and ordered by decreasing eigenvalue; the sign of
    each row is fixed by making its largest-magnitude entry positive. When
    ``m`` exceeds the numerical rank the remaining rows come from the
    orthonormal completion returned by the eigendecomposition and a warning
    is emitted.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n_samples, p = y.shape
    if not 1 <= m <= p:
        raise ValueError(f"m must be in [1, {p}], got {m}")
    if n_samples < 2:
        raise ValueError("covariance estimation needs at least 2 samples")
    cov = np.atleast_2d(np.cov(y, rowvar=False))
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = evals[order]
    rows = np.ascontiguousarray(evecs[:, order[:m]].T)
    floor = max(evals[0], 0.0) * 1e-12
    if evals[m - 1] <= floor:
        warnings.warn(
            f"requested {m} components but data rank is lower; "
            "trailing rows are an arbitrary orthonormal completion",
            RuntimeWarning,
            stacklevel=2,
        )
    for row in rows:
        if row[np.argmax(np.abs(row))] < 0.0:
            row *= -1.0
    return rows


def _layer_dims(n: int, layers: int) -> list[int]:
    return [max(n - l + 1, 1) for l in range(1, layers + 1)]


def fit_cdmma(
    y: np.ndarray, n: int, m_max: int, layers: int, seed: int = 0
) -> CdmmaModel:
    """Fit a conditionally deep autoencoder on rows of ``y``.

    Layer 1 encodes the raw data; every deeper layer encodes the previous
    layer's reconstruction and inherits that layer's fitted inducing-point
    count as its own maximum.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    p = y.shape[1]
    if not 1 <= n <= p:
        raise ValueError(f"subspace dimension must be in [1, {p}], got {n}")
    if layers < 1:
        raise ValueError(f"layer count must be positive, got {layers}")
    basis = pca_projection(y, n)
    fitted: list[MembershipMappingModel] = []
    projections: list[np.ndarray] = []
    recon = y
    for l, n_l in enumerate(_layer_dims(n, layers), start=1):
        proj = basis[:n_l]
        latent = recon @ proj.T
        m_cap = m_max if l == 1 else fitted[-1].m
        try:
            model = fit_membership_mapping(latent, y, m_cap, seed)
        except (ValueError, RuntimeError) as exc:
            raise type(exc)(f"layer {l}: {exc}") from exc
        fitted.append(model)
        projections.append(proj)
        recon = mm_predict_batch(model, latent)
    return CdmmaModel(tuple(fitted), tuple(projections))


def _layer_outputs(model: CdmmaModel, y: np.ndarray) -> np.ndarray:
    """Reconstruction of every layer for a batch, shape (L, N, p)."""
    outputs = []
    current = y
    for mm_model, proj in zip(model.layers, model.projections):
        current = mm_predict_batch(mm_model, current @ proj.T)
        outputs.append(current)
    return np.stack(outputs)


def cdmma_filter_batch(model: CdmmaModel, y: np.ndarray):
    """Best-layer reconstructions and chosen 1-based layers for a batch."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    outputs = _layer_outputs(model, y)
    errors = np.sum((outputs - y[None]) ** 2, axis=2)
    best = np.argmin(errors, axis=0)
    recon = outputs[best, np.arange(len(y))]
    return recon, best + 1, errors[best, np.arange(len(y))]

def cdmma_filter(model: CdmmaModel, y: np.ndarray):
    """Reconstruction with minimal squared error and its 1-based layer."""
    y = np.asarray(y, dtype=float)
    if y.shape != (model.dim,):
        raise ValueError(f"expected vector of dimension {model.dim}, got {y.shape}")
    recon, chosen, _ = cdmma_filter_batch(model, y[None, :])
    return recon[0], int(chosen[0])


def fit_wide_cdmma(
    y: np.ndarray, n: int, r_max: float, layers: int, seed: int = 0
) -> WideCdmmaModel:
    """Fit one autoencoder per k-means cell of roughly 1000 points.

    Cells with fewer than 2 points are merged into the nearest cell (by
    centroid distance) before fitting; each member's inducing-point budget is
    ``ceil(r_max * cell_size)``.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if not 0.0 < r_max <= 1.0:
        raise ValueError(f"r_max must be in (0, 1], got {r_max}")
    n_samples = len(y)
    cells = math.ceil(n_samples / CELL_SIZE)
    if cells == 1:
        groups = [np.arange(n_samples)]
    else:
        centroids, labels = kmeans(y, cells, seed)
        groups = [np.flatnonzero(labels == s) for s in range(cells)]
        groups = _merge_degenerate_cells(groups, centroids)
    members = tuple(
        fit_cdmma(y[g], n, math.ceil(r_max * len(g)), layers, seed) for g in groups
    )
    return WideCdmmaModel(members)


def _merge_degenerate_cells(groups, centroids):
    healthy = [i for i, g in enumerate(groups) if len(g) >= 2]
    if not healthy:
        return [np.concatenate([g for g in groups if len(g)])]
    merged = {i: list(groups[i]) for i in healthy}
    for i, g in enumerate(groups):
        if len(g) >= 2 or len(g) == 0:
            continue
        d2 = np.sum((centroids[healthy] - centroids[i]) ** 2, axis=1)
        target = healthy[int(np.argmin(d2))]
        merged[target].extend(g)
    return [np.sort(np.asarray(merged[i], dtype=int)) for i in healthy]


def wide_filter_batch(model: WideCdmmaModel, y: np.ndarray):
    """Best-member reconstructions and squared errors for a batch."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    recons = np.empty((len(model.members), len(y), y.shape[1]))
    errors = np.empty((len(model.members), len(y)))
    for s, member in enumerate(model.members):
        recons[s], _, errors[s] = cdmma_filter_batch(member, y)
    best = np.argmin(errors, axis=0)
    idx = np.arange(len(y))
    return recons[best, idx], errors[best, idx]


def wide_filter(model: WideCdmmaModel, y: np.ndarray) -> np.ndarray:
    """Reconstruction of the member with minimal squared error."""
    y = np.asarray(y, dtype=float)
    if y.shape != (model.dim,):
        raise ValueError(f"expected vector of dimension {model.dim}, got {y.shape}")
    recon, _ = wide_filter_batch(model, y[None, :])
    return recon[0]


def fit_classifier(
    class_matrices, n: int, r_max: float, layers: int, seed: int = 0
) -> ClassifierModel:
    """Fit one wide autoencoder per class; classes are independent.

    Every class is fitted with the same seed, so permuting the class order
    permutes the fitted models identically.
    """
    matrices = [np.atleast_2d(np.asarray(m, dtype=float)) for m in class_matrices]
    for c, m in enumerate(matrices, start=1):
        if len(m) == 0:
            raise ValueError(f"class {c} has no samples")
    return ClassifierModel(
        tuple(fit_wide_cdmma(m, n, r_max, layers, seed) for m in matrices)
    )


def classify_batch(model: ClassifierModel, y: np.ndarray) -> np.ndarray:
    """1-based class labels for a batch of inputs."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    errors = np.empty((model.num_classes, len(y)))
    for c, wide in enumerate(model.per_class):
        _, errors[c] = wide_filter_batch(wide, y)
    return np.argmin(errors, axis=0) + 1


def classify(model: ClassifierModel, y: np.ndarray) -> int:
    """Label of the class whose wide autoencoder best reconstructs ``y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (model.dim,):
        raise ValueError(f"expected vector of dimension {model.dim}, got {y.shape}")
    return int(classify_batch(model, y[None, :])[0])
