"""Deterministic k-means used for inducing-point and partition selection.

Lloyd's algorithm with a seeded farthest-point initialisation: the first
centroid is a uniformly drawn data row and every further centroid is the row
farthest from the set chosen so far. Empty clusters are re-seeded to the
point farthest from its current centroid. All ties break to the lowest index,
so the result is a pure function of (data, k, seed).
"""

from __future__ import annotations

import numpy as np

MAX_SWEEPS = 100


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(a), len(b))."""
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d2 = aa + bb - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _farthest_point_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = np.empty((k, x.shape[1]), dtype=float)
    first = int(rng.integers(len(x)))
    centroids[0] = x[first]
    if k == 1:
        return centroids
    best = _sqdist(x, centroids[:1])[:, 0]
    for j in range(1, k):
        nxt = int(np.argmax(best))
        centroids[j] = x[nxt]
        if j + 1 < k:
            best = np.minimum(best, _sqdist(x, centroids[j : j + 1])[:, 0])
    return centroids


def _group_means(x: np.ndarray, labels: np.ndarray, k: int, out: np.ndarray) -> None:
    """Mean of every non-empty label group, written into ``out`` in place."""
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(np.diff(sorted_labels)) + 1
    starts = np.concatenate(([0], boundaries))
    sums = np.add.reduceat(x[order], starts, axis=0)
    counts = np.diff(np.concatenate((starts, [len(x)])))
    present = sorted_labels[starts]
    out[present] = sums / counts[:, None]


def kmeans(points: np.ndarray, k: int, seed: int, max_sweeps: int = MAX_SWEEPS):
    """Cluster rows of ``points`` into ``k`` groups.

    Returns ``(centroids, labels)`` with ``centroids`` of shape
    ``(k, points.shape[1])`` and ``labels`` assigning each row to its nearest
    centroid.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _farthest_point_init(x, k, rng)
    labels = None
    for _ in range(max_sweeps):
        d2 = _sqdist(x, centroids)
        new_labels = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        _group_means(x, labels, k, centroids)
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            own = np.einsum("ij,ij->i", x - centroids[labels], x - centroids[labels])
            taken = set()
            for j in empty:
                order = np.argsort(-own, kind="stable")
                pick = next(int(i) for i in order if int(i) not in taken)
                taken.add(pick)
                centroids[j] = x[pick]
                own[pick] = -1.0
    assert labels is not None
    return centroids, labels
