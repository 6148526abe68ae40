"""Synthetic dataset generators used by the bundled experiments and tests."""

from __future__ import annotations

import math
import os

import numpy as np

IMAGE_SIDE = 28
MNIST_ENV = "TMAP_MNIST_NPZ"


def gaussian_channel(
    n_samples: int, dim: int, var_t: float, var_noise: float, seed: int = 0
):
    """Pairs (x, t) with t ~ N(0, var_t I) and x = t + N(0, var_noise I).

    The signal and the unit noise are drawn before scaling, so runs with the
    same seed share draws across noise levels.
    """
    rng = np.random.default_rng(seed)
    t = rng.normal(0.0, math.sqrt(var_t), size=(n_samples, dim))
    unit_noise = rng.normal(0.0, 1.0, size=(n_samples, dim))
    x = t + math.sqrt(var_noise) * unit_noise
    return x, t


def gaussian_blobs(n_per_class: int, centers, spread: float = 1.0, seed: int = 0):
    """One isotropic Gaussian cloud per class; returns a list of matrices."""
    rng = np.random.default_rng(seed)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    return [
        center + spread * rng.normal(size=(n_per_class, centers.shape[1]))
        for center in centers
    ]


def one_hot(labels, num_classes: int) -> np.ndarray:
    """1-based labels to a float indicator matrix of shape (N, C)."""
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels - 1] = 1.0
    return out


def _bump(grid_r, grid_c, row: float, col: float, radius: float) -> np.ndarray:
    return np.exp(-((grid_r - row) ** 2 + (grid_c - col) ** 2) / (2.0 * radius**2))


def _class_templates(side: int) -> np.ndarray:
    """Three distinct stroke-like intensity patterns on a side x side grid."""
    rr, cc = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    mid = side / 2.0
    lo, hi = side * 0.25, side * 0.75
    templates = np.stack(
        [
            _bump(rr, cc, lo, lo, side / 9) + _bump(rr, cc, hi, hi, side / 9),
            _bump(rr, cc, mid, lo, side / 9)
            + _bump(rr, cc, mid, mid, side / 9)
            + _bump(rr, cc, mid, hi, side / 9),
            _bump(rr, cc, lo, hi, side / 9) + _bump(rr, cc, hi, lo, side / 9),
        ]
    )
    return templates / templates.max(axis=(1, 2), keepdims=True)


def _synthetic_digits(n_per_class: int, domain: str, seed: int, side: int):
    rng = np.random.default_rng(seed)
    templates = _class_templates(side)
    if domain == "source":
        amp_lo, amp_hi, base_shift = 0.75, 1.0, (0, 0)
    else:
        amp_lo, amp_hi, base_shift = 0.55, 0.8, (2, -1)
    images = []
    labels = []
    for c, template in enumerate(templates, start=1):
        for _ in range(n_per_class):
            shift_r = base_shift[0] + int(rng.integers(-2, 3))
            shift_c = base_shift[1] + int(rng.integers(-2, 3))
            img = np.roll(template, (shift_r, shift_c), axis=(0, 1))
            img = img * rng.uniform(amp_lo, amp_hi)
            img = img + rng.normal(0.0, 0.08, size=img.shape)
            images.append(np.clip(img, 0.0, 1.0).ravel())
            labels.append(c)
    return np.asarray(images), np.asarray(labels, dtype=int)


def _mnist_digits(n_per_class: int, domain: str, seed: int, npz_path: str):
    archive = np.load(npz_path)
    if domain == "source":
        x, y = archive["x_train"], archive["y_train"]
    else:
        x = archive.get("x_test", archive["x_train"])
        y = archive.get("y_test", archive["y_train"])
    x = x.reshape(len(x), -1).astype(float) / 255.0
    rng = np.random.default_rng(seed)
    images = []
    labels = []
    for c, digit in enumerate((0, 1, 2), start=1):
        rows = np.flatnonzero(np.asarray(y).ravel() == digit)
        if len(rows) < n_per_class:
            raise ValueError(f"not enough samples of digit {digit} in {npz_path}")
        chosen = rng.choice(rows, size=n_per_class, replace=False)
        images.append(x[chosen])
        labels.extend([c] * n_per_class)
    return np.vstack(images), np.asarray(labels, dtype=int)


def digit_images(
    n_per_class: int, domain: str = "source", seed: int = 0, side: int = IMAGE_SIDE
):
    """Three-class image-vector dataset with values in [0, 1].

    Rows are flattened side x side images, labels are 1..3. Real MNIST rows
    are used when the environment variable ``TMAP_MNIST_NPZ`` points to an
    archive with ``x_train``/``y_train`` arrays; otherwise a deterministic
    synthetic stand-in with the same shape and scale is generated. The
    ``target`` domain applies a fixed shift and intensity change (or draws
    from the test split when MNIST is available).
    """
    if domain not in ("source", "target"):
        raise ValueError(f"domain must be 'source' or 'target', got {domain!r}")
    npz_path = os.environ.get(MNIST_ENV)
    if npz_path:
        return _mnist_digits(n_per_class, domain, seed, npz_path)
    return _synthetic_digits(n_per_class, domain, seed, side)
