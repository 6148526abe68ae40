"""Jittered symmetric positive-definite factorizations shared by every solver.

All dense inversions in the library go through these helpers so that the
jitter policy is applied uniformly: a diagonal ridge of 1e-8 * (trace/dim)
is always added, doubling on factorization failure up to 1e-2 * (trace/dim).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

_BASE_JITTER = 1e-8
_MAX_JITTER = 1e-2


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond what diagonal jitter can repair."""


def spd_factor(a: np.ndarray):
    """Cholesky-factor a symmetric PSD matrix under the jitter policy.

    Returns the ``(c, lower)`` pair accepted by ``scipy.linalg.cho_solve``.
    Raises :class:`NumericalError` when the matrix stays indefinite at the
    maximum permitted jitter.
    """
    a = np.asarray(a, dtype=float)
    dim = a.shape[0]
    if dim == 0:
        raise NumericalError("cannot factor an empty matrix")
    scale = float(np.trace(a)) / dim
    if not np.isfinite(scale) or scale <= 0.0:
        raise NumericalError(
            f"matrix is not positive definite: mean diagonal {scale!r}"
        )
    eye = np.eye(dim)
    jitter = _BASE_JITTER * scale
    limit = _MAX_JITTER * scale
    while True:
        try:
            return scipy.linalg.cho_factor(
                a + jitter * eye, lower=True, check_finite=False
            )
        except scipy.linalg.LinAlgError:
            jitter *= 2.0
            if jitter > limit:
                raise NumericalError(
                    f"matrix of size {dim} stayed singular up to jitter "
                    f"{limit:.3e} (mean diagonal {scale:.3e})"
                ) from None


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric PSD ``a`` with the jitter policy."""
    return scipy.linalg.cho_solve(spd_factor(a), b, check_finite=False)


def spd_solve_factored(factor, b: np.ndarray) -> np.ndarray:
    """Solve against a factor previously returned by :func:`spd_factor`."""
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def spd_logdet_factored(factor) -> float:
    """Log-determinant of the matrix behind a :func:`spd_factor` result."""
    c, _ = factor
    return 2.0 * float(np.sum(np.log(np.diag(c))))
