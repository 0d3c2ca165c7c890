"""Dense kernels used by the detectors.

Matrices are plain 2-D float64 numpy arrays. The pseudo-inverse goes through
a Cholesky factorization of the Gram matrix ``H H^T`` rather than an SVD, so
the cost is one O(M^3) factorization per channel realization.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg as sla

__all__ = [
    "FactorizationError",
    "as_matrix",
    "solve_spd",
    "pseudo_inverse",
    "matvec",
    "rmatvec",
    "axpy",
]

JITTER_SCALE = 1e-12
SYMMETRY_RTOL = 1e-10
# ||H W - I||_F above this after refinement means H is (numerically) rank deficient
RIGHT_INVERSE_TOL = 1e-6


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorization failed even after the jitter retry."""


def as_matrix(a: ArrayLike, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _cholesky(A: np.ndarray):
    try:
        return sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    k = A.shape[0]
    jitter = JITTER_SCALE * np.trace(A) / k
    try:
        return sla.cho_factor(A + jitter * np.eye(k), lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"matrix is not positive definite (retry with jitter {jitter:.3g} failed)"
        ) from exc


def solve_spd(A: ArrayLike, B: ArrayLike) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive definite ``A``.

    Parameters
    ----------
    A : (k, k) array
        Symmetric positive definite coefficient matrix.
    B : (k,) or (k, j) array
        Right-hand side(s).

    Returns
    -------
    X : array with the shape of ``B``

    Raises
    ------
    FactorizationError
        If ``A`` has a non-positive pivot, both as given and after adding
        ``1e-12 * trace(A) / k`` to its diagonal.
    """
    factor = _spd_factor(A)
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != factor[0].shape[0]:
        raise ValueError(f"B has {B.shape[0]} rows, expected {factor[0].shape[0]}")
    return sla.cho_solve(factor, B, check_finite=False)


def _spd_factor(A: ArrayLike):
    A = as_matrix(A, "A")
    k = A.shape[0]
    if k == 0 or A.shape[1] != k:
        raise ValueError(f"A must be square and non-empty, got shape {A.shape}")
    scale = np.max(np.abs(A))
    if np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise ValueError("A is not symmetric")
    return _cholesky(A)


def pseudo_inverse(H: ArrayLike) -> np.ndarray:
    """Moore-Penrose pseudo-inverse ``H^T (H H^T)^{-1}`` of a full-row-rank ``H``.

    The Gram matrix squares the condition number of ``H``, so the first
    solution is corrected by one refinement step
    ``W += H^T (H H^T)^{-1} (I - H W)`` reusing the same factorization.

    Raises
    ------
    FactorizationError
        If the Gram matrix cannot be factored or ``H`` is rank deficient.
    """
    H = as_matrix(H, "H")
    M, N = H.shape
    if M > N:
        raise ValueError(f"H must have at most as many rows as columns, got {H.shape}")
    factor = _spd_factor(H @ H.T)
    eye = np.eye(M)
    W = H.T @ sla.cho_solve(factor, eye, check_finite=False)
    W += H.T @ sla.cho_solve(factor, eye - H @ W, check_finite=False)
    resid = np.linalg.norm(H @ W - eye)
    if not resid <= RIGHT_INVERSE_TOL:
        raise FactorizationError(f"H is rank deficient (||HW - I|| = {resid:.3g})")
    return W


def matvec(A: ArrayLike, x: ArrayLike) -> np.ndarray:
    """``A @ x``; ``x`` may carry a leading batch axis, shape ``(..., cols)``."""
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != A.shape[1]:
        raise ValueError(f"cannot multiply {A.shape} matrix by vector of length {x.shape[-1]}")
    return x @ A.T


def rmatvec(A: ArrayLike, y: ArrayLike) -> np.ndarray:
    """``A.T @ y``; ``y`` may carry a leading batch axis, shape ``(..., rows)``."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != A.shape[0]:
        raise ValueError(f"cannot multiply transpose of {A.shape} matrix by vector of length {y.shape[-1]}")
    return y @ A


def axpy(a: float, x: ArrayLike, y: ArrayLike) -> np.ndarray:
    """Return ``a * x + y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return a * x + y
