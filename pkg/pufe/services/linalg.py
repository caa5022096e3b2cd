"""Dense linear-algebra primitives shared by every numerical service.

Matrices and vectors are plain float64 numpy arrays; the ``as_matrix`` /
``as_vector`` guards enforce shape and finiteness at module boundaries.
"""
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from pufe.core.config import settings
from pufe.core.exceptions import ContractViolationError


def as_vector(x, name: str = "vector", dim: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractViolationError(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ContractViolationError(f"{name} has dim {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError(f"{name} contains non-finite entries")
    return arr


def as_matrix(m, name: str = "matrix", shape: Optional[Tuple[Optional[int], Optional[int]]] = None) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None:
        for axis, expected in enumerate(shape):
            if expected is not None and arr.shape[axis] != expected:
                raise ContractViolationError(
                    f"{name} has shape {arr.shape}, expected axis {axis} = {expected}"
                )
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError(f"{name} contains non-finite entries")
    return arr


def solve_least_squares(design, target, ridge: float = 0.0) -> np.ndarray:
    """Return argmin_z ||target - design z||^2 + ridge ||z||^2.

    With ridge = 0 a rank-deficient design resolves to the minimum-norm
    solution; singular values below ``pinv_cutoff * sigma_max`` count as zero.
    """
    design = as_matrix(design, "design")
    target = as_vector(target, "target", dim=design.shape[0])
    if ridge < 0 or not np.isfinite(ridge):
        raise ContractViolationError(f"ridge must be a finite nonnegative number, got {ridge}")

    k, r = design.shape
    if ridge > 0:
        design = np.vstack([design, np.sqrt(ridge) * np.eye(r)])
        target = np.concatenate([target, np.zeros(r)])
    solution, *_ = scipy.linalg.lstsq(design, target, cond=settings.pinv_cutoff)
    return np.asarray(solution, dtype=np.float64)


def numerical_rank(m, cutoff: Optional[float] = None) -> int:
    """Count singular values above ``cutoff * sigma_max``."""
    singulars = scipy.linalg.svdvals(as_matrix(m))
    if singulars.size == 0 or singulars[0] == 0.0:
        return 0
    cutoff = settings.pinv_cutoff if cutoff is None else cutoff
    return int(np.sum(singulars > cutoff * singulars[0]))


def thin_svd(m, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-k truncated SVD: (left n×k, singulars k, right d×k).

    Sign convention: the first nonzero entry of every right-singular column
    is nonnegative (the matching left column flips with it).
    """
    m = as_matrix(m)
    n, d = m.shape
    if not 1 <= k <= min(n, d):
        raise ContractViolationError(f"k must lie in [1, {min(n, d)}], got {k}")

    left, singulars, right_t = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    left = left[:, :k].copy()
    singulars = singulars[:k].copy()
    right = right_t[:k, :].T.copy()

    for j in range(k):
        nonzero = np.flatnonzero(np.abs(right[:, j]) > 0.0)
        if nonzero.size and right[nonzero[0], j] < 0:
            right[:, j] *= -1.0
            left[:, j] *= -1.0
    return left, singulars, right


def project_l2_ball(w, radius: float) -> np.ndarray:
    """Euclidean projection onto {v : ||v|| <= radius}."""
    if not radius > 0:
        raise ContractViolationError(f"radius must be positive, got {radius}")
    w = as_vector(w, "w")
    norm = float(np.linalg.norm(w))
    if norm <= radius:
        return w.copy()
    return w * (radius / norm)


def orthonormality_residual(basis) -> float:
    """max |basis^T basis - I| over all entries."""
    basis = as_matrix(basis, "basis")
    gram = basis.T @ basis
    return float(np.max(np.abs(gram - np.eye(basis.shape[1])))) if basis.shape[1] else 0.0


def condition_number(symmetric) -> float:
    """Condition number of a symmetric positive semidefinite matrix (inf if singular)."""
    eigenvalues = scipy.linalg.eigvalsh(as_matrix(symmetric))
    top = float(np.max(eigenvalues))
    bottom = float(np.min(eigenvalues))
    if top <= 0.0:
        return np.inf
    if bottom <= 0.0:
        return np.inf
    return top / bottom
