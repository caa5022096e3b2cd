"""Streaming row-space estimation with a Frequent Directions sketch."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from pufe.core.exceptions import ContractViolationError
from pufe.core.logging import get_logger
from pufe.services.linalg import (
    as_matrix,
    as_vector,
    numerical_rank,
    orthonormality_residual,
    thin_svd,
)

logger = get_logger(__name__)

RANK_TOLERANCE = 1e-8


@dataclass(frozen=True)
class RowSpaceBasis:
    """Orthonormal columns spanning the top-r right singular directions."""
    basis: np.ndarray

    def __post_init__(self) -> None:
        basis = as_matrix(self.basis, "basis")
        if basis.shape[1] < 1 or basis.shape[1] > basis.shape[0]:
            raise ContractViolationError(f"basis must be d×r with 1 <= r <= d, got {basis.shape}")
        residual = orthonormality_residual(basis)
        if residual >= 1e-8:
            raise ContractViolationError(f"basis columns are not orthonormal (residual {residual:.3g})")
        basis = basis.copy()
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def project(self, row) -> np.ndarray:
        row = as_vector(row, "row", dim=self.dim)
        return self.basis @ (self.basis.T @ row)


def default_sketch_rows(rank: Optional[int], dim: int) -> int:
    """Sketch size: max(2r, r + 4) for a known rank, else a lossless d + 1."""
    if rank is None:
        return dim + 1
    return max(2 * rank, rank + 4)


class FrequentDirections:
    """One-pass Frequent Directions sketch over rows of dimension ``dim``.

    Rows go into zero slots of an ℓ×d buffer. When no zero slot remains the
    buffer is rotated to its SVD and every squared singular value is reduced
    by the ℓ-th one, which empties at least one row.
    """

    def __init__(self, sketch_rows: int, dim: int):
        if sketch_rows < 2:
            raise ContractViolationError(f"sketch_rows must be >= 2, got {sketch_rows}")
        if dim < 1:
            raise ContractViolationError(f"dim must be >= 1, got {dim}")
        self.sketch_rows = int(sketch_rows)
        self.dim = int(dim)
        self.buffer = np.zeros((self.sketch_rows, self.dim))
        self.rows_seen = 0
        self.shrinks = 0
        self._filled = 0

    def insert(self, row) -> "FrequentDirections":
        row = as_vector(row, "row", dim=self.dim)
        if self._filled == self.sketch_rows:
            self._shrink()
        self.buffer[self._filled] = row
        self._filled += 1
        self.rows_seen += 1
        return self

    def extend(self, rows) -> "FrequentDirections":
        for row in as_matrix(rows, "rows", shape=(None, self.dim)):
            self.insert(row)
        return self

    def _shrink(self) -> None:
        k = min(self.sketch_rows, self.dim)
        _, singulars, right = thin_svd(self.buffer, k)
        # With ℓ > d the buffer already has rank <= d < ℓ, so nothing is lost.
        delta = singulars[-1] ** 2 if self.sketch_rows <= self.dim else 0.0
        shrunk = np.sqrt(np.maximum(singulars ** 2 - delta, 0.0))
        self.buffer = np.zeros((self.sketch_rows, self.dim))
        self.buffer[:k] = shrunk[:, None] * right.T
        self._filled = int(np.count_nonzero(shrunk > 0.0))
        self.shrinks += 1
        logger.debug("sketch shrink", rows_seen=self.rows_seen, delta=float(delta), kept=self._filled)

    def estimate_rank(self, tolerance: float = RANK_TOLERANCE) -> int:
        """Number of sketch singular values above ``tolerance * sigma_max`` (at least 1)."""
        return max(1, numerical_rank(self.buffer, tolerance))

    def row_space(self, r: int) -> RowSpaceBasis:
        if not 1 <= r <= min(self.sketch_rows, self.dim):
            raise ContractViolationError(
                f"r must lie in [1, {min(self.sketch_rows, self.dim)}], got {r}"
            )
        _, _, right = thin_svd(self.buffer, r)
        return RowSpaceBasis(right)


def exact_row_space(a, r: int) -> RowSpaceBasis:
    """Reference path: top-r right singular vectors of a stored matrix."""
    _, _, right = thin_svd(as_matrix(a, "a"), r)
    return RowSpaceBasis(right)


def sketch_row_space(rows, rank: Optional[int] = None, sketch_rows: Optional[int] = None) -> RowSpaceBasis:
    """Stream ``rows`` through a sketch and return its row-space basis.

    When ``rank`` is None it is estimated from the sketch spectrum.
    """
    rows = as_matrix(rows, "rows")
    dim = rows.shape[1]
    if sketch_rows is None:
        sketch_rows = default_sketch_rows(rank, dim)
    sketch = FrequentDirections(sketch_rows, dim).extend(rows)
    if rank is None:
        rank = sketch.estimate_rank()
        logger.info("estimated row-space rank", rank=rank, dim=dim, rows=sketch.rows_seen)
    rank = min(rank, sketch.sketch_rows, dim)
    return sketch.row_space(rank)


__all__ = [
    "FrequentDirections",
    "RowSpaceBasis",
    "default_sketch_rows",
    "exact_row_space",
    "sketch_row_space",
]
