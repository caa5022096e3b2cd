"""Streaming least-squares map from current-space to previous-space instances."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from pufe.core.config import settings
from pufe.core.exceptions import ContractViolationError
from pufe.core.logging import get_logger
from pufe.services.linalg import as_matrix, as_vector, condition_number

logger = get_logger(__name__)

MAX_ESCALATIONS = 40


@dataclass(frozen=True)
class MappingMatrix:
    """Coefficient matrix P (d2×d1); psi(x_C) = P^T x_C."""
    map: np.ndarray
    ridge_used: float = 0.0

    def __post_init__(self) -> None:
        matrix = as_matrix(self.map, "map").copy()
        matrix.setflags(write=False)
        object.__setattr__(self, "map", matrix)

    @property
    def current_dim(self) -> int:
        return self.map.shape[0]

    @property
    def previous_dim(self) -> int:
        return self.map.shape[1]

    def recover(self, x_current) -> np.ndarray:
        x_current = as_vector(x_current, "x_current", dim=self.current_dim)
        return self.map.T @ x_current


class MappingAccumulator:
    """Running sums gram = Σ x_C x_C^T and cross = Σ x_C x_P^T."""

    def __init__(self, current_dim: int, previous_dim: int):
        if current_dim < 1 or previous_dim < 1:
            raise ContractViolationError("mapping dimensions must be >= 1")
        self.gram = np.zeros((current_dim, current_dim))
        self.cross = np.zeros((current_dim, previous_dim))
        self.pairs_seen = 0

    @property
    def current_dim(self) -> int:
        return self.gram.shape[0]

    @property
    def previous_dim(self) -> int:
        return self.cross.shape[1]

    def accumulate(self, x_current, x_previous) -> "MappingAccumulator":
        x_current = as_vector(x_current, "x_current", dim=self.current_dim)
        x_previous = as_vector(x_previous, "x_previous", dim=self.previous_dim)
        self.gram += np.outer(x_current, x_current)
        self.cross += np.outer(x_current, x_previous)
        self.pairs_seen += 1
        return self

    def finalize(self, ridge: float = 0.0, max_condition: Optional[float] = None) -> MappingMatrix:
        """Solve (gram + λI) P = cross.

        λ starts at ``ridge``; while gram + λI is worse conditioned than
        ``max_condition`` it is raised, starting from ``ridge_start`` and
        growing tenfold.
        """
        if self.pairs_seen == 0:
            raise ContractViolationError("cannot fit a mapping from zero pairs")
        if ridge < 0:
            raise ContractViolationError(f"ridge must be nonnegative, got {ridge}")
        max_condition = settings.max_condition if max_condition is None else max_condition

        # Symmetrize away accumulated rounding before the eigen-solve
        gram = 0.5 * (self.gram + self.gram.T)
        identity = np.eye(self.current_dim)
        lam = float(ridge)
        escalations = 0
        while condition_number(gram + lam * identity) > max_condition:
            if escalations >= MAX_ESCALATIONS:
                raise ContractViolationError("mapping Gram matrix could not be regularized")
            lam = settings.ridge_start if lam < settings.ridge_start else lam * 10.0
            escalations += 1
        if escalations:
            logger.info(
                "escalated mapping ridge",
                ridge_used=lam,
                pairs=self.pairs_seen,
                current_dim=self.current_dim,
            )
        coefficients = scipy.linalg.solve(gram + lam * identity, self.cross, assume_a="pos")
        return MappingMatrix(coefficients, ridge_used=lam)
