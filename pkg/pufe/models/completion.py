from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pufe.core.exceptions import ContractViolationError


@dataclass(frozen=True)
class ObservedRow:
    """A partially observed row: values at strictly increasing coordinates."""
    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.dim < 1:
            raise ContractViolationError(f"dim must be >= 1, got {self.dim}")
        if indices.shape != values.shape:
            raise ContractViolationError(
                f"{indices.size} indices but {values.size} values"
            )
        if indices.size and (indices[0] < 0 or indices[-1] >= self.dim):
            raise ContractViolationError(f"indices must lie in [0, {self.dim})")
        if indices.size > 1 and np.any(np.diff(indices) <= 0):
            raise ContractViolationError("indices must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ContractViolationError("observed values must be finite")
        indices.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @classmethod
    def full(cls, row) -> "ObservedRow":
        row = np.asarray(row, dtype=np.float64).reshape(-1)
        return cls(dim=row.size, indices=np.arange(row.size), values=row)

    @classmethod
    def from_mask(cls, row, mask) -> "ObservedRow":
        row = np.asarray(row, dtype=np.float64).reshape(-1)
        indices = np.flatnonzero(np.asarray(mask, dtype=bool))
        return cls(dim=row.size, indices=indices, values=row[indices])

    @property
    def observed_count(self) -> int:
        return int(self.indices.size)

    @property
    def is_complete(self) -> bool:
        return self.observed_count == self.dim

    def zero_filled(self) -> np.ndarray:
        """Dense row with unobserved entries set to 0."""
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense


class CompletionConfig(BaseModel):
    """Parameters of one-pass row completion.

    ``min_entries`` None means "use the sample-size requirement"; ``ridge``
    None means "0 unless the normal matrix is ill-conditioned".
    """
    model_config = ConfigDict(frozen=True)

    rank: int = Field(..., ge=1, description="Rank r of the reference row space")
    confidence: float = Field(0.1, gt=0.0, lt=1.0, description="Failure probability delta")
    min_entries: Optional[int] = Field(None, ge=1, description="Rows with fewer entries are discarded")
    sample_constant: float = Field(7.0, gt=0.0, description="Leading constant of the sample-size bound")
    ridge: Optional[float] = Field(None, ge=0.0, description="Ridge on the normal matrix")


@dataclass
class CompletionReport:
    """Completed rows (stream order) plus the ids kept, discarded and ill-posed."""
    completed: np.ndarray
    kept_row_ids: List[int] = field(default_factory=list)
    discarded_row_ids: List[int] = field(default_factory=list)
    ill_posed_row_ids: List[int] = field(default_factory=list)
    min_entries: int = 1

    @property
    def kept_count(self) -> int:
        return len(self.kept_row_ids)
