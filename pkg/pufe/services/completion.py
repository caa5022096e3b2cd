"""Row-space completion of a partially observed overlap matrix.

Each incoming row is rebuilt as V z*, where z* fits the observed entries
against the matching rows of the reference basis V. Rows are handled once,
in arrival order.
"""
from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from pufe.core.config import settings
from pufe.core.exceptions import ContractViolationError
from pufe.core.logging import get_logger
from pufe.models.completion import CompletionConfig, CompletionReport, ObservedRow
from pufe.services.linalg import as_matrix, orthonormality_residual, solve_least_squares
from pufe.services.sketch import RowSpaceBasis

logger = get_logger(__name__)

SAMPLE_CONSTANT = 7.0


def incoherence(basis) -> float:
    """max_i (n / r) ||basis_(i)||^2 for an orthonormal n×r factor.

    The full measure takes the max over both singular factors; callers
    evaluate each factor and combine.
    """
    if isinstance(basis, RowSpaceBasis):
        basis = basis.basis
    basis = as_matrix(basis, "basis")
    residual = orthonormality_residual(basis)
    if residual > settings.orthonormality_tol:
        raise ContractViolationError(f"basis is not orthonormal (residual {residual:.3g})")
    n, r = basis.shape
    row_norms = np.sum(basis ** 2, axis=1)
    return float(n / r * np.max(row_norms))


def required_samples(mu: float, r: int, b: int, delta: float, constant: float = SAMPLE_CONSTANT) -> int:
    """Observed entries per row needed for exact recovery: ceil(c μ r ln(r b / δ)).

    The ceiling ignores an excess of at most 1e-9 over an integer, so a bound
    that is mathematically integral but computed as k + 2e-16 stays k.
    """
    if not 0.0 < delta < 1.0:
        raise ContractViolationError(f"delta must lie in (0, 1), got {delta}")
    if mu < 1.0 - 1e-12:
        raise ContractViolationError(f"mu must be >= 1, got {mu}")
    if r < 1 or b < 1:
        raise ContractViolationError(f"r and b must be >= 1, got r={r}, b={b}")
    value = constant * mu * r * math.log(r * b / delta)
    return int(math.ceil(value - 1e-9))


def _normal_condition(submatrix: np.ndarray) -> float:
    singulars = np.linalg.svd(submatrix, compute_uv=False)
    if singulars.size < submatrix.shape[1] or singulars[-1] == 0.0:
        return math.inf
    return float((singulars[0] / singulars[-1]) ** 2)


def recover_row_checked(
    obs: ObservedRow, basis: RowSpaceBasis, ridge: Optional[float] = None
) -> Tuple[np.ndarray, bool]:
    """Recover a row and report whether its observation pattern was ill-posed.

    With ``ridge`` None the normal matrix is used as is unless its condition
    number exceeds ``max_condition``, in which case ``ridge_start`` is added.
    An explicit ridge of 0 on a singular pattern yields the minimum-norm fit.
    """
    if obs.dim != basis.dim:
        raise ContractViolationError(f"row dim {obs.dim} does not match basis dim {basis.dim}")
    if obs.observed_count == 0:
        raise ContractViolationError("cannot recover a row with no observed entries")

    submatrix = basis.basis[obs.indices]
    ill_posed = _normal_condition(submatrix) > settings.max_condition
    if ridge is None:
        ridge = settings.ridge_start if ill_posed else 0.0
    z = solve_least_squares(submatrix, obs.values, ridge=ridge)
    return basis.basis @ z, ill_posed


def recover_row(obs: ObservedRow, basis: RowSpaceBasis, ridge: Optional[float] = 0.0) -> np.ndarray:
    """V z* with z* = argmin ||m_Ω - V_Ω z||^2 (+ ridge ||z||^2)."""
    recovered, _ = recover_row_checked(obs, basis, ridge)
    return recovered


def default_min_entries(
    basis: RowSpaceBasis, b: int, delta: float, constant: float = SAMPLE_CONSTANT
) -> int:
    """Sample-size requirement with μ taken from the V factor only."""
    return required_samples(incoherence(basis), basis.rank, b, delta, constant)


def complete_stream(
    rows: Iterable[ObservedRow],
    basis: RowSpaceBasis,
    cfg: CompletionConfig,
    row_ids: Optional[Sequence[int]] = None,
    expected_rows: Optional[int] = None,
) -> CompletionReport:
    """Complete rows in arrival order, discarding those with too few entries.

    ``expected_rows`` is the overlap length b used by the default threshold;
    it defaults to the number of ids given (or 1 when streaming blind).
    """
    b = expected_rows if expected_rows is not None else (len(row_ids) if row_ids is not None else 1)
    min_entries = cfg.min_entries
    if min_entries is None:
        min_entries = default_min_entries(basis, max(b, 1), cfg.confidence, cfg.sample_constant)

    completed = []
    report = CompletionReport(completed=np.zeros((0, basis.dim)), min_entries=min_entries)
    ids = iter(row_ids) if row_ids is not None else None
    for position, obs in enumerate(rows):
        row_id = next(ids) if ids is not None else position
        if obs.dim != basis.dim:
            raise ContractViolationError(
                f"row {row_id} has dim {obs.dim}, expected {basis.dim}"
            )
        if obs.observed_count < min_entries:
            report.discarded_row_ids.append(row_id)
            continue
        recovered, ill_posed = recover_row_checked(obs, basis, cfg.ridge)
        if ill_posed:
            report.ill_posed_row_ids.append(row_id)
        completed.append(recovered)
        report.kept_row_ids.append(row_id)

    if completed:
        report.completed = np.vstack(completed)
    logger.info(
        "completed overlap rows",
        kept=len(report.kept_row_ids),
        discarded=len(report.discarded_row_ids),
        ill_posed=len(report.ill_posed_row_ids),
        min_entries=min_entries,
    )
    return report
