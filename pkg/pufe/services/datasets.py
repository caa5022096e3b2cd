"""Dataset ingestion and synthetic dataset generators."""
from __future__ import annotations

import math
import re
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.datasets import load_svmlight_file

from pufe.core.exceptions import ContractViolationError, DatasetParseError
from pufe.core.logging import get_logger
from pufe.models.completion import ObservedRow
from pufe.services.mapper import MappingMatrix
from pufe.services.online import DEFAULT_RADIUS, OnlineLinearModel

logger = get_logger(__name__)

_SPARSE_LINE = re.compile(
    r"^\s*[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?"
    r"(\s+qid:\d+)?"
    r"(\s+\d+:[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)*\s*(#.*)?$"
)


class DatasetFormat(str, Enum):
    SPARSE_INDEX_VALUE = "sparse_index_value"
    DENSE_CSV = "dense_csv"

    @classmethod
    def infer(cls, path: Union[str, Path]) -> "DatasetFormat":
        return cls.DENSE_CSV if Path(path).suffix.lower() in (".csv", ".tsv") else cls.SPARSE_INDEX_VALUE


def _content_lines(path: Path):
    with open(path, encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            stripped = raw.strip()
            if stripped and not stripped.startswith("#"):
                yield number, stripped


def _first_malformed_sparse_line(path: Path) -> Optional[int]:
    for number, line in _content_lines(path):
        if not _SPARSE_LINE.match(line):
            return number
        if any(int(token.split(":", 1)[0]) < 1 for token in line.split("#", 1)[0].split()[1:]
               if not token.startswith("qid:")):
            return number
    return None


def binarize_labels(labels: np.ndarray) -> np.ndarray:
    """Map two-class labels to {-1, +1} (smaller original label -> -1)."""
    classes = np.unique(labels)
    if classes.size != 2:
        return labels.astype(np.float64)
    return np.where(labels == classes[0], -1.0, 1.0)


def normalize_labels(labels: np.ndarray) -> np.ndarray:
    """Affinely rescale regression targets onto [-1, 1]."""
    labels = np.asarray(labels, dtype=np.float64)
    low, high = float(np.min(labels)), float(np.max(labels))
    if high == low:
        return np.zeros_like(labels)
    return 2.0 * (labels - low) / (high - low) - 1.0


def _read_sparse(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    if next(_content_lines(path), None) is None:
        raise DatasetParseError("dataset file has no data lines", path=str(path))
    try:
        features, labels = load_svmlight_file(str(path), zero_based=False, dtype=np.float64)
    except ValueError as exc:
        line = _first_malformed_sparse_line(path)
        raise DatasetParseError(f"malformed index:value line ({exc})", line_number=line, path=str(path)) from exc
    return np.asarray(features.toarray(), dtype=np.float64), np.asarray(labels, dtype=np.float64)


def _read_dense(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    try:
        frame = pd.read_csv(path, header=None, comment="#", skip_blank_lines=True)
    except pd.errors.EmptyDataError as exc:
        raise DatasetParseError("dataset file has no data lines", path=str(path)) from exc
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        line = int(match.group(1)) if match else None
        raise DatasetParseError("malformed CSV row", line_number=line, path=str(path)) from exc

    numeric = frame.apply(pd.to_numeric, errors="coerce")
    # A non-numeric first row is a header
    if len(numeric) > 1 and numeric.iloc[0].isna().all():
        numeric = numeric.iloc[1:]
        header_offset = 1
    else:
        header_offset = 0
    bad_rows = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
    if bad_rows.size:
        line = int(bad_rows[0]) + 1 + header_offset
        raise DatasetParseError("non-numeric or missing value", line_number=line, path=str(path))
    if numeric.shape[0] == 0 or numeric.shape[1] < 2:
        raise DatasetParseError("need at least one feature column and a label column", path=str(path))
    values = numeric.to_numpy(dtype=np.float64)
    return values[:, :-1], values[:, -1]


def ingest_dataset(
    path: Union[str, Path], fmt: Optional[Union[DatasetFormat, str]] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Load (features n×d, labels n) from a sparse index:value or dense CSV file.

    Sparse lines are "label idx:val ..." with 1-based indices; missing entries
    are 0 and d is the largest index seen. Dense CSV keeps the label last.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetParseError("dataset file not found", path=str(path))
    fmt = DatasetFormat(fmt) if fmt is not None else DatasetFormat.infer(path)
    if fmt is DatasetFormat.SPARSE_INDEX_VALUE:
        features, labels = _read_sparse(path)
    else:
        features, labels = _read_dense(path)
    labels = binarize_labels(labels)
    logger.info("ingested dataset", path=str(path), rows=features.shape[0], dim=features.shape[1])
    return features, labels


def make_low_rank_dataset(
    n: int,
    d: int,
    rank: int,
    seed: int,
    task: str = "classification",
    label_noise: float = 0.05,
) -> Tuple[np.ndarray, np.ndarray]:
    """Rows in a random rank-``rank`` subspace; labels from a random linear rule.

    Classification labels are sign(x·β) with a ``label_noise`` fraction flipped;
    regression targets get additive noise of that scale and are normalized.
    """
    if not 1 <= rank <= d:
        raise ContractViolationError(f"rank must lie in [1, {d}], got {rank}")
    rng = np.random.default_rng(seed)
    factors = rng.standard_normal((n, rank))
    loadings = rng.standard_normal((rank, d)) / math.sqrt(rank)
    features = factors @ loadings
    beta = rng.standard_normal(d) / math.sqrt(d)
    scores = features @ beta
    if task == "classification":
        labels = np.where(scores >= 0.0, 1.0, -1.0)
        flips = rng.uniform(size=n) < label_noise
        labels[flips] *= -1.0
    else:
        labels = normalize_labels(scores + label_noise * rng.standard_normal(n))
    return features, labels


def make_sensor_stream(
    n: int, d: int, seed: int, noise: float = 0.05
) -> Tuple[np.ndarray, np.ndarray]:
    """Synthetic stand-in for an indoor tracking stream (regression).

    A tag moves along a smooth closed trajectory with jitter; each of the ``d``
    aerials reports a linear response to the tag position plus noise. The
    target is the tag's x-coordinate normalized to [-1, 1].
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n, dtype=np.float64)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=2)
    period = rng.uniform(80.0, 160.0, size=2)
    drift = np.cumsum(rng.normal(0.0, 0.02, size=(n, 2)), axis=0)
    position = np.column_stack([
        np.sin(2.0 * math.pi * t / period[0] + phase[0]),
        np.cos(2.0 * math.pi * t / period[1] + phase[1]),
    ]) + drift
    response = rng.standard_normal((3, d))
    design = np.column_stack([position, np.ones(n)])
    features = design @ response + noise * rng.standard_normal((n, d))
    return features, normalize_labels(position[:, 0])


def read_incomplete_matrix(path: Union[str, Path]) -> List[ObservedRow]:
    """Rows of a CSV matrix whose blank (or NaN) cells are unobserved entries.

    A leading row with no numeric cell is taken as a header.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetParseError("matrix file not found", path=str(path))
    try:
        frame = pd.read_csv(path, header=None, comment="#", skip_blank_lines=True)
    except pd.errors.EmptyDataError as exc:
        raise DatasetParseError("matrix file has no data lines", path=str(path)) from exc
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise DatasetParseError(
            "malformed CSV row", line_number=int(match.group(1)) if match else None, path=str(path)
        ) from exc

    numeric = frame.apply(pd.to_numeric, errors="coerce")
    header_offset = 0
    if len(numeric) > 1 and numeric.iloc[0].isna().all() and frame.iloc[0].notna().any():
        numeric, frame, header_offset = numeric.iloc[1:], frame.iloc[1:], 1
    # A cell that was present but did not parse is an error, not a gap
    garbled = np.flatnonzero((numeric.isna() & frame.notna()).any(axis=1).to_numpy())
    if garbled.size:
        raise DatasetParseError(
            "non-numeric value", line_number=int(garbled[0]) + 1 + header_offset, path=str(path)
        )
    values = numeric.to_numpy(dtype=np.float64)
    if values.shape[0] == 0:
        raise DatasetParseError("matrix file has no data lines", path=str(path))
    return [ObservedRow.from_mask(np.nan_to_num(row), ~np.isnan(row)) for row in values]


def read_triplet_matrix(
    path: Union[str, Path], dim: Optional[int] = None
) -> Tuple[List[int], List[ObservedRow]]:
    """Rows of a sparse ``row_id,col_id,value`` CSV, ordered by row id.

    Column ids are 0-based; ``dim`` defaults to the largest column id plus
    one. A leading row with a non-numeric id is taken as a header.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetParseError("triplet file not found", path=str(path))
    try:
        frame = pd.read_csv(path, header=None, comment="#", skip_blank_lines=True, dtype=str)
    except pd.errors.EmptyDataError as exc:
        raise DatasetParseError("triplet file has no data lines", path=str(path)) from exc
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise DatasetParseError(
            "malformed CSV row", line_number=int(match.group(1)) if match else None, path=str(path)
        ) from exc
    if frame.shape[1] != 3:
        raise DatasetParseError(f"expected 3 columns, got {frame.shape[1]}", path=str(path))

    numeric = frame.apply(pd.to_numeric, errors="coerce")
    header_offset = 0
    if numeric.iloc[0, :2].isna().all():
        numeric, header_offset = numeric.iloc[1:], 1
    if numeric.empty:
        raise DatasetParseError("triplet file has no data lines", path=str(path))
    ids = numeric.iloc[:, :2].to_numpy(dtype=np.float64)
    bad = ~np.isfinite(numeric.to_numpy(dtype=np.float64)).all(axis=1)
    bad |= (ids < 0).any(axis=1) | (np.floor(ids) != ids).any(axis=1)
    if bad.any():
        raise DatasetParseError(
            "row and column ids must be nonnegative integers and values numeric",
            line_number=int(np.flatnonzero(bad)[0]) + 1 + header_offset,
            path=str(path),
        )

    triplets = pd.DataFrame(
        {
            "row_id": ids[:, 0].astype(np.int64),
            "col_id": ids[:, 1].astype(np.int64),
            "value": numeric.iloc[:, 2].to_numpy(dtype=np.float64),
        }
    )
    repeated = np.flatnonzero(triplets.duplicated(["row_id", "col_id"]).to_numpy())
    if repeated.size:
        raise DatasetParseError(
            "duplicate (row_id, col_id) entry", line_number=int(repeated[0]) + 1 + header_offset, path=str(path)
        )
    width = int(triplets["col_id"].max()) + 1
    if dim is None:
        dim = width
    elif width > dim:
        raise DatasetParseError(f"column id {width - 1} is outside a {dim}-column matrix", path=str(path))

    row_ids: List[int] = []
    rows: List[ObservedRow] = []
    for row_id, group in triplets.sort_values(["row_id", "col_id"]).groupby("row_id", sort=True):
        row_ids.append(int(row_id))
        rows.append(
            ObservedRow(
                dim=dim,
                indices=group["col_id"].to_numpy(dtype=np.int64),
                values=group["value"].to_numpy(dtype=np.float64),
            )
        )
    return row_ids, rows


def _read_numeric_table(path: Union[str, Path], what: str) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DatasetParseError(f"{what} file not found", path=str(path))
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise DatasetParseError(f"unreadable {what} file: {exc}", path=str(path)) from exc
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    garbled = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
    if garbled.size:
        # +2: header line plus 1-based numbering
        raise DatasetParseError("non-numeric value", line_number=int(garbled[0]) + 2, path=str(path))
    if numeric.empty:
        raise DatasetParseError(f"{what} file has no data lines", path=str(path))
    return numeric.to_numpy(dtype=np.float64)


def read_model_snapshot(path: Union[str, Path], radius: float = DEFAULT_RADIUS) -> OnlineLinearModel:
    """Load weights written by ``write_model_snapshot``."""
    table = _read_numeric_table(path, "snapshot")
    if table.shape[1] != 1:
        raise DatasetParseError(f"snapshot must have one column, got {table.shape[1]}", path=str(path))
    return OnlineLinearModel(table[:, 0], radius)


def read_mapping(path: Union[str, Path]) -> MappingMatrix:
    """Load a d2×d1 coefficient matrix written by ``write_mapping``."""
    return MappingMatrix(_read_numeric_table(path, "mapping"))
