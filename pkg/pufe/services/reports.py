"""CSV report writers.

Every table is written with a fixed float format and "\\n" line endings so a
rerun with the same configuration reproduces the files byte for byte.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from pufe.core.logging import get_logger
from pufe.core.utils import create_dir_if_not_exists
from pufe.models.completion import CompletionReport, ObservedRow
from pufe.models.run import RunReport
from pufe.models.stream import EvolutionScript, PhasedInstance
from pufe.services.experiment import average_cumulative_loss
from pufe.services.mapper import MappingMatrix
from pufe.services.online import OnlineLinearModel
from pufe.services.sketch import RowSpaceBasis

logger = get_logger(__name__)

FLOAT_FORMAT = "%.10g"
CHECKPOINT_FLOAT_FORMAT = "%.17g"

METRICS_FILE = "metrics.csv"
CURVES_FILE = "curves.csv"
ALPHAS_FILE = "alphas.csv"
DOMINANCE_FILE = "dominance.csv"


def _write(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote report", path=str(path), rows=len(frame))
    return path


def metrics_frame(report: RunReport) -> pd.DataFrame:
    """Mean and population std of the final metric per (method, setting).

    ``rank`` orders the settings within each method, 1 being best.
    """
    columns = ["method", "setting", "mean", "std", "rank"]
    if not report.outcomes:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(
        {
            "method": [o.method.value for o in report.outcomes],
            "setting": [o.setting.value for o in report.outcomes],
            "metric": [o.metric for o in report.outcomes],
        }
    )
    summary = (
        frame.groupby(["method", "setting"], sort=False)["metric"]
        .agg(mean="mean", std=lambda s: float(np.std(s.to_numpy())))
        .reset_index()
    )
    summary["rank"] = (
        summary.groupby("method", sort=False)["mean"]
        .rank(method="min", ascending=not report.task.higher_is_better)
        .astype(int)
    )
    return summary[columns]


def curves_frame(report: RunReport) -> pd.DataFrame:
    """Average cumulative loss over phase B, averaged across trials."""
    grouped: Dict[tuple, list] = {}
    for outcome in report.outcomes:
        key = (outcome.method.value, outcome.setting.value)
        grouped.setdefault(key, []).append(average_cumulative_loss(outcome.losses))
    rounds = np.arange(report.T1 + 1, report.T1 + report.T2 + 1)
    pieces = [
        pd.DataFrame(
            {
                "method": method,
                "setting": setting,
                "t": rounds,
                "avg_cum_loss": np.mean(np.vstack(curves), axis=0),
            }
        )
        for (method, setting), curves in grouped.items()
    ]
    if not pieces:
        return pd.DataFrame(columns=["method", "setting", "t", "avg_cum_loss"])
    return pd.concat(pieces, ignore_index=True)


def alphas_frame(report: RunReport) -> pd.DataFrame:
    """Long per-round log: one row per (round, expert).

    ``unit_loss`` and ``bound`` let the dominance check be redone from the
    file alone; ``combined_unit_loss`` repeats PUFE's loss on every expert row.
    """
    columns = ["setting", "trial", "t", "expert", "alpha", "unit_loss", "combined_unit_loss", "bound"]
    pieces = []
    for trace in report.alpha_traces:
        rounds, experts = trace.alphas.shape
        missing = np.full(rounds * experts, np.nan)
        pieces.append(
            pd.DataFrame(
                {
                    "setting": trace.setting.value,
                    "trial": trace.trial,
                    "t": np.repeat(np.arange(trace.first_round, trace.first_round + rounds), experts),
                    "expert": np.tile(np.asarray(trace.expert_ids, dtype=object), rounds),
                    "alpha": trace.alphas.reshape(-1),
                    "unit_loss": missing if trace.expert_unit is None else trace.expert_unit.reshape(-1),
                    "combined_unit_loss": (
                        missing if trace.combined_unit is None else np.repeat(trace.combined_unit, experts)
                    ),
                    "bound": missing if trace.bounds is None else trace.bounds.reshape(-1),
                }
            )
        )
    if not pieces:
        return pd.DataFrame(columns=columns)
    return pd.concat(pieces, ignore_index=True)


def dominance_frame(report: RunReport) -> pd.DataFrame:
    """PUFE cumulative unit loss against the tightest expert-plus-bound envelope."""
    pieces = []
    for trace in report.dominance_traces:
        envelope = np.min(trace.experts + trace.bounds, axis=1)
        violated = np.zeros(len(trace.combined), dtype=int)
        violated[trace.violations()] = 1
        pieces.append(
            pd.DataFrame(
                {
                    "setting": trace.setting.value,
                    "trial": trace.trial,
                    "t": np.arange(report.T1 + 1, report.T1 + 1 + len(trace.combined)),
                    "pufe_cum": trace.combined,
                    "pufe_weighted_cum": trace.weighted if trace.weighted is not None else np.nan,
                    "best_expert_cum": np.min(trace.experts, axis=1),
                    "envelope": envelope,
                    "violated": violated,
                }
            )
        )
    if not pieces:
        return pd.DataFrame(
            columns=[
                "setting", "trial", "t", "pufe_cum", "pufe_weighted_cum",
                "best_expert_cum", "envelope", "violated",
            ]
        )
    return pd.concat(pieces, ignore_index=True)


def write_run_report(report: RunReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out = create_dir_if_not_exists(out_dir)
    paths = {
        "metrics": _write(metrics_frame(report), out / METRICS_FILE),
        "curves": _write(curves_frame(report), out / CURVES_FILE),
    }
    if report.alpha_traces:
        paths["alphas"] = _write(alphas_frame(report), out / ALPHAS_FILE)
        paths["dominance"] = _write(dominance_frame(report), out / DOMINANCE_FILE)
    return paths


def stream_frame(stream: Sequence[PhasedInstance]) -> pd.DataFrame:
    """One row per round: observed old coordinates, new features and the label."""
    d2 = next((i.new_features.shape[0] for i in stream if i.new_features is not None), 0)
    records = []
    for instance in stream:
        old = instance.old_features
        record = {
            "t": instance.t,
            "phase": instance.phase.value,
            "observed_old_indices": "" if old is None else ";".join(str(j) for j in old.indices),
            "observed_old_values": "" if old is None else ";".join(FLOAT_FORMAT % v for v in old.values),
        }
        new = instance.new_features
        for j in range(d2):
            record[f"new_{j}"] = np.nan if new is None else new[j]
        record["label"] = instance.label
        records.append(record)
    return pd.DataFrame.from_records(records)


def write_stream_dump(stream: Sequence[PhasedInstance], path: Union[str, Path]) -> Path:
    path = Path(path)
    create_dir_if_not_exists(path.parent)
    return _write(stream_frame(stream), path)


def write_script(script: EvolutionScript, path: Union[str, Path]) -> Path:
    path = Path(path)
    create_dir_if_not_exists(path.parent)
    path.write_text(script.to_text(), encoding="utf-8")
    return path


def write_completion(
    completion: CompletionReport, out_dir: Union[str, Path], basis: Optional[RowSpaceBasis] = None
) -> Dict[str, Path]:
    """completed.csv keyed by row id, discarded.csv listing dropped rows, optional basis.csv."""
    out = create_dir_if_not_exists(out_dir)
    completed = pd.DataFrame(
        completion.completed, columns=[f"x_{j}" for j in range(completion.completed.shape[1])]
    )
    completed.insert(0, "row_id", completion.kept_row_ids)
    paths = {
        "completed": _write(completed, out / "completed.csv"),
        "discarded": _write(pd.DataFrame({"row_id": completion.discarded_row_ids}), out / "discarded.csv"),
    }
    if basis is not None:
        frame = pd.DataFrame(basis.basis, columns=[f"v_{j}" for j in range(basis.rank)])
        paths["basis"] = _write(frame, out / "basis.csv")
    return paths


def write_observed_triplets(
    rows: Sequence[ObservedRow], path: Union[str, Path], row_ids: Optional[Sequence[int]] = None
) -> Path:
    """Sparse ``row_id,col_id,value`` CSV; row ids default to 1..n."""
    path = Path(path)
    create_dir_if_not_exists(path.parent)
    row_ids = list(range(1, len(rows) + 1)) if row_ids is None else list(row_ids)
    frame = pd.DataFrame(
        {
            "row_id": np.repeat(np.asarray(row_ids, dtype=np.int64), [row.observed_count for row in rows]),
            "col_id": np.concatenate([row.indices for row in rows]) if rows else np.empty(0, dtype=np.int64),
            "value": np.concatenate([row.values for row in rows]) if rows else np.empty(0),
        }
    )
    return _write(frame, path)


def write_model_snapshot(model: OnlineLinearModel, path: Union[str, Path]) -> Path:
    """One ``weight`` column; written at full precision so reloading is exact."""
    path = Path(path)
    create_dir_if_not_exists(path.parent)
    frame = pd.DataFrame({"weight": model.weights})
    frame.to_csv(path, index=False, float_format=CHECKPOINT_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_mapping(mapping: MappingMatrix, path: Union[str, Path]) -> Path:
    """Dense d2×d1 coefficient matrix, one CSV row per current-space feature."""
    path = Path(path)
    create_dir_if_not_exists(path.parent)
    frame = pd.DataFrame(mapping.map, columns=[f"p_{j}" for j in range(mapping.previous_dim)])
    frame.to_csv(path, index=False, float_format=CHECKPOINT_FLOAT_FORMAT, lineterminator="\n")
    return path
