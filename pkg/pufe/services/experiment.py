"""Seeded multi-trial experiments across overlap settings."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from pufe.core.exceptions import ConfigurationError, ContractViolationError, TrialFailureError
from pufe.core.logging import get_logger
from pufe.core.utils import spawn_seeds
from pufe.models.run import AlphaTrace, DominanceTrace, MethodKind, MethodOutcome, RunConfig, RunReport, TaskKind
from pufe.services.datasets import (
    DatasetFormat,
    ingest_dataset,
    make_low_rank_dataset,
    make_sensor_stream,
    normalize_labels,
)
from pufe.services.pipeline import prepare_stream, progressive_metric, run_pass, select_pass
from pufe.services.simulate import make_script, synthesize_stream

logger = get_logger(__name__)

SYNTHETIC_LOW_RANK = "synthetic-lowrank"
SYNTHETIC_SENSOR = "synthetic-sensor"


def average_cumulative_loss(losses) -> np.ndarray:
    """Element j is the mean of the first j losses."""
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    if losses.size == 0:
        raise ContractViolationError("loss sequence is empty")
    return np.cumsum(losses) / np.arange(1, losses.size + 1)


def load_dataset(cfg: RunConfig, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Features and labels for one trial; synthetic sets are redrawn per seed."""
    if cfg.dataset == SYNTHETIC_LOW_RANK:
        return make_low_rank_dataset(
            cfg.synthetic_n,
            cfg.synthetic_d,
            cfg.synthetic_rank,
            seed,
            task=cfg.task.value,
            label_noise=cfg.label_noise,
        )
    if cfg.dataset == SYNTHETIC_SENSOR:
        if cfg.task is not TaskKind.REGRESSION:
            raise ConfigurationError("the sensor stream is a regression dataset; set task=regression")
        return make_sensor_stream(cfg.synthetic_n, cfg.synthetic_d, seed)

    fmt = None if cfg.dataset_format == "auto" else DatasetFormat(cfg.dataset_format)
    features, labels = ingest_dataset(cfg.dataset, fmt)
    if cfg.task is TaskKind.REGRESSION:
        return features, normalize_labels(labels)
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ConfigurationError(f"{cfg.dataset} is not a two-class dataset")
    return features, labels


def resolve_geometry(cfg: RunConfig, n: int, d1: int) -> Dict[str, int]:
    T1 = cfg.T1 if cfg.T1 is not None else n // 2
    T2 = cfg.T2 if cfg.T2 is not None else n - T1
    if T1 + T2 > n:
        raise ConfigurationError(f"T1 + T2 = {T1 + T2} exceeds the {n} available instances")
    if T2 < 1:
        raise ConfigurationError("no instances left for the current feature space")
    if cfg.b > T1:
        raise ConfigurationError(f"b = {cfg.b} exceeds T1 = {T1}")
    # Tolerance keeps 0.3 * 10 at 3
    s_floor = cfg.s_floor if cfg.s_floor is not None else math.ceil(cfg.s_floor_fraction * d1 - 1e-9)
    if s_floor > d1:
        raise ConfigurationError(f"s_floor = {s_floor} exceeds d1 = {d1}")
    return {"T1": T1, "T2": T2, "d2": cfg.d2 or d1, "s_floor": s_floor}


def run_trial(cfg: RunConfig, trial: int, seed: int) -> RunReport:
    """One trial: a shared script and Gaussian map, then every setting in turn."""
    features, labels = load_dataset(cfg, seed)
    geometry = resolve_geometry(cfg, *features.shape)
    script = make_script(
        features.shape[1],
        cfg.b,
        geometry["T1"],
        geometry["T2"],
        geometry["s_floor"],
        seed,
        d2=geometry["d2"],
        schedule=cfg.vanish_schedule,
    )
    report = RunReport(task=cfg.task, T1=script.T1, T2=script.T2)
    for setting in cfg.settings:
        stream = synthesize_stream(features, labels, script, setting, noise_std=cfg.map_noise)
        prepared = prepare_stream(stream, cfg)
        passes = [run_pass(prepared, c, cfg.methods, cfg, seed) for c in cfg.step_grid]
        for method in cfg.methods:
            best = select_pass(passes, method)
            outcome = MethodOutcome(
                method=method,
                setting=setting,
                trial=trial,
                c=best.c,
                losses=best.losses[method],
                metric=progressive_metric(cfg.task, best.predictions[method], prepared.labels),
            )
            report.outcomes.append(outcome)
            logger.info(
                "selected step scale",
                trial=trial,
                setting=setting.value,
                method=method.value,
                c=best.c,
                metric=outcome.metric,
            )
            if method is MethodKind.PUFE:
                report.alpha_traces.append(
                    AlphaTrace(
                        setting,
                        trial,
                        best.expert_ids,
                        best.alphas,
                        prepared.T1 + 1,
                        expert_unit=best.expert_unit,
                        combined_unit=best.combined_unit,
                        bounds=best.bounds,
                    )
                )
                report.dominance_traces.append(
                    DominanceTrace(
                        setting,
                        trial,
                        best.expert_ids,
                        np.cumsum(best.combined_unit),
                        np.cumsum(best.expert_unit, axis=0),
                        best.bounds,
                        np.cumsum(np.sum(best.alphas * best.expert_unit, axis=1)),
                    )
                )
    report.completed_trials = 1
    return report


def run_experiment(cfg: RunConfig, out_dir: Optional[Union[str, Path]] = None) -> RunReport:
    """All trials of ``cfg``; writes the CSV reports when ``out_dir`` is given.

    A failure after at least one completed trial raises TrialFailureError
    carrying the report of the completed trials.
    """
    # Imported here: reports depend on this module for curve averaging
    from pufe.services.reports import write_run_report

    report: Optional[RunReport] = None
    for trial, seed in enumerate(spawn_seeds(cfg.seed, cfg.trials)):
        logger.info("starting trial", trial=trial, seed=seed)
        try:
            trial_report = run_trial(cfg, trial, seed)
        except Exception as exc:
            if report is None:
                raise
            logger.error("trial failed", trial=trial, error=str(exc))
            if out_dir is not None:
                write_run_report(report, out_dir)
            raise TrialFailureError(
                f"trial {trial} failed after {report.completed_trials} completed: {exc}",
                trial=trial,
                partial_report=report,
            ) from exc
        if report is None:
            report = trial_report
            continue
        report.outcomes.extend(trial_report.outcomes)
        report.alpha_traces.extend(trial_report.alpha_traces)
        report.dominance_traces.extend(trial_report.dominance_traces)
        report.completed_trials += 1

    if out_dir is not None:
        write_run_report(report, out_dir)
    return report
