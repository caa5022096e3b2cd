"""Learning over one phased stream: base models, baselines and the PUFE ensemble.

:func:`prepare_stream` does the c-independent work once (row-space sketch,
overlap completion, mapper fit); :func:`run_pass` then replays the stream
for one step-size scale and produces every method's phase-B predictions in
a single sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from pufe.core.exceptions import ConfigurationError, ContractViolationError
from pufe.core.logging import get_logger
from pufe.models.completion import CompletionConfig, CompletionReport
from pufe.models.learning import LossKind, StepMode, StepSchedule
from pufe.models.run import MethodKind, MethodOutcome, RunConfig, TaskKind
from pufe.models.stream import OverlapSetting, Phase, PhasedInstance
from pufe.services.completion import complete_stream, default_min_entries
from pufe.services.ensemble import HedgeEnsemble, combine
from pufe.services.mapper import MappingAccumulator, MappingMatrix
from pufe.services.online import (
    OnlineLinearModel,
    default_loss_cap,
    loss,
    predict_label,
    step_size,
    unit_loss,
)
from pufe.services.sketch import RowSpaceBasis, sketch_row_space

logger = get_logger(__name__)

_INIT_STREAM = 3
FESL_PAIR = ("rogd_u", "nogd")


def fesl_weights_update(weights, losses, eta: float) -> np.ndarray:
    """w_i <- w_i exp(-eta l_i), renormalized."""
    weights = np.asarray(weights, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    if weights.shape != losses.shape:
        raise ContractViolationError(f"{weights.size} weights for {losses.size} losses")
    if eta < 0:
        raise ContractViolationError(f"eta must be nonnegative, got {eta}")
    # Shift by the smallest loss; the common factor cancels
    scaled = weights * np.exp(-eta * (losses - losses.min()))
    return scaled / scaled.sum()


def default_fesl_eta(T2: int) -> float:
    return math.sqrt(8.0 * math.log(2.0) / T2)


def progressive_metric(task: TaskKind, predictions: np.ndarray, labels: np.ndarray) -> float:
    """Accuracy of sign(p) for classification, mean squared error for regression."""
    if task is TaskKind.CLASSIFICATION:
        hits = [predict_label(p) == y for p, y in zip(predictions, labels)]
        return float(np.mean(hits))
    return float(np.mean((predictions - labels) ** 2))


@dataclass
class PreparedStream:
    """Everything about a stream that does not depend on the step-size scale."""
    task: TaskKind
    setting: OverlapSetting
    T1: int
    overlap_start: int
    d1: int
    d2: int
    previous_rows: List[Tuple[int, np.ndarray, float]]
    current_rows: np.ndarray
    labels: np.ndarray
    prediction_bound: float
    loss_cap: float
    mapper: Optional[MappingMatrix] = None
    recovered: Optional[np.ndarray] = None
    basis: Optional[RowSpaceBasis] = None
    completion: Optional[CompletionReport] = None

    @property
    def T2(self) -> int:
        return self.current_rows.shape[0]

    @property
    def loss_kind(self) -> LossKind:
        return self.task.loss_kind


@dataclass
class PassResult:
    """Phase-B output of every computed method for one step-size scale."""
    c: float
    predictions: Dict[MethodKind, np.ndarray]
    losses: Dict[MethodKind, np.ndarray]
    expert_ids: List[str] = field(default_factory=list)
    alphas: Optional[np.ndarray] = None
    combined_unit: Optional[np.ndarray] = None
    expert_unit: Optional[np.ndarray] = None
    bounds: Optional[np.ndarray] = None


def _check_phases(stream: Sequence[PhasedInstance]) -> None:
    order = {Phase.PREVIOUS: 0, Phase.OVERLAP: 1, Phase.CURRENT: 2}
    last = 0
    for expected_t, instance in enumerate(stream, start=1):
        if instance.t != expected_t:
            raise ContractViolationError(f"round {instance.t} found where {expected_t} was expected")
        rank = order[instance.phase]
        if rank < last:
            raise ContractViolationError(f"round {instance.t} goes back to phase {instance.phase.value}")
        last = rank


def infer_setting(stream: Sequence[PhasedInstance]) -> OverlapSetting:
    overlap = [i for i in stream if i.phase is Phase.OVERLAP]
    if any(i.completion_requested for i in overlap):
        return OverlapSetting.INCOMPLETE_COMPLETED
    if all(i.old_features.is_complete for i in overlap):
        return OverlapSetting.COMPLETE
    return OverlapSetting.INCOMPLETE


def resolve_min_entries(cfg: RunConfig, basis: RowSpaceBasis, b: int) -> int:
    """Configured threshold, else the sample-size requirement capped back to r when vacuous."""
    if cfg.min_entries is not None:
        return cfg.min_entries
    needed = default_min_entries(basis, b, cfg.delta, cfg.sample_constant)
    if needed > basis.dim:
        logger.warning(
            "sample-size requirement exceeds dimension, falling back to rank",
            required=needed,
            dim=basis.dim,
            rank=basis.rank,
        )
        return basis.rank
    return needed


def prepare_stream(stream: Sequence[PhasedInstance], cfg: RunConfig) -> PreparedStream:
    """Sketch phase A, present the overlap per setting, fit the mapper."""
    if not stream:
        raise ContractViolationError("stream is empty")
    _check_phases(stream)
    previous = [i for i in stream if i.phase is Phase.PREVIOUS]
    overlap = [i for i in stream if i.phase is Phase.OVERLAP]
    current = [i for i in stream if i.phase is Phase.CURRENT]
    if not current:
        raise ContractViolationError("stream has no rounds in the current feature space")
    setting = infer_setting(stream)
    T1 = current[0].t - 1
    overlap_start = overlap[0].t if overlap else T1 + 1
    d2 = current[0].new_features.shape[0]
    if not previous and not overlap:
        raise ContractViolationError("stream has no rounds in the previous feature space")
    d1 = (previous or overlap)[0].old_features.dim

    a_rows = np.vstack([i.old_features.zero_filled() for i in previous]) if previous else np.zeros((0, d1))

    basis = completion = None
    presented: Dict[int, np.ndarray] = {}
    if setting is OverlapSetting.INCOMPLETE_COMPLETED:
        if a_rows.shape[0] == 0:
            raise ConfigurationError("completion needs rounds before the overlap to learn a row space")
        basis = sketch_row_space(a_rows, rank=None if cfg.rank is None else min(cfg.rank, d1))
        completion_cfg = CompletionConfig(
            rank=basis.rank,
            confidence=cfg.delta,
            min_entries=resolve_min_entries(cfg, basis, len(overlap)),
            sample_constant=cfg.sample_constant,
        )
        completion = complete_stream(
            (i.old_features for i in overlap),
            basis,
            completion_cfg,
            row_ids=[i.t for i in overlap],
            expected_rows=len(overlap),
        )
        presented = dict(zip(completion.kept_row_ids, completion.completed))
    else:
        # Setting I fills the vanished entries with zeros
        presented = {i.t: i.old_features.zero_filled() for i in overlap}

    previous_rows = [(i.t, row, i.label) for i, row in zip(previous, a_rows)]
    accumulator = MappingAccumulator(d2, d1)
    for instance in overlap:
        row = presented.get(instance.t)
        if row is None:
            continue
        previous_rows.append((instance.t, row, instance.label))
        accumulator.accumulate(instance.new_features, row)

    mapper = recovered = None
    current_rows = np.vstack([i.new_features for i in current])
    if accumulator.pairs_seen:
        mapper = accumulator.finalize()
        recovered = current_rows @ mapper.map

    if cfg.task is TaskKind.CLASSIFICATION:
        # Phase A alone fixes P so NOGD does not depend on the setting
        reference = a_rows if a_rows.shape[0] else [row for _, row, _ in previous_rows]
        norms = [np.linalg.norm(row) for row in reference]
        x_max = max(norms) if norms and max(norms) > 0 else 1.0
        bound = cfg.radius * x_max
    else:
        bound = 1.0
    cap = cfg.loss_cap if cfg.loss_cap is not None else default_loss_cap(cfg.task.loss_kind, bound)

    logger.info(
        "prepared stream",
        setting=setting.value,
        T1=T1,
        b=len(overlap),
        T2=len(current),
        mapper_pairs=accumulator.pairs_seen,
    )
    return PreparedStream(
        task=cfg.task,
        setting=setting,
        T1=T1,
        overlap_start=overlap_start,
        d1=d1,
        d2=d2,
        previous_rows=previous_rows,
        current_rows=current_rows,
        labels=np.array([i.label for i in current]),
        prediction_bound=bound,
        loss_cap=cap,
        mapper=mapper,
        recovered=recovered,
        basis=basis,
        completion=completion,
    )


def _check_methods(prepared: PreparedStream, methods: Sequence[MethodKind]) -> None:
    if prepared.mapper is None:
        blocked = [m.value for m in methods if m.needs_mapper]
        if blocked:
            raise ConfigurationError(
                f"{', '.join(blocked)} need a mapping, but no overlap pairs survived in setting "
                f"{prepared.setting.value}"
            )


def run_pass(
    prepared: PreparedStream,
    c: float,
    methods: Sequence[MethodKind],
    cfg: RunConfig,
    seed: int,
) -> PassResult:
    """Replay the stream once with step-size scale ``c``.

    w_P starts near the origin and learns through phase A and the presented
    overlap rows; ROGD-f freezes it at T1, ROGD-u keeps updating it on
    mapped rows, NOGD starts from zero at T1 + 1.
    """
    _check_methods(prepared, methods)
    kind = prepared.loss_kind
    bound, cap = prepared.prediction_bound, prepared.loss_cap
    with_mapper = prepared.mapper is not None
    roster = list(cfg.pufe_roster) if MethodKind.PUFE in methods else []
    eta = cfg.fesl_eta if cfg.fesl_eta is not None else default_fesl_eta(prepared.T2)

    rng = np.random.default_rng([seed, _INIT_STREAM])
    w_prev = OnlineLinearModel.random(prepared.d1, rng, cfg.radius, cfg.init_scale)
    global_schedule = StepSchedule(scale=c)
    phase_schedule = StepSchedule(scale=c, mode=StepMode.INVERSE_SQRT_PHASE)
    for t, row, label in prepared.previous_rows:
        w_prev.step(kind, row, label, step_size(global_schedule, t))
    frozen = w_prev.snapshot()
    w_cur = OnlineLinearModel.zeros(prepared.d2, cfg.radius)

    T2 = prepared.T2
    method_preds = {m: np.zeros(T2) for m in methods}
    fesl_weights = np.full(len(FESL_PAIR), 1.0 / len(FESL_PAIR))
    ensemble = HedgeEnsemble(roster) if roster else None
    alphas = np.zeros((T2, len(roster)))
    combined_unit = np.zeros(T2)
    expert_unit = np.zeros((T2, len(roster)))
    bounds = np.zeros((T2, len(roster)))
    point_masses = np.eye(len(roster))

    for k in range(T2):
        t = prepared.T1 + 1 + k
        x_cur, y = prepared.current_rows[k], float(prepared.labels[k])
        preds = {"nogd": float(np.clip(w_cur.predict(x_cur), -bound, bound))}
        if with_mapper:
            x_rec = prepared.recovered[k]
            preds["rogd_u"] = float(np.clip(w_prev.predict(x_rec), -bound, bound))
            preds["rogd_f"] = float(np.clip(frozen.predict(x_rec), -bound, bound))
            pair = np.array([preds[e] for e in FESL_PAIR])
            preds["fesl_c"] = float(fesl_weights @ pair)
            preds["fesl_s"] = float(pair[int(np.argmax(fesl_weights))])
        units = {e: unit_loss(kind, p, y, cap) for e, p in preds.items()}

        if ensemble is not None:
            alpha = ensemble.alphas()
            expert_losses = [units[e] for e in roster]
            preds["pufe"] = combine(alpha, [preds[e] for e in roster])
            combined = unit_loss(kind, preds["pufe"], y, cap)
            ensemble.update(expert_losses, combined)
            alphas[k] = alpha
            expert_unit[k] = expert_losses
            combined_unit[k] = combined
            bounds[k] = [ensemble.regret_bound(u) for u in point_masses]

        for method in methods:
            method_preds[method][k] = preds[method.value.lower()]

        tau = step_size(phase_schedule, t, prepared.T1)
        w_cur.step(kind, x_cur, y, tau)
        if with_mapper:
            w_prev.step(kind, prepared.recovered[k], y, tau)
            fesl_weights = fesl_weights_update(fesl_weights, [units[e] for e in FESL_PAIR], eta)

    losses = {
        m: np.array([loss(kind, p, y) for p, y in zip(method_preds[m], prepared.labels)])
        for m in methods
    }
    result = PassResult(c=c, predictions=method_preds, losses=losses)
    if ensemble is not None:
        result.expert_ids = roster
        result.alphas = alphas
        result.combined_unit = combined_unit
        result.expert_unit = expert_unit
        result.bounds = bounds
    return result


def select_pass(passes: Sequence[PassResult], method: MethodKind) -> PassResult:
    """Pass with the smallest total loss for ``method``; ties keep the earlier grid value."""
    totals = [float(np.sum(p.losses[method])) for p in passes]
    return passes[int(np.argmin(totals))]


def run_method(
    kind: MethodKind,
    stream: Sequence[PhasedInstance],
    cfg: RunConfig,
    seed: Optional[int] = None,
) -> MethodOutcome:
    """Run one method over a full stream, grid-searching c when configured."""
    prepared = prepare_stream(stream, cfg)
    seed = cfg.seed if seed is None else seed
    passes = [run_pass(prepared, c, [kind], cfg, seed) for c in cfg.step_grid]
    best = select_pass(passes, kind)
    return MethodOutcome(
        method=kind,
        setting=prepared.setting,
        trial=0,
        c=best.c,
        losses=best.losses[kind],
        metric=progressive_metric(cfg.task, best.predictions[kind], prepared.labels),
    )
