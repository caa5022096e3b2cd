"""Parameter-free expert aggregation with confidence-rated (sleeping) experts.

Weights come from the discrete derivative of the potential
Φ(R, S) = exp(max(0, R)^2 / (3S)); every computation runs in the log domain
so long streams cannot overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Sequence

import numpy as np

from pufe.core.exceptions import ContractViolationError

LOSS_TOLERANCE = 1e-12
SIMPLEX_TOLERANCE = 1e-9


def log_potential(R: float, S: float) -> float:
    if S < 0:
        raise ContractViolationError(f"S must be nonnegative, got {S}")
    if S == 0:
        return 0.0
    positive = max(0.0, R)
    return positive * positive / (3.0 * S)


def potential(R: float, S: float) -> float:
    """Φ(R, S), with Φ(·, 0) = 1."""
    return math.exp(log_potential(R, S))


def log_weight(R: float, S: float) -> float:
    """ln w(R, S); -inf when the weight is exactly zero."""
    upper = log_potential(R + 1.0, S + 1.0)
    lower = log_potential(R - 1.0, S + 1.0)
    if upper <= lower:
        return -math.inf
    return math.log(0.5) + upper + math.log(-math.expm1(lower - upper))


def weight(R: float, S: float) -> float:
    """w(R, S) = (Φ(R+1, S+1) - Φ(R-1, S+1)) / 2."""
    return math.exp(log_weight(R, S))


def combine(alphas: Sequence[float], preds: Sequence[float]) -> float:
    alphas = np.asarray(alphas, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if alphas.shape != preds.shape:
        raise ContractViolationError(f"{alphas.size} weights for {preds.size} predictions")
    if abs(float(alphas.sum()) - 1.0) > SIMPLEX_TOLERANCE:
        raise ContractViolationError("weights must sum to 1")
    return float(alphas @ preds)


@dataclass
class ExpertRecord:
    """Cumulative regret R, cumulative magnitude S and confidence I of one expert."""
    id: Hashable
    regret: float = 0.0
    magnitude: float = 0.0
    confidence: float = 0.0


class HedgeEnsemble:
    """Ensemble state: ordered experts plus the number of rounds played."""

    def __init__(self, expert_ids: Optional[Sequence[Hashable]] = None, awake: bool = True):
        self.experts: List[ExpertRecord] = []
        self._index: Dict[Hashable, int] = {}
        self.rounds_played = 0
        for expert_id in expert_ids or ():
            self.register(expert_id, confidence=1.0 if awake else 0.0)

    def __len__(self) -> int:
        return len(self.experts)

    @property
    def ids(self) -> List[Hashable]:
        return [record.id for record in self.experts]

    def register(self, expert_id: Hashable, confidence: float = 0.0) -> ExpertRecord:
        """Add an expert with R = S = 0; it sleeps until its confidence is raised."""
        if expert_id in self._index:
            raise ContractViolationError(f"expert {expert_id!r} is already registered")
        record = ExpertRecord(expert_id)
        self._index[expert_id] = len(self.experts)
        self.experts.append(record)
        self.set_confidence(expert_id, confidence)
        return record

    def record(self, expert_id: Hashable) -> ExpertRecord:
        try:
            return self.experts[self._index[expert_id]]
        except KeyError:
            raise ContractViolationError(f"unknown expert {expert_id!r}") from None

    def set_confidence(self, expert_id: Hashable, confidence: float) -> None:
        if not 0.0 <= confidence <= 1.0:
            raise ContractViolationError(f"confidence must lie in [0, 1], got {confidence}")
        self.record(expert_id).confidence = float(confidence)

    def set_confidences(self, confidences: Sequence[float]) -> None:
        if len(confidences) != len(self.experts):
            raise ContractViolationError(f"{len(confidences)} confidences for {len(self.experts)} experts")
        for record, confidence in zip(self.experts, confidences):
            self.set_confidence(record.id, confidence)

    def alphas(self) -> np.ndarray:
        """α_i ∝ I_i w(R_i, S_i); uniform over awake experts if every term is 0."""
        if not self.experts:
            raise ContractViolationError("ensemble has no experts")
        scores = np.full(len(self.experts), -np.inf)
        for i, record in enumerate(self.experts):
            if record.confidence > 0.0:
                scores[i] = math.log(record.confidence) + log_weight(record.regret, record.magnitude)
        top = float(np.max(scores))
        if top == -np.inf:
            awake = np.array([record.confidence > 0.0 for record in self.experts], dtype=np.float64)
            if not awake.any():
                awake[:] = 1.0
            return awake / awake.sum()
        unnormalized = np.exp(scores - top)
        # fsum is order independent, so sleepers never perturb the total
        return unnormalized / math.fsum(unnormalized)

    def update(self, unit_losses: Sequence[float], combined_loss: float) -> None:
        """R_i += I_i (ℓ̂ - ℓ_i), S_i += |I_i (ℓ̂ - ℓ_i)|; sleepers accrue nothing."""
        unit_losses = np.asarray(unit_losses, dtype=np.float64)
        if unit_losses.shape != (len(self.experts),):
            raise ContractViolationError(f"{unit_losses.size} losses for {len(self.experts)} experts")
        if np.any(unit_losses < -LOSS_TOLERANCE) or np.any(unit_losses > 1.0 + LOSS_TOLERANCE):
            raise ContractViolationError("expert losses must lie in [0, 1]")
        if not -LOSS_TOLERANCE <= combined_loss <= 1.0 + LOSS_TOLERANCE:
            raise ContractViolationError(f"combined loss must lie in [0, 1], got {combined_loss}")
        for record, expert_loss in zip(self.experts, unit_losses):
            if record.confidence == 0.0:
                continue
            instant = record.confidence * (combined_loss - float(expert_loss))
            record.regret += instant
            record.magnitude += abs(instant)
        self.rounds_played += 1

    def regret_bound(self, u: Sequence[float]) -> float:
        """sqrt(3 (u·S)(ln N + ln B + ln(1 + ln N))), B = 1 + 1.5 Σ(1 + ln(1 + S_i))."""
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (len(self.experts),):
            raise ContractViolationError(f"comparator has {u.size} entries for {len(self.experts)} experts")
        if np.any(u < -SIMPLEX_TOLERANCE) or abs(float(u.sum()) - 1.0) > SIMPLEX_TOLERANCE:
            raise ContractViolationError("comparator must be a probability vector")
        magnitudes = np.array([record.magnitude for record in self.experts])
        n_experts = len(self.experts)
        b_term = 1.0 + 1.5 * float(np.sum(1.0 + np.log1p(magnitudes)))
        exposure = float(u @ magnitudes)
        log_terms = math.log(n_experts) + math.log(b_term) + math.log1p(math.log(n_experts))
        return math.sqrt(max(0.0, 3.0 * exposure * log_terms))

    def snapshot(self) -> "HedgeEnsemble":
        clone = HedgeEnsemble()
        for record in self.experts:
            clone._index[record.id] = len(clone.experts)
            clone.experts.append(ExpertRecord(record.id, record.regret, record.magnitude, record.confidence))
        clone.rounds_played = self.rounds_played
        return clone


def compute_alphas(state: HedgeEnsemble) -> np.ndarray:
    return state.alphas()
