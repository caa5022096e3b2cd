"""Projected online gradient descent for linear models on a ball."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from pufe.core.exceptions import ContractViolationError
from pufe.models.learning import LossKind, StepMode, StepSchedule
from pufe.services.linalg import as_vector, project_l2_ball

DEFAULT_RADIUS = 10.0
SQUARE_LOSS_CAP = 4.0


def _check_label(kind: LossKind, y: float) -> None:
    if kind is LossKind.LOGISTIC and y not in (-1.0, 1.0):
        raise ContractViolationError(f"logistic loss needs a label in {{-1, +1}}, got {y}")


def loss(kind: LossKind, p: float, y: float) -> float:
    """ln(1 + exp(-y p)) for logistic, (y - p)^2 for square."""
    _check_label(kind, y)
    if kind is LossKind.LOGISTIC:
        return float(np.logaddexp(0.0, -y * p))
    return float((y - p) ** 2)


def loss_gradient(kind: LossKind, w, x, y: float) -> np.ndarray:
    """Gradient in w of loss(kind, w·x, y)."""
    w = as_vector(w, "w")
    x = as_vector(x, "x", dim=w.shape[0])
    _check_label(kind, y)
    margin = float(w @ x)
    if kind is LossKind.LOGISTIC:
        # -y / (1 + exp(y w·x)) written through the stable sigmoid
        return -y * float(expit(-y * margin)) * x
    return 2.0 * (margin - y) * x


def step_size(schedule: StepSchedule, t: int, phase_start: int = 0) -> float:
    if schedule.mode is StepMode.INVERSE_SQRT_PHASE:
        if t <= phase_start:
            raise ContractViolationError(f"round {t} is not after phase start {phase_start}")
        return 1.0 / (schedule.scale * math.sqrt(t - phase_start))
    if t < 1:
        raise ContractViolationError(f"round index must be >= 1, got {t}")
    return 1.0 / (schedule.scale * math.sqrt(t))


def unit_loss(kind: LossKind, p: float, y: float, cap: float) -> float:
    """Loss capped at ``cap`` and rescaled into [0, 1]."""
    if not cap > 0:
        raise ContractViolationError(f"cap must be positive, got {cap}")
    return min(loss(kind, p, y), cap) / cap


def default_loss_cap(kind: LossKind, prediction_bound: float) -> float:
    """Largest loss reachable with predictions in [-bound, bound] and labels in [-1, 1]."""
    if kind is LossKind.SQUARE:
        return max(SQUARE_LOSS_CAP, (prediction_bound + 1.0) ** 2)
    return float(np.logaddexp(0.0, prediction_bound))


def predict_label(p: float) -> float:
    """sign(p) with ties going to +1."""
    return 1.0 if p >= 0 else -1.0


def random_ball_point(dim: int, radius: float, rng: np.random.Generator, scale: float = 0.01) -> np.ndarray:
    """Uniform draw from the ball of radius ``scale * radius``."""
    direction = rng.standard_normal(dim)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return np.zeros(dim)
    length = scale * radius * rng.uniform() ** (1.0 / dim)
    return direction / norm * length


@dataclass
class OnlineLinearModel:
    """Linear predictor w·x kept inside an L2 ball of radius ``radius``."""
    weights: np.ndarray
    radius: float = DEFAULT_RADIUS
    updates_applied: int = 0

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ContractViolationError(f"radius must be positive, got {self.radius}")
        self.weights = project_l2_ball(as_vector(self.weights, "weights"), self.radius)

    @classmethod
    def zeros(cls, dim: int, radius: float = DEFAULT_RADIUS) -> "OnlineLinearModel":
        return cls(np.zeros(dim), radius)

    @classmethod
    def random(
        cls, dim: int, rng: np.random.Generator, radius: float = DEFAULT_RADIUS, scale: float = 0.01
    ) -> "OnlineLinearModel":
        return cls(random_ball_point(dim, radius, rng, scale), radius)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def predict(self, x) -> float:
        return float(self.weights @ x)

    def step(self, kind: LossKind, x, y: float, tau: float) -> "OnlineLinearModel":
        """w <- Π(w - tau ∇loss); mutates and returns self."""
        if tau < 0:
            raise ContractViolationError(f"step size must be nonnegative, got {tau}")
        gradient = loss_gradient(kind, self.weights, x, y)
        self.weights = project_l2_ball(self.weights - tau * gradient, self.radius)
        self.updates_applied += 1
        return self

    def snapshot(self) -> "OnlineLinearModel":
        return OnlineLinearModel(self.weights.copy(), self.radius, self.updates_applied)


def ogd_step(model: OnlineLinearModel, kind: LossKind, x, y: float, tau: float) -> OnlineLinearModel:
    """Functional form of one projected gradient step; ``model`` is left untouched."""
    return model.snapshot().step(kind, x, y, tau)
