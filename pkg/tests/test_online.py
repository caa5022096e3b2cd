import math

import numpy as np
import pytest

from pufe.core.exceptions import ContractViolationError
from pufe.models.learning import LossKind, StepMode, StepSchedule
from pufe.services.online import (
    OnlineLinearModel,
    default_loss_cap,
    loss,
    loss_gradient,
    ogd_step,
    predict_label,
    step_size,
    unit_loss,
)


@pytest.mark.parametrize("kind", [LossKind.LOGISTIC, LossKind.SQUARE])
def test_gradient_matches_central_differences(kind):
    rng = np.random.default_rng(5)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        w = rng.standard_normal(5)
        x = rng.standard_normal(5)
        y = float(rng.choice([-1.0, 1.0])) if kind is LossKind.LOGISTIC else float(rng.uniform(-1, 1))
        numeric = np.array([
            (loss(kind, (w + h * e) @ x, y) - loss(kind, (w - h * e) @ x, y)) / (2 * h)
            for e in np.eye(5)
        ])
        worst = max(worst, float(np.max(np.abs(numeric - loss_gradient(kind, w, x, y)))))
    assert worst < 1e-6


def test_loss_values():
    assert loss(LossKind.LOGISTIC, 0.0, 1.0) == pytest.approx(math.log(2.0))
    assert loss(LossKind.SQUARE, 0.5, 1.0) == pytest.approx(0.25)
    # Stable for large margins
    assert loss(LossKind.LOGISTIC, -1000.0, 1.0) == pytest.approx(1000.0)
    with pytest.raises(ContractViolationError):
        loss(LossKind.LOGISTIC, 0.0, 0.0)


def test_step_size_modes():
    assert step_size(StepSchedule(scale=2.0), 4) == pytest.approx(0.25)
    phase = StepSchedule(scale=2.0, mode=StepMode.INVERSE_SQRT_PHASE)
    assert step_size(phase, 101, phase_start=100) == pytest.approx(0.5)
    with pytest.raises(ContractViolationError):
        step_size(phase, 100, phase_start=100)
    with pytest.raises(ContractViolationError):
        step_size(StepSchedule(), 0)


def test_unit_loss_and_caps():
    assert unit_loss(LossKind.SQUARE, 10.0, 0.0, 4.0) == 1.0
    assert unit_loss(LossKind.SQUARE, 1.0, 0.0, 4.0) == pytest.approx(0.25)
    assert default_loss_cap(LossKind.SQUARE, 1.0) == 4.0
    assert default_loss_cap(LossKind.LOGISTIC, 0.0) == pytest.approx(math.log(2.0))


def test_predict_label_ties_go_positive():
    assert predict_label(0.0) == 1.0
    assert predict_label(-1e-12) == -1.0


def test_model_stays_in_ball():
    model = OnlineLinearModel.zeros(3, radius=1.0)
    for _ in range(20):
        model.step(LossKind.SQUARE, np.array([10.0, 0.0, 0.0]), 1.0, tau=5.0)
        assert np.linalg.norm(model.weights) <= 1.0 + 1e-12
    assert model.updates_applied == 20


def test_random_init_is_small_and_seeded():
    a = OnlineLinearModel.random(4, np.random.default_rng(0), radius=10.0, scale=0.01)
    b = OnlineLinearModel.random(4, np.random.default_rng(0), radius=10.0, scale=0.01)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert np.linalg.norm(a.weights) <= 0.1


def test_functional_step_leaves_model_untouched():
    model = OnlineLinearModel.zeros(2)
    stepped = ogd_step(model, LossKind.LOGISTIC, np.array([1.0, 0.0]), 1.0, tau=1.0)
    np.testing.assert_array_equal(model.weights, [0.0, 0.0])
    assert stepped.weights[0] == pytest.approx(0.5)


def test_many_random_steps_stay_in_ball():
    rng = np.random.default_rng(21)
    model = OnlineLinearModel.zeros(5, radius=2.0)
    for _ in range(10_000):
        kind = LossKind.SQUARE if rng.random() < 0.5 else LossKind.LOGISTIC
        y = float(rng.normal()) if kind is LossKind.SQUARE else float(rng.choice([-1.0, 1.0]))
        model.step(kind, 10.0 * rng.standard_normal(5), y, tau=float(rng.uniform(0.0, 50.0)))
        assert np.linalg.norm(model.weights) <= 2.0 + 1e-12


def test_replayed_batch_loss_keeps_falling():
    rng = np.random.default_rng(22)
    d = 50
    batch, _ = np.linalg.qr(rng.standard_normal((d, d)))
    batch *= 0.5
    target = rng.standard_normal(d)
    labels = batch @ target
    model = OnlineLinearModel.zeros(d, radius=100.0)
    schedule = StepSchedule(scale=1.0, mode=StepMode.INVERSE_SQRT_GLOBAL)
    losses = []
    for t in range(1, 10 * d + 1):
        x, y = batch[(t - 1) % d], float(labels[(t - 1) % d])
        losses.append(loss(LossKind.SQUARE, model.predict(x), y))
        model.step(LossKind.SQUARE, x, y, step_size(schedule, t))
    windows = np.convolve(losses, np.ones(d) / d, mode="valid")
    assert np.all(np.diff(windows) <= 1e-12)
    assert windows[-1] < 0.75 * windows[0]
