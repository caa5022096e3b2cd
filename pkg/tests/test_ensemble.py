import math

import numpy as np
import pytest

from pufe.core.exceptions import ContractViolationError
from pufe.services.ensemble import HedgeEnsemble, combine, compute_alphas, potential, weight


def test_potential_examples():
    assert potential(0.0, 0.0) == 1.0
    assert potential(-5.0, 2.0) == 1.0
    assert potential(1.0, 1.0) == pytest.approx(1.39561, abs=1e-5)


def test_weight_examples():
    assert weight(0.0, 0.0) == pytest.approx(0.19781, abs=1e-5)
    assert weight(1.0, 1.0) == pytest.approx(0.47731, abs=1e-5)
    assert weight(-10.0, 5.0) == 0.0


def test_weight_survives_long_streams():
    assert math.isfinite(weight(2000.0, 2000.0))


def test_alphas_examples():
    np.testing.assert_allclose(compute_alphas(HedgeEnsemble(["a", "b", "c"])), [1 / 3] * 3)

    ensemble = HedgeEnsemble(["a", "b"])
    first = ensemble.record("a")
    first.regret, first.magnitude = 1.0, 1.0
    np.testing.assert_allclose(ensemble.alphas(), [0.7070, 0.2930], atol=1e-4)

    ensemble.set_confidence("a", 0.0)
    np.testing.assert_array_equal(ensemble.alphas(), [0.0, 1.0])


def test_alphas_fall_back_to_uniform_over_awake_experts():
    ensemble = HedgeEnsemble(["a", "b", "c"])
    for record in ensemble.experts:
        record.regret, record.magnitude = -10.0, 10.0
    ensemble.set_confidence("c", 0.0)
    np.testing.assert_array_equal(ensemble.alphas(), [0.5, 0.5, 0.0])


def test_combine_examples():
    assert combine([1.0, 0.0], [0.7, -0.3]) == pytest.approx(0.7)
    assert combine([0.5, 0.5], [1.0, -1.0]) == pytest.approx(0.0)
    assert combine([0.25, 0.75], [0.0, 1.0]) == pytest.approx(0.75)
    with pytest.raises(ContractViolationError):
        combine([1.0], [0.0, 1.0])


def test_update_examples():
    ensemble = HedgeEnsemble(["a", "b"])
    ensemble.update([0.5, 0.0], 0.5)
    a, b = ensemble.experts
    assert (a.regret, a.magnitude) == (0.0, 0.0)
    assert (b.regret, b.magnitude) == (0.5, 0.5)
    ensemble.update([1.0, 0.0], 1.0)
    assert (b.regret, b.magnitude) == (1.5, 1.5)
    assert ensemble.rounds_played == 2
    with pytest.raises(ContractViolationError):
        ensemble.update([1.5, 0.0], 0.5)
    with pytest.raises(ContractViolationError):
        ensemble.update([0.5], 0.5)


def test_update_matches_replayed_sums():
    rng = np.random.default_rng(12)
    ensemble = HedgeEnsemble(["a", "b", "c"])
    log = []
    for _ in range(200):
        losses = rng.uniform(size=3)
        combined = float(ensemble.alphas() @ losses)
        ensemble.update(losses, combined)
        log.append(combined - losses)
    log = np.array(log)
    np.testing.assert_allclose([r.regret for r in ensemble.experts], log.sum(axis=0), atol=1e-9)
    np.testing.assert_allclose([r.magnitude for r in ensemble.experts], np.abs(log).sum(axis=0), atol=1e-9)
    assert all(abs(r.regret) <= r.magnitude + 1e-12 for r in ensemble.experts)


def test_regret_bound_example():
    ensemble = HedgeEnsemble(["a", "b"])
    ensemble.record("a").magnitude = 4.0
    assert ensemble.regret_bound([1.0, 0.0]) == pytest.approx(6.078, abs=1e-3)
    assert HedgeEnsemble(["a", "b"]).regret_bound([0.5, 0.5]) == 0.0
    assert ensemble.regret_bound([0.0, 1.0]) <= ensemble.regret_bound([1.0, 0.0])
    with pytest.raises(ContractViolationError):
        ensemble.regret_bound([0.7, 0.7])


@pytest.mark.parametrize("n_experts", [2, 3, 5])
def test_cumulative_loss_within_bound_of_best_expert(n_experts):
    rng = np.random.default_rng(100 + n_experts)
    streams = 34 if n_experts != 5 else 32
    for stream in range(streams):
        ensemble = HedgeEnsemble(list(range(n_experts)))
        if stream % 2:
            # Adversarial: the favoured expert is punished every round
            losses = np.zeros((500, n_experts))
        else:
            losses = rng.uniform(size=(500, n_experts))
        combined_total = 0.0
        for t in range(500):
            alphas = ensemble.alphas()
            if stream % 2:
                losses[t] = 0.0
                losses[t, int(np.argmax(alphas))] = 1.0
            combined = float(alphas @ losses[t])
            ensemble.update(losses[t], combined)
            combined_total += combined
        totals = losses.sum(axis=0)
        best = int(np.argmin(totals))
        u = np.eye(n_experts)[best]
        assert combined_total <= totals[best] + ensemble.regret_bound(u) + 1e-9


def test_asleep_expert_changes_nothing():
    rng = np.random.default_rng(13)
    awake = HedgeEnsemble(["a", "b", "c"])
    with_sleeper = HedgeEnsemble(["a", "b", "c"])
    with_sleeper.register("z")
    for _ in range(500):
        losses = rng.uniform(size=3)
        alphas = awake.alphas()
        alphas_with_sleeper = with_sleeper.alphas()
        np.testing.assert_array_equal(alphas_with_sleeper[:3], alphas)
        assert alphas_with_sleeper[3] == 0.0
        combined = float(alphas @ losses)
        awake.update(losses, combined)
        with_sleeper.update(np.append(losses, rng.uniform()), combined)
    assert with_sleeper.record("z").magnitude == 0.0
    for left, right in zip(awake.experts, with_sleeper.experts):
        assert (left.regret, left.magnitude) == (right.regret, right.magnitude)


def test_register_contracts():
    ensemble = HedgeEnsemble(["a"])
    ensemble.update([0.2], 0.2)
    ensemble.register("b")
    assert ensemble.record("b").confidence == 0.0
    assert ensemble.alphas()[1] == 0.0
    with pytest.raises(ContractViolationError):
        ensemble.register("a")
    with pytest.raises(ContractViolationError):
        ensemble.set_confidence("a", 1.5)


def test_snapshot_is_independent():
    ensemble = HedgeEnsemble(["a", "b"])
    clone = ensemble.snapshot()
    ensemble.update([0.0, 1.0], 0.5)
    assert clone.record("b").regret == 0.0
    assert clone.rounds_played == 0
