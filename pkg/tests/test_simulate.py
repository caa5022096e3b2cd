import numpy as np
import pytest

from pufe.core.exceptions import ContractViolationError
from pufe.models.stream import EvolutionScript, OverlapSetting, Phase, VanishSchedule
from pufe.services.simulate import draw_gaussian_map, gaussian_map, make_script, synthesize_stream


def observation_sets(script):
    return [set(script.observed_indices(t)) for t in range(script.overlap_start, script.T1 + 1)]


def test_single_round_overlap_without_vanishing():
    script = make_script(d1=4, b=1, T1=10, T2=5, s_floor=4, seed=0)
    assert script.vanish_round == [11, 11, 11, 11]
    assert observation_sets(script) == [{0, 1, 2, 3}]


@pytest.mark.parametrize("schedule", list(VanishSchedule))
def test_observation_sets_are_nested(schedule):
    for seed in range(100):
        script = make_script(d1=6, b=3, T1=10, T2=5, s_floor=2, seed=seed, schedule=schedule)
        sets = observation_sets(script)
        for earlier, later in zip(sets, sets[1:]):
            assert later <= earlier
        assert len(sets[-1]) >= 2
        if schedule is VanishSchedule.LINEAR:
            assert [len(s) for s in sets] == [6, 4, 2]


def test_script_is_deterministic_and_validated():
    first = make_script(d1=8, b=4, T1=20, T2=5, s_floor=3, seed=7)
    second = make_script(d1=8, b=4, T1=20, T2=5, s_floor=3, seed=7)
    assert first.vanish_round == second.vanish_round
    assert EvolutionScript.from_text(first.to_text()) == first
    with pytest.raises(ContractViolationError):
        make_script(d1=4, b=2, T1=10, T2=5, s_floor=5, seed=0)
    with pytest.raises(ContractViolationError):
        make_script(d1=4, b=12, T1=10, T2=5, s_floor=2, seed=0)


def test_script_text_tolerates_comments_and_blank_lines():
    script = make_script(d1=4, b=2, T1=10, T2=5, s_floor=2, seed=3)
    text = "# saved script\n\n" + script.to_text().replace("\n", "  # note\n", 1)
    assert EvolutionScript.from_text(text) == script


def test_gaussian_map():
    x = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(gaussian_map(x, np.eye(3)), x)
    np.testing.assert_array_equal(gaussian_map(np.zeros(3), draw_gaussian_map(3, 5, 1)), np.zeros(5))
    np.testing.assert_array_equal(draw_gaussian_map(3, 5, 1), draw_gaussian_map(3, 5, 1))
    with pytest.raises(ContractViolationError):
        gaussian_map(np.ones(2), np.eye(3))


@pytest.fixture
def toy():
    rng = np.random.default_rng(4)
    data = rng.standard_normal((15, 6))
    labels = np.where(rng.standard_normal(15) > 0, 1.0, -1.0)
    script = make_script(d1=6, b=3, T1=10, T2=5, s_floor=2, seed=3)
    return data, labels, script


def test_phases_match_round_indices(toy):
    data, labels, script = toy
    for setting in OverlapSetting:
        stream = synthesize_stream(data, labels, script, setting)
        assert len(stream) == 15
        for instance in stream:
            expected = Phase.PREVIOUS if instance.t <= 7 else Phase.OVERLAP if instance.t <= 10 else Phase.CURRENT
            assert instance.phase is expected
            assert instance.completion_requested == (
                setting is OverlapSetting.INCOMPLETE_COMPLETED and expected is Phase.OVERLAP
            )
        np.testing.assert_array_equal([i.label for i in stream], labels)


def test_overlap_masking_by_setting(toy):
    data, labels, script = toy
    complete = synthesize_stream(data, labels, script, "C")
    incomplete = synthesize_stream(data, labels, script, "I")
    assert all(i.old_features.is_complete for i in complete[7:10])
    assert incomplete[9].old_features.observed_count == 2
    np.testing.assert_allclose(complete[12].new_features, draw_gaussian_map(6, 6, 3).T @ data[12])


def test_complete_and_incomplete_coincide_without_vanishing(toy):
    data, labels, _ = toy
    script = make_script(d1=6, b=3, T1=10, T2=5, s_floor=6, seed=3)
    left = synthesize_stream(data, labels, script, "C")
    right = synthesize_stream(data, labels, script, "I")
    for a, b in zip(left, right):
        if a.old_features is not None:
            np.testing.assert_array_equal(a.old_features.values, b.old_features.values)
        if a.new_features is not None:
            np.testing.assert_array_equal(a.new_features, b.new_features)


def test_insufficient_rows(toy):
    data, labels, script = toy
    with pytest.raises(ContractViolationError):
        synthesize_stream(data[:12], labels[:12], script, "C")
