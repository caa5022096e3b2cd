import numpy as np
import pandas as pd
import pytest

from pufe.core.exceptions import ConfigurationError, DatasetParseError, TrialFailureError
from pufe.models.run import MethodKind, RunConfig, TaskKind
from pufe.models.stream import OverlapSetting
from pufe.services import experiment
from pufe.services.experiment import average_cumulative_loss, resolve_geometry, run_experiment
from pufe.services.reports import metrics_frame


def small_config(**overrides):
    values = dict(
        synthetic_n=120,
        synthetic_d=8,
        synthetic_rank=2,
        b=6,
        c_grid=[1.0, 10.0],
        trials=2,
        seed=3,
    )
    values.update(overrides)
    return RunConfig(**values)


def test_average_cumulative_loss():
    np.testing.assert_allclose(average_cumulative_loss([1.0, 0.0, 2.0]), [1.0, 0.5, 1.0])
    np.testing.assert_allclose(average_cumulative_loss([0.0, 0.0]), [0.0, 0.0])


def test_resolve_geometry_defaults_and_limits():
    cfg = RunConfig(b=5)
    assert resolve_geometry(cfg, 100, 10) == {"T1": 50, "T2": 50, "d2": 10, "s_floor": 3}
    with pytest.raises(ConfigurationError):
        resolve_geometry(RunConfig(T1=80, T2=30), 100, 10)
    with pytest.raises(ConfigurationError):
        resolve_geometry(RunConfig(b=60), 100, 10)


def test_small_run_writes_every_report(tmp_path):
    cfg = small_config()
    report = run_experiment(cfg, tmp_path)
    assert report.completed_trials == 2
    assert len(report.outcomes) == 2 * len(cfg.settings) * len(cfg.methods)
    assert all(o.losses.shape == (60,) for o in report.outcomes)
    assert all(0.0 <= o.metric <= 1.0 for o in report.outcomes)
    assert len(report.alpha_traces) == 2 * len(cfg.settings)
    assert all(not trace.violations() for trace in report.dominance_traces)

    for name in ("metrics.csv", "curves.csv", "alphas.csv", "dominance.csv"):
        assert (tmp_path / name).is_file()
    metrics = metrics_frame(report)
    assert len(metrics) == len(cfg.settings) * len(cfg.methods)
    assert (tmp_path / "metrics.csv").read_text().splitlines()[0] == "method,setting,mean,std,rank"


def test_round_log_reproduces_the_dominance_check(tmp_path):
    run_experiment(small_config(trials=1, methods="PUFE"), tmp_path)
    log = pd.read_csv(tmp_path / "alphas.csv")
    assert {"unit_loss", "combined_unit_loss", "bound"} <= set(log.columns)
    assert not log[["alpha", "unit_loss", "combined_unit_loss", "bound"]].isna().any().any()
    for (_, _, _), group in log.groupby(["setting", "trial", "expert"]):
        group = group.sort_values("t")
        combined = np.cumsum(group["combined_unit_loss"].to_numpy())
        expert = np.cumsum(group["unit_loss"].to_numpy())
        assert np.all(combined <= expert + group["bound"].to_numpy() + 1e-6)
    per_round = log.groupby(["setting", "trial", "t"])["alpha"].sum()
    np.testing.assert_allclose(per_round.to_numpy(), 1.0, atol=1e-8)


def test_reports_are_byte_identical_across_reruns(tmp_path):
    cfg = small_config(trials=1, methods="NOGD,PUFE")
    run_experiment(cfg, tmp_path / "first")
    run_experiment(cfg, tmp_path / "second")
    for name in ("metrics.csv", "curves.csv", "alphas.csv", "dominance.csv"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_failed_trial_keeps_completed_work(tmp_path, monkeypatch):
    real_run_trial = experiment.run_trial

    def flaky(cfg, trial, seed):
        if trial == 1:
            raise RuntimeError("disk full")
        return real_run_trial(cfg, trial, seed)

    monkeypatch.setattr(experiment, "run_trial", flaky)
    with pytest.raises(TrialFailureError) as info:
        run_experiment(small_config(trials=3, methods="NOGD"), tmp_path)
    assert info.value.trial == 1
    assert info.value.partial_report.completed_trials == 1
    assert (tmp_path / "metrics.csv").is_file()


def test_missing_dataset_file(tmp_path):
    with pytest.raises(DatasetParseError):
        run_experiment(small_config(dataset=str(tmp_path / "missing.svm")))


def test_file_dataset_run(tmp_path):
    features, labels = experiment.make_low_rank_dataset(100, 6, 2, seed=4, label_noise=0.0)
    path = tmp_path / "data.csv"
    path.write_text(
        "".join(",".join(f"{v:.12g}" for v in [*row, y]) + "\n" for row, y in zip(features, labels))
    )
    report = run_experiment(small_config(dataset=str(path), trials=1, methods="NOGD,ROGD_u"))
    assert report.T1 == 50 and report.T2 == 50


def test_sensor_stream_needs_regression():
    with pytest.raises(ConfigurationError):
        run_experiment(small_config(dataset="synthetic-sensor"))


def test_regression_run_reports_mse():
    cfg = small_config(dataset="synthetic-sensor", task=TaskKind.REGRESSION, trials=1)
    report = run_experiment(cfg)
    assert all(o.metric >= 0.0 for o in report.outcomes)
    metrics = metrics_frame(report)
    best = metrics.loc[metrics["rank"] == 1]
    assert not best.empty


@pytest.mark.slow
def test_completion_ranks_between_complete_and_incomplete():
    cfg = RunConfig(
        synthetic_n=2000,
        synthetic_d=30,
        synthetic_rank=3,
        trials=10,
        methods=[MethodKind.PUFE],
        seed=0,
    )
    report = run_experiment(cfg)
    means = {}
    for setting in OverlapSetting:
        metrics = [o.metric for o in report.outcomes if o.setting is setting]
        means[setting] = float(np.mean(metrics))
    assert means[OverlapSetting.COMPLETE] >= means[OverlapSetting.INCOMPLETE_COMPLETED] - 0.01
    assert means[OverlapSetting.INCOMPLETE_COMPLETED] >= means[OverlapSetting.INCOMPLETE] - 0.01
    assert all(not trace.violations() for trace in report.dominance_traces)
