from __future__ import annotations

import json

import numpy as np
import pytest

from fetalguard.autoencoder import AeConfig
from fetalguard.config import (
    DataConfig,
    EvalConfig,
    ExperimentConfig,
    OutputConfig,
    SynthDataConfig,
)
from fetalguard.datasets import SplitConfig
from fetalguard.errors import ConfigError, TestIsolationError
from fetalguard.experiment import (
    TestSetGuard,
    aggregate_runs,
    fit_detector,
    format_aggregate_table,
    run_experiment,
    run_single,
)
from fetalguard.ganomaly import GanomalyConfig
from fetalguard.iforest import IforestConfig
from fetalguard.ingest import ClassLabel
from fetalguard.preprocess import PreprocessConfig, FeatureVector


def _features(n_normal, n_abnormal, dim=24, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_normal + n_abnormal):
        abnormal = i >= n_normal
        x = np.full(dim, rng.uniform(0.55, 0.65))
        if abnormal:
            start = int(rng.integers(0, dim - 8))
            x[start : start + 8] -= rng.uniform(0.15, 0.25)
        x += 0.01 * rng.normal(size=dim)
        out.append(
            FeatureVector(
                x=x,
                record_id=f"r{i:04d}",
                label=ClassLabel.ABNORMAL if abnormal else ClassLabel.NORMAL,
            )
        )
    return out


def _tiny_experiment_config(out_dir, seeds=1, models=None):
    model_sections = {
        "iforest": IforestConfig(n_trees=25),
        "ae": AeConfig(
            encoder_units=(16, 8), decoder_units=(8, 16), epochs=25, patience=25, batch_size=16
        ),
        "ganomaly": GanomalyConfig(
            encoder_units=(16, 8),
            decoder_units=(8, 16),
            discriminator_units=(16, 1),
            iterations_per_epoch=40,
            epochs=4,
            patience=4,
        ),
    }
    if models:
        model_sections = {k: v for k, v in model_sections.items() if k in models}
    return ExperimentConfig(
        data=DataConfig(synth=SynthDataConfig(n_normal=48, n_abnormal=24, seed=3)),
        preprocess=PreprocessConfig(median_window=5, feature_dim=32),
        split=SplitConfig(test_fraction=0.15, seed=0),
        models=model_sections,
        grids={},
        eval=EvalConfig(seeds=seeds),
        output=OutputConfig(dir=str(out_dir)),
    )


class TestGuard:
    def test_take_before_unlock_raises(self):
        guard = TestSetGuard([1, 2, 3])
        with pytest.raises(TestIsolationError):
            guard.take()

    def test_double_take_raises(self):
        guard = TestSetGuard([1, 2, 3])
        guard.unlock()
        assert guard.take() == [1, 2, 3]
        with pytest.raises(TestIsolationError):
            guard.take()

    def test_reads_counter(self):
        guard = TestSetGuard([1])
        assert guard.reads == 0
        guard.unlock()
        guard.take()
        assert guard.reads == 1


class TestFitDetector:
    def test_iforest_train_on_normals_mode(self):
        data = _features(40, 20, seed=1)
        fitted = fit_detector(
            "iforest", IforestConfig(n_trees=10, train_on="normals"), data, data[:10], len(data), 0
        )
        assert fitted.extras["n_fit"] == 40

    def test_ganomaly_resamples_to_pre_validation_size(self):
        data = _features(40, 20, seed=2)
        config = GanomalyConfig(
            encoder_units=(8, 4),
            decoder_units=(4, 8),
            discriminator_units=(8, 1),
            iterations_per_epoch=10,
            epochs=1,
            patience=1,
        )
        fitted = fit_detector("ganomaly", config, data, data[:10], 70, 0)
        assert fitted.extras["n_fit"] == 70
        source_ids = {fv.record_id for fv in data if fv.label is ClassLabel.NORMAL}
        assert all(fv.record_id in source_ids for fv in fitted.fit_items)

    def test_unknown_model_name(self):
        with pytest.raises(ConfigError):
            fit_detector("svm", IforestConfig(), _features(10, 5), [], 15, 0)

    def test_tau_is_recomputable_from_train_scores(self):
        data = _features(40, 20, seed=4)
        config = AeConfig(encoder_units=(8, 4), decoder_units=(4, 8), epochs=5, patience=5)
        fitted = fit_detector("ae", config, data, data[:10], len(data), 0)
        scores = fitted.train_scores
        assert fitted.tau == pytest.approx(
            scores.mean() + config.k_sigma * scores.std(), abs=1e-15
        )


class TestRunSingle:
    def test_single_run_produces_report_and_respects_guard(self):
        features = _features(60, 30, seed=5)
        result = run_single(
            "iforest",
            IforestConfig(n_trees=25),
            {},
            features,
            SplitConfig(test_fraction=0.2, seed=1),
            {"median_window": 5},
            seed=1,
        )
        assert result["guard_reads"] == 1
        assert result["sizes"]["test"] == 18
        assert 0.0 <= result["report"].f1 <= 1.0
        assert result["fitted"].model.preprocess == {"median_window": 5}

    def test_grid_search_picks_best_validation_f1(self):
        features = _features(60, 30, seed=6)
        result = run_single(
            "iforest",
            IforestConfig(n_trees=25),
            {"contamination": [0.1, 0.33, 0.5]},
            features,
            SplitConfig(test_fraction=0.2, seed=2),
            {},
            seed=2,
        )
        assert result["grid_choice"].get("contamination") in (0.1, 0.33, 0.5)
        # the winner's validation f1 is >= every other combo's (re-run to compare)
        others = []
        for c in (0.1, 0.33, 0.5):
            single = run_single(
                "iforest",
                IforestConfig(n_trees=25, contamination=c),
                {},
                features,
                SplitConfig(test_fraction=0.2, seed=2),
                {},
                seed=2,
            )
            others.append(single["validation"]["f1"])
        assert result["validation"]["f1"] == pytest.approx(max(others))


class TestRunExperiment:
    def test_full_run_writes_all_artifacts(self, tmp_path):
        config = _tiny_experiment_config(tmp_path / "out", models=["iforest", "ae"])
        aggregate = run_experiment(config)
        out = tmp_path / "out"
        assert (out / "config.resolved.json").exists()
        assert (out / "aggregate.json").exists()
        assert (out / "aggregate.txt").exists()
        for model in ("iforest", "ae"):
            run_dir = out / "seed_000" / model
            for name in (
                "model.json",
                "report.json",
                "scores_test.csv",
                "pr_curve.csv",
                "roc_curve.csv",
                "curves.svg",
                "score_distribution.json",
            ):
                assert (run_dir / name).exists(), f"{model}/{name} missing"
            assert model in aggregate
        assert (out / "seed_000" / "ae" / "trace.csv").exists()
        report = json.loads((out / "seed_000" / "iforest" / "report.json").read_text())
        assert report["model"] == "iforest"
        assert set(report["test"]) >= {"f1", "balanced_accuracy", "auc_roc", "counts"}

    def test_rerun_is_byte_identical(self, tmp_path):
        config_a = _tiny_experiment_config(tmp_path / "a", models=["iforest"])
        config_b = _tiny_experiment_config(tmp_path / "b", models=["iforest"])
        run_experiment(config_a)
        run_experiment(config_b)
        for rel in ("aggregate.json", "seed_000/iforest/report.json"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_multiple_seeds_are_scoped_to_subdirectories(self, tmp_path):
        config = _tiny_experiment_config(tmp_path / "out", seeds=2, models=["iforest"])
        aggregate = run_experiment(config)
        assert (tmp_path / "out" / "seed_000" / "iforest").is_dir()
        assert (tmp_path / "out" / "seed_001" / "iforest").is_dir()
        assert aggregate["iforest"]["runs"] == 2
        assert aggregate["iforest"]["seeds"] == [0, 1]

    def test_unconfigured_model_request_fails(self, tmp_path):
        config = _tiny_experiment_config(tmp_path / "out", models=["iforest"])
        with pytest.raises(ConfigError):
            run_experiment(config, models=["ganomaly"])


def test_aggregate_math_and_table_shape():
    payloads = [
        {"model": "ae", "seed": 0, "test": {m: 0.8 for m in ("f1", "balanced_accuracy", "precision", "recall", "accuracy", "auc_roc", "auc_pr")}},
        {"model": "ae", "seed": 1, "test": {m: 0.6 for m in ("f1", "balanced_accuracy", "precision", "recall", "accuracy", "auc_roc", "auc_pr")}},
    ]
    aggregate = aggregate_runs(payloads)
    assert aggregate["ae"]["f1"]["mean"] == pytest.approx(0.7)
    assert aggregate["ae"]["f1"]["std"] == pytest.approx(np.std([0.8, 0.6], ddof=1))
    table = format_aggregate_table(aggregate)
    assert "f1 = 0.700 ± 0.141" in table
