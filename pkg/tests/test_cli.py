from __future__ import annotations

import json

import pytest

from fetalguard.cli import main


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli-data")
    assert main(["synth", "--normal", "40", "--abnormal", "20", "--seed", "7", "--out", str(base)]) == 0
    return base


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli-cfg") / "config.json"
    path.write_text(
        json.dumps(
            {
                "data": {"synth": {"n_normal": 40, "n_abnormal": 20, "seed": 7}},
                "preprocess": {"median_window": 5, "feature_dim": 32},
                "split": {"test_fraction": 0.15, "seed": 0},
                "model": {
                    "iforest": {"n_trees": 25},
                    "ae": {
                        "encoder_units": [16, 8],
                        "decoder_units": [8, 16],
                        "epochs": 20,
                        "patience": 20,
                    },
                },
                "eval": {"seeds": 1},
                "output": {"dir": "PLACEHOLDER"},
            },
            indent=2,
        ).replace("PLACEHOLDER", str(tmp_path_factory.mktemp("cli-out"))),
        encoding="utf-8",
    )
    return path


def test_synth_writes_ingestible_dataset(dataset, capsys):
    assert main(
        ["ingest", "--signals", str(dataset / "signals"), "--metadata", str(dataset / "metadata.csv")]
    ) == 0
    out = capsys.readouterr().out
    assert "40 normal, 20 abnormal" in out


def test_pipeline_subcommands_chain(dataset, config_file, tmp_path, capsys):
    features = tmp_path / "features.csv"
    assert main(
        [
            "preprocess",
            "--signals", str(dataset / "signals"),
            "--metadata", str(dataset / "metadata.csv"),
            "--config", str(config_file),
            "--out", str(features),
        ]
    ) == 0

    split_dir = tmp_path / "split"
    assert main(
        ["split", "--features", str(features), "--test-fraction", "0.1", "--seed", "0", "--out", str(split_dir)]
    ) == 0
    summary = json.loads((split_dir / "split.json").read_text())
    assert summary["train"]["NORMAL"] + summary["test"]["NORMAL"] == 40

    trained = tmp_path / "trained"
    assert main(
        [
            "train",
            "--model", "iforest",
            "--features", str(split_dir / "train.csv"),
            "--config", str(config_file),
            "--seed", "0",
            "--out", str(trained),
        ]
    ) == 0
    model_data = json.loads((trained / "model.json").read_text())
    assert model_data["model_type"] == "iforest"
    assert model_data["threshold"] is not None

    assert main(
        [
            "calibrate",
            "--model-file", str(trained / "model.json"),
            "--features", str(split_dir / "train.csv"),
        ]
    ) == 0

    eval_dir = tmp_path / "eval"
    assert main(
        [
            "evaluate",
            "--model-file", str(trained / "model.json"),
            "--features", str(split_dir / "test.csv"),
            "--out", str(eval_dir),
        ]
    ) == 0
    report = json.loads((eval_dir / "report.json").read_text())
    assert 0.0 <= report["f1"] <= 1.0

    curves_dir = tmp_path / "curves"
    assert main(["curves", "--scores", str(eval_dir / "scores.csv"), "--out", str(curves_dir)]) == 0
    assert (curves_dir / "curves.svg").exists()

    capsys.readouterr()
    signal = sorted((dataset / "signals").glob("*.csv"))[0]
    assert main(["score", "--model-file", str(trained / "model.json"), "--signal", str(signal)]) == 0
    line = capsys.readouterr().out.strip()
    record_id, score, tau, verdict = line.split(",")
    assert record_id == signal.stem
    assert verdict in ("normal", "abnormal")
    float(score), float(tau)


def test_score_abnormal_synthetic_flags_abnormal(dataset, config_file, tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert main(["run", "--config", str(config_file), "--model", "iforest", "--out", str(out_dir)]) == 0
    capsys.readouterr()
    model_file = out_dir / "seed_000" / "iforest" / "model.json"
    # syn0055 is generated abnormal (indices >= 40)
    signal = dataset / "signals" / "syn0055.csv"
    assert main(["score", "--model-file", str(model_file), "--signal", str(signal)]) == 0
    assert capsys.readouterr().out.strip().endswith("abnormal")
    signal = dataset / "signals" / "syn0000.csv"
    assert main(["score", "--model-file", str(model_file), "--signal", str(signal)]) == 0
    assert capsys.readouterr().out.strip().endswith("normal")


def test_run_emits_aggregate_table_row(config_file, tmp_path, capsys):
    out_dir = tmp_path / "run-out"
    assert main(["run", "--config", str(config_file), "--model", "ae", "--out", str(out_dir)]) == 0
    stdout = capsys.readouterr().out
    assert "f1 = " in stdout and "±" in stdout
    aggregate = json.loads((out_dir / "aggregate.json").read_text())
    assert "ae" in aggregate


def test_run_rerun_reproduces_identical_metric_json(config_file, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "--config", str(config_file), "--model", "iforest", "--out", str(out_a)]) == 0
    assert main(["run", "--config", str(config_file), "--model", "iforest", "--out", str(out_b)]) == 0
    assert (out_a / "aggregate.json").read_bytes() == (out_b / "aggregate.json").read_bytes()
    assert (out_a / "seed_000" / "iforest" / "report.json").read_bytes() == (
        out_b / "seed_000" / "iforest" / "report.json"
    ).read_bytes()


def test_unknown_model_in_config_exits_with_options(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps(
            {
                "data": {"synth": {"n_normal": 5, "n_abnormal": 5}},
                "model": {"boosted_trees": {}},
            }
        ),
        encoding="utf-8",
    )
    assert main(["run", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "boosted_trees" in err
    for name in ("ae", "ganomaly", "iforest"):
        assert name in err


def test_invalid_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "data": oops\n}\n', encoding="utf-8")
    assert main(["run", "--config", str(path)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_missing_model_file_is_reported(tmp_path, capsys):
    assert main(["score", "--model-file", str(tmp_path / "nope.json"), "--signal", "x.csv"]) == 2
    assert "nope.json" in capsys.readouterr().err


def test_dimension_mismatch_between_model_and_preprocess(dataset, config_file, tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert main(["run", "--config", str(config_file), "--model", "iforest", "--out", str(out_dir)]) == 0
    model_file = out_dir / "seed_000" / "iforest" / "model.json"
    data = json.loads(model_file.read_text())
    data["preprocess"]["feature_dim"] = 999
    model_file.write_text(json.dumps(data), encoding="utf-8")
    capsys.readouterr()
    signal = dataset / "signals" / "syn0000.csv"
    assert main(["score", "--model-file", str(model_file), "--signal", str(signal)]) == 2
    assert "999" in capsys.readouterr().err
