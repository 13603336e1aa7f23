"""End-to-end experiment orchestration.

One run = one seed: split the features 90-10, carve a model-specific validation
set from the training side, train and calibrate on training data only, then
score the held-out test partition exactly once. A guard object enforces that
test-set discipline at runtime. Repeated runs over several seeds aggregate to
mean +/- standard deviation per metric.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autoencoder, ganomaly, iforest, metrics, persistence
from .config import ExperimentConfig, config_to_dict
from .datasets import bootstrap_resample, normals_only, train_test_split, validation_split
from .errors import ConfigError, TestIsolationError
from .ingest import ClassLabel, load_collection
from .preprocess import preprocess_collection
from .synth import generate_dataset

logger = logging.getLogger(__name__)

MODEL_NAMES = ("iforest", "ae", "ganomaly")

AGGREGATE_METRICS = (
    "f1",
    "balanced_accuracy",
    "precision",
    "recall",
    "accuracy",
    "auc_roc",
    "auc_pr",
)


class TestSetGuard:
    """Hands out the test partition exactly once, only after calibration completes."""

    __test__ = False  # not a pytest class despite the name

    def __init__(self, items):
        self._items = list(items)
        self._unlocked = False
        self._taken = False

    def unlock(self):
        self._unlocked = True

    def take(self):
        if not self._unlocked:
            raise TestIsolationError(
                "test set requested before training and calibration completed"
            )
        if self._taken:
            raise TestIsolationError("test set requested more than once in a run")
        self._taken = True
        return self._items

    @property
    def reads(self) -> int:
        return 1 if self._taken else 0


@dataclass
class FittedDetector:
    model: object
    tau: float
    train_scores: np.ndarray
    trace: object | None
    extras: dict
    fit_items: list  # the collection the model was fit and calibrated on


def load_labeled_records(config: ExperimentConfig):
    data = config.data
    if data.synth is not None:
        return generate_dataset(
            data.synth.n_normal, data.synth.n_abnormal, seed=data.synth.seed
        )
    return load_collection(data.signals_dir, data.metadata_file).records


def _scores_for(model, samples) -> np.ndarray:
    if isinstance(model, autoencoder.AeModel):
        return autoencoder.ae_scores(model, samples)
    if isinstance(model, ganomaly.GanomalyModel):
        return ganomaly.gan_scores(model, samples)
    return iforest.if_scores(model, samples)


def _validation_normals(validation):
    normals = [fv for fv in validation if fv.label is ClassLabel.NORMAL]
    return normals or None


def fit_detector(name, model_config, train_core, validation, pre_validation_size, seed):
    """Train one detector on the training core and calibrate its threshold."""
    if name == "iforest":
        fit_data = train_core if model_config.train_on == "all" else normals_only(train_core)
        model = iforest.build_forest(
            fit_data,
            n_trees=model_config.n_trees,
            subsample_size=model_config.subsample_size,
            seed=seed,
            contamination=model_config.contamination,
        )
        train_scores = iforest.if_scores(model, fit_data)
        tau = iforest.if_threshold(train_scores, model_config.contamination)
        model.threshold = tau
        extras = {"contamination": model_config.contamination, "n_fit": len(fit_data)}
        return FittedDetector(model, tau, train_scores, None, extras, fit_data)

    normals = normals_only(train_core)
    val_normals = _validation_normals(validation)
    if name == "ae":
        fit_items = normals
        model, trace = autoencoder.train_ae(normals, model_config, seed, validation=val_normals)
        train_scores = autoencoder.ae_scores(model, fit_items)
        extras = {"k_sigma": model_config.k_sigma, "n_fit": len(fit_items)}
    elif name == "ganomaly":
        fit_items = bootstrap_resample(normals, pre_validation_size, seed)
        model, trace = ganomaly.train_ganomaly(
            fit_items, model_config, seed, validation=val_normals
        )
        train_scores = ganomaly.gan_scores(model, fit_items)
        extras = {"k_sigma": model_config.k_sigma, "n_fit": len(fit_items)}
    else:
        raise ConfigError(f"unknown model {name!r}; valid options: {', '.join(MODEL_NAMES)}")
    tau = autoencoder.calibrate_threshold(train_scores, model_config.k_sigma)
    model.tau = tau
    return FittedDetector(model, tau, train_scores, trace, extras, fit_items)


def _grid_combinations(grid: dict) -> list[dict]:
    if not grid:
        return [{}]
    names = sorted(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def _validation_f1(model, tau, validation) -> dict:
    scores = _scores_for(model, validation)
    decisions = [ClassLabel.ABNORMAL if s > tau else ClassLabel.NORMAL for s in scores]
    labels = [fv.label for fv in validation]
    counts = metrics.confusion(labels, decisions)
    scalars = metrics.scalar_metrics(counts)
    return scalars.to_dict()


def run_single(name, model_config, grid, features, split_config, preprocess_dict, seed):
    """One (seed, model) leg: split, fit (with optional grid search), test once.

    Returns a dict with the fitted model, reports, traces, and score tables.
    """
    train, test = train_test_split(features, split_config.test_fraction, seed)
    guard = TestSetGuard(test)
    val_fraction = (
        split_config.val_fraction_ganomaly if name == "ganomaly" else split_config.val_fraction
    )
    train_core, validation = validation_split(train, val_fraction, seed)

    best = None
    for combo in _grid_combinations(grid):
        candidate_config = dataclasses.replace(model_config, **combo) if combo else model_config
        fitted = fit_detector(name, candidate_config, train_core, validation, len(train), seed)
        val_metrics = _validation_f1(fitted.model, fitted.tau, validation)
        if best is None or val_metrics["f1"] > best["validation"]["f1"]:
            best = {
                "fitted": fitted,
                "validation": val_metrics,
                "grid_choice": combo,
            }

    fitted = best["fitted"]
    fitted.model.preprocess = preprocess_dict

    guard.unlock()
    test_items = guard.take()
    test_scores = _scores_for(fitted.model, test_items)
    test_labels = [fv.label for fv in test_items]
    report = metrics.evaluate_scores(test_scores, test_labels, fitted.tau)

    distribution = ganomaly.score_distribution_report(fitted.model, fitted.fit_items, test_items)
    return {
        "model_name": name,
        "seed": seed,
        "fitted": fitted,
        "report": report,
        "validation": best["validation"],
        "grid_choice": best["grid_choice"],
        "distribution": distribution,
        "test_items": test_items,
        "test_scores": test_scores,
        "sizes": {
            "train": len(train),
            "train_core": len(train_core),
            "validation": len(validation),
            "test": len(test),
        },
        "guard_reads": guard.reads,
    }


def _write_json(data, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_scores_csv(items, scores, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "label", "score"])
        for fv, score in zip(items, scores):
            label = "" if fv.label is None else int(fv.label)
            writer.writerow([fv.record_id, label, repr(float(score))])


def report_payload(result) -> dict:
    fitted = result["fitted"]
    payload = {
        "model": result["model_name"],
        "seed": result["seed"],
        "tau": fitted.tau,
        "grid_choice": result["grid_choice"],
        "validation": result["validation"],
        "test": result["report"].scalars(),
        "sizes": result["sizes"],
    }
    payload.update(fitted.extras)
    return payload


def write_run_artifacts(result, run_dir: Path) -> dict:
    """Persist every artifact for one (seed, model) leg; returns the report payload."""
    run_dir.mkdir(parents=True, exist_ok=True)
    fitted = result["fitted"]
    persistence.save_model(fitted.model, run_dir / "model.json")
    payload = report_payload(result)
    _write_json(payload, run_dir / "report.json")
    _write_scores_csv(result["test_items"], result["test_scores"], run_dir / "scores_test.csv")
    if fitted.trace is not None:
        fitted.trace.write_csv(run_dir / "trace.csv")
    report = result["report"]
    metrics.write_pr_csv(report.pr_points, run_dir / "pr_curve.csv")
    metrics.write_roc_csv(report.roc_points, run_dir / "roc_curve.csv")
    labels = [fv.label for fv in result["test_items"]]
    positive_fraction = sum(1 for l in labels if l is ClassLabel.ABNORMAL) / len(labels)
    metrics.render_curves_svg(
        report.pr_points, report.roc_points, positive_fraction, run_dir / "curves.svg"
    )
    _write_json(result["distribution"], run_dir / "score_distribution.json")
    return payload


def aggregate_runs(payloads: list[dict]) -> dict:
    """mean +/- std (sample std over runs) per model per metric."""
    by_model: dict[str, list[dict]] = {}
    for payload in payloads:
        by_model.setdefault(payload["model"], []).append(payload)
    aggregate: dict = {}
    for model, runs in sorted(by_model.items()):
        aggregate[model] = {"runs": len(runs), "seeds": [r["seed"] for r in runs]}
        for metric in AGGREGATE_METRICS:
            values = np.array([r["test"][metric] for r in runs], dtype=float)
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            aggregate[model][metric] = {
                "mean": float(values.mean()),
                "std": std,
                "values": [float(v) for v in values],
            }
    return aggregate


def format_aggregate_table(aggregate: dict) -> str:
    lines = []
    for model in sorted(aggregate):
        entry = aggregate[model]
        lines.append(f"{model} ({entry['runs']} runs)")
        for metric in AGGREGATE_METRICS:
            stats = entry[metric]
            lines.append(f"  {metric} = {stats['mean']:.3f} ± {stats['std']:.3f}")
    return "\n".join(lines) + "\n"


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    seeds: list[int] | None = None,
    models: list[str] | None = None,
) -> dict:
    """Execute the full protocol and write all artifacts under out_dir."""
    out_dir = Path(out_dir if out_dir is not None else config.output.dir)
    if models is None:
        models = list(config.models)
    for name in models:
        if name not in config.models:
            raise ConfigError(
                f"model {name!r} has no section in the config; configured: "
                f"{', '.join(sorted(config.models))}"
            )
    if seeds is None:
        seeds = [config.split.seed + i for i in range(config.eval.seeds)]

    records = load_labeled_records(config)
    prep = preprocess_collection(records, config.preprocess)
    for record_id, reason in prep.rejected:
        logger.warning("rejected %s: %s", record_id, reason)

    _write_json(config_to_dict(config), out_dir / "config.resolved.json")
    preprocess_dict = config.preprocess.to_dict()

    payloads = []
    for seed in seeds:
        for name in models:
            logger.info("run seed=%d model=%s", seed, name)
            result = run_single(
                name,
                config.models[name],
                config.grids.get(name, {}),
                prep.features,
                config.split,
                preprocess_dict,
                seed,
            )
            run_dir = out_dir / f"seed_{seed:03d}" / name
            payloads.append(write_run_artifacts(result, run_dir))

    aggregate = aggregate_runs(payloads)
    _write_json(aggregate, out_dir / "aggregate.json")
    (out_dir / "aggregate.txt").write_text(format_aggregate_table(aggregate), encoding="utf-8")
    return aggregate
