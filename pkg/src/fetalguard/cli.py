"""Command-line interface.

Subcommands cover the full experiment (`run`) and its individual stages
(`ingest`, `synth`, `preprocess`, `split`, `train`, `calibrate`, `evaluate`,
`score`, `curves`). The FETALGUARD_LOG environment variable sets verbosity
(DEBUG, INFO, WARNING, ERROR; default INFO).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import autoencoder, iforest, metrics, persistence
from .config import MODEL_CONFIG_TYPES, load_config
from .datasets import SplitConfig, class_counts, train_test_split, validation_split
from .errors import ConfigError, FetalGuardError
from .experiment import fit_detector, run_experiment, _scores_for
from .ingest import ClassLabel, load_collection, parse_record_csv
from .preprocess import (
    PreprocessConfig,
    preprocess_collection,
    preprocess_pipeline,
    read_features_csv,
    write_features_csv,
)
from .synth import generate_dataset, write_dataset

logger = logging.getLogger(__name__)


def _configure_logging() -> None:
    level_name = os.environ.get("FETALGUARD_LOG", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def cmd_synth(args) -> int:
    records = generate_dataset(args.normal, args.abnormal, seed=args.seed)
    signals_dir, metadata_file = write_dataset(records, args.out)
    counts = class_counts(records)
    print(f"wrote {len(records)} records ({counts['NORMAL']} normal, {counts['ABNORMAL']} abnormal)")
    print(f"signals: {signals_dir}")
    print(f"metadata: {metadata_file}")
    return 0


def cmd_ingest(args) -> int:
    result = load_collection(args.signals, args.metadata)
    n_abnormal = sum(1 for item in result.records if item.label is ClassLabel.ABNORMAL)
    print(
        f"loaded {len(result.records)} records: "
        f"{len(result.records) - n_abnormal} normal, {n_abnormal} abnormal; "
        f"{len(result.skipped)} skipped"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "index.csv").open("w", encoding="utf-8") as fh:
            fh.write("record_id,label,ph,apgar1,n_samples,sample_rate_hz\n")
            for item in result.records:
                rec, meta = item.record, item.record.metadata
                fh.write(
                    f"{rec.record_id},{int(item.label)},{meta.ph},{meta.apgar1},"
                    f"{rec.fhr.size},{rec.sample_rate_hz}\n"
                )
        skips = [{"record_id": s.record_id, "reason": s.reason} for s in result.skipped]
        (out / "skipped.json").write_text(json.dumps(skips, indent=2) + "\n", encoding="utf-8")
        print(f"index: {out / 'index.csv'}")
    return 0


def _preprocess_config(args) -> PreprocessConfig:
    if args.config:
        return load_config(args.config, required=()).preprocess
    return PreprocessConfig()


def cmd_preprocess(args) -> int:
    collection = load_collection(args.signals, args.metadata)
    report = preprocess_collection(collection.records, _preprocess_config(args))
    write_features_csv(report.features, args.out)
    print(f"wrote {len(report.features)} feature vectors to {args.out}")
    for record_id, reason in report.rejected:
        print(f"rejected {record_id}: {reason}", file=sys.stderr)
    return 0


def cmd_split(args) -> int:
    features = read_features_csv(args.features)
    train, test = train_test_split(features, args.test_fraction, args.seed)
    out = Path(args.out)
    write_features_csv(train, out / "train.csv")
    write_features_csv(test, out / "test.csv")
    summary = {
        "seed": args.seed,
        "test_fraction": args.test_fraction,
        "train": class_counts(train),
        "test": class_counts(test),
    }
    (out / "split.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"train: {len(train)}  test: {len(test)}  -> {out}")
    return 0


def _model_config_from(args, name):
    if args.config:
        config = load_config(args.config, required=())
        model_config = config.models.get(name, MODEL_CONFIG_TYPES[name]())
        return model_config, config.grids.get(name, {}), config.split
    return MODEL_CONFIG_TYPES[name](), {}, SplitConfig()


def cmd_train(args) -> int:
    features = read_features_csv(args.features)
    model_config, grid, split_config = _model_config_from(args, args.model)
    val_fraction = (
        split_config.val_fraction_ganomaly if args.model == "ganomaly" else split_config.val_fraction
    )
    train_core, validation = validation_split(features, val_fraction, args.seed)
    if grid:
        logger.info("grid block present; `train` uses base parameters, `run` searches grids")
    fitted = fit_detector(args.model, model_config, train_core, validation, len(features), args.seed)
    if args.config:
        fitted.model.preprocess = load_config(args.config, required=()).preprocess.to_dict()
    out = Path(args.out)
    persistence.save_model(fitted.model, out / "model.json")
    if fitted.trace is not None:
        fitted.trace.write_csv(out / "trace.csv")
    print(f"trained {args.model} on {fitted.extras['n_fit']} samples; tau={fitted.tau!r}")
    print(f"model: {out / 'model.json'}")
    return 0


def cmd_calibrate(args) -> int:
    model = persistence.load_model(args.model_file)
    features = read_features_csv(args.features)
    scores = _scores_for(model, features)
    if isinstance(model, iforest.IsolationForestModel):
        contamination = args.contamination if args.contamination is not None else model.contamination
        new_tau = iforest.if_threshold(scores, contamination)
        model.contamination = contamination
        old_tau = model.threshold
        model.threshold = new_tau
    else:
        k = args.k if args.k is not None else model.k_sigma
        new_tau = autoencoder.calibrate_threshold(scores, k)
        model.k_sigma = k
        old_tau = model.tau
        model.tau = new_tau
    persistence.save_model(model, args.model_file)
    print(f"tau: {old_tau!r} -> {new_tau!r} ({len(features)} calibration scores)")
    return 0


def _decision_threshold(model) -> float:
    tau = model.threshold if isinstance(model, iforest.IsolationForestModel) else model.tau
    if tau is None:
        raise ConfigError("model is not calibrated; run `calibrate` first")
    return tau


def cmd_evaluate(args) -> int:
    model = persistence.load_model(args.model_file)
    features = read_features_csv(args.features)
    if any(fv.label is None for fv in features):
        raise ConfigError("evaluation needs labeled features")
    tau = _decision_threshold(model)
    scores = _scores_for(model, features)
    labels = [fv.label for fv in features]
    report = metrics.evaluate_scores(scores, labels, tau)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"tau": tau, **report.scalars()}
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    with (out / "scores.csv").open("w", encoding="utf-8") as fh:
        fh.write("record_id,label,score\n")
        for fv, score in zip(features, scores):
            fh.write(f"{fv.record_id},{int(fv.label)},{float(score)!r}\n")
    metrics.write_pr_csv(report.pr_points, out / "pr_curve.csv")
    metrics.write_roc_csv(report.roc_points, out / "roc_curve.csv")
    positive = sum(1 for l in labels if l is ClassLabel.ABNORMAL) / len(labels)
    metrics.render_curves_svg(report.pr_points, report.roc_points, positive, out / "curves.svg")
    print(
        f"f1={report.f1:.3f} balanced_accuracy={report.balanced_accuracy:.3f} "
        f"precision={report.precision:.3f} recall={report.recall:.3f} auc_roc={report.auc_roc:.3f}"
    )
    print(f"report: {out / 'report.json'}")
    return 0


def cmd_score(args) -> int:
    model = persistence.load_model(args.model_file)
    tau = _decision_threshold(model)
    signal_path = Path(args.signal)
    record = parse_record_csv(signal_path.read_text(encoding="utf-8"), signal_path.stem)
    pre = model.preprocess
    if not pre:
        raise ConfigError("model artifact carries no preprocessing parameters")
    config = PreprocessConfig(**pre)
    if config.feature_dim != model.feature_dim:
        raise ConfigError(
            f"model expects dim {model.feature_dim} but preprocessing yields {config.feature_dim}"
        )
    fv = preprocess_pipeline(record, config)
    score = model.score(fv)
    verdict = autoencoder.classify(score, tau).name.lower()
    print(f"{record.record_id},{score!r},{tau!r},{verdict}")
    return 0


def cmd_curves(args) -> int:
    scores: list[float] = []
    labels: list[int] = []
    with open(args.scores, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != ["record_id", "label", "score"]:
            raise ConfigError(f"{args.scores}: expected header record_id,label,score")
        for line in fh:
            if not line.strip():
                continue
            _, label, score = line.rstrip("\n").split(",")
            labels.append(int(label))
            scores.append(float(score))
    pr_points = metrics.pr_curve(scores, labels)
    roc_points, auc = metrics.roc_curve_and_auc(scores, labels)
    out = Path(args.out)
    metrics.write_pr_csv(pr_points, out / "pr_curve.csv")
    metrics.write_roc_csv(roc_points, out / "roc_curve.csv")
    positive = sum(labels) / len(labels)
    metrics.render_curves_svg(pr_points, roc_points, positive, out / "curves.svg")
    print(f"auc_roc={auc:.6f} auc_pr={metrics.pr_auc(pr_points):.6f}")
    print(f"curves: {out}")
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(
            config, split=dataclasses.replace(config.split, seed=args.seed)
        )
    seeds = None
    if args.seeds is not None:
        seeds = [config.split.seed + i for i in range(args.seeds)]
    models = [args.model] if args.model else None
    out_dir = args.out if args.out else None
    aggregate = run_experiment(config, out_dir=out_dir, seeds=seeds, models=models)
    out = Path(out_dir if out_dir else config.output.dir)
    print((out / "aggregate.txt").read_text(), end="")
    print(f"artifacts: {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fetalguard",
        description="Semi-supervised abnormality detection for fetal heart rate recordings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--normal", type=int, required=True)
    p.add_argument("--abnormal", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load recordings and report class counts")
    p.add_argument("--signals", required=True, help="directory of per-record signal CSVs")
    p.add_argument("--metadata", required=True, help="metadata CSV")
    p.add_argument("--out", help="optional directory for index.csv and skipped.json")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="clean signals and write feature vectors")
    p.add_argument("--signals", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--config", help="experiment config supplying the preprocess section")
    p.add_argument("--out", required=True, help="output features CSV")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", help="stratified train/test split of a features file")
    p.add_argument("--features", required=True)
    p.add_argument("--test-fraction", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one detector on a training features file")
    p.add_argument("--model", required=True, choices=["iforest", "ae", "ganomaly"])
    p.add_argument("--features", required=True, help="training features CSV")
    p.add_argument("--config", help="experiment config supplying model/split sections")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="recompute a model's threshold from features")
    p.add_argument("--model-file", required=True)
    p.add_argument("--features", required=True, help="calibration (training) features CSV")
    p.add_argument("--k", type=float, help="override k in tau = mean + k*std")
    p.add_argument("--contamination", type=float, help="override contamination (iforest)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="score labeled features and write a report")
    p.add_argument("--model-file", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", help="score one raw signal CSV with a trained model")
    p.add_argument("--model-file", required=True)
    p.add_argument("--signal", required=True, help="signal CSV (time_s,fhr_bpm)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("curves", help="PR/ROC curves and SVG from a scores CSV")
    p.add_argument("--scores", required=True, help="CSV with record_id,label,score")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("run", help="full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--model", choices=["iforest", "ae", "ganomaly"], help="restrict to one model")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--seeds", type=int, help="number of repeated runs")
    p.add_argument("--out", help="override the output directory")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FetalGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
