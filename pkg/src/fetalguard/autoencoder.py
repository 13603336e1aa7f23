"""Autoencoder anomaly detector.

Trained on normal samples only by minimizing the mean per-sample L1
reconstruction error; a sample's anomaly score is the L1 distance between
itself and its reconstruction, and the decision threshold is calibrated as
mean + k * std of the training scores.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .errors import ConfigError, ShapeError, TrainingDataError, TrainingError
from .ingest import ClassLabel
from .nn import AdamState, DenseNetwork, adam_step, backward, forward, init_network

logger = logging.getLogger(__name__)


@dataclass
class AeConfig:
    encoder_units: tuple[int, ...] = (128, 64, 16)
    decoder_units: tuple[int, ...] = (16, 64, 128)
    project_to_input: bool = True  # append an identity layer mapping back to the input dim
    learning_rate: float = 0.001
    beta1: float = 0.99
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 200
    patience: int = 25
    k_sigma: float = 1.0

    def __post_init__(self):
        if self.batch_size <= 0 or self.epochs <= 0:
            raise ConfigError("batch_size and epochs must be positive")


@dataclass
class AeModel:
    encoder: DenseNetwork
    decoder: DenseNetwork
    feature_dim: int
    latent_dim: int
    k_sigma: float
    tau: float | None = None
    optimizer: dict | None = None  # hyperparameters the model was trained with
    preprocess: dict | None = None

    def score(self, x) -> float:
        return ae_score(self, x)


@dataclass
class AeTrainingTrace:
    """Full-dataset train/validation loss per epoch; index 0 is pre-training."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss"])
            for i, (t, v) in enumerate(zip(self.train_loss, self.val_loss)):
                writer.writerow([i, repr(t), repr(v)])


def build_ae_networks(feature_dim: int, config: AeConfig, seed) -> tuple[DenseNetwork, DenseNetwork]:
    """Encoder/decoder stacks per config; relu throughout, identity output projection."""
    enc_spec = []
    prev = feature_dim
    for units in config.encoder_units:
        enc_spec.append((prev, units, "relu"))
        prev = units
    dec_spec = []
    for units in config.decoder_units:
        dec_spec.append((prev, units, "relu"))
        prev = units
    if config.project_to_input:
        dec_spec.append((prev, feature_dim, "identity"))
    elif prev != feature_dim:
        raise ConfigError(
            f"decoder ends at {prev} units but inputs have dim {feature_dim}; "
            "enable project_to_input or set feature_dim to match"
        )
    enc_seed, dec_seed = nn.as_seed_sequence(seed).spawn(2)
    encoder = init_network(enc_spec, enc_seed)
    decoder = init_network(dec_spec, dec_seed)
    return encoder, decoder


def _stack(samples) -> np.ndarray:
    rows = [fv.x if hasattr(fv, "x") else np.asarray(fv, dtype=float) for fv in samples]
    if not rows:
        raise TrainingDataError("no samples to train on")
    try:
        x = np.asarray(rows, dtype=float)
    except ValueError as exc:
        raise ShapeError(f"samples must share one feature dimension: {exc}") from None
    if x.ndim != 2:
        raise ShapeError("samples must share one feature dimension")
    return x


def _mean_l1(encoder: DenseNetwork, decoder: DenseNetwork, x: np.ndarray) -> float:
    z, _ = forward(encoder, x)
    xhat, _ = forward(decoder, z)
    return float(np.abs(x - xhat).sum(axis=1).mean())


def train_ae(
    normals,
    config: AeConfig | None = None,
    seed: int = 0,
    validation=None,
) -> tuple[AeModel, AeTrainingTrace]:
    """Train on normal samples with minibatch Adam on the mean L1 reconstruction loss.

    Stops early when the validation loss has not improved for ``patience``
    epochs and restores the best-validation parameters. Raises TrainingError
    on a non-finite loss.
    """
    config = config or AeConfig()
    x = _stack(normals)
    x_val = _stack(validation) if validation else x
    n, d = x.shape
    if x_val.shape[1] != d:
        raise ShapeError("validation dimension differs from training dimension")

    net_seed, batch_seed = nn.as_seed_sequence(seed).spawn(2)
    encoder, decoder = build_ae_networks(d, config, net_seed)
    params = encoder.parameters() + decoder.parameters()
    opt = AdamState.for_params(
        params,
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )
    rng = np.random.default_rng(batch_seed)

    trace = AeTrainingTrace()
    trace.train_loss.append(_mean_l1(encoder, decoder, x))
    trace.val_loss.append(_mean_l1(encoder, decoder, x_val))

    best_val = trace.val_loss[0]
    best_params = [p.copy() for p in params]
    stale = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = x[order[start : start + config.batch_size]]
            b = batch.shape[0]
            z, enc_cache = forward(encoder, batch)
            xhat, dec_cache = forward(decoder, z)
            # loss = mean over batch of sum_j |x_j - xhat_j|
            d_xhat = np.sign(xhat - batch) / b
            dec_grads, d_z = backward(decoder, dec_cache, d_xhat)
            enc_grads, _ = backward(encoder, enc_cache, d_z)
            adam_step(params, enc_grads + dec_grads, opt)

        train_loss = _mean_l1(encoder, decoder, x)
        val_loss = _mean_l1(encoder, decoder, x_val)
        trace.train_loss.append(train_loss)
        trace.val_loss.append(val_loss)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingError(
                "non-finite loss during autoencoder training",
                diagnostics={"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss},
            )
        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                logger.info("autoencoder early stop at epoch %d (best val %.6f)", epoch, best_val)
                break

    for p, best in zip(params, best_params):
        p[...] = best

    model = AeModel(
        encoder=encoder,
        decoder=decoder,
        feature_dim=d,
        latent_dim=encoder.out_dim,
        k_sigma=config.k_sigma,
        optimizer=opt.to_dict(),
    )
    return model, trace


def reconstruct(model: AeModel, x: np.ndarray) -> np.ndarray:
    z, _ = forward(model.encoder, x)
    xhat, _ = forward(model.decoder, z)
    return xhat


def ae_score(model: AeModel, x) -> float:
    """Anomaly score: L1 distance between x and its reconstruction."""
    vec = np.asarray(x.x if hasattr(x, "x") else x, dtype=float)
    if vec.shape != (model.feature_dim,):
        raise ShapeError(f"expected vector of dim {model.feature_dim}, got shape {vec.shape}")
    return float(np.abs(vec - reconstruct(model, vec)).sum())


def ae_scores(model: AeModel, samples) -> np.ndarray:
    x = _stack(samples)
    if x.shape[1] != model.feature_dim:
        raise ShapeError(f"expected dim {model.feature_dim}, got {x.shape[1]}")
    return np.abs(x - reconstruct(model, x)).sum(axis=1)


def calibrate_threshold(training_scores, k: float) -> float:
    """tau = mean + k * population standard deviation of the training scores."""
    scores = np.asarray(training_scores, dtype=float)
    if scores.size < 2:
        raise ConfigError(f"need at least 2 scores to calibrate, got {scores.size}")
    return float(scores.mean() + k * scores.std())


def classify(score: float, tau: float) -> ClassLabel:
    """Abnormal iff score exceeds tau strictly."""
    return ClassLabel.ABNORMAL if score > tau else ClassLabel.NORMAL


def model_to_dict(model: AeModel) -> dict:
    return {
        "model_type": "ae",
        "format_version": 1,
        "feature_dim": model.feature_dim,
        "latent_dim": model.latent_dim,
        "tau": model.tau,
        "k_sigma": model.k_sigma,
        "preprocess": model.preprocess,
        "optimizer": model.optimizer,
        "encoder": nn.network_to_dict(model.encoder),
        "decoder": nn.network_to_dict(model.decoder),
    }


def model_from_dict(data: dict) -> AeModel:
    return AeModel(
        encoder=nn.network_from_dict(data["encoder"]),
        decoder=nn.network_from_dict(data["decoder"]),
        feature_dim=data["feature_dim"],
        latent_dim=data["latent_dim"],
        k_sigma=data["k_sigma"],
        tau=data["tau"],
        optimizer=data.get("optimizer"),
        preprocess=data.get("preprocess"),
    )
