"""Adversarially trained encoder-decoder-encoder anomaly detector (GANomaly variant).

The generator (encoder1 -> decoder -> encoder2) minimizes a weighted sum of a
contextual L1 term, a latent L1 term, and the original GAN cross-entropy
adversarial term; the discriminator maximizes its ability to tell real samples
from reconstructions. Updates alternate: k_d discriminator steps then k_g
generator steps, each on freshly sampled minibatches.
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
from .nn import (
    AdamState,
    DenseNetwork,
    adam_step,
    adversarial_term,
    backward,
    bce_terms,
    forward,
    init_network,
)

logger = logging.getLogger(__name__)

SCORE_MODES = ("data", "latent")


@dataclass
class GanomalyConfig:
    encoder_units: tuple[int, ...] = (128, 64, 16)
    decoder_units: tuple[int, ...] = (16, 64, 128)
    discriminator_units: tuple[int, ...] = (128, 16, 1)
    leaky_alpha: float = 0.2
    project_to_input: bool = True
    learning_rate: float = 0.0002
    beta1: float = 0.50
    beta2: float = 0.999
    epsilon: float = 1e-8
    lambda_c: float = 50.0
    lambda_e: float = 1.0
    lambda_a: float = 1.0
    k_d: int = 1
    k_g: int = 2
    batch_size: int = 32
    iterations_per_epoch: int = 500
    epochs: int = 40
    patience: int = 25
    k_sigma: float = 5.0
    score_mode: str = "data"

    def __post_init__(self):
        if self.score_mode not in SCORE_MODES:
            raise ConfigError(f"score_mode must be one of {SCORE_MODES}, got {self.score_mode!r}")
        if min(self.lambda_c, self.lambda_e, self.lambda_a) < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.k_d <= 0 or self.k_g <= 0 or self.batch_size <= 0:
            raise ConfigError("k_d, k_g, and batch_size must be positive")


@dataclass
class GanomalyModel:
    encoder1: DenseNetwork
    decoder: DenseNetwork
    encoder2: DenseNetwork
    discriminator: DenseNetwork
    lambda_c: float
    lambda_e: float
    lambda_a: float
    feature_dim: int
    latent_dim: int
    k_sigma: float
    score_mode: str = "data"
    tau: float | None = None
    optimizer: dict | None = None  # hyperparameters the model was trained with
    preprocess: dict | None = None

    def score(self, x) -> float:
        return gan_score(self, x)


@dataclass
class GanTrainingTrace:
    """Per-outer-iteration discriminator/generator losses and epoch boundaries."""

    l_d: list[float] = field(default_factory=list)
    l_g: list[float] = field(default_factory=list)
    epoch_boundaries: list[int] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    discriminator_updates: int = 0
    generator_updates: int = 0

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "l_d", "l_g"])
            for i, (d, g) in enumerate(zip(self.l_d, self.l_g)):
                writer.writerow([i, repr(d), repr(g)])


def build_ganomaly_networks(
    feature_dim: int, config: GanomalyConfig, seed
) -> tuple[DenseNetwork, DenseNetwork, DenseNetwork, DenseNetwork]:
    """Encoder1, decoder, encoder2, discriminator per config.

    Encoders and decoder use leaky relu; the decoder gets an identity output
    projection back to the input dimension; the discriminator ends in a sigmoid.
    """
    a = config.leaky_alpha

    def chain(start, units, activation):
        spec, prev = [], start
        for u in units:
            spec.append((prev, u, activation, a))
            prev = u
        return spec, prev

    enc_spec, latent = chain(feature_dim, config.encoder_units, "leaky_relu")
    dec_spec, dec_out = chain(latent, config.decoder_units, "leaky_relu")
    if config.project_to_input:
        dec_spec.append((dec_out, feature_dim, "identity", 0.0))
    elif dec_out != feature_dim:
        raise ConfigError(
            f"decoder ends at {dec_out} units but inputs have dim {feature_dim}; "
            "enable project_to_input or set feature_dim to match"
        )
    dis_spec, dis_prev = chain(feature_dim, config.discriminator_units[:-1], "leaky_relu")
    dis_spec.append((dis_prev, config.discriminator_units[-1], "sigmoid", 0.0))

    seeds = nn.as_seed_sequence(seed).spawn(4)
    return (
        init_network(enc_spec, seeds[0]),
        init_network(dec_spec, seeds[1]),
        init_network(enc_spec, seeds[2]),
        init_network(dis_spec, seeds[3]),
    )


def find_latents(encoder1: DenseNetwork, batch: np.ndarray) -> np.ndarray:
    """Map a minibatch to its latents; the result is used as a fixed decoder input."""
    z, _ = forward(encoder1, np.atleast_2d(np.asarray(batch, dtype=float)))
    return z


def generator_loss(
    batch: np.ndarray,
    encoder1: DenseNetwork,
    decoder: DenseNetwork,
    encoder2: DenseNetwork,
    discriminator: DenseNetwork,
    lambda_c: float,
    lambda_e: float,
    lambda_a: float,
    adversarial_latents: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """Generator objective on one minibatch, with gradients for the three generator nets.

    The contextual and latent terms are computed on ``batch``; the adversarial
    term -lambda_a * mean log D(g(z)) consumes ``adversarial_latents`` (default:
    this batch's own latents) as fixed decoder inputs, so it trains the decoder
    but not encoder1. The discriminator is frozen: gradients flow through it but
    are discarded.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=float))
    if x.shape[0] == 0:
        raise TrainingDataError("generator batch is empty")
    b = x.shape[0]

    z1, e1_cache = forward(encoder1, x)
    xhat, dec_cache = forward(decoder, z1)
    z2, e2_cache = forward(encoder2, xhat)
    if xhat.shape != x.shape:
        raise ShapeError(f"reconstruction shape {xhat.shape} != input shape {x.shape}")

    contextual = float(np.abs(x - xhat).sum(axis=1).mean())
    latent = float(np.abs(z1 - z2).sum(axis=1).mean())

    d_z2 = lambda_e * np.sign(z2 - z1) / b
    e2_grads, d_xhat_latent = backward(encoder2, e2_cache, d_z2)
    d_xhat = lambda_c * np.sign(xhat - x) / b + d_xhat_latent
    dec_grads, d_z1 = backward(decoder, dec_cache, d_xhat)
    d_z1 = d_z1 + lambda_e * np.sign(z1 - z2) / b
    e1_grads, _ = backward(encoder1, e1_cache, d_z1)

    z_adv = z1 if adversarial_latents is None else np.atleast_2d(np.asarray(adversarial_latents, dtype=float))
    x_gen, dec_adv_cache = forward(decoder, z_adv)
    p_fake, dis_cache = forward(discriminator, x_gen)
    adv_loss, d_p = adversarial_term(p_fake)
    _, d_x_gen = backward(discriminator, dis_cache, lambda_a * d_p)
    dec_adv_grads, _ = backward(decoder, dec_adv_cache, d_x_gen)
    for main, extra in zip(dec_grads, dec_adv_grads):
        main += extra

    loss = lambda_c * contextual + lambda_e * latent + lambda_a * adv_loss
    return loss, e1_grads, dec_grads, e2_grads


def discriminator_loss(
    batch: np.ndarray, generated: np.ndarray, discriminator: DenseNetwork
) -> tuple[float, list[np.ndarray]]:
    """Cross-entropy discriminator objective with gradients for the discriminator only."""
    real = np.atleast_2d(np.asarray(batch, dtype=float))
    fake = np.atleast_2d(np.asarray(generated, dtype=float))
    if real.shape[0] != fake.shape[0]:
        raise ShapeError(
            f"real batch ({real.shape[0]}) and generated batch ({fake.shape[0]}) differ in size"
        )
    p_real, cache_real = forward(discriminator, real)
    p_fake, cache_fake = forward(discriminator, fake)
    loss, g_real, g_fake = bce_terms(p_real, p_fake)
    grads_real, _ = backward(discriminator, cache_real, g_real)
    grads_fake, _ = backward(discriminator, cache_fake, g_fake)
    return loss, [a + b for a, b in zip(grads_real, grads_fake)]


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


def _generator_objective(x, nets, config) -> float:
    e1, dec, e2, dis = nets
    z1, _ = forward(e1, x)
    xhat, _ = forward(dec, z1)
    z2, _ = forward(e2, xhat)
    p, _ = forward(dis, xhat)
    adv, _ = adversarial_term(p)
    return float(
        config.lambda_c * np.abs(x - xhat).sum(axis=1).mean()
        + config.lambda_e * np.abs(z1 - z2).sum(axis=1).mean()
        + config.lambda_a * adv
    )


def train_ganomaly(
    normals,
    config: GanomalyConfig | None = None,
    seed: int = 0,
    validation=None,
) -> tuple[GanomalyModel, GanTrainingTrace]:
    """Alternating adversarial training on normal samples only.

    Per outer iteration: k_d discriminator updates then k_g generator updates,
    each on two freshly drawn minibatches (one providing latents, one providing
    the direct samples). Adam state is kept separately for the generator group
    and the discriminator. Stops early when the generator validation objective
    has not improved for ``patience`` epochs; restores the best snapshot.
    """
    config = config or GanomalyConfig()
    x = _stack(normals)
    x_val = _stack(validation) if validation else x
    n, d = x.shape
    if x_val.shape[1] != d:
        raise ShapeError("validation dimension differs from training dimension")

    seq = np.random.SeedSequence(seed)
    net_seed, batch_seed = seq.spawn(2)
    e1, dec, e2, dis = build_ganomaly_networks(d, config, net_seed)
    gen_params = e1.parameters() + dec.parameters() + e2.parameters()
    dis_params = dis.parameters()
    opt_g = AdamState.for_params(
        gen_params, config.learning_rate, config.beta1, config.beta2, config.epsilon
    )
    opt_d = AdamState.for_params(
        dis_params, config.learning_rate, config.beta1, config.beta2, config.epsilon
    )
    rng = np.random.default_rng(batch_seed)

    def draw():
        return x[rng.integers(0, n, size=config.batch_size)]

    trace = GanTrainingTrace()
    best_val = np.inf
    best_snapshot = None
    stale = 0

    for epoch in range(config.epochs):
        for _ in range(config.iterations_per_epoch):
            d_losses = []
            for _ in range(config.k_d):
                latents = find_latents(e1, draw())
                real = draw()
                generated, _ = forward(dec, latents)
                loss_d, grads_dis = discriminator_loss(real, generated, dis)
                adam_step(dis_params, grads_dis, opt_d)
                trace.discriminator_updates += 1
                d_losses.append(loss_d)

            g_losses = []
            for _ in range(config.k_g):
                latents = find_latents(e1, draw())
                batch = draw()
                loss_g, ge1, gdec, ge2 = generator_loss(
                    batch, e1, dec, e2, dis,
                    config.lambda_c, config.lambda_e, config.lambda_a,
                    adversarial_latents=latents,
                )
                adam_step(gen_params, ge1 + gdec + ge2, opt_g)
                trace.generator_updates += 1
                g_losses.append(loss_g)

            l_d = float(np.mean(d_losses))
            l_g = float(np.mean(g_losses))
            trace.l_d.append(l_d)
            trace.l_g.append(l_g)
            if not (np.isfinite(l_d) and np.isfinite(l_g)):
                raise TrainingError(
                    "non-finite loss during adversarial training",
                    diagnostics={
                        "iteration": len(trace.l_d) - 1,
                        "l_d": l_d,
                        "l_g": l_g,
                        "trace_l_d": trace.l_d,
                        "trace_l_g": trace.l_g,
                    },
                )
        trace.epoch_boundaries.append(len(trace.l_d))

        val = _generator_objective(x_val, (e1, dec, e2, dis), config)
        trace.val_loss.append(val)
        if val < best_val:
            best_val = val
            best_snapshot = [p.copy() for p in gen_params + dis_params]
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                logger.info("ganomaly early stop after epoch %d (best val %.6f)", epoch + 1, best_val)
                break

    if best_snapshot is not None:
        for p, best in zip(gen_params + dis_params, best_snapshot):
            p[...] = best

    model = GanomalyModel(
        encoder1=e1,
        decoder=dec,
        encoder2=e2,
        discriminator=dis,
        lambda_c=config.lambda_c,
        lambda_e=config.lambda_e,
        lambda_a=config.lambda_a,
        feature_dim=d,
        latent_dim=e1.out_dim,
        k_sigma=config.k_sigma,
        score_mode=config.score_mode,
        optimizer=opt_g.to_dict(),
    )
    return model, trace


def gan_score(model: GanomalyModel, x) -> float:
    """Anomaly score: reconstruction L1 in data space, or latent L1 in "latent" mode."""
    vec = np.asarray(x.x if hasattr(x, "x") else x, dtype=float)
    if vec.shape != (model.feature_dim,):
        raise ShapeError(f"expected vector of dim {model.feature_dim}, got shape {vec.shape}")
    return float(gan_scores(model, vec[None, :])[0])


def gan_scores(model: GanomalyModel, samples) -> np.ndarray:
    x = samples if isinstance(samples, np.ndarray) and samples.ndim == 2 else _stack(samples)
    if x.shape[1] != model.feature_dim:
        raise ShapeError(f"expected dim {model.feature_dim}, got {x.shape[1]}")
    z1, _ = forward(model.encoder1, x)
    xhat, _ = forward(model.decoder, z1)
    if model.score_mode == "latent":
        z2, _ = forward(model.encoder2, xhat)
        return np.abs(z1 - z2).sum(axis=1)
    return np.abs(x - xhat).sum(axis=1)


def score_distribution_report(model, train, test) -> dict:
    """Per-class score summaries with fitted Gaussian parameters and the tau line.

    Works with any model exposing ``score``; partitions with an absent class are
    omitted with a notice.
    """
    tau = getattr(model, "tau", None)
    if tau is None:
        tau = getattr(model, "threshold", None)
    report: dict = {
        "tau": tau,
        "k_sigma": getattr(model, "k_sigma", None),
        "partitions": {},
        "notices": [],
    }
    for name, part in (("train", train), ("test", test)):
        by_class: dict[str, list[float]] = {}
        for fv in part:
            label = "unlabeled" if fv.label is None else ClassLabel(fv.label).name.lower()
            by_class.setdefault(label, []).append(model.score(fv))
        summary = {}
        for cls in ("normal", "abnormal"):
            scores = by_class.get(cls)
            if not scores:
                report["notices"].append(f"no {cls} samples in {name}")
                continue
            arr = np.asarray(scores)
            summary[cls] = {
                "count": int(arr.size),
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "scores": [float(v) for v in arr],
            }
        report["partitions"][name] = summary
    return report


def model_to_dict(model: GanomalyModel) -> dict:
    return {
        "model_type": "ganomaly",
        "format_version": 1,
        "feature_dim": model.feature_dim,
        "latent_dim": model.latent_dim,
        "lambda_c": model.lambda_c,
        "lambda_e": model.lambda_e,
        "lambda_a": model.lambda_a,
        "tau": model.tau,
        "k_sigma": model.k_sigma,
        "score_mode": model.score_mode,
        "preprocess": model.preprocess,
        "optimizer": model.optimizer,
        "encoder1": nn.network_to_dict(model.encoder1),
        "decoder": nn.network_to_dict(model.decoder),
        "encoder2": nn.network_to_dict(model.encoder2),
        "discriminator": nn.network_to_dict(model.discriminator),
    }


def model_from_dict(data: dict) -> GanomalyModel:
    return GanomalyModel(
        encoder1=nn.network_from_dict(data["encoder1"]),
        decoder=nn.network_from_dict(data["decoder"]),
        encoder2=nn.network_from_dict(data["encoder2"]),
        discriminator=nn.network_from_dict(data["discriminator"]),
        lambda_c=data["lambda_c"],
        lambda_e=data["lambda_e"],
        lambda_a=data["lambda_a"],
        feature_dim=data["feature_dim"],
        latent_dim=data["latent_dim"],
        k_sigma=data["k_sigma"],
        score_mode=data.get("score_mode", "data"),
        tau=data["tau"],
        optimizer=data.get("optimizer"),
        preprocess=data.get("preprocess"),
    )
