"""Minimal dense-network machinery: forward, exact backprop, losses, Adam.

Everything runs at double precision on plain numpy arrays. Networks are lists
of affine layers with elementwise activations; only what the detectors need is
implemented (no convolutions, no general autodiff).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "identity")

PROB_EPS = 1e-7  # probability clamp applied before logarithms

FORMAT_VERSION = 1


@dataclass
class Layer:
    """One affine-then-activation layer; weights are (in_dim, out_dim)."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str
    alpha: float = 0.0  # leaky_relu negative slope

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"layer shapes inconsistent: weights {self.weights.shape}, biases {self.biases.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class DenseNetwork:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        for layer in self.layers:
            if not (np.isfinite(layer.weights).all() and np.isfinite(layer.biases).all()):
                raise ConfigError("network parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        """Flat view of parameter arrays, weight then bias per layer."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.biases)
        return out

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [Layer(l.weights.copy(), l.biases.copy(), l.activation, l.alpha) for l in self.layers]
        )


def _activate(name: str, alpha: float, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0.0, z, alpha * z)
    if name == "sigmoid":
        # split by sign for numerical stability at large |z|
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activation_grad(name: str, alpha: float, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "leaky_relu":
        return np.where(z > 0.0, 1.0, alpha)
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass
class ForwardCache:
    """Per-layer intermediates needed for the exact backward pass."""

    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    squeeze: bool  # original input was 1-D


def forward(net: DenseNetwork, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on x (single vector or batch of rows)."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[1] != net.in_dim:
        raise ShapeError(f"input dim {h.shape[1]} != network input dim {net.in_dim}")
    inputs, pres, acts = [], [], []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weights + layer.biases
        a = _activate(layer.activation, layer.alpha, z)
        pres.append(z)
        acts.append(a)
        h = a
    out = h[0] if squeeze else h
    return out, ForwardCache(inputs, pres, acts, squeeze)


def backward(
    net: DenseNetwork, cache: ForwardCache, output_gradient: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact gradients of a scalar loss given dLoss/dOutput.

    Returns (grads, input_gradient). grads mirrors net.parameters(): weight
    gradient then bias gradient per layer.
    """
    if len(cache.inputs) != len(net.layers):
        raise ShapeError("cache does not match network")
    d = np.atleast_2d(np.asarray(output_gradient, dtype=float))
    if d.shape != cache.activations[-1].shape:
        raise ShapeError(
            f"output gradient shape {d.shape} != output shape {cache.activations[-1].shape}"
        )
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        dz = d * _activation_grad(layer.activation, layer.alpha, cache.pre_activations[i], cache.activations[i])
        grads[2 * i] = cache.inputs[i].T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        d = dz @ layer.weights.T
    input_grad = d[0] if cache.squeeze else d
    return grads, input_grad


def l1_loss(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of absolute differences and its subgradient w.r.t. a (sign(0) := 0)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"l1_loss shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.abs(diff).sum()), np.sign(diff)


def clamp_probabilities(p: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(p, dtype=float), PROB_EPS, 1.0 - PROB_EPS)


def bce_terms(p_real: np.ndarray, p_fake: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Discriminator loss -mean[log p_real + log(1 - p_fake)] and its gradients.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs; gradients are
    taken at the clamped values.
    """
    p_real = clamp_probabilities(p_real)
    p_fake = clamp_probabilities(p_fake)
    if p_real.shape != p_fake.shape:
        raise ShapeError(f"probability batches differ: {p_real.shape} vs {p_fake.shape}")
    n = p_real.size
    loss = -float(np.log(p_real).sum() + np.log(1.0 - p_fake).sum()) / n
    grad_real = -1.0 / (n * p_real)
    grad_fake = 1.0 / (n * (1.0 - p_fake))
    return loss, grad_real, grad_fake


def adversarial_term(p_fake: np.ndarray) -> tuple[float, np.ndarray]:
    """Generator-side term -mean log p_fake and its gradient."""
    p_fake = clamp_probabilities(p_fake)
    n = p_fake.size
    return -float(np.log(p_fake).sum()) / n, -1.0 / (n * p_fake)


@dataclass
class AdamState:
    """Adam accumulators for a fixed list of parameter arrays."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
        }


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to the parameter arrays in place."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ShapeError("params, grads, and optimizer state differ in length")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params, state


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def init_network(layer_spec, seed) -> DenseNetwork:
    """Build a network from (in_dim, out_dim, activation[, alpha]) tuples.

    Weights are Glorot-uniform, biases zero; deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for spec in layer_spec:
        in_dim, out_dim, activation = spec[0], spec[1], spec[2]
        alpha = spec[3] if len(spec) > 3 else 0.0
        if in_dim <= 0 or out_dim <= 0:
            raise ConfigError(f"layer dimensions must be positive, got ({in_dim}, {out_dim})")
        bound = np.sqrt(6.0 / (in_dim + out_dim))
        weights = rng.uniform(-bound, bound, size=(in_dim, out_dim))
        layers.append(Layer(weights=weights, biases=np.zeros(out_dim), activation=activation, alpha=alpha))
    return DenseNetwork(layers)


def network_to_dict(net: DenseNetwork) -> dict:
    """JSON-ready encoding: layer specs with row-major weight arrays."""
    return {
        "format_version": FORMAT_VERSION,
        "layers": [
            {
                "in_dim": l.in_dim,
                "out_dim": l.out_dim,
                "activation": l.activation,
                "alpha": l.alpha,
                "weights": l.weights.tolist(),
                "biases": l.biases.tolist(),
            }
            for l in net.layers
        ],
    }


def network_from_dict(data: dict) -> DenseNetwork:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported network format version {version!r}")
    layers = [
        Layer(
            weights=np.array(l["weights"], dtype=float),
            biases=np.array(l["biases"], dtype=float),
            activation=l["activation"],
            alpha=float(l.get("alpha", 0.0)),
        )
        for l in data["layers"]
    ]
    return DenseNetwork(layers)
