"""Minimal dense-tensor neural network kernel.

Everything is float64 numpy. Layers cache their forward inputs so a single
``backward`` sweep can produce analytic gradients for every parameter; the
gradients are checked against central finite differences in the test suite.

Layer zoo: dense (relu/linear/sigmoid), valid 1-D convolution, non-
overlapping 1-D max pooling, flatten and softmax. Losses: softmax cross
entropy and mean squared error. Optimizers: SGD with classical momentum
and Adam.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InputTooShort,
    NonFiniteGradient,
    NonFiniteInput,
    ShapeMismatch,
    StaleCache,
)
from .rng import Xoshiro256StarStar

CE_FLOOR = 1e-12


def glorot_uniform(rng: Xoshiro256StarStar, shape: tuple[int, ...],
                   fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    flat = [rng.uniform_symmetric(limit) for _ in range(int(np.prod(shape)))]
    return np.array(flat, dtype=np.float64).reshape(shape)


def _apply_activation(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "linear":
        return z
    if kind == "sigmoid":
        return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.maximum(z, 0))),
                        np.exp(np.minimum(z, 0)) / (1.0 + np.exp(np.minimum(z, 0))))
    raise ValueError(f"unknown activation {kind!r}")


def _activation_grad(z: np.ndarray, y: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(np.float64)  # derivative at exactly 0 is 0
    if kind == "linear":
        return np.ones_like(z)
    if kind == "sigmoid":
        return y * (1.0 - y)
    raise ValueError(f"unknown activation {kind!r}")


class DenseLayer:
    """Fully connected layer: out = activation(x @ W + b)."""

    def __init__(self, W: np.ndarray, b: np.ndarray, activation: str = "relu"):
        if W.ndim != 2 or b.shape != (W.shape[1],):
            raise ShapeMismatch(f"dense parameter shapes {W.shape} / {b.shape}")
        if activation not in ("relu", "linear", "sigmoid"):
            raise ValueError(f"unsupported dense activation {activation!r}")
        self.W = W.astype(np.float64)
        self.b = b.astype(np.float64)
        self.activation = activation
        self._cache = None

    @classmethod
    def initialized(cls, rng: Xoshiro256StarStar, n_in: int, n_out: int,
                    activation: str = "relu") -> "DenseLayer":
        W = glorot_uniform(rng, (n_in, n_out), n_in, n_out)
        return cls(W, np.zeros(n_out), activation)

    def params(self):
        return [self.W, self.b]

    def descriptor(self) -> dict:
        return {"type": "dense", "in": self.W.shape[0], "out": self.W.shape[1],
                "activation": self.activation}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.W.shape[0]:
            raise ShapeMismatch(
                f"dense expects (batch, {self.W.shape[0]}), got {x.shape}"
            )
        z = x @ self.W + self.b
        y = _apply_activation(z, self.activation)
        self._cache = (x, z, y)
        return y

    def backward(self, g: np.ndarray):
        if self._cache is None:
            raise StaleCache("dense backward without a preceding forward")
        x, z, y = self._cache
        self._cache = None
        dz = g * _activation_grad(z, y, self.activation)
        dW = x.T @ dz
        db = dz.sum(axis=0)
        dx = dz @ self.W.T
        return dx, [dW, db]


class Conv1DLayer:
    """Valid stride-1 cross-correlation over (batch, length, channels)."""

    def __init__(self, filters: np.ndarray, bias: np.ndarray, activation: str = "relu"):
        if filters.ndim != 3 or bias.shape != (filters.shape[0],):
            raise ShapeMismatch(f"conv parameter shapes {filters.shape} / {bias.shape}")
        if activation not in ("relu", "linear"):
            raise ValueError(f"unsupported conv activation {activation!r}")
        self.filters = filters.astype(np.float64)  # (num_filters, width, in_channels)
        self.bias = bias.astype(np.float64)
        self.activation = activation
        self._cache = None

    @classmethod
    def initialized(cls, rng: Xoshiro256StarStar, num_filters: int, width: int,
                    in_channels: int, activation: str = "relu") -> "Conv1DLayer":
        fan_in = width * in_channels
        fan_out = width * num_filters
        filters = glorot_uniform(rng, (num_filters, width, in_channels), fan_in, fan_out)
        return cls(filters, np.zeros(num_filters), activation)

    def params(self):
        return [self.filters, self.bias]

    def descriptor(self) -> dict:
        f, w, c = self.filters.shape
        return {"type": "conv1d", "filters": f, "width": w, "in_channels": c,
                "activation": self.activation}

    def forward(self, x: np.ndarray) -> np.ndarray:
        nf, width, in_ch = self.filters.shape
        if x.ndim != 3 or x.shape[2] != in_ch:
            raise ShapeMismatch(f"conv expects (batch, len, {in_ch}), got {x.shape}")
        length = x.shape[1]
        if length < width:
            raise InputTooShort(f"conv needs length >= {width}, got {length}")
        t_out = length - width + 1
        # im2col: windows[b, t, d*C + c] = x[b, t+d, c]
        windows = np.stack([x[:, d : d + t_out, :] for d in range(width)], axis=2)
        windows = windows.reshape(x.shape[0], t_out, width * in_ch)
        z = windows @ self.filters.reshape(nf, width * in_ch).T + self.bias
        y = _apply_activation(z, self.activation)
        self._cache = (x.shape, windows, z, y)
        return y

    def backward(self, g: np.ndarray):
        if self._cache is None:
            raise StaleCache("conv backward without a preceding forward")
        x_shape, windows, z, y = self._cache
        self._cache = None
        nf, width, in_ch = self.filters.shape
        dz = g * _activation_grad(z, y, self.activation)
        dflat = np.einsum("btf,btk->fk", dz, windows)
        dfilters = dflat.reshape(nf, width, in_ch)
        dbias = dz.sum(axis=(0, 1))
        dwindows = dz @ self.filters.reshape(nf, width * in_ch)
        dx = np.zeros(x_shape)
        t_out = dz.shape[1]
        for d in range(width):
            dx[:, d : d + t_out, :] += dwindows[:, :, d * in_ch : (d + 1) * in_ch]
        return dx, [dfilters, dbias]


class MaxPool1DLayer:
    """Non-overlapping max pooling; stride equals the window size."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError(f"pool window must be >= 1, got {window}")
        self.window = window
        self._cache = None

    def params(self):
        return []

    def descriptor(self) -> dict:
        return {"type": "maxpool1d", "window": self.window}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3:
            raise ShapeMismatch(f"pool expects (batch, len, channels), got {x.shape}")
        length = x.shape[1]
        if length < self.window:
            raise InputTooShort(f"pool needs length >= {self.window}, got {length}")
        t_out = length // self.window
        trimmed = x[:, : t_out * self.window, :]
        blocks = trimmed.reshape(x.shape[0], t_out, self.window, x.shape[2])
        # argmax returns the lowest index on ties, which pins gradient routing
        idx = blocks.argmax(axis=2)
        y = np.take_along_axis(blocks, idx[:, :, None, :], axis=2)[:, :, 0, :]
        self._cache = (x.shape, idx)
        return y

    def backward(self, g: np.ndarray):
        if self._cache is None:
            raise StaleCache("pool backward without a preceding forward")
        x_shape, idx = self._cache
        self._cache = None
        batch, length, channels = x_shape
        t_out = idx.shape[1]
        dblocks = np.zeros((batch, t_out, self.window, channels))
        np.put_along_axis(dblocks, idx[:, :, None, :], g[:, :, None, :], axis=2)
        dx = np.zeros(x_shape)
        dx[:, : t_out * self.window, :] = dblocks.reshape(batch, t_out * self.window, channels)
        return dx, []


class FlattenLayer:
    def __init__(self):
        self._cache = None

    def params(self):
        return []

    def descriptor(self) -> dict:
        return {"type": "flatten"}

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g: np.ndarray):
        if self._cache is None:
            raise StaleCache("flatten backward without a preceding forward")
        shape = self._cache
        self._cache = None
        return g.reshape(shape), []


class SoftmaxLayer:
    def __init__(self):
        self._cache = None

    def params(self):
        return []

    def descriptor(self) -> dict:
        return {"type": "softmax"}

    def forward(self, x: np.ndarray) -> np.ndarray:
        y = softmax(x)
        self._cache = y
        return y

    def backward(self, g: np.ndarray):
        if self._cache is None:
            raise StaleCache("softmax backward without a preceding forward")
        y = self._cache
        self._cache = None
        dot = np.sum(g * y, axis=1, keepdims=True)
        return y * (g - dot), []


Layer = DenseLayer | Conv1DLayer | MaxPool1DLayer | FlattenLayer | SoftmaxLayer


def layer_from_descriptor(d: dict) -> Layer:
    """Rebuild a zero-initialized layer from its descriptor dict."""
    kind = d["type"]
    if kind == "dense":
        return DenseLayer(np.zeros((d["in"], d["out"])), np.zeros(d["out"]),
                          d["activation"])
    if kind == "conv1d":
        return Conv1DLayer(np.zeros((d["filters"], d["width"], d["in_channels"])),
                           np.zeros(d["filters"]), d["activation"])
    if kind == "maxpool1d":
        return MaxPool1DLayer(d["window"])
    if kind == "flatten":
        return FlattenLayer()
    if kind == "softmax":
        return SoftmaxLayer()
    raise ValueError(f"unknown layer type {kind!r}")


# --- functional forms matching the single-example contracts ----------------

def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    return layer.forward(np.asarray(x, dtype=np.float64))


def conv1d_forward(x: np.ndarray, layer: Conv1DLayer) -> np.ndarray:
    """Convolve a single (len, in_channels) sequence."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected (len, channels), got {x.shape}")
    return layer.forward(x[None])[0]


def maxpool1d_forward(x: np.ndarray, layer: MaxPool1DLayer) -> np.ndarray:
    """Pool a single (len, channels) sequence."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected (len, channels), got {x.shape}")
    return layer.forward(x[None])[0]


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stabilized softmax over (batch, k), k >= 2."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] < 2:
        raise ShapeMismatch(f"softmax expects (batch, k>=2), got {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("softmax input contains non-finite values")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood with a 1e-12 probability floor."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets)
    if probs.ndim != 2 or targets.shape != (probs.shape[0],):
        raise ShapeMismatch(f"probs {probs.shape} vs targets {targets.shape}")
    if targets.min() < 0 or targets.max() >= probs.shape[1]:
        raise ShapeMismatch("target class index out of range")
    picked = probs[np.arange(len(targets)), targets]
    return float(np.mean(-np.log(np.maximum(picked, CE_FLOOR))))


def cross_entropy_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(probs); zero where the floor saturates the log."""
    grad = np.zeros_like(probs)
    picked = probs[np.arange(len(targets)), targets]
    safe = picked > CE_FLOOR
    rows = np.arange(len(targets))[safe]
    grad[rows, np.asarray(targets)[safe]] = -1.0 / picked[safe] / len(targets)
    return grad


def mse(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean over all components of the squared reconstruction error."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeMismatch(f"mse shapes differ: {x.shape} vs {x_hat.shape}")
    return float(np.mean((x - x_hat) ** 2))


def mse_grad(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    return 2.0 * (x_hat - x) / x.size


# --- whole-network helpers --------------------------------------------------

def forward_network(layers: list[Layer], x: np.ndarray) -> np.ndarray:
    out = np.asarray(x, dtype=np.float64)
    for layer in layers:
        out = layer.forward(out)
    return out


def collect_params(layers: list[Layer]) -> list[np.ndarray]:
    return [p for layer in layers for p in layer.params()]


def loss_and_gradients(layers: list[Layer], x: np.ndarray, targets,
                       loss_kind: str) -> tuple[float, list[np.ndarray]]:
    """Forward pass, loss, and one reverse sweep.

    Returns the scalar loss and one gradient per parameter tensor in
    ``collect_params`` order. ``loss_kind`` is ``"cross_entropy"``
    (targets are class indices) or ``"mse"`` (targets are the desired
    output tensor).
    """
    out = forward_network(layers, x)
    if loss_kind == "cross_entropy":
        loss = cross_entropy(out, targets)
        g = cross_entropy_grad(out, targets)
    elif loss_kind == "mse":
        loss = mse(targets, out)
        g = mse_grad(targets, out)
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    grads: list[np.ndarray] = []
    for layer in reversed(layers):
        g, pgrads = layer.backward(g)
        grads = pgrads + grads
    return loss, grads


# --- optimizers --------------------------------------------------------------

@dataclass
class OptimizerConfig:
    algorithm: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.algorithm not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.algorithm!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for name, v in (("momentum", self.momentum), ("beta1", self.beta1),
                        ("beta2", self.beta2)):
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.seed <= 2**64 - 1:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class OptimizerState:
    step: int = 0
    slots: list[dict[str, np.ndarray]] = field(default_factory=list)


def init_optimizer_state(params: list[np.ndarray], config: OptimizerConfig) -> OptimizerState:
    state = OptimizerState()
    for p in params:
        if config.algorithm == "adam":
            state.slots.append({"m": np.zeros_like(p), "v": np.zeros_like(p)})
        else:
            state.slots.append({"vel": np.zeros_like(p)})
    return state


def optimizer_step(params: list[np.ndarray], grads: list[np.ndarray],
                   config: OptimizerConfig, state: OptimizerState) -> None:
    """Apply one update in place; aborts untouched on non-finite gradients."""
    if len(params) != len(grads) or len(params) != len(state.slots):
        raise ShapeMismatch("params/grads/state length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param {p.shape} vs grad {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(
                f"non-finite gradient for parameter of shape {p.shape}"
            )
    state.step += 1
    lr = config.learning_rate
    if config.algorithm == "sgd":
        for p, g, slot in zip(params, grads, state.slots):
            if config.momentum > 0.0:
                slot["vel"] *= config.momentum
                slot["vel"] += g
                p -= lr * slot["vel"]
            else:
                p -= lr * g
    else:
        b1, b2, eps = config.beta1, config.beta2, config.epsilon
        bc1 = 1.0 - b1 ** state.step
        bc2 = 1.0 - b2 ** state.step
        for p, g, slot in zip(params, grads, state.slots):
            slot["m"] = b1 * slot["m"] + (1.0 - b1) * g
            slot["v"] = b2 * slot["v"] + (1.0 - b2) * g * g
            p -= lr * (slot["m"] / bc1) / (np.sqrt(slot["v"] / bc2) + eps)
