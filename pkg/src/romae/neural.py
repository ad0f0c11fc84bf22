"""Minimal float64 neural-network engine for the autoencoder family.

Layers are stateful objects with `forward`/`backward`; a Network is a plain
layer stack (no general graph). Tensors are numpy arrays shaped
(batch, length, channels) in 1D and (batch, nx, ny, channels) in 2D.
Convolutions run through the dual-path kernels module; everything else is
vectorized numpy.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels


class Layer:
    kind = "layer"

    def params(self):
        return []

    def grads(self):
        return []

    def forward(self, x):
        raise NotImplementedError

    def backward(self, gy):
        raise NotImplementedError


def _glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, kernel_size, c_in, c_out, rng):
        self.w = _glorot_uniform(
            rng, (kernel_size, c_in, c_out), kernel_size * c_in, kernel_size * c_out
        )
        self.b = np.zeros(c_out)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x):
        self._x = x
        return kernels.conv1d_forward(x, self.w, self.b)

    def backward(self, gy):
        gx, self.gw, self.gb = kernels.conv1d_backward(self._x, self.w, gy)
        return gx


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, kernel_size, c_in, c_out, rng):
        k = kernel_size
        self.w = _glorot_uniform(rng, (k, k, c_in, c_out), k * k * c_in, k * k * c_out)
        self.b = np.zeros(c_out)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x):
        self._x = x
        return kernels.conv2d_forward(x, self.w, self.b)

    def backward(self, gy):
        gx, self.gw, self.gb = kernels.conv2d_backward(self._x, self.w, gy)
        return gx


class AvgPool(Layer):
    """Average pooling by a fixed factor of two per spatial axis."""

    kind = "avgpool"

    def forward(self, x):
        self._ndim = x.ndim
        if x.ndim == 3:
            b, length, c = x.shape
            if length % 2:
                raise ValueError(f"average pooling needs an even length, got {length}")
            return x.reshape(b, length // 2, 2, c).mean(axis=2)
        b, nx, ny, c = x.shape
        if nx % 2 or ny % 2:
            raise ValueError(f"average pooling needs even spatial dims, got {(nx, ny)}")
        return x.reshape(b, nx // 2, 2, ny // 2, 2, c).mean(axis=(2, 4))

    def backward(self, gy):
        if self._ndim == 3:
            return np.repeat(gy, 2, axis=1) / 2.0
        return np.repeat(np.repeat(gy, 2, axis=1), 2, axis=2) / 4.0


class UpSample(Layer):
    """Nearest-neighbour repetition by two per spatial axis."""

    kind = "upsample"

    def forward(self, x):
        self._ndim = x.ndim
        if x.ndim == 3:
            return np.repeat(x, 2, axis=1)
        return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)

    def backward(self, gy):
        if self._ndim == 3:
            b, length, c = gy.shape
            return gy.reshape(b, length // 2, 2, c).sum(axis=2)
        b, nx, ny, c = gy.shape
        return gy.reshape(b, nx // 2, 2, ny // 2, 2, c).sum(axis=(2, 4))


class PReLU(Layer):
    """x for x >= 0, a*x below, one learnable slope per channel.

    The derivative at exactly zero uses the positive branch.
    """

    kind = "prelu"

    def __init__(self, channels, init=0.25):
        self.a = np.full(channels, float(init))
        self._x = None

    def params(self):
        return [self.a]

    def grads(self):
        return [self.ga]

    def forward(self, x):
        self._x = x
        return np.where(x >= 0.0, x, self.a * x)

    def backward(self, gy):
        x = self._x
        neg = x < 0.0
        axes = tuple(range(x.ndim - 1))
        self.ga = np.sum(gy * np.where(neg, x, 0.0), axis=axes)
        return gy * np.where(neg, self.a, 1.0)


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out, rng):
        self.w = _glorot_uniform(rng, (n_in, n_out), n_in, n_out)
        self.b = np.zeros(n_out)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, gy):
        self.gw = self._x.T @ gy
        self.gb = gy.sum(axis=0)
        return gy @ self.w.T


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy):
        return gy.reshape(self._shape)


class Reshape(Layer):
    kind = "reshape"

    def __init__(self, target_shape):
        self.target_shape = tuple(target_shape)

    def forward(self, x):
        return x.reshape((x.shape[0],) + self.target_shape)

    def backward(self, gy):
        return gy.reshape(gy.shape[0], -1)


class Network:
    """A plain sequential layer stack."""

    def __init__(self, layers, input_shape):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)  # spatial dims + channels

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, gy):
        for layer in reversed(self.layers):
            gy = layer.backward(gy)
        return gy

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]

    def gradients(self):
        return [g for layer in self.layers for g in layer.grads()]

    @property
    def input_size(self):
        return int(np.prod(self.input_shape))


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


@dataclass
class AdamState:
    m: list
    v: list
    alpha: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0

    @classmethod
    def for_params(cls, params, alpha=0.01, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            alpha=alpha,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(params, grads, state: AdamState):
    """Standard Adam update with bias correction; params update in place."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params, state


class StopReason(Enum):
    TARGET_REACHED = "target_reached"
    EARLY_STOPPED = "early_stopped"
    MAX_EPOCHS = "max_epochs"


@dataclass
class TrainConfig:
    max_epochs: int
    batch_size: int = 128
    validation_split: float = 0.2
    target_val_loss: float = 1e-5
    patience: int = 10
    alpha: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_split < 1.0:
            raise ValueError(f"validation split must be in (0, 1), got {self.validation_split}")
        if self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("max_epochs, batch_size and patience must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    stop_reason: StopReason = StopReason.MAX_EPOCHS

    @property
    def epochs(self):
        return len(self.train_loss)


def _rows_to_tensor(rows: np.ndarray, input_shape) -> np.ndarray:
    """Reshape dataset rows to network tensors.

    Two-channel rows store the channels blockwise (u then v), so they are
    unstacked before moving channels to the trailing axis.
    """
    n = rows.shape[0]
    spatial = input_shape[:-1]
    channels = input_shape[-1]
    if channels == 1:
        return rows.reshape((n,) + spatial + (1,))
    parts = rows.reshape((n, channels) + spatial)
    return np.moveaxis(parts, 1, -1)


def _eval_loss(network: Network, data: np.ndarray, batch_size: int) -> float:
    total = 0.0
    for start in range(0, data.shape[0], batch_size):
        chunk = data[start : start + batch_size]
        pred = network.forward(chunk)
        total += float(np.sum((pred - chunk) ** 2))
    return total / data.size


def train(network: Network, dataset, config: TrainConfig):
    """Autoencoding fit (targets = inputs) with early stopping.

    The dataset is shuffled once with the config seed and the trailing
    validation fraction is held fixed across epochs. Stops when the
    validation loss reaches the target, when it fails to improve for
    `patience` epochs (restoring the best weights), or at max_epochs.
    Returns (network, TrainHistory).
    """
    rows = dataset.samples if hasattr(dataset, "samples") else np.asarray(dataset)
    if rows.shape[0] == 0:
        raise ValueError("empty dataset")
    data = _rows_to_tensor(np.asarray(rows, dtype=float), network.input_shape)
    n = data.shape[0]
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n)
    n_val = int(round(config.validation_split * n))
    n_train = n - n_val
    if n_train < config.batch_size:
        raise ValueError(
            f"dataset too small: {n} rows leave {n_train} for training, "
            f"need at least one full batch of {config.batch_size}"
        )
    train_data = data[order[:n_train]]
    val_data = data[order[n_train:]]

    params = network.parameters()
    adam = AdamState.for_params(params, alpha=config.alpha)
    history = TrainHistory()
    best_val = np.inf
    best_params = None
    stale = 0

    for _ in range(config.max_epochs):
        perm = rng.permutation(n_train)
        sqerr = 0.0
        for start in range(0, n_train, config.batch_size):
            batch = train_data[perm[start : start + config.batch_size]]
            pred = network.forward(batch)
            sqerr += float(np.sum((pred - batch) ** 2))
            network.backward(mse_grad(pred, batch))
            adam_step(params, network.gradients(), adam)
        history.train_loss.append(sqerr / (n_train * data[0].size))
        val = (
            _eval_loss(network, val_data, config.batch_size)
            if n_val
            else history.train_loss[-1]
        )
        history.val_loss.append(val)

        if val < best_val:
            best_val = val
            best_params = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
        if val <= config.target_val_loss:
            history.stop_reason = StopReason.TARGET_REACHED
            return network, history
        if stale >= config.patience:
            for p, bp in zip(params, best_params):
                p[...] = bp
            history.stop_reason = StopReason.EARLY_STOPPED
            return network, history

    history.stop_reason = StopReason.MAX_EPOCHS
    return network, history
