"""Mirrored convolutional autoencoder: construction, inference, Jacobians,
Gaussian smoothing, and weight-file persistence.

The encoder stacks conv units (conv -> PReLU -> average pool), a flatten,
then dense layers down to the latent dimension. The decoder is the exact
layer-kind mirror with pooling replaced by upsampling; its final layer has a
linear activation. Vectors passed to encode/decode are flat with blockwise
channels (u values, then v values).
"""

import math
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import FormatError
from .neural import (
    AvgPool,
    Conv1D,
    Conv2D,
    Dense,
    Flatten,
    Network,
    PReLU,
    Reshape,
    UpSample,
    _rows_to_tensor,
)

_MAGIC = b"ROMAE_01"

_KIND_TAGS = {
    "conv1d": 1,
    "conv2d": 2,
    "avgpool": 3,
    "upsample": 4,
    "dense": 5,
    "prelu": 6,
    "flatten": 7,
    "reshape": 8,
}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}

_METHOD_TAGS = {"none": 0, "bbp": 1, "trig": 2, "tensor2d": 3}
_TAG_METHODS = {v: k for k, v in _METHOD_TAGS.items()}


class JacobianMode(Enum):
    FORWARD = "forward"
    THREE_POINT = "3point"


@dataclass(frozen=True)
class AutoencoderSpec:
    """Architecture description. input_shape is spatial dims plus channels."""

    input_shape: tuple
    latent_dim: int
    n_conv: int = 3
    n_dense: int = 1
    kernel_size: int = 5
    base_filters: int = 8
    smooth_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        if len(self.input_shape) not in (2, 3):
            raise ValueError(
                f"input_shape needs 1 or 2 spatial dims plus channels, got {self.input_shape}"
            )
        if self.latent_dim < 1:
            raise ValueError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.n_conv < 1 or self.n_dense < 0:
            raise ValueError("need n_conv >= 1 and n_dense >= 0")
        factor = 2**self.n_conv
        for dim in self.spatial_shape:
            if dim % factor:
                raise ValueError(
                    f"spatial length {dim} not divisible by {factor} "
                    f"(2^n_conv with n_conv={self.n_conv})"
                )
        if self.smooth_sigma < 0:
            raise ValueError(f"smoothing sigma must be >= 0, got {self.smooth_sigma}")

    @property
    def spatial_shape(self) -> tuple:
        return self.input_shape[:-1]

    @property
    def channels(self) -> int:
        return self.input_shape[-1]

    @property
    def input_size(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def reduction_factor(self) -> float:
        return self.input_size / self.latent_dim

    def dense_sizes(self) -> list:
        """Hidden dense widths, geometric between the flattened conv size
        and the latent dimension."""
        pooled = [d // 2**self.n_conv for d in self.spatial_shape]
        flat = int(np.prod(pooled)) * self.base_filters * 2 ** (self.n_conv - 1)
        sizes = []
        for j in range(1, self.n_dense + 1):
            t = j / (self.n_dense + 1)
            sizes.append(max(self.latent_dim, round(flat ** (1 - t) * self.latent_dim**t)))
        return sizes

    def conv_filters(self) -> list:
        return [self.base_filters * 2**i for i in range(self.n_conv)]


def build(spec: AutoencoderSpec, seed: int = 0):
    """Construct the untrained mirrored network.

    Returns (network, encoder_len) where encoder_len is the number of
    leading layers forming the encoder.
    """
    rng = np.random.default_rng(seed)
    two_d = len(spec.spatial_shape) == 2
    conv = (lambda ci, co: Conv2D(spec.kernel_size, ci, co, rng)) if two_d else (
        lambda ci, co: Conv1D(spec.kernel_size, ci, co, rng)
    )
    filters = spec.conv_filters()

    encoder = []
    ch = spec.channels
    for f in filters:
        encoder.append(conv(ch, f))
        encoder.append(PReLU(f))
        encoder.append(AvgPool())
        ch = f
    encoder.append(Flatten())
    pooled = tuple(d // 2**spec.n_conv for d in spec.spatial_shape)
    flat = int(np.prod(pooled)) * filters[-1]
    prev = flat
    for h in spec.dense_sizes():
        encoder.append(Dense(prev, h, rng))
        encoder.append(PReLU(h))
        prev = h
    encoder.append(Dense(prev, spec.latent_dim, rng))

    decoder = []
    prev = spec.latent_dim
    for h in spec.dense_sizes()[::-1]:
        decoder.append(Dense(prev, h, rng))
        decoder.append(PReLU(h))
        prev = h
    decoder.append(Dense(prev, flat, rng))
    decoder.append(Reshape(pooled + (filters[-1],)))
    down = filters[::-1]
    for i, f in enumerate(down):
        target = spec.channels if i == len(down) - 1 else down[i + 1]
        decoder.append(UpSample())
        decoder.append(PReLU(f))
        decoder.append(conv(f, target))

    network = Network(encoder + decoder, spec.input_shape)
    return network, len(encoder)


@dataclass
class TrainedAutoencoder:
    """A built network with its spec and a training fingerprint."""

    spec: AutoencoderSpec
    network: Network
    encoder_len: int
    seed: int = 0
    method: str = "none"
    epochs: int = 0

    @property
    def latent_dim(self) -> int:
        return self.spec.latent_dim

    @property
    def state_size(self) -> int:
        return self.spec.input_size

    def _check_state(self, u):
        u = np.asarray(u, dtype=float).ravel()
        if u.shape != (self.spec.input_size,):
            raise ValueError(
                f"state length {u.shape[0]} != autoencoder input {self.spec.input_size}"
            )
        return u

    def encode(self, u: np.ndarray) -> np.ndarray:
        u = self._check_state(u)
        x = _rows_to_tensor(u[None, :], self.spec.input_shape)
        for layer in self.network.layers[: self.encoder_len]:
            x = layer.forward(x)
        return x.ravel()

    def decode(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).ravel()
        if xi.shape != (self.spec.latent_dim,):
            raise ValueError(f"latent length {xi.shape[0]} != d={self.spec.latent_dim}")
        x = xi[None, :]
        for layer in self.network.layers[self.encoder_len :]:
            x = layer.forward(x)
        out = self._tensor_to_rows(x)[0]
        if self.spec.smooth_sigma > 0:
            out = self._smooth_state(out)
        return out

    def reconstruct(self, u: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(u))

    def _tensor_to_rows(self, x):
        if self.spec.channels == 1:
            return x.reshape(x.shape[0], -1)
        moved = np.moveaxis(x, -1, 1)
        return moved.reshape(x.shape[0], -1)

    def _smooth_state(self, flat):
        sigma = self.spec.smooth_sigma
        spatial = self.spec.spatial_shape
        parts = flat.reshape((self.spec.channels,) + spatial)
        smoothed = np.stack([gaussian_filter(p, sigma) for p in parts])
        return smoothed.ravel()

    def decoder_jacobian(self, xi: np.ndarray, mode: JacobianMode = JacobianMode.FORWARD):
        """d(decode)/d(xi) as an (input_size, d) matrix."""
        xi = np.asarray(xi, dtype=float).ravel()
        d = self.spec.latent_dim
        if xi.shape != (d,):
            raise ValueError(f"latent length {xi.shape[0]} != d={d}")
        if mode is JacobianMode.THREE_POINT:
            cols = np.empty((self.spec.input_size, d))
            h0 = math.sqrt(np.finfo(float).eps)
            for i in range(d):
                h = h0 * max(1.0, abs(xi[i]))
                step = np.zeros(d)
                step[i] = h
                cols[:, i] = (self.decode(xi + step) - self.decode(xi - step)) / (2.0 * h)
            return cols

        # forward mode: primal pass to populate PReLU caches, then push the
        # d tangent basis vectors through the linearized decoder
        self.decode(xi)
        tangents = np.eye(d)
        for layer in self.network.layers[self.encoder_len :]:
            if isinstance(layer, PReLU):
                factor = np.where(layer._x >= 0.0, 1.0, layer.a)
                tangents = tangents * factor
            elif isinstance(layer, Dense):
                tangents = tangents @ layer.w
            elif isinstance(layer, Conv1D):
                tangents = kernels.conv1d_forward(tangents, layer.w, np.zeros(layer.w.shape[2]))
            elif isinstance(layer, Conv2D):
                tangents = kernels.conv2d_forward(tangents, layer.w, np.zeros(layer.w.shape[3]))
            else:
                tangents = layer.forward(tangents)
        rows = self._tensor_to_rows(tangents)
        if self.spec.smooth_sigma > 0:
            rows = np.stack([self._smooth_state(r) for r in rows])
        return rows.T


def gaussian_filter(values: np.ndarray, sigma: float) -> np.ndarray:
    """Discrete Gaussian smoothing with reflected boundaries.

    Kernel radius is ceil(3*sigma) and the sampled kernel is renormalized to
    sum to one, so constants pass through exactly. sigma = 0 is the identity.
    Works on 1D vectors and 2D fields (separable passes).
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    values = np.asarray(values, dtype=float)
    if sigma == 0:
        return values.copy()
    radius = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()

    def smooth_axis(arr, axis):
        padded = np.pad(
            arr,
            [(radius, radius) if a == axis else (0, 0) for a in range(arr.ndim)],
            mode="symmetric",
        )
        out = np.zeros_like(arr)
        for j, w in enumerate(kernel):
            sl = [slice(None)] * arr.ndim
            sl[axis] = slice(j, j + arr.shape[axis])
            out += w * padded[tuple(sl)]
        return out

    if values.ndim == 1:
        return smooth_axis(values, 0)
    if values.ndim == 2:
        return smooth_axis(smooth_axis(values, 0), 1)
    raise ValueError(f"expected a vector or 2D field, got ndim={values.ndim}")


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def bank_path(bank_dir, mesh_size: int, latent_dim: int) -> str:
    return f"{bank_dir}/ae_{mesh_size}_{latent_dim}.bin"


def save(ae: TrainedAutoencoder, path) -> None:
    """Little-endian weight file; round trips bit-exactly."""
    spec = ae.spec
    with open(path, "wb") as f:
        f.write(_MAGIC)
        spatial = spec.spatial_shape
        f.write(struct.pack("<Q", len(spatial)))
        f.write(struct.pack(f"<{len(spatial)}Q", *spatial))
        f.write(
            struct.pack(
                "<6Q",
                spec.channels,
                spec.latent_dim,
                spec.n_conv,
                spec.n_dense,
                spec.kernel_size,
                spec.base_filters,
            )
        )
        f.write(struct.pack("<d", spec.smooth_sigma))
        f.write(
            struct.pack(
                "<4Q",
                ae.encoder_len,
                ae.seed,
                _METHOD_TAGS.get(ae.method, 0),
                ae.epochs,
            )
        )
        f.write(struct.pack("<Q", len(ae.network.layers)))
        for layer in ae.network.layers:
            f.write(struct.pack("<B", _KIND_TAGS[layer.kind]))
            params = layer.params()
            f.write(struct.pack("<B", len(params)))
            for p in params:
                f.write(struct.pack("<B", p.ndim))
                f.write(struct.pack(f"<{p.ndim}Q", *p.shape))
                f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.blob):
            raise FormatError("weight file truncated", offset=self.pos)
        vals = struct.unpack_from(fmt, self.blob, self.pos)
        self.pos += size
        return vals

    def take_array(self, shape):
        count = int(np.prod(shape))
        size = count * 8
        if self.pos + size > len(self.blob):
            raise FormatError("weight file truncated", offset=self.pos)
        arr = np.frombuffer(self.blob, dtype="<f8", count=count, offset=self.pos)
        self.pos += size
        return arr.reshape(shape).astype(float)


def load(path) -> TrainedAutoencoder:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 8 or blob[:8] != _MAGIC:
        raise FormatError("bad weight-file magic", offset=0)
    r = _Reader(blob)
    r.pos = 8
    (ndim,) = r.take("<Q")
    if ndim not in (1, 2):
        raise FormatError(f"bad spatial rank {ndim}", offset=r.pos)
    spatial = r.take(f"<{ndim}Q")
    channels, latent, n_conv, n_dense, ksize, base = r.take("<6Q")
    (sigma,) = r.take("<d")
    encoder_len, seed, method_tag, epochs = r.take("<4Q")
    spec = AutoencoderSpec(
        input_shape=tuple(spatial) + (channels,),
        latent_dim=latent,
        n_conv=n_conv,
        n_dense=n_dense,
        kernel_size=ksize,
        base_filters=base,
        smooth_sigma=sigma,
    )
    network, built_len = build(spec, seed=0)
    if built_len != encoder_len:
        raise FormatError(
            f"encoder length {encoder_len} does not match architecture ({built_len})",
            offset=r.pos,
        )
    (n_layers,) = r.take("<Q")
    if n_layers != len(network.layers):
        raise FormatError(
            f"layer count {n_layers} does not match architecture ({len(network.layers)})",
            offset=r.pos,
        )
    for layer in network.layers:
        (tag,) = r.take("<B")
        if _TAG_KINDS.get(tag) != layer.kind:
            raise FormatError(
                f"layer kind tag {tag} does not match architecture ({layer.kind})",
                offset=r.pos - 1,
            )
        (n_params,) = r.take("<B")
        params = layer.params()
        if n_params != len(params):
            raise FormatError(
                f"{layer.kind} stores {n_params} arrays, expected {len(params)}",
                offset=r.pos - 1,
            )
        for p in params:
            (pndim,) = r.take("<B")
            shape = r.take(f"<{pndim}Q")
            if tuple(shape) != p.shape:
                raise FormatError(
                    f"parameter shape {tuple(shape)} != expected {p.shape}", offset=r.pos
                )
            p[...] = r.take_array(shape)
    if r.pos != len(blob):
        raise FormatError(f"{len(blob) - r.pos} trailing bytes", offset=r.pos)
    return TrainedAutoencoder(
        spec,
        network,
        encoder_len,
        seed=int(seed),
        method=_TAG_METHODS.get(method_tag, "none"),
        epochs=int(epochs),
    )
