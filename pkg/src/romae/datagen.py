"""Model-independent training data: random smooth functions on a mesh.

Two generators: a Brownian-bridge path smoothed by a natural cubic spline,
and sums of randomly drawn sinusoids. 2D samples are outer products of two
independent 1D draws. Every sample gets its own RNG stream spawned from the
dataset seed, so generation is reproducible and order-independent.
"""

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import FormatError
from .grid import Mesh1D, Mesh2D

_MAGIC = b"ROMDATA1"


@dataclass(frozen=True)
class TrigParams:
    n_max: int = 10
    a_max: float = 5.0
    omega_max: float = 10.0

    def __post_init__(self):
        if self.n_max < 1 or self.a_max <= 0 or self.omega_max <= 0:
            raise ValueError(f"trig parameters must be positive, got {self}")


class SampleMethod(Enum):
    BBP = "bbp"
    TRIG = "trig"
    TENSOR2D = "tensor2d"


_METHOD_TAGS = {SampleMethod.BBP: 0, SampleMethod.TRIG: 1, SampleMethod.TENSOR2D: 2}
_TAG_METHODS = {v: k for k, v in _METHOD_TAGS.items()}


@dataclass(frozen=True)
class TrainingSet:
    """Rows are samples; channels=2 rows hold two draws concatenated (u, v)."""

    samples: np.ndarray
    method: SampleMethod
    mesh: object
    channels: int
    seed: int


def brownian_bridge(n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Bridge-style random path of length n_steps.

    B[0] is a unit normal draw; each later point follows
    B[n] = B[n-1] * (1 - dt / (1 - t)) + sqrt(dt) * normal with t = n * dt
    and dt = 1 / n_steps, which drives the path toward zero at the far end.
    """
    if n_steps < 4:
        raise ValueError(f"bridge needs at least 4 steps, got {n_steps}")
    dt = 1.0 / n_steps
    b = np.empty(n_steps)
    b[0] = rng.standard_normal()
    for n in range(1, n_steps):
        t = n * dt
        b[n] = b[n - 1] * (1.0 - dt / (1.0 - t)) + np.sqrt(dt) * rng.standard_normal()
    return b


def bbp_sample(mesh: Mesh1D, rng: np.random.Generator) -> np.ndarray:
    """Bridge through uniformly placed knots, splined onto the mesh."""
    n_x = int(rng.integers(4, mesh.n + 1))
    bridge = brownian_bridge(n_x, rng)
    knots = np.linspace(mesh.x_min, mesh.x_max, n_x)
    spline = CubicSpline(knots, bridge, bc_type="natural")
    return spline(mesh.points())


def trig_sample(mesh: Mesh1D, params: TrigParams, rng: np.random.Generator) -> np.ndarray:
    """Sum of N ~ U{1..n_max} sinusoids with amplitudes in (0, a_max],
    frequencies in (0, omega_max], phases in [0, 2*pi)."""
    x = mesh.points()
    n_terms = int(rng.integers(1, params.n_max + 1))
    out = np.zeros(mesh.n)
    for _ in range(n_terms):
        omega = (1.0 - rng.random()) * params.omega_max
        amp = (1.0 - rng.random()) * params.a_max
        phi = rng.random() * 2.0 * np.pi
        out += amp * np.sin(omega * x + phi)
    return out


def tensor2d_sample(mesh: Mesh2D, method: SampleMethod, rng: np.random.Generator,
                    params: TrigParams | None = None) -> np.ndarray:
    """Rank-one field g(x) h(y) from two independent 1D draws."""
    if method is SampleMethod.BBP:
        g = bbp_sample(mesh.mesh_x, rng)
        h = bbp_sample(mesh.mesh_y, rng)
    elif method is SampleMethod.TRIG:
        p = params if params is not None else TrigParams()
        g = trig_sample(mesh.mesh_x, p, rng)
        h = trig_sample(mesh.mesh_y, p, rng)
    else:
        raise ValueError(f"tensor sampling needs a 1D method, got {method}")
    return np.outer(g, h)


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    # one spawned stream per sample index; see SeedSequence spawn keys
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def build_training_set(
    n_samples: int,
    mesh,
    method: SampleMethod,
    channels: int = 1,
    params: TrigParams | None = None,
    seed: int = 0,
) -> TrainingSet:
    """Assemble a deterministic dataset of random smooth functions.

    channels=2 concatenates two independent draws per row (a u part and a
    v part). 2D sampling is single-channel and rows are flattened fields.
    """
    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    if channels not in (1, 2):
        raise ValueError(f"channels must be 1 or 2, got {channels}")
    params = params if params is not None else TrigParams()

    if method is SampleMethod.TENSOR2D:
        if not isinstance(mesh, Mesh2D):
            raise ValueError("tensor2d sampling requires a 2D mesh")
        if channels != 1:
            raise ValueError("tensor2d sampling is single-channel")
        width = mesh.total_points
        inner = SampleMethod.TRIG

        def draw(rng):
            return tensor2d_sample(mesh, inner, rng, params).ravel()

    elif method in (SampleMethod.BBP, SampleMethod.TRIG):
        if not isinstance(mesh, Mesh1D):
            raise ValueError(f"{method.value} sampling requires a 1D mesh")
        width = mesh.n * channels

        if method is SampleMethod.BBP:
            def draw(rng):
                return bbp_sample(mesh, rng)
        else:
            def draw(rng):
                return trig_sample(mesh, params, rng)

    else:
        raise ValueError(f"unknown sampling method {method}")

    rows = np.empty((n_samples, width))
    for i in range(n_samples):
        rng = _sample_rng(seed, i)
        if method is SampleMethod.TENSOR2D or channels == 1:
            rows[i] = draw(rng)
        else:
            rows[i] = np.concatenate((draw(rng), draw(rng)))
    return TrainingSet(rows, method, mesh, channels, seed)


def save_training_set(ts: TrainingSet, path) -> None:
    """Binary layout: magic, then u64 N/width/channels/method/seed, then
    row-major float64 samples (little-endian)."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        n, width = ts.samples.shape
        f.write(struct.pack("<5Q", n, width, ts.channels, _METHOD_TAGS[ts.method], ts.seed))
        f.write(np.ascontiguousarray(ts.samples, dtype="<f8").tobytes())


def load_training_set(path) -> TrainingSet:
    """Read a dataset back (mesh identity is not stored; mesh is None)."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 8 or blob[:8] != _MAGIC:
        raise FormatError("bad training-set magic", offset=0)
    if len(blob) < 48:
        raise FormatError("training-set header truncated", offset=len(blob))
    n, width, channels, tag, seed = struct.unpack("<5Q", blob[8:48])
    if tag not in _TAG_METHODS:
        raise FormatError(f"unknown method tag {tag}", offset=32)
    expected = 48 + n * width * 8
    if len(blob) != expected:
        raise FormatError(
            f"training-set payload has {len(blob) - 48} bytes, expected {n * width * 8}",
            offset=min(len(blob), expected),
        )
    data = np.frombuffer(blob[48:], dtype="<f8").reshape(n, width).astype(float)
    return TrainingSet(data, _TAG_METHODS[tag], None, int(channels), int(seed))
