"""Uniform meshes, state vectors, snapshot matrices, and mesh extension.

Mesh extension pads a discretized function onto a slightly larger uniform
grid using tangent-line (1D) or tangent-plane (2D) extrapolation at the
boundary; truncation removes the pad again. Snapshot matrices collect
column-stacked states over time and round-trip through a CSV format.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import FormatError


@dataclass(frozen=True)
class Mesh1D:
    """Uniform 1D grid of ``n`` points spanning [x_min, x_max] inclusive."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"mesh needs at least 3 points, got n={self.n}")
        if not self.x_max > self.x_min:
            raise ValueError(f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)


@dataclass(frozen=True)
class Mesh2D:
    """Tensor-product grid; fields are indexed [i, j] <-> (x_i, y_j)."""

    mesh_x: Mesh1D
    mesh_y: Mesh1D

    @property
    def shape(self) -> tuple:
        return (self.mesh_x.n, self.mesh_y.n)

    @property
    def total_points(self) -> int:
        return self.mesh_x.n * self.mesh_y.n


@dataclass(frozen=True)
class ExtendedMesh:
    """A base mesh plus ``pad`` extra points per side (per axis in 2D)."""

    base: object  # Mesh1D or Mesh2D
    pad: int

    def __post_init__(self):
        if self.pad < 0:
            raise ValueError(f"pad must be nonnegative, got {self.pad}")

    @property
    def is_2d(self) -> bool:
        return isinstance(self.base, Mesh2D)

    def extended_mesh(self):
        """The padded grid as a plain mesh (spacing equals the base spacing)."""
        if self.is_2d:
            return Mesh2D(
                _extend_1d_mesh(self.base.mesh_x, self.pad),
                _extend_1d_mesh(self.base.mesh_y, self.pad),
            )
        return _extend_1d_mesh(self.base, self.pad)

    @property
    def extended_shape(self) -> tuple:
        if self.is_2d:
            return (self.base.mesh_x.n + 2 * self.pad, self.base.mesh_y.n + 2 * self.pad)
        return (self.base.n + 2 * self.pad,)


def _extend_1d_mesh(mesh: Mesh1D, pad: int) -> Mesh1D:
    dx = mesh.dx
    return Mesh1D(mesh.x_min - pad * dx, mesh.x_max + pad * dx, mesh.n + 2 * pad)


class Layout(Enum):
    SCALAR = "scalar"
    SCALAR_WITH_VELOCITY = "scalar_with_velocity"


@dataclass(frozen=True)
class StateVector:
    """A discretized state: u, or u followed by v for second-order models."""

    layout: Layout
    values: np.ndarray
    mesh_ref: object

    def __post_init__(self):
        npoints = (
            self.mesh_ref.total_points
            if isinstance(self.mesh_ref, Mesh2D)
            else self.mesh_ref.n
        )
        expected = npoints if self.layout is Layout.SCALAR else 2 * npoints
        if self.values.shape != (expected,):
            raise ValueError(
                f"state length {self.values.shape} does not match layout/mesh "
                f"(expected ({expected},))"
            )


@dataclass(frozen=True)
class SnapshotMatrix:
    """Column-stacked states sampled at strictly increasing times."""

    data: np.ndarray  # (rows, cols), column-major
    times: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError("snapshot data must be 2D")
        if self.data.shape[1] != self.times.shape[0]:
            raise ValueError(
                f"{self.data.shape[1]} columns but {self.times.shape[0]} times"
            )
        if self.times.shape[0] > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def make_mesh(x_min: float, x_max: float, n: int) -> Mesh1D:
    """Uniform mesh on [x_min, x_max] with n points (endpoints exact)."""
    return Mesh1D(float(x_min), float(x_max), int(n))


def extend_mesh(mesh, fraction: float) -> ExtendedMesh:
    """Pad a mesh by round(fraction * n) points per side.

    For 2D meshes the pad count comes from the x-axis point count and is
    applied to both axes.
    """
    if not 0.0 <= fraction <= 0.5:
        raise ValueError(f"extension fraction must be in [0, 0.5], got {fraction}")
    n = mesh.mesh_x.n if isinstance(mesh, Mesh2D) else mesh.n
    pad = int(round(fraction * n))
    return ExtendedMesh(mesh, pad)


def _tangent_extend_1d(values: np.ndarray, pad: int, dx: float) -> np.ndarray:
    n = values.shape[0]
    out = np.empty(n + 2 * pad)
    out[pad : pad + n] = values
    if pad == 0:
        return out
    # one-sided second-order slope at each boundary
    slope_l = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx)
    slope_r = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dx)
    j = np.arange(1, pad + 1)
    out[pad - j] = values[0] - j * dx * slope_l
    out[pad + n - 1 + j] = values[-1] + j * dx * slope_r
    return out


def extend_function(values: np.ndarray, ext: ExtendedMesh) -> np.ndarray:
    """Extend a function onto the padded mesh by tangent extrapolation.

    1D input is a vector of base-mesh values; 2D input is a field shaped
    (nx, ny). The 2D extension runs axis by axis (x then y), which also
    fills the corners.
    """
    values = np.asarray(values, dtype=float)
    if ext.is_2d:
        nx, ny = ext.base.shape
        if values.shape != (nx, ny):
            raise ValueError(f"field shape {values.shape} != base {(nx, ny)}")
        dx = ext.base.mesh_x.dx
        dy = ext.base.mesh_y.dx
        step1 = np.empty((nx + 2 * ext.pad, ny))
        for j in range(ny):
            step1[:, j] = _tangent_extend_1d(values[:, j], ext.pad, dx)
        out = np.empty((nx + 2 * ext.pad, ny + 2 * ext.pad))
        for i in range(step1.shape[0]):
            out[i, :] = _tangent_extend_1d(step1[i, :], ext.pad, dy)
        return out
    if values.shape != (ext.base.n,):
        raise ValueError(f"vector length {values.shape} != base n={ext.base.n}")
    return _tangent_extend_1d(values, ext.pad, ext.base.dx)


def truncate_function(values_ext: np.ndarray, ext: ExtendedMesh) -> np.ndarray:
    """Slice the interior (base-mesh) part out of an extended function."""
    values_ext = np.asarray(values_ext, dtype=float)
    p = ext.pad
    if ext.is_2d:
        if values_ext.shape != ext.extended_shape:
            raise ValueError(
                f"extended field shape {values_ext.shape} != {ext.extended_shape}"
            )
        if p == 0:
            return values_ext.copy()
        return values_ext[p:-p, p:-p].copy()
    if values_ext.shape != ext.extended_shape:
        raise ValueError(
            f"extended length {values_ext.shape} != {ext.extended_shape}"
        )
    if p == 0:
        return values_ext.copy()
    return values_ext[p:-p].copy()


def assemble_snapshots(states, times) -> SnapshotMatrix:
    """Stack states as columns; one time per state."""
    times = np.asarray(times, dtype=float)
    if len(states) == 0:
        raise ValueError("need at least one state")
    if len(states) != times.shape[0]:
        raise ValueError(f"{len(states)} states but {times.shape[0]} times")
    first = states[0]
    for s in states[1:]:
        if s.layout is not first.layout or s.mesh_ref != first.mesh_ref:
            raise ValueError("states must share layout and mesh")
    data = np.asfortranarray(np.column_stack([s.values for s in states]))
    return SnapshotMatrix(data, times)


def write_snapshot_csv(snap: SnapshotMatrix, path) -> None:
    """CSV layout: `rows,cols`, then the times line, then one line per row."""
    with open(path, "w") as f:
        f.write(f"{snap.rows},{snap.cols}\n")
        f.write(",".join(f"{t:.16e}" for t in snap.times) + "\n")
        for i in range(snap.rows):
            f.write(",".join(f"{v:.16e}" for v in snap.data[i, :]) + "\n")


def read_snapshot_csv(path) -> SnapshotMatrix:
    with open(path) as f:
        lines = f.read().splitlines()
    if len(lines) < 2:
        raise FormatError("snapshot CSV truncated", offset=len(lines))
    try:
        rows, cols = (int(v) for v in lines[0].split(","))
    except ValueError as exc:
        raise FormatError(f"bad snapshot CSV header: {lines[0]!r}", offset=0) from exc
    times = np.array([float(v) for v in lines[1].split(",")])
    if times.shape[0] != cols:
        raise FormatError(f"expected {cols} times, got {times.shape[0]}", offset=1)
    if len(lines) < 2 + rows:
        raise FormatError(
            f"expected {rows} data lines, got {len(lines) - 2}", offset=len(lines)
        )
    data = np.empty((rows, cols), order="F")
    for i in range(rows):
        vals = lines[2 + i].split(",")
        if len(vals) != cols:
            raise FormatError(f"row {i} has {len(vals)} values, expected {cols}", offset=2 + i)
        data[i, :] = [float(v) for v in vals]
    return SnapshotMatrix(data, times)
