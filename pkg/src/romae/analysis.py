"""Singular-value diagnostics and error metrics for snapshot matrices."""

from dataclasses import dataclass

import numpy as np

from .grid import SnapshotMatrix
from .kernels import jacobi_eigvals


@dataclass(frozen=True)
class SingularSpectrum:
    """Descending singular values plus the Frobenius norm of the source."""

    sigmas: np.ndarray
    frobenius: float

    def __post_init__(self):
        if np.any(self.sigmas < 0):
            raise ValueError("singular values must be nonnegative")
        if np.any(np.diff(self.sigmas) > 0):
            raise ValueError("singular values must be sorted descending")


def singular_values(a) -> SingularSpectrum:
    """Singular values via Jacobi eigenvalues of the smaller Gram matrix.

    Accepts a SnapshotMatrix or a plain 2D array. Eigenvalues are clamped at
    zero before the square root.
    """
    mat = a.data if isinstance(a, SnapshotMatrix) else np.asarray(a, dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValueError(f"need a nonempty 2D matrix, got shape {mat.shape}")
    if mat.shape[0] >= mat.shape[1]:
        gram = mat.T @ mat
    else:
        gram = mat @ mat.T
    eigs = jacobi_eigvals(np.ascontiguousarray(gram))
    # eigenvalues below the sweep tolerance are numerical zeros; without the
    # clamp the square root would inflate them to ~1e-6 * sigma_1
    floor = 1e-12 * float(np.max(eigs, initial=0.0))
    eigs = np.where(eigs < max(floor, 0.0), 0.0, eigs)
    sigmas = np.sort(np.sqrt(eigs))[::-1]
    return SingularSpectrum(sigmas, float(np.linalg.norm(mat)))


def pod_projection_error(spectrum: SingularSpectrum, k: int) -> float:
    """Relative Frobenius truncation error of the best rank-k approximation."""
    m = spectrum.sigmas.shape[0]
    if not 0 <= k <= m:
        raise ValueError(f"k must be in [0, {m}], got {k}")
    total = float(np.sum(spectrum.sigmas**2))
    if total == 0.0:
        return 0.0
    tail = float(np.sum(spectrum.sigmas[k:] ** 2))
    return float(np.sqrt(tail / total))


def rel_l2_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||; raises ZeroDivisionError for a zero reference."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.shape} vs {b.shape}")
    ref = float(np.linalg.norm(b))
    if ref == 0.0:
        raise ZeroDivisionError("reference vector has zero norm")
    return float(np.linalg.norm(a - b)) / ref


def write_spectrum_csv(spectrum: SingularSpectrum, path) -> None:
    """Rows of `index,sigma`, descending."""
    with open(path, "w") as f:
        f.write("index,sigma\n")
        for i, s in enumerate(spectrum.sigmas):
            f.write(f"{i},{s:.16e}\n")
