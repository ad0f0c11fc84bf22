import numpy as np
import pytest

from romae import kernels

needs_numba = pytest.mark.skipif(not kernels.USE_NUMBA, reason="numba path disabled")


def test_thomas_vs_dense():
    rng = np.random.default_rng(0)
    n = 64
    lo = rng.uniform(-1, 0, n)
    up = rng.uniform(-1, 0, n)
    d = np.abs(lo) + np.abs(up) + rng.uniform(1, 2, n)  # diagonally dominant
    rhs = rng.standard_normal(n)
    x = kernels.thomas_solve(lo, d, up, rhs)
    a = np.diag(d) + np.diag(up[:-1], 1) + np.diag(lo[1:], -1)
    assert np.max(np.abs(a @ x - rhs)) < 1e-12


def test_pentadiag_vs_dense_with_pivoting():
    rng = np.random.default_rng(1)
    n = 80
    bands = [rng.standard_normal(n) for _ in range(5)]
    bands[2] = bands[2] * 0.05  # weak diagonal forces pivoting
    a = (
        np.diag(bands[2])
        + np.diag(bands[3][:-1], 1)
        + np.diag(bands[4][:-2], 2)
        + np.diag(bands[1][1:], -1)
        + np.diag(bands[0][2:], -2)
    )
    rhs = rng.standard_normal(n)
    x = kernels.pentadiag_solve(*bands, rhs)
    expect = np.linalg.solve(a, rhs)
    assert np.max(np.abs(x - expect)) < 1e-9


def test_pentadiag_singular_returns_nan():
    n = 6
    z = np.zeros(n)
    out = kernels.pentadiag_solve(z, z, z, z, z, np.ones(n))
    assert np.all(np.isnan(out))


def test_jacobi_matches_numpy_reference():
    rng = np.random.default_rng(2)
    s = rng.standard_normal((20, 20))
    s = s + s.T
    got = np.sort(kernels.jacobi_eigvals(s))
    ref = np.sort(np.linalg.eigvalsh(s))
    assert np.max(np.abs(got - ref)) < 1e-10 * max(1.0, np.abs(ref).max())


@needs_numba
def test_conv1d_paths_agree():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((5, 32, 4))
    w = rng.standard_normal((5, 4, 8))
    b = rng.standard_normal(8)
    ya = kernels.conv1d_forward(x, w, b)
    yb = kernels.conv1d_forward_numpy(x, w, b)
    assert np.max(np.abs(ya - yb)) < 1e-12
    gy = rng.standard_normal(ya.shape)
    for a, b_ in zip(kernels.conv1d_backward(x, w, gy), kernels.conv1d_backward_numpy(x, w, gy)):
        assert np.max(np.abs(a - b_)) < 1e-12


@needs_numba
def test_conv2d_paths_agree():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((3, 8, 8, 2))
    w = rng.standard_normal((5, 5, 2, 4))
    b = rng.standard_normal(4)
    ya = kernels.conv2d_forward(x, w, b)
    yb = kernels.conv2d_forward_numpy(x, w, b)
    assert np.max(np.abs(ya - yb)) < 1e-12
    gy = rng.standard_normal(ya.shape)
    for a, b_ in zip(kernels.conv2d_backward(x, w, gy), kernels.conv2d_backward_numpy(x, w, gy)):
        assert np.max(np.abs(a - b_)) < 1e-12


@needs_numba
def test_jacobi_paths_agree():
    rng = np.random.default_rng(5)
    s = rng.standard_normal((15, 15))
    s = s + s.T
    a = np.sort(kernels.jacobi_eigvals(s))
    b = np.sort(kernels.jacobi_eigvals_numpy(s))
    assert np.max(np.abs(a - b)) < 1e-10


def test_env_flag_selects_numpy(monkeypatch):
    import importlib
    import os

    monkeypatch.setenv("ROMAE_NO_NUMBA", "1")
    import romae.kernels as km

    spec = importlib.util.spec_from_file_location("_kernels_nonumba", km.__file__)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    assert mod.USE_NUMBA is False
    assert mod.conv1d_forward is mod.conv1d_forward_numpy
