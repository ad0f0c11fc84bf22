import numpy as np
import pytest

from romae import datagen, grid
from romae.datagen import SampleMethod, TrigParams
from romae.errors import FormatError


def test_bridge_minimum_size():
    rng = np.random.default_rng(0)
    b = datagen.brownian_bridge(4, rng)
    assert b.shape == (4,) and np.all(np.isfinite(b))
    with pytest.raises(ValueError):
        datagen.brownian_bridge(3, rng)


def test_bridge_zero_noise(fake_rng):
    b = datagen.brownian_bridge(8, fake_rng(normals=[0.0] * 8))
    assert np.array_equal(b, np.zeros(8))


def test_bridge_variance_vs_recurrence_oracle():
    # exact variance propagation of the recurrence:
    #   Var[B_n] = Var[B_{n-1}] (1 - dt/(1-t))^2 + dt,  t = n dt
    n_steps, n_paths = 16, 100_000
    dt = 1.0 / n_steps
    var = np.empty(n_steps)
    var[0] = 1.0
    for n in range(1, n_steps):
        t = n * dt
        var[n] = var[n - 1] * (1.0 - dt / (1.0 - t)) ** 2 + dt

    rng = np.random.default_rng(2024)
    paths = np.array([datagen.brownian_bridge(n_steps, rng) for _ in range(n_paths)])
    sample_var = paths.var(axis=0, ddof=1)
    # 4 sigma of the variance estimator per index (16 simultaneous checks)
    tol = 4.0 * var * np.sqrt(2.0 / (n_paths - 1))
    assert np.all(np.abs(sample_var - var) <= tol)


def test_bbp_sample_length():
    mesh = grid.make_mesh(0, 1, 500)
    out = datagen.bbp_sample(mesh, np.random.default_rng(5))
    assert out.shape == (500,) and np.all(np.isfinite(out))


def test_bbp_knots_equal_mesh(fake_rng):
    # force n_x = n so the spline knots coincide with the mesh points and the
    # sample reproduces the bridge values
    mesh = grid.make_mesh(0, 1, 12)
    normals = list(np.random.default_rng(9).standard_normal(12))
    rng = fake_rng(normals=normals, integers=[12])
    out = datagen.bbp_sample(mesh, rng)
    bridge = datagen.brownian_bridge(12, fake_rng(normals=normals))
    assert np.max(np.abs(out - bridge)) <= 1e-10 * max(1.0, np.max(np.abs(bridge)))


def test_trig_bound():
    mesh = grid.make_mesh(0, 1, 200)
    params = TrigParams()
    rng = np.random.default_rng(7)
    for _ in range(50):
        f = datagen.trig_sample(mesh, params, rng)
        assert np.max(np.abs(f)) <= params.n_max * params.a_max


def test_trig_single_term(fake_rng):
    mesh = grid.make_mesh(0, 1, 64)
    params = TrigParams()
    # one term with omega = pi, A = 1, phi = 0
    rng = fake_rng(integers=[1], uniforms=[1 - np.pi / 10, 1 - 1 / 5, 0.0])
    out = datagen.trig_sample(mesh, params, rng)
    assert np.max(np.abs(out - np.sin(np.pi * mesh.points()))) < 1e-12


def test_trig_defaults():
    p = TrigParams()
    assert (p.n_max, p.a_max, p.omega_max) == (10, 5.0, 10.0)
    with pytest.raises(ValueError):
        TrigParams(n_max=0)


def test_tensor2d_rank_one():
    mesh = grid.Mesh2D(grid.make_mesh(0, 1, 40), grid.make_mesh(0, 1, 40))
    f = datagen.tensor2d_sample(mesh, SampleMethod.TRIG, np.random.default_rng(11))
    s = np.linalg.svd(f, compute_uv=False)
    assert s[1] <= 1e-10 * s[0]


def test_tensor2d_is_outer_product_of_draws():
    mesh = grid.Mesh2D(grid.make_mesh(0, 1, 16), grid.make_mesh(0, 2, 24))
    f = datagen.tensor2d_sample(mesh, SampleMethod.TRIG, np.random.default_rng(3))
    rng = np.random.default_rng(3)
    g = datagen.trig_sample(mesh.mesh_x, TrigParams(), rng)
    h = datagen.trig_sample(mesh.mesh_y, TrigParams(), rng)
    assert np.array_equal(f, np.outer(g, h))


def test_build_training_set_shapes_and_determinism():
    mesh = grid.make_mesh(0, 1, 50)
    a = datagen.build_training_set(7, mesh, SampleMethod.TRIG, channels=2, seed=99)
    b = datagen.build_training_set(7, mesh, SampleMethod.TRIG, channels=2, seed=99)
    assert a.samples.shape == (7, 100)
    assert np.array_equal(a.samples, b.samples)
    c = datagen.build_training_set(7, mesh, SampleMethod.TRIG, channels=2, seed=100)
    assert not np.array_equal(a.samples, c.samples)


def test_build_training_set_stream_split():
    # row i comes from the stream SeedSequence(seed, spawn_key=(i,))
    mesh = grid.make_mesh(0, 1, 30)
    ts = datagen.build_training_set(5, mesh, SampleMethod.TRIG, channels=2, seed=21)
    rng3 = np.random.default_rng(np.random.SeedSequence(21, spawn_key=(3,)))
    u = datagen.trig_sample(mesh, TrigParams(), rng3)
    v = datagen.trig_sample(mesh, TrigParams(), rng3)
    assert np.array_equal(ts.samples[3], np.concatenate((u, v)))


def test_build_training_set_2d():
    mesh = grid.Mesh2D(grid.make_mesh(0, 1, 12), grid.make_mesh(0, 1, 12))
    ts = datagen.build_training_set(4, mesh, SampleMethod.TENSOR2D, seed=1)
    assert ts.samples.shape == (4, 144)
    with pytest.raises(ValueError):
        datagen.build_training_set(4, mesh, SampleMethod.TENSOR2D, channels=2, seed=1)


def test_samples_all_finite_bulk():
    mesh = grid.make_mesh(0, 1, 500)
    trig = datagen.build_training_set(1200, mesh, SampleMethod.TRIG, channels=2, seed=0)
    assert np.all(np.isfinite(trig.samples))
    bbp = datagen.build_training_set(300, mesh, SampleMethod.BBP, channels=1, seed=0)
    assert np.all(np.isfinite(bbp.samples))


def test_training_set_roundtrip(tmp_path):
    mesh = grid.make_mesh(0, 1, 20)
    ts = datagen.build_training_set(6, mesh, SampleMethod.BBP, channels=2, seed=17)
    path = tmp_path / "data.bin"
    datagen.save_training_set(ts, path)
    back = datagen.load_training_set(path)
    assert np.array_equal(back.samples, ts.samples)
    assert back.method is SampleMethod.BBP
    assert back.channels == 2 and back.seed == 17


def test_training_set_format_errors(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\0" * 48)
    with pytest.raises(FormatError):
        datagen.load_training_set(path)
    path.write_bytes(b"ROMDATA1" + b"\0" * 10)
    with pytest.raises(FormatError):
        datagen.load_training_set(path)
    # truncated payload
    mesh = grid.make_mesh(0, 1, 8)
    ts = datagen.build_training_set(2, mesh, SampleMethod.TRIG, seed=3)
    good = tmp_path / "good.bin"
    datagen.save_training_set(ts, good)
    blob = good.read_bytes()
    bad = tmp_path / "trunc.bin"
    bad.write_bytes(blob[:-8])
    with pytest.raises(FormatError):
        datagen.load_training_set(bad)
