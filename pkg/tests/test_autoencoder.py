import numpy as np
import pytest

from romae import autoencoder as ae_mod
from romae.autoencoder import (
    AutoencoderSpec,
    JacobianMode,
    TrainedAutoencoder,
    build,
    gaussian_filter,
)
from romae.errors import FormatError
from romae.neural import AvgPool, Conv1D, Conv2D, Dense, Flatten, PReLU, Reshape, UpSample


def make_ae(spec=None, seed=0):
    spec = spec or AutoencoderSpec((64, 1), 8)
    net, enc_len = build(spec, seed=seed)
    return TrainedAutoencoder(spec, net, enc_len, seed=seed)


def test_spec_validation():
    spec = AutoencoderSpec((64, 1), 8)
    assert spec.reduction_factor == 8.0
    spec2 = AutoencoderSpec((72, 72, 1), 81)
    assert spec2.latent_dim == 81
    with pytest.raises(ValueError, match="divisible by 8"):
        AutoencoderSpec((63, 1), 8)
    with pytest.raises(ValueError):
        AutoencoderSpec((64, 1), 0)


def test_mirror_structure():
    spec = AutoencoderSpec((64, 1), 8, n_conv=3, n_dense=1)
    net, enc_len = build(spec)
    enc_kinds = [l.kind for l in net.layers[:enc_len]]
    dec_kinds = [l.kind for l in net.layers[enc_len:]]
    swap = {"avgpool": "upsample", "upsample": "avgpool", "flatten": "reshape",
            "reshape": "flatten"}
    mirrored = [swap.get(k, k) for k in reversed(enc_kinds)]
    assert dec_kinds == mirrored
    # final decoder layer is a linear-activation conv
    assert dec_kinds[-1] == "conv1d"


def test_encoder_decoder_shapes():
    ae = make_ae()
    u = np.random.default_rng(0).standard_normal(64)
    xi = ae.encode(u)
    assert xi.shape == (8,)
    out = ae.decode(xi)
    assert out.shape == (64,)
    assert np.array_equal(ae.encode(u), xi)
    assert np.array_equal(ae.reconstruct(u), ae.decode(ae.encode(u)))


def test_encode_rejects_bad_length():
    ae = make_ae()
    with pytest.raises(ValueError):
        ae.encode(np.zeros(63))
    with pytest.raises(ValueError):
        ae.decode(np.zeros(9))


def test_zero_weights_constant_output():
    ae = make_ae()
    for p in ae.network.parameters():
        p[:] = 0.0
    out = ae.decode(np.random.default_rng(1).standard_normal(8))
    assert np.allclose(out, out[0])


def test_2d_autoencoder_roundtrip_shapes():
    spec = AutoencoderSpec((16, 16, 1), 4, n_conv=2, base_filters=4)
    ae = make_ae(spec)
    u = np.random.default_rng(2).standard_normal(256)
    xi = ae.encode(u)
    assert xi.shape == (4,)
    assert ae.decode(xi).shape == (256,)


def linearized_ae():
    # slopes of 1 make every PReLU an identity, so the decoder is linear
    ae = make_ae(AutoencoderSpec((16, 1), 4, n_conv=2, base_filters=2), seed=5)
    for layer in ae.network.layers:
        if isinstance(layer, PReLU):
            layer.a[:] = 1.0
    return ae


def test_decoder_jacobian_linear_network():
    ae = linearizer = linearized_ae()
    xi = np.random.default_rng(3).standard_normal(4)
    jf = ae.decoder_jacobian(xi, JacobianMode.FORWARD)
    j3 = ae.decoder_jacobian(xi, JacobianMode.THREE_POINT)
    # linear decoder: jacobian equals the map on basis vectors
    origin = ae.decode(np.zeros(4))
    direct = np.column_stack([ae.decode(e) - origin for e in np.eye(4)])
    assert np.max(np.abs(jf - direct)) < 1e-12
    assert np.max(np.abs(jf - j3)) < 1e-7
    assert np.max(np.abs(jf - j3)) / max(1.0, np.max(np.abs(jf))) < 1e-7


def test_decoder_jacobian_modes_agree_random():
    ae = make_ae(AutoencoderSpec((32, 1), 6, n_conv=2), seed=7)
    xi = ae.encode(np.sin(np.linspace(0, np.pi, 32)))
    jf = ae.decoder_jacobian(xi, JacobianMode.FORWARD)
    j3 = ae.decoder_jacobian(xi, JacobianMode.THREE_POINT)
    rel = np.linalg.norm(jf - j3) / np.linalg.norm(jf)
    assert rel < 1e-5


def test_decoder_jacobian_column_is_directional_derivative():
    ae = make_ae(AutoencoderSpec((16, 1), 3, n_conv=2, base_filters=2), seed=9)
    xi = np.random.default_rng(5).standard_normal(3)
    jf = ae.decoder_jacobian(xi, JacobianMode.FORWARD)
    h = 1e-7
    e1 = np.zeros(3)
    e1[1] = h
    fd = (ae.decode(xi + e1) - ae.decode(xi - e1)) / (2 * h)
    assert np.max(np.abs(jf[:, 1] - fd)) < 1e-6


def test_decode_continuity():
    ae = make_ae(seed=11)
    xi = np.random.default_rng(6).standard_normal(8)
    base = ae.decode(xi)
    deltas = [1e-2, 1e-4, 1e-6]
    moves = [np.max(np.abs(ae.decode(xi + d) - base)) for d in deltas]
    assert moves[0] > moves[1] > moves[2]
    assert moves[2] < 1e-4


# ---------------------------------------------------------------------------
# Gaussian filter
# ---------------------------------------------------------------------------


def test_gaussian_sigma_zero_identity():
    v = np.random.default_rng(7).standard_normal(20)
    assert np.array_equal(gaussian_filter(v, 0.0), v)
    with pytest.raises(ValueError):
        gaussian_filter(v, -1.0)


def test_gaussian_constant_preserved():
    v = np.full(30, 2.5)
    assert np.allclose(gaussian_filter(v, 1.5), 2.5, atol=1e-14)


def test_gaussian_impulse_matches_kernel():
    n = 41
    v = np.zeros(n)
    v[20] = 1.0
    out = gaussian_filter(v, 1.0)
    radius = 3
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * offsets**2)
    kernel /= kernel.sum()
    expect = np.zeros(n)
    expect[20 - radius : 20 + radius + 1] = kernel
    assert np.max(np.abs(out - expect)) < 1e-14


def test_gaussian_mean_preserved():
    v = np.random.default_rng(8).standard_normal(25)
    assert abs(gaussian_filter(v, 2.0).mean() - v.mean()) < 1e-12


def test_gaussian_2d_matches_direct_kernel():
    rng = np.random.default_rng(9)
    f = rng.standard_normal((12, 12))
    out = gaussian_filter(f, 1.0)
    radius = 3
    offsets = np.arange(-radius, radius + 1)
    k1 = np.exp(-0.5 * offsets**2)
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    padded = np.pad(f, radius, mode="symmetric")
    expect = np.zeros_like(f)
    for i in range(12):
        for j in range(12):
            expect[i, j] = np.sum(k2 * padded[i : i + 7, j : j + 7])
    assert np.max(np.abs(out - expect)) < 1e-13


def test_smoothing_flag_in_decode_and_jacobian():
    spec = AutoencoderSpec((16, 1), 3, n_conv=2, base_filters=2, smooth_sigma=1.0)
    ae = make_ae(spec, seed=13)
    plain = make_ae(AutoencoderSpec((16, 1), 3, n_conv=2, base_filters=2), seed=13)
    xi = np.random.default_rng(10).standard_normal(3)
    assert np.allclose(ae.decode(xi), gaussian_filter(plain.decode(xi), 1.0), atol=1e-13)
    jf = ae.decoder_jacobian(xi, JacobianMode.FORWARD)
    j3 = ae.decoder_jacobian(xi, JacobianMode.THREE_POINT)
    assert np.linalg.norm(jf - j3) / np.linalg.norm(jf) < 1e-5


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def test_save_load_bit_exact(tmp_path):
    ae = make_ae(seed=17)
    ae.method = "trig"
    ae.epochs = 12
    path = tmp_path / "model.bin"
    ae_mod.save(ae, path)
    back = ae_mod.load(path)
    u = np.random.default_rng(11).standard_normal(64)
    assert np.array_equal(back.encode(u), ae.encode(u))
    assert np.array_equal(back.decode(back.encode(u)), ae.decode(ae.encode(u)))
    assert back.method == "trig" and back.epochs == 12 and back.seed == 17
    for a, b in zip(ae.network.parameters(), back.network.parameters()):
        assert np.array_equal(a, b)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"WRONGMAG" + bytes(64))
    with pytest.raises(FormatError) as err:
        ae_mod.load(path)
    assert err.value.offset == 0


def test_load_rejects_truncation(tmp_path):
    ae = make_ae(seed=19)
    path = tmp_path / "model.bin"
    ae_mod.save(ae, path)
    blob = path.read_bytes()
    cut = tmp_path / "cut.bin"
    cut.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(FormatError):
        ae_mod.load(cut)


def test_bank_directory_convention(tmp_path):
    small = make_ae(AutoencoderSpec((16, 1), 2, n_conv=2, base_filters=2), seed=1)
    big = make_ae(AutoencoderSpec((64, 1), 8), seed=2)
    bank = tmp_path / "bank"
    bank.mkdir()
    p1 = ae_mod.bank_path(bank, 16, 2)
    p2 = ae_mod.bank_path(bank, 64, 8)
    ae_mod.save(small, p1)
    ae_mod.save(big, p2)
    assert ae_mod.load(p1).spec.input_size == 16
    assert ae_mod.load(p2).spec.input_size == 64


def test_reencode_drift_recorded():
    # re-encoding a manifold point should move it little; tracked, not gated
    ae = make_ae(seed=23)
    u = np.sin(np.linspace(0, np.pi, 64)) * 1.5
    once = ae.reconstruct(u)
    twice = ae.reconstruct(once)
    drift = np.linalg.norm(twice - once)
    first = np.linalg.norm(once - u)
    assert np.isfinite(drift) and np.isfinite(first)
