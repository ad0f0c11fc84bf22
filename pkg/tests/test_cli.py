import os

import numpy as np
import pytest

from romae import cli, datagen, grid
from romae.cli import main


def run(args):
    return main([str(a) for a in args])


def test_fom_heat_csv(tmp_path):
    out = tmp_path / "heat.csv"
    assert run(["fom", "--model", "heat", "--n", 64, "--steps", 100, "--out", out]) == 0
    snap = grid.read_snapshot_csv(out)
    assert snap.rows == 64
    assert snap.cols == 101


def test_fom_ks_sample_count(tmp_path):
    out = tmp_path / "ks.csv"
    code = run(
        ["fom", "--model", "ks", "--n", 1024, "--steps", 200, "--samples", 200,
         "--dt", 0.05, "--out", out]
    )
    assert code == 0
    header = out.read_text().split("\n", 1)[0]
    assert header == "1024,200"


def test_fom_wave2d_cfl_exit_code(tmp_path, capsys):
    code = run(
        ["fom", "--model", "wave2d", "--n", 32, "--steps", 5, "--dt", 0.1,
         "--c", 1.0, "--out", tmp_path / "w.csv"]
    )
    assert code == 2
    assert "CFL" in capsys.readouterr().err


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    args = ["gen", "--method", "bbp", "--n", 10, "--mesh", 40, "--seed", 7]
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_trig_defaults(tmp_path):
    out = tmp_path / "trig.bin"
    assert run(
        ["gen", "--method", "trig", "--n", 8, "--mesh", 50, "--channels", 2,
         "--nmax", 10, "--amax", 5, "--omegamax", 10, "--out", out]
    ) == 0
    ts = datagen.load_training_set(out)
    assert ts.samples.shape == (8, 100)
    assert ts.channels == 2


def test_train_and_reconstruct_and_rom(tmp_path):
    data = tmp_path / "data.bin"
    # extended size for n=15 at 5%: 15 + 2*round(0.75) = 17 -> use mesh 16 directly
    assert run(["gen", "--method", "trig", "--n", 80, "--mesh", 16, "--out", data]) == 0

    model = tmp_path / "model.bin"
    code = run(
        ["train", "--data", data, "--latent", 2, "--nconv", 3, "--batch", 16,
         "--epochs", 2, "--target", 0, "--out", model, "--seed", 1]
    )
    assert code == 0
    assert model.exists()
    hist = (tmp_path / "model.bin_history.csv").read_text().splitlines()
    assert hist[0] == "epoch,train_loss,val_loss"
    assert len(hist) == 3

    # snapshots on the matching base mesh (14 + 2*round(0.7) = 16)
    snap = tmp_path / "snap.csv"
    assert run(
        ["fom", "--model", "heat", "--n", 14, "--steps", 4, "--u0", "sine", "--out", snap]
    ) == 0
    code = run(
        ["reconstruct", "--model-file", model, "--snapshots", snap,
         "--blur", 0.8, "--out", tmp_path / "rec"]
    )
    assert code == 0
    assert (tmp_path / "rec_recon.csv").exists()
    assert (tmp_path / "rec_recon_ext.csv").exists()
    errs = (tmp_path / "rec_errors.csv").read_text().splitlines()
    assert errs[0] == "snapshot,channel,rel_l2"
    assert len(errs) == 6

    code = run(
        ["rom", "--model", "heat", "--n", 14, "--steps", 5, "--dt", 1e-4,
         "--u0", "sine", "--model-file", model, "--out", tmp_path / "rom"]
    )
    assert code == 0
    gn = (tmp_path / "rom_gn.csv").read_text().splitlines()
    assert gn[0] == "step,gn_iters,residual_norm"
    rom_mat = grid.read_snapshot_csv(tmp_path / "rom_rom.csv")
    fom_mat = grid.read_snapshot_csv(tmp_path / "rom_fom.csv")
    assert rom_mat.rows == fom_mat.rows == 14
    assert rom_mat.cols == 6


def test_rom_identity_decoder_exact(tmp_path):
    code = run(
        ["rom", "--model", "heat", "--n", 20, "--steps", 10, "--dt", 1e-4,
         "--identity-decoder", "--extension", 0.0, "--out", tmp_path / "idrom"]
    )
    assert code == 0
    rom_mat = grid.read_snapshot_csv(tmp_path / "idrom_rom.csv")
    fom_mat = grid.read_snapshot_csv(tmp_path / "idrom_fom.csv")
    assert np.max(np.abs(rom_mat.data - fom_mat.data)) <= 1e-8


def test_svd_flow(tmp_path):
    snap = tmp_path / "snap.csv"
    run(["fom", "--model", "heat", "--n", 24, "--steps", 10, "--out", snap])
    spec_csv = tmp_path / "spec.csv"
    assert run(["svd", "--snapshots", snap, "--out", spec_csv]) == 0
    lines = spec_csv.read_text().splitlines()
    assert lines[0] == "index,sigma"
    sigmas = [float(l.split(",")[1]) for l in lines[1:]]
    assert sigmas == sorted(sigmas, reverse=True)


def test_svd_missing_file_exit_4(tmp_path):
    assert run(["svd", "--snapshots", tmp_path / "nope.csv", "--out", tmp_path / "s.csv"]) == 4


def test_corrupt_model_exit_4(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTROMAE" + bytes(100))
    snap = tmp_path / "snap.csv"
    run(["fom", "--model", "heat", "--n", 14, "--steps", 2, "--out", snap])
    assert run(["reconstruct", "--model-file", bad, "--snapshots", snap,
                "--out", tmp_path / "r"]) == 4


def test_bad_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_key = 3\n")
    assert run(["fom", "--config", cfg, "--out", tmp_path / "x.csv"]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "heat.cfg"
    cfg.write_text(
        "model = heat\nn = 32\nsteps = 4\ndt = 1e-4\nu0 = sine  # endpoint-safe\n"
    )
    out = tmp_path / "o.csv"
    assert run(["fom", "--config", cfg, "--steps", 6, "--out", out]) == 0
    snap = grid.read_snapshot_csv(out)
    assert snap.rows == 32 and snap.cols == 7


def test_samples_must_divide_steps(tmp_path):
    assert run(["fom", "--model", "heat", "--n", 16, "--steps", 100,
                "--samples", 33, "--out", tmp_path / "x.csv"]) == 2


def test_dirichlet_endpoint_validation(tmp_path):
    np.savetxt(tmp_path / "u0.txt", np.ones(16))
    code = run(["fom", "--model", "heat", "--n", 16, "--steps", 2,
                "--u0", f"file:{tmp_path / 'u0.txt'}", "--out", tmp_path / "x.csv"])
    assert code == 2
