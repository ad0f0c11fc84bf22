"""Command-line pipeline driver.

Subcommands: fom, gen, train, reconstruct, rom, svd. Options come from a
`key = value` config file plus command-line overrides; every run is
deterministic under its seed. Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 I/O or file-format error.
"""

import argparse
import os
import sys
import time
from dataclasses import dataclass, fields

import numpy as np

from . import analysis, autoencoder, datagen, grid, lspg, neural, pipeline
from .autoencoder import JacobianMode
from .errors import FormatError, NumericalError


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "heat"
    n: int = 64
    x_min: float = None
    x_max: float = None
    dt: float = 1e-4
    steps: int = 100
    samples: int = 0
    k: float = 1.0
    c: float = 1.0
    bc: str = "dirichlet"
    u0: str = ""
    v0: str = ""
    extension_fraction: float = 0.05
    latent_dim: int = 8
    n_conv: int = 3
    n_dense: int = 1
    kernel_size: int = 5
    base_filters: int = 8
    method: str = "trig"
    n_samples: int = 10000
    mesh_size: int = 500
    channels: int = 1
    n_max: int = 10
    a_max: float = 5.0
    omega_max: float = 10.0
    batch_size: int = 128
    validation_split: float = 0.2
    target_val_loss: float = 1e-5
    patience: int = 10
    max_epochs: int = 100
    alpha: float = 0.01
    seed: int = 0
    jacobian: str = "forward"
    sigma: float = 0.0
    data: str = ""
    model_file: str = ""
    snapshots: str = ""
    sweep: str = ""
    identity_decoder: bool = False
    out: str = "romae_out"


_DEFAULT_U0 = {"heat": "parabola", "wave1d": "parabola", "wave2d": "gaussian2d", "ks": "ks-cosine"}
_DEFAULT_V0 = {"wave1d": "three-sine", "wave2d": "zero"}


def _coerce(name: str, raw: str, target_type):
    try:
        if target_type is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_file(path) -> dict:
    field_types = {f.name: f.type for f in fields(RunConfig)}
    defaults = RunConfig()
    out = {}
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {line.rstrip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in field_types:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        current = getattr(defaults, key)
        ftype = type(current) if current is not None else float
        out[key] = _coerce(key, raw, ftype)
    return out


def load_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for f in fields(RunConfig):
        cli_val = getattr(args, f.name, None)
        if cli_val is not None:
            values[f.name] = cli_val
    cfg = RunConfig(**values)
    if not cfg.u0:
        cfg.u0 = _DEFAULT_U0.get(cfg.model, "zero")
    if not cfg.v0:
        cfg.v0 = _DEFAULT_V0.get(cfg.model, "zero")
    if cfg.x_min is None or cfg.x_max is None:
        lo, hi = pipeline.DEFAULT_DOMAINS.get(cfg.model, (0.0, 1.0))
        cfg.x_min = lo if cfg.x_min is None else cfg.x_min
        cfg.x_max = hi if cfg.x_max is None else cfg.x_max
    return cfg


def validate_config(cfg: RunConfig, need_problem=True) -> None:
    """Cross-field checks; everything rejected before any computation."""
    if cfg.model not in ("heat", "wave1d", "wave2d", "ks"):
        raise ConfigError(f"unknown model {cfg.model!r}")
    if cfg.n < 3:
        raise ConfigError(f"mesh size must be >= 3, got {cfg.n}")
    if cfg.dt <= 0:
        raise ConfigError(f"dt must be positive, got {cfg.dt}")
    if cfg.steps < 1:
        raise ConfigError(f"steps must be >= 1, got {cfg.steps}")
    if not 0.0 <= cfg.extension_fraction <= 0.5:
        raise ConfigError(f"extension fraction out of [0, 0.5]: {cfg.extension_fraction}")
    if cfg.samples and cfg.steps % cfg.samples:
        raise ConfigError(f"steps={cfg.steps} not a multiple of samples={cfg.samples}")
    if cfg.jacobian not in ("forward", "3point"):
        raise ConfigError(f"jacobian must be forward or 3point, got {cfg.jacobian!r}")
    if cfg.sigma < 0:
        raise ConfigError(f"smoothing sigma must be >= 0, got {cfg.sigma}")
    if not need_problem:
        return
    if cfg.model == "ks":
        if cfg.bc not in ("periodic", "dirichlet"):
            raise ConfigError("KS runs with periodic wrap")
    elif cfg.bc != "dirichlet":
        raise ConfigError(
            f"{cfg.model} low-order scheme supports Dirichlet boundaries only, got {cfg.bc!r}"
        )
    if cfg.model == "wave2d":
        mesh = pipeline.make_mesh(cfg.x_min, cfg.x_max, cfg.n)
        r = cfg.c * cfg.dt / mesh.dx
        if r**2 > 0.5:
            raise ConfigError(
                f"CFL violation: r^2 = {r**2:.4g} > 1/2 for the explicit 2D scheme"
            )
    for name in (cfg.u0, cfg.v0):
        if name.startswith("file:") and not os.path.exists(name[5:]):
            raise ConfigError(f"initial-condition file not found: {name[5:]}")


def _build_base_problem(cfg: RunConfig):
    if cfg.model == "wave2d":
        m1 = grid.make_mesh(cfg.x_min, cfg.x_max, cfg.n)
        mesh = grid.Mesh2D(m1, m1)
    else:
        mesh = grid.make_mesh(cfg.x_min, cfg.x_max, cfg.n)
    u0 = pipeline.named_initial_condition(cfg.u0, mesh, "u0")
    v0 = None
    if cfg.model in ("wave1d", "wave2d"):
        v0 = pipeline.named_initial_condition(cfg.v0, mesh, "v0")
    if cfg.model in ("heat", "wave1d") and cfg.bc == "dirichlet":
        tol = 1e-9 * max(1.0, float(np.max(np.abs(u0))))
        if abs(u0[0]) > tol or abs(u0[-1]) > tol:
            raise ConfigError(
                "Dirichlet run needs u0 to vanish at the domain endpoints"
            )
    return pipeline.build_problem(cfg.model, mesh, cfg.dt, u0, v0, k=cfg.k, c=cfg.c)


def cmd_fom(cfg: RunConfig) -> int:
    validate_config(cfg)
    problem = _build_base_problem(cfg)
    sample_every = cfg.steps // cfg.samples if cfg.samples else 1
    t0 = time.perf_counter()
    snap = pipeline.run_fom(problem, cfg.steps, sample_every=sample_every)
    wall = time.perf_counter() - t0
    if cfg.samples:
        # exactly `samples` equally spaced columns, dropping t = 0
        snap = grid.SnapshotMatrix(
            np.asfortranarray(snap.data[:, 1:]), snap.times[1:]
        )
    grid.write_snapshot_csv(snap, cfg.out)
    print(
        f"fom {cfg.model}: {cfg.steps} steps, matrix {snap.rows}x{snap.cols}, "
        f"{wall:.3f}s -> {cfg.out}"
    )
    return 0


def _gen_mesh(cfg: RunConfig):
    lo = 0.0 if cfg.x_min is None else cfg.x_min
    hi = 1.0 if cfg.x_max is None else cfg.x_max
    base = grid.make_mesh(lo, hi, cfg.mesh_size)
    if cfg.method == "tensor2d":
        return grid.Mesh2D(base, base)
    return base


def cmd_gen(cfg: RunConfig) -> int:
    if cfg.method not in ("trig", "bbp", "tensor2d"):
        raise ConfigError(f"unknown generation method {cfg.method!r}")
    if cfg.n_samples < 1:
        raise ConfigError(f"need n_samples >= 1, got {cfg.n_samples}")
    method = datagen.SampleMethod(cfg.method)
    params = datagen.TrigParams(cfg.n_max, cfg.a_max, cfg.omega_max)
    mesh = _gen_mesh(cfg)
    t0 = time.perf_counter()
    ts = datagen.build_training_set(
        cfg.n_samples, mesh, method, channels=cfg.channels, params=params, seed=cfg.seed
    )
    wall = time.perf_counter() - t0
    datagen.save_training_set(ts, cfg.out)
    print(
        f"gen {cfg.method}: {ts.samples.shape[0]}x{ts.samples.shape[1]} samples, "
        f"{wall:.3f}s -> {cfg.out}"
    )
    return 0


def _dataset_input_shape(ts, cfg):
    width = ts.samples.shape[1]
    if ts.method is datagen.SampleMethod.TENSOR2D:
        side = int(round(width**0.5))
        if side * side != width:
            raise ConfigError(f"2D dataset width {width} is not a square")
        return (side, side, 1)
    if width % ts.channels:
        raise ConfigError(f"width {width} not divisible by channels {ts.channels}")
    return (width // ts.channels, ts.channels)


def _train_once(rows, input_shape, cfg, seed):
    spec = autoencoder.AutoencoderSpec(
        input_shape=input_shape,
        latent_dim=cfg.latent_dim,
        n_conv=cfg.n_conv,
        n_dense=cfg.n_dense,
        kernel_size=cfg.kernel_size,
        base_filters=cfg.base_filters,
        smooth_sigma=cfg.sigma,
    )
    network, encoder_len = autoencoder.build(spec, seed=seed)
    tc = neural.TrainConfig(
        max_epochs=cfg.max_epochs,
        batch_size=cfg.batch_size,
        validation_split=cfg.validation_split,
        target_val_loss=cfg.target_val_loss,
        patience=cfg.patience,
        alpha=cfg.alpha,
        seed=seed,
    )
    _, history = neural.train(network, rows, tc)
    return spec, network, encoder_len, history


def cmd_train(cfg: RunConfig) -> int:
    if not cfg.data:
        raise ConfigError("train needs --data <training set>")
    ts = datagen.load_training_set(cfg.data)
    input_shape = _dataset_input_shape(ts, cfg)
    out = cfg.out
    if out == "romae_out":
        bank = os.environ.get("ROM_BANK_DIR", ".")
        out = autoencoder.bank_path(bank, input_shape[0], cfg.latent_dim)

    if cfg.sweep:
        sizes = [int(s) for s in cfg.sweep.split(",") if s.strip()]
        lines = ["size,epochs,final_val_loss"]
        for size in sizes:
            if size > ts.samples.shape[0]:
                raise ConfigError(f"sweep size {size} exceeds dataset rows")
            sub = ts.samples[:size]
            _, _, _, history = _train_once(sub, input_shape, cfg, cfg.seed)
            lines.append(f"{size},{history.epochs},{history.val_loss[-1]:.16e}")
            print(f"train sweep size={size}: {history.epochs} epochs, "
                  f"val loss {history.val_loss[-1]:.3e}")
        with open(out + "_sweep.csv", "w") as f:
            f.write("\n".join(lines) + "\n")
        return 0

    t0 = time.perf_counter()
    spec, network, encoder_len, history = _train_once(ts.samples, input_shape, cfg, cfg.seed)
    wall = time.perf_counter() - t0
    ae = autoencoder.TrainedAutoencoder(
        spec,
        network,
        encoder_len,
        seed=cfg.seed,
        method=ts.method.value,
        epochs=history.epochs,
    )
    autoencoder.save(ae, out)
    with open(out + "_history.csv", "w") as f:
        f.write("epoch,train_loss,val_loss\n")
        for i, (tr, vl) in enumerate(zip(history.train_loss, history.val_loss), 1):
            f.write(f"{i},{tr:.16e},{vl:.16e}\n")
    print(
        f"train: {history.epochs} epochs ({history.stop_reason.value}), "
        f"val loss {history.val_loss[-1]:.3e}, {wall:.1f}s -> {out}"
    )
    return 0


def _load_coder(cfg: RunConfig, state_size: int):
    if cfg.identity_decoder:
        return lspg.IdentityCoder(state_size)
    path = cfg.model_file
    if not path:
        bank = os.environ.get("ROM_BANK_DIR", ".")
        path = autoencoder.bank_path(bank, state_size, cfg.latent_dim)
    return autoencoder.load(path)


def _base_n_for_extended(size: int, fraction: float):
    """Invert n + 2*round(fraction*n) = size."""
    for candidate in range(3, size + 1):
        if candidate + 2 * int(round(fraction * candidate)) == size:
            return candidate
    return None


def cmd_reconstruct(cfg: RunConfig) -> int:
    if not cfg.snapshots:
        raise ConfigError("reconstruct needs --snapshots <csv>")
    if not cfg.model_file:
        raise ConfigError("reconstruct needs --model-file <weights>")
    snap = grid.read_snapshot_csv(cfg.snapshots)
    ae = autoencoder.load(cfg.model_file)
    spatial = ae.spec.spatial_shape
    two_d = len(spatial) == 2
    base_mesh_n = _base_n_for_extended(spatial[0], cfg.extension_fraction)
    if base_mesh_n is None:
        raise ConfigError(
            f"no base mesh size under extension fraction {cfg.extension_fraction} "
            f"matches model input {spatial[0]}"
        )
    # extension is spacing-independent, so a unit domain stands in for any
    base_1d = grid.make_mesh(0.0, 1.0, base_mesh_n)
    if two_d:
        ext = grid.extend_mesh(grid.Mesh2D(base_1d, base_1d), cfg.extension_fraction)
        per_channel = base_mesh_n * base_mesh_n
    else:
        ext = grid.extend_mesh(base_1d, cfg.extension_fraction)
        per_channel = base_mesh_n
    if snap.rows not in (per_channel, 2 * per_channel):
        raise ConfigError(
            f"snapshot rows {snap.rows} match neither {per_channel} nor {2 * per_channel}"
        )
    n_channels = snap.rows // per_channel

    rec_ext_cols, rec_cols, report = [], [], ["snapshot,channel,rel_l2"]
    for j in range(snap.cols):
        col = snap.data[:, j]
        parts = [col[ch * per_channel : (ch + 1) * per_channel] for ch in range(n_channels)]
        ext_chunks, trunc_chunks = [], []
        for ch, part in enumerate(parts):
            shaped = part.reshape(base_mesh_n, base_mesh_n) if two_d else part
            u_ext = grid.extend_function(shaped, ext)
            rec = ae.reconstruct(u_ext.ravel())
            if cfg.sigma > 0:
                rec = autoencoder.gaussian_filter(
                    rec.reshape(ext.extended_shape) if two_d else rec, cfg.sigma
                ).ravel()
            rec_trunc = grid.truncate_function(rec.reshape(ext.extended_shape), ext).ravel() \
                if two_d else grid.truncate_function(rec, ext)
            ext_chunks.append(rec.ravel())
            trunc_chunks.append(rec_trunc)
            err = analysis.rel_l2_error(rec_trunc, part) if np.any(part) else 0.0
            report.append(f"{j},{ch},{err:.16e}")
        rec_ext_cols.append(np.concatenate(ext_chunks))
        rec_cols.append(np.concatenate(trunc_chunks))

    for suffix, cols in (("_recon_ext.csv", rec_ext_cols), ("_recon.csv", rec_cols)):
        data = np.column_stack(cols)
        out_snap = grid.SnapshotMatrix(np.asfortranarray(data), snap.times)
        grid.write_snapshot_csv(out_snap, cfg.out + suffix)
    with open(cfg.out + "_errors.csv", "w") as f:
        f.write("\n".join(report) + "\n")
    print(f"reconstruct: {snap.cols} snapshots -> {cfg.out}_recon{{,_ext,_errors}}.csv")
    return 0


def cmd_rom(cfg: RunConfig) -> int:
    validate_config(cfg)
    base = _build_base_problem(cfg)
    ext, prob_ext = pipeline.extended_problem(base, cfg.extension_fraction)
    size = int(np.prod(ext.extended_shape))
    coder = _load_coder(cfg, size)
    if coder.state_size != size:
        raise ConfigError(
            f"model input {coder.state_size} != extended state size {size}"
        )
    mode = JacobianMode.FORWARD if cfg.jacobian == "forward" else JacobianMode.THREE_POINT
    t0 = time.perf_counter()
    traj, fom_states, errors = pipeline.rom_vs_fom(
        prob_ext, coder, cfg.steps, ext=ext, jacobian_mode=mode
    )
    wall = time.perf_counter() - t0
    lspg.write_trajectory_csv(traj, cfg.out + "_gn.csv")
    times = np.arange(len(traj.states)) * cfg.dt
    rom_mat = grid.SnapshotMatrix(
        np.asfortranarray(np.column_stack([s.ravel() for s in traj.states])), times
    )
    fom_mat = grid.SnapshotMatrix(
        np.asfortranarray(np.column_stack(fom_states)), times
    )
    grid.write_snapshot_csv(rom_mat, cfg.out + "_rom.csv")
    grid.write_snapshot_csv(fom_mat, cfg.out + "_fom.csv")
    finite = [e for e in errors if np.isfinite(e)]
    print(
        f"rom {cfg.model}: {cfg.steps} steps in {wall:.1f}s, final rel L2 "
        f"{errors[-1]:.3e}, max rel L2 {max(finite):.3e} -> {cfg.out}_{{rom,fom,gn}}.csv"
    )
    return 0


def cmd_svd(cfg: RunConfig) -> int:
    if not cfg.snapshots:
        raise ConfigError("svd needs --snapshots <csv>")
    snap = grid.read_snapshot_csv(cfg.snapshots)
    spectrum = analysis.singular_values(snap)
    analysis.write_spectrum_csv(spectrum, cfg.out)
    ssq = float(np.sqrt(np.sum(spectrum.sigmas**2)))
    print(
        f"svd: {snap.rows}x{snap.cols}, sigma_1 = {spectrum.sigmas[0]:.6e}, "
        f"frobenius check |sqrt(sum s^2) - ||A||_F| = {abs(ssq - spectrum.frobenius):.3e} "
        f"-> {cfg.out}"
    )
    return 0


def _add_common(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--out", dest="out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="romae", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fom", help="run a full-order model, write snapshot CSV")
    _add_common(p)
    p.add_argument("--model", dest="model")
    p.add_argument("--n", type=int, dest="n")
    p.add_argument("--steps", type=int, dest="steps")
    p.add_argument("--samples", type=int, dest="samples")
    p.add_argument("--dt", type=float, dest="dt")
    p.add_argument("--c", type=float, dest="c")
    p.add_argument("--k", type=float, dest="k")
    p.add_argument("--u0", dest="u0")
    p.add_argument("--v0", dest="v0")
    p.add_argument("--x-min", type=float, dest="x_min")
    p.add_argument("--x-max", type=float, dest="x_max")
    p.set_defaults(func=cmd_fom)

    p = sub.add_parser("gen", help="generate a training set")
    _add_common(p)
    p.add_argument("--method", dest="method")
    p.add_argument("--n", type=int, dest="n_samples")
    p.add_argument("--mesh", type=int, dest="mesh_size")
    p.add_argument("--channels", type=int, dest="channels")
    p.add_argument("--nmax", type=int, dest="n_max")
    p.add_argument("--amax", type=float, dest="a_max")
    p.add_argument("--omegamax", type=float, dest="omega_max")
    p.add_argument("--x-min", type=float, dest="x_min")
    p.add_argument("--x-max", type=float, dest="x_max")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an autoencoder on a training set")
    _add_common(p)
    p.add_argument("--data", dest="data")
    p.add_argument("--latent", type=int, dest="latent_dim")
    p.add_argument("--nconv", type=int, dest="n_conv")
    p.add_argument("--ndense", type=int, dest="n_dense")
    p.add_argument("--batch", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int, dest="max_epochs")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--target", type=float, dest="target_val_loss")
    p.add_argument("--patience", type=int, dest="patience")
    p.add_argument("--sweep", dest="sweep", help="comma-separated subset sizes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="autoencode snapshots, report errors")
    _add_common(p)
    p.add_argument("--model-file", dest="model_file")
    p.add_argument("--snapshots", dest="snapshots")
    p.add_argument("--blur", type=float, dest="sigma")
    p.add_argument("--extension", type=float, dest="extension_fraction")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("rom", help="latent-space time stepping vs the full model")
    _add_common(p)
    p.add_argument("--model", dest="model")
    p.add_argument("--model-file", dest="model_file")
    p.add_argument("--n", type=int, dest="n")
    p.add_argument("--steps", type=int, dest="steps")
    p.add_argument("--dt", type=float, dest="dt")
    p.add_argument("--c", type=float, dest="c")
    p.add_argument("--k", type=float, dest="k")
    p.add_argument("--u0", dest="u0")
    p.add_argument("--v0", dest="v0")
    p.add_argument("--jacobian", dest="jacobian", choices=("forward", "3point"))
    p.add_argument("--identity-decoder", action="store_true", dest="identity_decoder",
                   default=None)
    p.add_argument("--extension", type=float, dest="extension_fraction")
    p.add_argument("--latent", type=int, dest="latent_dim")
    p.set_defaults(func=cmd_rom)

    p = sub.add_parser("svd", help="singular-value spectrum of a snapshot CSV")
    _add_common(p)
    p.add_argument("--snapshots", dest="snapshots")
    p.set_defaults(func=cmd_svd)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"file format error: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
