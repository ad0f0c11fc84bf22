"""Experiment plumbing shared by the CLI and the test suite.

Builds the model problems from named initial conditions, lifts them onto
extended meshes for autoencoder-based runs, and wires residual models,
coders, and the latent stepper together.
"""

import numpy as np

from .autoencoder import JacobianMode, TrainedAutoencoder
from .fom import (
    BoundaryCondition,
    HeatProblem,
    KsProblem,
    WaveProblem1D,
    WaveProblem2D,
    bootstrap_second_state,
    make_residual,
    run_fom,
)
from .grid import (
    ExtendedMesh,
    Mesh1D,
    Mesh2D,
    extend_function,
    extend_mesh,
    make_mesh,
    truncate_function,
)
from .lspg import IdentityCoder, LspgProblem, compute_x_ref, run_rom

DEFAULT_DOMAINS = {
    "heat": (0.0, 1.0),
    "wave1d": (0.0, 1.0),
    "wave2d": (-1.0, 1.0),
    "ks": (0.0, 32.0 * np.pi),
}


def named_initial_condition(name: str, mesh, kind: str = "u0") -> np.ndarray:
    """Evaluate a named initial condition on a mesh.

    1D names: parabola (5x(1-x)), sine, three-sine (3 sin(pi x)),
    ks-cosine (cos(pi x / 16)), zero. 2D names: gaussian2d, zero.
    `file:<path>` loads a whitespace/comma separated vector or field.
    """
    if name.startswith("file:"):
        values = np.loadtxt(name[5:], delimiter=None)
        return np.asarray(values, dtype=float)
    if isinstance(mesh, Mesh2D):
        xg = mesh.mesh_x.points()[:, None]
        yg = mesh.mesh_y.points()[None, :]
        if name == "gaussian2d":
            return np.exp(-20.0 * (xg**2 + yg**2)) * np.ones_like(yg)
        if name == "zero":
            return np.zeros(mesh.shape)
        raise ValueError(f"unknown 2D initial condition {name!r}")
    x = mesh.points()
    if name == "parabola":
        return 5.0 * x * (1.0 - x)
    if name == "sine":
        return np.sin(np.pi * x)
    if name == "three-sine":
        return 3.0 * np.sin(np.pi * x)
    if name == "ks-cosine":
        return np.cos(np.pi * x / 16.0)
    if name == "zero":
        return np.zeros(mesh.n)
    raise ValueError(f"unknown initial condition {name!r} ({kind})")


def build_problem(
    model: str,
    mesh,
    dt: float,
    u0: np.ndarray,
    v0: np.ndarray = None,
    k: float = 1.0,
    c: float = 1.0,
):
    if model == "heat":
        return HeatProblem(mesh, dt, u0, k=k)
    if model == "wave1d":
        if v0 is None:
            raise ValueError("wave1d needs v0")
        return WaveProblem1D(mesh, dt, c, u0, v0)
    if model == "wave2d":
        if v0 is None:
            raise ValueError("wave2d needs v0")
        return WaveProblem2D(mesh, dt, c, u0, v0)
    if model == "ks":
        return KsProblem(mesh, dt, u0)
    raise ValueError(f"unknown model {model!r}")


def extended_problem(problem, fraction: float):
    """Lift a problem onto the extension of its mesh.

    Initial data are tangent-extended; everything else carries over. Returns
    (ExtendedMesh, extended problem).
    """
    if isinstance(problem, WaveProblem2D):
        ext = extend_mesh(problem.mesh, fraction)
        mesh_e = ext.extended_mesh()
        return ext, WaveProblem2D(
            mesh_e,
            problem.dt,
            problem.c,
            extend_function(problem.u0, ext),
            extend_function(problem.v0, ext),
            problem.bc,
        )
    ext = extend_mesh(problem.mesh, fraction)
    mesh_e = ext.extended_mesh()
    u0_e = extend_function(problem.u0, ext)
    if isinstance(problem, HeatProblem):
        return ext, HeatProblem(mesh_e, problem.dt, u0_e, k=problem.k, bc=problem.bc)
    if isinstance(problem, WaveProblem1D):
        return ext, WaveProblem1D(
            mesh_e, problem.dt, problem.c, u0_e, extend_function(problem.v0, ext), problem.bc
        )
    if isinstance(problem, KsProblem):
        return ext, KsProblem(mesh_e, problem.dt, u0_e)
    raise ValueError(f"unknown problem type {type(problem).__name__}")


def make_lspg_problem(
    problem,
    coder,
    ext: ExtendedMesh = None,
    jacobian_mode: JacobianMode = JacobianMode.FORWARD,
    gn_tol: float = 1e-8,
    gn_max_iter: int = 50,
) -> LspgProblem:
    """Assemble the latent-stepping problem for an (extended) model problem."""
    residual = make_residual(problem)
    u0 = problem.u0.ravel()
    x_ref = compute_x_ref(u0, coder)
    return LspgProblem(
        residual,
        coder,
        x_ref,
        ext=ext,
        jacobian_mode=jacobian_mode,
        gn_tol=gn_tol,
        gn_max_iter=gn_max_iter,
    )


def rom_vs_fom(problem, coder, steps: int, ext: ExtendedMesh = None,
               jacobian_mode: JacobianMode = JacobianMode.FORWARD):
    """Run the latent stepper and the full-order model side by side.

    Returns (trajectory, fom_states, errors) where fom_states[j] is the
    truncated full-order displacement at step j and errors[j] the relative
    L2 difference (skipping steps where the reference is zero).
    """
    lspg = make_lspg_problem(problem, coder, ext=ext, jacobian_mode=jacobian_mode)
    u0 = problem.u0.ravel()
    u1 = None
    if lspg.residual.history_depth == 2:
        u1 = bootstrap_second_state(problem).ravel()
    traj = run_rom(lspg, u0, steps, u1=u1)

    snap = run_fom(problem, steps, sample_every=1)
    n = lspg.residual.state_size
    fom_states = []
    for j in range(snap.cols):
        col = snap.data[:n, j]
        if ext is not None and ext.pad > 0:
            if ext.is_2d:
                col = truncate_function(col.reshape(ext.extended_shape), ext).ravel()
            else:
                col = truncate_function(col, ext)
        fom_states.append(col)

    errors = []
    for rom_state, fom_state in zip(traj.states, fom_states):
        ref = float(np.linalg.norm(fom_state))
        if ref == 0.0:
            errors.append(0.0 if np.allclose(rom_state, 0.0) else np.inf)
        else:
            errors.append(float(np.linalg.norm(rom_state.ravel() - fom_state)) / ref)
    return traj, fom_states, errors


def identity_coder_for(problem) -> IdentityCoder:
    n = problem.u0.size
    return IdentityCoder(n)
