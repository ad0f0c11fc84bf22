"""Manifold least-squares time stepping in the latent space.

Each step minimizes the 2-norm of the time-discrete residual evaluated at
x_ref + decode(xi) over the latent coordinates xi, via Gauss-Newton with a
pivoted-QR least-squares subproblem and a halving line search. All linear
algebra beyond the banded residual Jacobian application is d-dimensional.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .autoencoder import JacobianMode
from .errors import GaussNewtonError, RomSteppingError
from .fom import ResidualModel
from .grid import ExtendedMesh, truncate_function


class IdentityCoder:
    """Debug stand-in for a trained autoencoder: g = f = identity on R^n."""

    def __init__(self, n: int):
        self.latent_dim = n
        self.state_size = n
        self._eye = np.eye(n)

    def encode(self, u):
        return np.asarray(u, dtype=float).copy()

    def decode(self, xi):
        return np.asarray(xi, dtype=float).copy()

    def decoder_jacobian(self, xi, mode=JacobianMode.FORWARD):
        return self._eye


@dataclass
class GnResult:
    xi: np.ndarray
    iterations: int
    residual_norm: float
    status: str  # residual_tol | step_tol | stagnated | max_iter
    rank_deficient: bool = False

    @property
    def converged(self) -> bool:
        return self.status != "max_iter"


def _solve_least_squares(jac, r):
    """min ||jac @ delta + r|| via QR with column pivoting.

    Falls back to the minimum-norm SVD solution when the pivoted diagonal
    reveals rank deficiency.
    """
    q, rmat, piv = scipy.linalg.qr(jac, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rmat))
    d = jac.shape[1]
    if diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > diag[0] * max(jac.shape) * np.finfo(float).eps))
    if rank < d:
        delta = np.linalg.lstsq(jac, -r, rcond=None)[0]
        return delta, True
    y = scipy.linalg.solve_triangular(rmat, -(q.T @ r))
    delta = np.empty(d)
    delta[piv] = y
    return delta, False


def gauss_newton(
    residual_fn,
    jac_fn,
    xi0,
    tol: float = 1e-8,
    max_iter: int = 50,
    atol: float = 1e-12,
    max_halvings: int = 10,
) -> GnResult:
    """Damped Gauss-Newton for min ||residual_fn(xi)||^2.

    Stops when the residual norm falls below `atol`, when the accepted step
    satisfies ||t*delta|| <= tol * (1 + ||xi||), or when no halved step
    decreases the residual (stagnation). Raises GaussNewtonError only if the
    iteration budget runs out, carrying the best iterate seen.
    """
    xi = np.asarray(xi0, dtype=float).copy()
    r = residual_fn(xi)
    rnorm = float(np.linalg.norm(r))
    rank_flag = False
    if rnorm <= atol:
        return GnResult(xi, 0, rnorm, "residual_tol")
    for it in range(1, max_iter + 1):
        jac = jac_fn(xi)
        delta, deficient = _solve_least_squares(jac, r)
        rank_flag = rank_flag or deficient
        # convergence is judged on the candidate step, so a step that would
        # not move the iterate is not counted as an iteration
        if float(np.linalg.norm(delta)) <= tol * (1.0 + float(np.linalg.norm(xi))):
            return GnResult(xi, it - 1, rnorm, "step_tol", rank_flag)
        t = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            trial = xi + t * delta
            r_trial = residual_fn(trial)
            rnorm_trial = float(np.linalg.norm(r_trial))
            if rnorm_trial < rnorm:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return GnResult(xi, it - 1, rnorm, "stagnated", rank_flag)
        xi, r, rnorm = trial, r_trial, rnorm_trial
        if rnorm <= atol:
            return GnResult(xi, it, rnorm, "residual_tol", rank_flag)
    raise GaussNewtonError(
        f"no convergence in {max_iter} iterations (||r|| = {rnorm:.3e})",
        best_xi=xi,
        iterations=max_iter,
        residual_norm=rnorm,
    )


@dataclass
class LspgProblem:
    """Residual model plus decoder/encoder and reference state."""

    residual: ResidualModel
    coder: object
    x_ref: np.ndarray
    ext: ExtendedMesh | None = None
    jacobian_mode: JacobianMode = JacobianMode.FORWARD
    gn_tol: float = 1e-8
    gn_max_iter: int = 50
    gn_atol: float = 1e-12

    def __post_init__(self):
        n = self.residual.state_size
        if self.x_ref.shape != (n,):
            raise ValueError(f"x_ref length {self.x_ref.shape} != state size {n}")
        if getattr(self.coder, "state_size") != n:
            raise ValueError(
                f"decoder output size {self.coder.state_size} != state size {n}"
            )

    def _truncate(self, state):
        if self.ext is None or self.ext.pad == 0:
            return state.copy()
        return truncate_function(state, self.ext)


@dataclass
class LatentTrajectory:
    """Latent path with reconstructed (truncated) states and GN diagnostics."""

    xis: list = field(default_factory=list)
    states: list = field(default_factory=list)
    step_indices: list = field(default_factory=list)
    gn_iterations: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)


def compute_x_ref(u0: np.ndarray, coder) -> np.ndarray:
    """Reference state u0 - decode(encode(u0)), the manifold-coordinate origin."""
    u0 = np.asarray(u0, dtype=float)
    return u0 - coder.decode(coder.encode(u0))


def lspg_step(problem: LspgProblem, history, xi_prev) -> GnResult:
    """Minimize the residual at one time level, warm-started at xi_prev."""
    res = problem.residual
    jac_y = res.jacobian_y(history)
    coder = problem.coder

    def residual_fn(xi):
        return res.apply(problem.x_ref + coder.decode(xi), history)

    def jac_fn(xi):
        return jac_y.matmat(coder.decoder_jacobian(xi, problem.jacobian_mode))

    return gauss_newton(
        residual_fn,
        jac_fn,
        xi_prev,
        tol=problem.gn_tol,
        max_iter=problem.gn_max_iter,
        atol=problem.gn_atol,
    )


def run_rom(problem: LspgProblem, u0: np.ndarray, steps: int, u1: np.ndarray = None) -> LatentTrajectory:
    """March `steps` time levels in the latent space.

    u0 (and u1 for the two-history wave schemes, normally the full-order
    bootstrap state) live on the residual's own mesh. The stored latent
    start is encode(u0), so the reconstructed initial state reproduces u0
    exactly through x_ref. States are truncated to the base mesh when the
    problem carries an extension. Raises RomSteppingError on nonconvergence
    with the partial trajectory attached.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    coder = problem.coder
    depth = problem.residual.history_depth
    traj = LatentTrajectory()

    xi = coder.encode(u0)
    full = problem.x_ref + coder.decode(xi)
    traj.xis.append(xi)
    traj.states.append(problem._truncate(full))
    traj.step_indices.append(0)
    traj.gn_iterations.append(0)
    traj.residual_norms.append(0.0)

    if depth == 1:
        history = [full]
        first = 1
    else:
        if u1 is None:
            raise ValueError("two-history residual needs the bootstrap state u1")
        xi = coder.encode(u1)
        full1 = np.asarray(u1, dtype=float).copy()
        history = [full1, full]
        traj.xis.append(xi)
        traj.states.append(problem._truncate(full1))
        traj.step_indices.append(1)
        traj.gn_iterations.append(0)
        traj.residual_norms.append(0.0)
        first = 2

    for step in range(first, steps + 1):
        try:
            result = lspg_step(problem, history, xi)
        except GaussNewtonError as exc:
            raise RomSteppingError(
                f"Gauss-Newton failed at step {step}: {exc}", step=step, trajectory=traj
            ) from exc
        xi = result.xi
        full = problem.x_ref + coder.decode(xi)
        history = [full] if depth == 1 else [full, history[0]]
        traj.xis.append(xi)
        traj.states.append(problem._truncate(full))
        traj.step_indices.append(step)
        traj.gn_iterations.append(result.iterations)
        traj.residual_norms.append(result.residual_norm)
    return traj


def write_trajectory_csv(traj: LatentTrajectory, path) -> None:
    """Per-step Gauss-Newton diagnostics: `step,gn_iters,residual_norm`."""
    with open(path, "w") as f:
        f.write("step,gn_iters,residual_norm\n")
        for step, iters, rnorm in zip(
            traj.step_indices, traj.gn_iterations, traj.residual_norms
        ):
            f.write(f"{step},{iters},{rnorm:.16e}\n")
