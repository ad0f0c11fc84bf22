"""Full-order time steppers and time-discrete residuals for the model PDEs.

Four schemes: Crank-Nicolson for the heat equation, a three-level implicit
scheme for the 1D wave equation, an explicit five-point scheme for the 2D
wave equation, and a linearized two-level banded scheme for the
Kuramoto-Sivashinsky equation with periodic wrap.

State vectors carry every mesh point. For the Dirichlet problems the two
boundary entries are held at their current values through unit "pin" rows in
the scheme matrices; the interior rows follow the standard eliminated-form
tridiagonal stencils. This keeps the stepper, the residual, and its Jacobian
defined on the full state vector, which is what the latent-space projection
needs.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericalError
from .grid import Layout, Mesh1D, Mesh2D, SnapshotMatrix, StateVector, assemble_snapshots
from .kernels import pentadiag_solve, thomas_solve


class BCKind(Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class BoundaryCondition:
    """Robin-style selectors; (1,0) picks Dirichlet, (0,1) Neumann per side."""

    kind: BCKind
    alpha1: float = 1.0
    alpha2: float = 0.0
    beta1: float = 1.0
    beta2: float = 0.0

    @staticmethod
    def dirichlet() -> "BoundaryCondition":
        return BoundaryCondition(BCKind.DIRICHLET, 1.0, 0.0, 1.0, 0.0)

    @staticmethod
    def neumann() -> "BoundaryCondition":
        return BoundaryCondition(BCKind.NEUMANN, 0.0, 1.0, 0.0, 1.0)

    @staticmethod
    def periodic() -> "BoundaryCondition":
        return BoundaryCondition(BCKind.PERIODIC, 0.0, 0.0, 0.0, 0.0)


def _require_dirichlet(bc: BoundaryCondition, model: str) -> None:
    if bc.kind is not BCKind.DIRICHLET:
        raise ValueError(
            f"{model} low-order scheme supports Dirichlet boundaries only, "
            f"got {bc.kind.value}"
        )


@dataclass(frozen=True)
class HeatProblem:
    mesh: Mesh1D
    dt: float
    u0: np.ndarray
    k: float = 1.0
    bc: BoundaryCondition = field(default_factory=BoundaryCondition.dirichlet)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.k <= 0:
            raise ValueError(f"diffusion constant must be positive, got {self.k}")
        _require_dirichlet(self.bc, "heat")
        if self.u0.shape != (self.mesh.n,):
            raise ValueError(f"u0 length {self.u0.shape} != mesh n={self.mesh.n}")

    @property
    def r(self) -> float:
        return self.k * self.dt / self.mesh.dx**2


@dataclass(frozen=True)
class WaveProblem1D:
    mesh: Mesh1D
    dt: float
    c: float
    u0: np.ndarray
    v0: np.ndarray
    bc: BoundaryCondition = field(default_factory=BoundaryCondition.dirichlet)

    def __post_init__(self):
        if self.dt <= 0 or self.c <= 0:
            raise ValueError(f"need dt, c > 0, got dt={self.dt}, c={self.c}")
        _require_dirichlet(self.bc, "wave1d")
        n = self.mesh.n
        if self.u0.shape != (n,) or self.v0.shape != (n,):
            raise ValueError("u0, v0 must both have mesh length")

    @property
    def r(self) -> float:
        return self.c * self.dt / self.mesh.dx


@dataclass(frozen=True)
class WaveProblem2D:
    mesh: Mesh2D
    dt: float
    c: float
    u0: np.ndarray
    v0: np.ndarray
    bc: BoundaryCondition = field(default_factory=BoundaryCondition.dirichlet)

    def __post_init__(self):
        if self.dt <= 0 or self.c <= 0:
            raise ValueError(f"need dt, c > 0, got dt={self.dt}, c={self.c}")
        _require_dirichlet(self.bc, "wave2d")
        dx, dy = self.mesh.mesh_x.dx, self.mesh.mesh_y.dx
        if abs(dx - dy) > 1e-12 * max(dx, dy):
            raise ValueError("2D wave scheme requires equal spacing in x and y")
        if self.u0.shape != self.mesh.shape or self.v0.shape != self.mesh.shape:
            raise ValueError("u0, v0 must match the 2D mesh shape")
        if self.r**2 > 0.5 + 1e-12:
            raise ValueError(
                f"explicit 2D scheme unstable: r^2 = {self.r**2:.4g} > 1/2 "
                f"(r = c*dt/dx = {self.r:.4g})"
            )

    @property
    def r(self) -> float:
        return self.c * self.dt / self.mesh.mesh_x.dx


@dataclass(frozen=True)
class KsProblem:
    """Kuramoto-Sivashinsky on [0, 32*pi] with periodic index wrap."""

    mesh: Mesh1D
    dt: float
    u0: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.u0.shape != (self.mesh.n,):
            raise ValueError(f"u0 length {self.u0.shape} != mesh n={self.mesh.n}")

    def coefficients(self) -> dict:
        """Constant scheme coefficients for the current dt, dx."""
        dt, dx = self.dt, self.mesh.dx
        a = dt / (2.0 * dx**4)
        base = dt / (2.0 * dx**2) - 2.0 * dt / dx**4
        return {
            "a": a,
            "e": 1.0 + 2.0 * dt / dx**4 - dt / dx**2,
            "a_prime": -a,
            "b_prime": -base,
            "c_prime": -base,
            "e_prime": 1.0 - 2.0 * dt / dx**4 + dt / dx**2,
            "base": base,
            "advect": dt / (4.0 * dx),
        }


class BandedMatrix:
    """Small banded matrix: entry (i, i+off) = bands[off][i]."""

    def __init__(self, n: int, bands: dict):
        self.n = n
        self.bands = {int(off): np.asarray(b, dtype=float) for off, b in bands.items()}
        for off, b in self.bands.items():
            if b.shape != (n,):
                raise ValueError(f"band {off} has length {b.shape}, expected ({n},)")

    def matvec(self, v: np.ndarray) -> np.ndarray:
        n = self.n
        y = np.zeros(n)
        for off, b in self.bands.items():
            if off >= 0:
                y[: n - off] += b[: n - off] * v[off:]
            else:
                o = -off
                y[o:] += b[o:] * v[: n - o]
        return y

    def matmat(self, m: np.ndarray) -> np.ndarray:
        n = self.n
        out = np.zeros((n, m.shape[1]))
        for off, b in self.bands.items():
            if off >= 0:
                out[: n - off, :] += b[: n - off, None] * m[off:, :]
            else:
                o = -off
                out[o:, :] += b[o:, None] * m[: n - o, :]
        return out

    def todense(self) -> np.ndarray:
        n = self.n
        a = np.zeros((n, n))
        for off, b in self.bands.items():
            if off >= 0:
                a[np.arange(n - off), np.arange(off, n)] = b[: n - off]
            else:
                o = -off
                a[np.arange(o, n), np.arange(n - o)] = b[o:]
        return a


# ---------------------------------------------------------------------------
# scheme matrices
# ---------------------------------------------------------------------------


def _heat_bands(n: int, r: float):
    """Crank-Nicolson A, B with unit pin rows at the two boundary points."""
    diag_a = np.full(n, 2.0 + 2.0 * r)
    lower_a = np.full(n, -r)
    upper_a = np.full(n, -r)
    diag_b = np.full(n, 2.0 - 2.0 * r)
    lower_b = np.full(n, r)
    upper_b = np.full(n, r)
    for d, lo, up in ((diag_a, lower_a, upper_a), (diag_b, lower_b, upper_b)):
        d[0] = d[-1] = 1.0
        up[0] = 0.0
        lo[-1] = 0.0
        lo[0] = 0.0  # unused by the solver; zeroed for the banded residual
        up[-1] = 0.0
    return (lower_a, diag_a, upper_a), (lower_b, diag_b, upper_b)


def _wave_bands(n: int, r: float):
    """A = 4/r^2 I + K and Bm = 4/r^2 I - K on the interior, pins 1 and 2.

    The step is A u_next = 2 Bm u_prev - A u_prev2; pin rows produce
    u_next = 2 u_prev - u_prev2 at the boundaries, which holds boundary
    values constant in time.
    """
    s = 4.0 / r**2
    diag_a = np.full(n, s + 2.0)
    off_a = np.full(n, -1.0)
    diag_b = np.full(n, s - 2.0)
    off_b = np.full(n, 1.0)
    diag_a[0] = diag_a[-1] = 1.0
    diag_b[0] = diag_b[-1] = 1.0
    for off in (off_a, off_b):
        off[0] = off[-1] = 0.0
    return (off_a.copy(), diag_a, off_a.copy()), (off_b.copy(), diag_b, off_b.copy())


def _tri_matvec(lo, d, up, v):
    y = d * v
    y[:-1] += up[:-1] * v[1:]
    y[1:] += lo[1:] * v[:-1]
    return y


def _ks_a_bands(problem: KsProblem, u_prev: np.ndarray):
    """State-dependent pentadiagonal matrix of the linearized KS scheme.

    The first/second and last two rows carry the wrapped corner terms folded
    in-band exactly as displayed in the scheme definition; interior rows are
    [a, b_i, e, c_i, a] with the advective linearization taken from the
    neighbouring values of u_prev.
    """
    n = problem.mesh.n
    if n < 6:
        raise ValueError("KS scheme needs at least 6 points")
    co = problem.coefficients()
    a, e, base, adv = co["a"], co["e"], co["base"], co["advect"]
    bcoef = base - adv * np.roll(u_prev, 1)  # b[j] uses u_prev[j-1]
    ccoef = base + adv * np.roll(u_prev, -1)  # c[j] uses u_prev[j+1]
    sub2 = np.full(n, a)
    sub1 = bcoef.copy()
    diag = np.full(n, e)
    sup1 = ccoef.copy()
    sup2 = np.full(n, a)
    diag[0] = a + bcoef[1] + e
    sub1[1] = a + bcoef[1]
    sup1[n - 2] = a + ccoef[n - 2]
    diag[n - 1] = a + e + ccoef[n - 2]
    sub2[0] = sub2[1] = 0.0
    sub1[0] = 0.0
    sup1[n - 1] = 0.0
    sup2[n - 2] = sup2[n - 1] = 0.0
    return sub2, sub1, diag, sup1, sup2


def _ks_d_bands(problem: KsProblem):
    """Constant right-hand-side matrix, mirroring the A layout."""
    n = problem.mesh.n
    co = problem.coefficients()
    ap, bp, cp, ep = co["a_prime"], co["b_prime"], co["c_prime"], co["e_prime"]
    sub2 = np.full(n, ap)
    sub1 = np.full(n, bp)
    diag = np.full(n, ep)
    sup1 = np.full(n, cp)
    sup2 = np.full(n, ap)
    diag[0] = ap + bp + ep
    sub1[1] = ap + bp
    sup1[n - 2] = ap + cp
    diag[n - 1] = ap + ep + cp
    sub2[0] = sub2[1] = 0.0
    sub1[0] = 0.0
    sup1[n - 1] = 0.0
    sup2[n - 2] = sup2[n - 1] = 0.0
    return sub2, sub1, diag, sup1, sup2


def _bands_to_banded(n, sub2, sub1, diag, sup1, sup2) -> BandedMatrix:
    return BandedMatrix(
        n,
        {
            -2: np.concatenate(([0.0, 0.0], sub2[2:])),
            -1: np.concatenate(([0.0], sub1[1:])),
            0: diag,
            1: np.concatenate((sup1[:-1], [0.0])),
            2: np.concatenate((sup2[:-2], [0.0, 0.0])),
        },
    )


def _tri_to_banded(n, lo, d, up) -> BandedMatrix:
    return BandedMatrix(
        n,
        {
            -1: np.concatenate(([0.0], lo[1:])),
            0: d,
            1: np.concatenate((up[:-1], [0.0])),
        },
    )


# ---------------------------------------------------------------------------
# steppers
# ---------------------------------------------------------------------------


def heat_step(problem: HeatProblem, u_prev: np.ndarray) -> np.ndarray:
    """One Crank-Nicolson step: solve A u_next = B u_prev (Thomas)."""
    n = problem.mesh.n
    if u_prev.shape != (n,):
        raise ValueError(f"state length {u_prev.shape} != mesh n={n}")
    (lo_a, d_a, up_a), (lo_b, d_b, up_b) = _heat_bands(n, problem.r)
    rhs = _tri_matvec(lo_b, d_b, up_b, u_prev)
    out = thomas_solve(lo_a, d_a, up_a, rhs)
    if not np.all(np.isfinite(out)):
        raise NumericalError("heat step: tridiagonal solve failed")
    return out


def wave1d_step(problem: WaveProblem1D, u_prev: np.ndarray, u_prev2: np.ndarray) -> np.ndarray:
    """One step of the three-level implicit scheme."""
    n = problem.mesh.n
    if u_prev.shape != (n,) or u_prev2.shape != (n,):
        raise ValueError("history states must have mesh length")
    (lo_a, d_a, up_a), (lo_b, d_b, up_b) = _wave_bands(n, problem.r)
    rhs = 2.0 * _tri_matvec(lo_b, d_b, up_b, u_prev) - _tri_matvec(lo_a, d_a, up_a, u_prev2)
    out = thomas_solve(lo_a, d_a, up_a, rhs)
    if not np.all(np.isfinite(out)):
        raise NumericalError("wave1d step: tridiagonal solve failed")
    return out


def wave2d_step(problem: WaveProblem2D, u_prev: np.ndarray, u_prev2: np.ndarray) -> np.ndarray:
    """Explicit five-point update; boundary ring follows the pin convention."""
    if u_prev.shape != problem.mesh.shape or u_prev2.shape != problem.mesh.shape:
        raise ValueError("history fields must match the 2D mesh shape")
    r2 = problem.r**2
    out = 2.0 * u_prev - u_prev2
    interior = (
        4.0 * u_prev[1:-1, 1:-1]
        - u_prev[:-2, 1:-1]
        - u_prev[2:, 1:-1]
        - u_prev[1:-1, :-2]
        - u_prev[1:-1, 2:]
    )
    out[1:-1, 1:-1] -= r2 * interior
    return out


def ks_step(problem: KsProblem, u_prev: np.ndarray) -> np.ndarray:
    """One step of the linearized banded scheme: A(u_prev) u_next = D u_prev."""
    n = problem.mesh.n
    if u_prev.shape != (n,):
        raise ValueError(f"state length {u_prev.shape} != mesh n={n}")
    sub2, sub1, diag, sup1, sup2 = _ks_a_bands(problem, u_prev)
    dmat = _bands_to_banded(n, *_ks_d_bands(problem))
    rhs = dmat.matvec(u_prev)
    out = pentadiag_solve(sub2, sub1, diag, sup1, sup2, rhs)
    if not np.all(np.isfinite(out)):
        raise NumericalError("KS step: banded solve hit a singular pivot")
    return out


def bootstrap_second_state(problem) -> np.ndarray:
    """First step for the two-history wave schemes.

    Second-order Taylor start u1 = u0 + dt v0 + (dt^2/2) c^2 Lap(u0), with
    the discrete Laplacian on the interior and boundary values copied.
    """
    if isinstance(problem, WaveProblem1D):
        u0, v0 = problem.u0, problem.v0
        dx = problem.mesh.dx
        lap = np.zeros_like(u0)
        lap[1:-1] = (u0[:-2] - 2.0 * u0[1:-1] + u0[2:]) / dx**2
        u1 = u0 + problem.dt * v0 + 0.5 * problem.dt**2 * problem.c**2 * lap
        u1[0], u1[-1] = u0[0], u0[-1]
        return u1
    if isinstance(problem, WaveProblem2D):
        u0, v0 = problem.u0, problem.v0
        dx = problem.mesh.mesh_x.dx
        lap = np.zeros_like(u0)
        lap[1:-1, 1:-1] = (
            u0[:-2, 1:-1] + u0[2:, 1:-1] + u0[1:-1, :-2] + u0[1:-1, 2:]
            - 4.0 * u0[1:-1, 1:-1]
        ) / dx**2
        u1 = u0 + problem.dt * v0 + 0.5 * problem.dt**2 * problem.c**2 * lap
        u1[0, :], u1[-1, :] = u0[0, :], u0[-1, :]
        u1[:, 0], u1[:, -1] = u0[:, 0], u0[:, -1]
        return u1
    raise ValueError(f"no bootstrap for {type(problem).__name__}")


# ---------------------------------------------------------------------------
# residual models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualModel:
    """Time-discrete residual r^n(y) with its history convention.

    `apply(y, history)` evaluates the residual at candidate state y, where
    history lists the most recent states first: [u^{n-1}] or
    [u^{n-1}, u^{n-2}]. `jacobian_y(history)` returns d(r)/dy as a
    BandedMatrix (constant for the linear schemes, state-dependent for KS).
    """

    model: str
    history_depth: int
    apply: object
    jacobian_y: object
    state_size: int


def make_residual(problem) -> ResidualModel:
    """Build the residual closure matching a problem's stepper."""
    if isinstance(problem, HeatProblem):
        n = problem.mesh.n
        (lo_a, d_a, up_a), (lo_b, d_b, up_b) = _heat_bands(n, problem.r)
        a_banded = _tri_to_banded(n, lo_a, d_a, up_a)

        def apply(y, history):
            return _tri_matvec(lo_a, d_a, up_a, y) - _tri_matvec(lo_b, d_b, up_b, history[0])

        return ResidualModel("heat", 1, apply, lambda history: a_banded, n)

    if isinstance(problem, WaveProblem1D):
        n = problem.mesh.n
        (lo_a, d_a, up_a), (lo_b, d_b, up_b) = _wave_bands(n, problem.r)
        a_banded = _tri_to_banded(n, lo_a, d_a, up_a)

        def apply(y, history):
            u1, u2 = history
            return (
                _tri_matvec(lo_a, d_a, up_a, y)
                - 2.0 * _tri_matvec(lo_b, d_b, up_b, u1)
                + _tri_matvec(lo_a, d_a, up_a, u2)
            )

        return ResidualModel("wave1d", 2, apply, lambda history: a_banded, n)

    if isinstance(problem, WaveProblem2D):
        nx, ny = problem.mesh.shape
        size = nx * ny
        r2 = problem.r**2
        identity = BandedMatrix(size, {0: np.ones(size)})

        def apply(y, history):
            u1, u2 = history
            pred = wave2d_step_flat(problem, u1, u2, r2, nx, ny)
            return y - pred

        return ResidualModel("wave2d", 2, apply, lambda history: identity, size)

    if isinstance(problem, KsProblem):
        n = problem.mesh.n
        dmat = _bands_to_banded(n, *_ks_d_bands(problem))

        def apply(y, history):
            amat = _bands_to_banded(n, *_ks_a_bands(problem, history[0]))
            return amat.matvec(y) - dmat.matvec(history[0])

        def jacobian_y(history):
            return _bands_to_banded(n, *_ks_a_bands(problem, history[0]))

        return ResidualModel("ks", 1, apply, jacobian_y, n)

    raise ValueError(f"unknown model type {type(problem).__name__}")


def wave2d_step_flat(problem, u1_flat, u2_flat, r2, nx, ny):
    u1 = u1_flat.reshape(nx, ny)
    u2 = u2_flat.reshape(nx, ny)
    out = 2.0 * u1 - u2
    interior = (
        4.0 * u1[1:-1, 1:-1]
        - u1[:-2, 1:-1]
        - u1[2:, 1:-1]
        - u1[1:-1, :-2]
        - u1[1:-1, 2:]
    )
    out[1:-1, 1:-1] -= r2 * interior
    return out.ravel()


# ---------------------------------------------------------------------------
# trajectory driver
# ---------------------------------------------------------------------------


def run_fom(problem, steps: int, sample_every: int = 1) -> SnapshotMatrix:
    """Integrate a problem and sample states (including t = 0).

    Wave problems store [u; v] per column with v^n = (u^n - u^{n-1}) / dt
    and v^0 = v0. 2D fields are flattened x-major.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if sample_every < 1:
        raise ValueError(f"sample_every must be >= 1, got {sample_every}")
    dt = problem.dt

    if isinstance(problem, HeatProblem):
        mesh, layout = problem.mesh, Layout.SCALAR
        u = problem.u0.astype(float).copy()
        states = [StateVector(layout, u.copy(), mesh)]
        times = [0.0]
        for step in range(1, steps + 1):
            u = heat_step(problem, u)
            if step % sample_every == 0 or step == steps:
                states.append(StateVector(layout, u.copy(), mesh))
                times.append(step * dt)
        return assemble_snapshots(states, np.array(times))

    if isinstance(problem, KsProblem):
        mesh, layout = problem.mesh, Layout.SCALAR
        u = problem.u0.astype(float).copy()
        states = [StateVector(layout, u.copy(), mesh)]
        times = [0.0]
        for step in range(1, steps + 1):
            u = ks_step(problem, u)
            if step % sample_every == 0 or step == steps:
                states.append(StateVector(layout, u.copy(), mesh))
                times.append(step * dt)
        return assemble_snapshots(states, np.array(times))

    if isinstance(problem, WaveProblem1D):
        mesh, layout = problem.mesh, Layout.SCALAR_WITH_VELOCITY
        u_prev2 = problem.u0.astype(float).copy()
        states = [StateVector(layout, np.concatenate((u_prev2, problem.v0)), mesh)]
        times = [0.0]
        u_prev = bootstrap_second_state(problem)
        if 1 % sample_every == 0 or steps == 1:
            states.append(
                StateVector(layout, np.concatenate((u_prev, (u_prev - u_prev2) / dt)), mesh)
            )
            times.append(dt)
        for step in range(2, steps + 1):
            u_next = wave1d_step(problem, u_prev, u_prev2)
            if step % sample_every == 0 or step == steps:
                states.append(
                    StateVector(layout, np.concatenate((u_next, (u_next - u_prev) / dt)), mesh)
                )
                times.append(step * dt)
            u_prev2, u_prev = u_prev, u_next
        return assemble_snapshots(states, np.array(times))

    if isinstance(problem, WaveProblem2D):
        mesh, layout = problem.mesh, Layout.SCALAR_WITH_VELOCITY
        u_prev2 = problem.u0.astype(float).copy()
        states = [
            StateVector(layout, np.concatenate((u_prev2.ravel(), problem.v0.ravel())), mesh)
        ]
        times = [0.0]
        u_prev = bootstrap_second_state(problem)
        if 1 % sample_every == 0 or steps == 1:
            states.append(
                StateVector(
                    layout,
                    np.concatenate((u_prev.ravel(), ((u_prev - u_prev2) / dt).ravel())),
                    mesh,
                )
            )
            times.append(dt)
        for step in range(2, steps + 1):
            u_next = wave2d_step(problem, u_prev, u_prev2)
            if step % sample_every == 0 or step == steps:
                states.append(
                    StateVector(
                        layout,
                        np.concatenate((u_next.ravel(), ((u_next - u_prev) / dt).ravel())),
                        mesh,
                    )
                )
                times.append(step * dt)
            u_prev2, u_prev = u_prev, u_next
        return assemble_snapshots(states, np.array(times))

    raise ValueError(f"unknown problem type {type(problem).__name__}")
