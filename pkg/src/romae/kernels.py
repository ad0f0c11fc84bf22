"""Hot numeric kernels: numba-jitted loops with a pure-NumPy fallback.

The numba path is used when numba imports successfully and the environment
variable ROMAE_NO_NUMBA is unset/empty. Loop-structured kernels (tridiagonal
and banded solves, Jacobi sweeps) share one source and run as plain Python
when numba is off; the convolution kernels have a separate vectorized NumPy
implementation because the naive loops are not viable in the interpreter.

`benchmarks/bench_kernels.py` times the two paths against each other.
"""

import os

import numpy as np


def _numba_enabled() -> bool:
    if os.environ.get("ROMAE_NO_NUMBA", ""):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _numba_enabled()

if USE_NUMBA:
    from numba import njit
else:

    def njit(*args, **kwargs):
        # no-op decorator so the shared-source kernels stay importable
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# ---------------------------------------------------------------------------
# tridiagonal (Thomas) solve
# ---------------------------------------------------------------------------


@njit(cache=True)
def thomas_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system in place-free fashion.

    lower[i] multiplies x[i-1] in row i (lower[0] ignored), upper[i]
    multiplies x[i+1] (upper[-1] ignored). No pivoting; intended for the
    diagonally dominant systems produced by the time steppers.
    Returns the solution, or an array of NaN if a pivot underflows.
    """
    n = diag.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    x = np.empty(n)
    piv = diag[0]
    if abs(piv) < 1e-300:
        x[:] = np.nan
        return x
    c[0] = upper[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * c[i - 1]
        if abs(piv) < 1e-300:
            x[:] = np.nan
            return x
        if i < n - 1:
            c[i] = upper[i] / piv
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


# ---------------------------------------------------------------------------
# pentadiagonal solve with partial pivoting
# ---------------------------------------------------------------------------


@njit(cache=True)
def pentadiag_solve(sub2, sub1, diag, sup1, sup2, rhs):
    """Banded LU with partial pivoting for a pentadiagonal system.

    Bands are full-length arrays; out-of-range entries (sub2[0], sub2[1],
    sub1[0], sup1[-1], sup2[-2], sup2[-1]) are ignored. Partial pivoting
    grows the upper bandwidth from 2 to 4, so the working storage keeps 7
    entries per row (offsets -2..+4 relative to the row index).
    Returns the solution, or NaN if the matrix is numerically singular.
    """
    n = diag.shape[0]
    kl = 2
    w = np.zeros((n, 7))
    b = rhs.copy()
    x = np.empty(n)
    for i in range(n):
        if i >= 2:
            w[i, 0] = sub2[i]
        if i >= 1:
            w[i, 1] = sub1[i]
        w[i, 2] = diag[i]
        if i < n - 1:
            w[i, 3] = sup1[i]
        if i < n - 2:
            w[i, 4] = sup2[i]

    for j in range(n):
        # pivot search in column j over rows j..j+kl
        p = j
        best = abs(w[j, 2])
        imax = j + kl if j + kl < n - 1 else n - 1
        for i in range(j + 1, imax + 1):
            v = abs(w[i, j - i + 2])
            if v > best:
                best = v
                p = i
        if best < 1e-300:
            x[:] = np.nan
            return x
        if p != j:
            for col in range(j, j + 5):
                if col >= n:
                    break
                tmp = w[j, col - j + 2]
                w[j, col - j + 2] = w[p, col - p + 2]
                w[p, col - p + 2] = tmp
            tmp = b[j]
            b[j] = b[p]
            b[p] = tmp
        piv = w[j, 2]
        for i in range(j + 1, imax + 1):
            m = w[i, j - i + 2] / piv
            if m != 0.0:
                w[i, j - i + 2] = 0.0
                for col in range(j + 1, j + 5):
                    if col >= n:
                        break
                    w[i, col - i + 2] -= m * w[j, col - j + 2]
                b[i] -= m * b[j]

    for i in range(n - 1, -1, -1):
        acc = b[i]
        imax = i + 4 if i + 4 < n - 1 else n - 1
        for col in range(i + 1, imax + 1):
            acc -= w[i, col - i + 2] * x[col]
        x[i] = acc / w[i, 2]
    return x


# ---------------------------------------------------------------------------
# 1D convolution (same padding, stride 1), layout (batch, length, channels)
# ---------------------------------------------------------------------------


def conv1d_forward_numpy(x, w, bias):
    batch, length, _ = x.shape
    k = w.shape[0]
    pl = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pl, k - 1 - pl), (0, 0)))
    y = np.broadcast_to(bias, (batch, length, w.shape[2])).copy()
    for j in range(k):
        y += xp[:, j : j + length, :] @ w[j]
    return y


def conv1d_backward_numpy(x, w, gy):
    batch, length, _ = x.shape
    k = w.shape[0]
    pl = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pl, k - 1 - pl), (0, 0)))
    gb = gy.sum(axis=(0, 1))
    gw = np.empty_like(w)
    gxp = np.zeros_like(xp)
    for j in range(k):
        gw[j] = np.tensordot(xp[:, j : j + length, :], gy, axes=((0, 1), (0, 1)))
        gxp[:, j : j + length, :] += gy @ w[j].T
    return gxp[:, pl : pl + length, :], gw, gb


def _make_conv1d_numba():
    @njit(cache=True)
    def forward(x, w, bias):
        batch, length, cin = x.shape
        k, _, cout = w.shape
        pl = (k - 1) // 2
        y = np.empty((batch, length, cout))
        for n in range(batch):
            for l in range(length):
                for co in range(cout):
                    y[n, l, co] = bias[co]
                for j in range(k):
                    src = l + j - pl
                    if 0 <= src < length:
                        for ci in range(cin):
                            xv = x[n, src, ci]
                            for co in range(cout):
                                y[n, l, co] += xv * w[j, ci, co]
        return y

    @njit(cache=True)
    def backward(x, w, gy):
        batch, length, cin = x.shape
        k, _, cout = w.shape
        pl = (k - 1) // 2
        gx = np.zeros((batch, length, cin))
        gw = np.zeros((k, cin, cout))
        gb = np.zeros(cout)
        for n in range(batch):
            for l in range(length):
                for co in range(cout):
                    gb[co] += gy[n, l, co]
                for j in range(k):
                    src = l + j - pl
                    if 0 <= src < length:
                        for ci in range(cin):
                            xv = x[n, src, ci]
                            acc = 0.0
                            for co in range(cout):
                                g = gy[n, l, co]
                                gw[j, ci, co] += xv * g
                                acc += g * w[j, ci, co]
                            gx[n, src, ci] += acc
        return gx, gw, gb

    return forward, backward


# ---------------------------------------------------------------------------
# 2D convolution (same padding, stride 1), layout (batch, nx, ny, channels)
# ---------------------------------------------------------------------------


def conv2d_forward_numpy(x, w, bias):
    batch, nx, ny, _ = x.shape
    kh, kw = w.shape[0], w.shape[1]
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (ph, kh - 1 - ph), (pw, kw - 1 - pw), (0, 0)))
    y = np.broadcast_to(bias, (batch, nx, ny, w.shape[3])).copy()
    for i in range(kh):
        for j in range(kw):
            y += xp[:, i : i + nx, j : j + ny, :] @ w[i, j]
    return y


def conv2d_backward_numpy(x, w, gy):
    batch, nx, ny, _ = x.shape
    kh, kw = w.shape[0], w.shape[1]
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (ph, kh - 1 - ph), (pw, kw - 1 - pw), (0, 0)))
    gb = gy.sum(axis=(0, 1, 2))
    gw = np.empty_like(w)
    gxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            gw[i, j] = np.tensordot(
                xp[:, i : i + nx, j : j + ny, :], gy, axes=((0, 1, 2), (0, 1, 2))
            )
            gxp[:, i : i + nx, j : j + ny, :] += gy @ w[i, j].T
    return gxp[:, ph : ph + nx, pw : pw + ny, :], gw, gb


def _make_conv2d_numba():
    @njit(cache=True)
    def forward(x, w, bias):
        batch, nx, ny, cin = x.shape
        kh, kw, _, cout = w.shape
        ph = (kh - 1) // 2
        pw = (kw - 1) // 2
        y = np.empty((batch, nx, ny, cout))
        for n in range(batch):
            for ix in range(nx):
                for iy in range(ny):
                    for co in range(cout):
                        y[n, ix, iy, co] = bias[co]
                    for i in range(kh):
                        sx = ix + i - ph
                        if sx < 0 or sx >= nx:
                            continue
                        for j in range(kw):
                            sy = iy + j - pw
                            if sy < 0 or sy >= ny:
                                continue
                            for ci in range(cin):
                                xv = x[n, sx, sy, ci]
                                for co in range(cout):
                                    y[n, ix, iy, co] += xv * w[i, j, ci, co]
        return y

    @njit(cache=True)
    def backward(x, w, gy):
        batch, nx, ny, cin = x.shape
        kh, kw, _, cout = w.shape
        ph = (kh - 1) // 2
        pw = (kw - 1) // 2
        gx = np.zeros((batch, nx, ny, cin))
        gw = np.zeros((kh, kw, cin, cout))
        gb = np.zeros(cout)
        for n in range(batch):
            for ix in range(nx):
                for iy in range(ny):
                    for co in range(cout):
                        gb[co] += gy[n, ix, iy, co]
                    for i in range(kh):
                        sx = ix + i - ph
                        if sx < 0 or sx >= nx:
                            continue
                        for j in range(kw):
                            sy = iy + j - pw
                            if sy < 0 or sy >= ny:
                                continue
                            for ci in range(cin):
                                xv = x[n, sx, sy, ci]
                                acc = 0.0
                                for co in range(cout):
                                    g = gy[n, ix, iy, co]
                                    gw[i, j, ci, co] += xv * g
                                    acc += g * w[i, j, ci, co]
                                gx[n, sx, sy, ci] += acc
        return gx, gw, gb

    return forward, backward


# ---------------------------------------------------------------------------
# cyclic Jacobi eigenvalue sweeps for symmetric matrices
# ---------------------------------------------------------------------------


def _offdiag_norm(s):
    return np.sqrt(max(np.sum(s * s) - np.sum(np.diag(s) ** 2), 0.0))


def jacobi_eigvals_numpy(s, rel_tol=1e-12, max_sweeps=60):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(s, dtype=float)
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        return np.diag(a).copy()
    for _ in range(max_sweeps):
        if _offdiag_norm(a) <= rel_tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - sn * rq
                a[q, :] = sn * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - sn * cq
                a[:, q] = sn * cp + c * cq
    return np.diag(a).copy()


def _make_jacobi_numba():
    @njit(cache=True)
    def eigvals(s, rel_tol, max_sweeps):
        a = s.copy()
        n = a.shape[0]
        total = 0.0
        for i in range(n):
            for j in range(n):
                total += a[i, j] * a[i, j]
        scale = np.sqrt(total)
        out = np.empty(n)
        if scale == 0.0 or n == 1:
            for i in range(n):
                out[i] = a[i, i]
            return out
        for _ in range(max_sweeps):
            off = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        off += a[i, j] * a[i, j]
            if np.sqrt(off) <= rel_tol * scale:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if abs(apq) <= 1e-300:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if theta == 0.0:
                        t = 1.0
                    else:
                        t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    sn = t * c
                    for k in range(n):
                        akp = a[p, k]
                        akq = a[q, k]
                        a[p, k] = c * akp - sn * akq
                        a[q, k] = sn * akp + c * akq
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - sn * akq
                        a[k, q] = sn * akp + c * akq
        for i in range(n):
            out[i] = a[i, i]
        return out

    return eigvals


if USE_NUMBA:
    conv1d_forward, conv1d_backward = _make_conv1d_numba()
    conv2d_forward, conv2d_backward = _make_conv2d_numba()
    _jacobi_nb = _make_jacobi_numba()

    def jacobi_eigvals(s, rel_tol=1e-12, max_sweeps=60):
        return _jacobi_nb(np.ascontiguousarray(s, dtype=np.float64), rel_tol, max_sweeps)

else:
    conv1d_forward = conv1d_forward_numpy
    conv1d_backward = conv1d_backward_numpy
    conv2d_forward = conv2d_forward_numpy
    conv2d_backward = conv2d_backward_numpy
    jacobi_eigvals = jacobi_eigvals_numpy


def warmup():
    """Trigger jit compilation of every kernel (no-op on the NumPy path)."""
    x1 = np.random.default_rng(0).standard_normal((2, 8, 3))
    w1 = np.random.default_rng(1).standard_normal((5, 3, 4))
    b1 = np.zeros(4)
    y1 = conv1d_forward(x1, w1, b1)
    conv1d_backward(x1, w1, y1)
    x2 = np.random.default_rng(2).standard_normal((2, 4, 4, 2))
    w2 = np.random.default_rng(3).standard_normal((3, 3, 2, 3))
    b2 = np.zeros(3)
    y2 = conv2d_forward(x2, w2, b2)
    conv2d_backward(x2, w2, y2)
    n = 8
    thomas_solve(np.full(n, -1.0), np.full(n, 4.0), np.full(n, -1.0), np.ones(n))
    pentadiag_solve(
        np.full(n, 1.0), np.full(n, -4.0), np.full(n, 8.0),
        np.full(n, -4.0), np.full(n, 1.0), np.ones(n),
    )
    jacobi_eigvals(np.eye(3))
