"""Hot numeric kernels: torus twirl quadrature and RK4 map propagation.

Each kernel has a numba ``@njit`` implementation and a pure-numpy one.  The
numba path is used when numba imports and the environment variable
``COVDEC_DISABLE_NUMBA`` is unset or "0".  Both paths are always importable
so tests and the benchmark can compare them directly.
"""

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False


def numba_enabled():
    flag = os.environ.get("COVDEC_DISABLE_NUMBA", "0").strip().lower()
    return HAS_NUMBA and flag in ("", "0", "false", "no")


def _njit(fn):
    if not HAS_NUMBA:  # pragma: no cover
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# -- twirl over the torus -------------------------------------------------------
#
# Averaging (U kron conj U) S (U kron conj U)^dagger over the grid multiplies
# S entrywise by W[p, q] = mean over the grid of d_p conj(d_q), where
# d = vec(u u^dagger).  W depends only on (n, nodes), so it is cached.


def twirl_weights_numpy(n, nodes):
    """W summed over a uniform grid with ``nodes`` points per circle."""
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    grid = np.stack(np.meshgrid(*([theta] * n), indexing="ij"), axis=-1).reshape(-1, n)
    u = np.exp(1j * grid)
    d = (u[:, :, None] * u[:, None, :].conj()).reshape(len(grid), n * n)
    return d.T @ d.conj() / len(grid)


@_njit
def twirl_weights_numba(n, nodes):
    N = n * n
    out = np.zeros((N, N), dtype=np.complex128)
    u = np.empty(n, dtype=np.complex128)
    d = np.empty(N, dtype=np.complex128)
    step = 2.0 * np.pi / nodes
    total = nodes**n
    for m in range(total):
        rem = m
        for j in range(n - 1, -1, -1):
            k = rem % nodes
            rem //= nodes
            u[j] = np.exp(1j * step * k)
        for a in range(n):
            for b in range(n):
                d[a * n + b] = u[a] * np.conj(u[b])
        for p in range(N):
            dp = d[p]
            for q in range(N):
                out[p, q] += dp * np.conj(d[q])
    return out / total


_WEIGHTS = {}


def twirl_weights(n, nodes=8):
    key = (n, nodes, numba_enabled())
    if key not in _WEIGHTS:
        fn = twirl_weights_numba if key[2] else twirl_weights_numpy
        W = fn(n, nodes)
        W.setflags(write=False)
        _WEIGHTS[key] = W
    return _WEIGHTS[key]


def twirl_torus(S, n, nodes=8):
    """Average (U kron conj U) S (U kron conj U)^dagger over the grid."""
    return np.asarray(S, dtype=np.complex128) * twirl_weights(n, nodes)


# -- classical RK4 for d/dt X = L_t X, X_0 = I ---------------------------------
#
# Ls has shape (1, N, N) for a constant generator, or (2*steps + 1, N, N)
# holding L at the half-step nodes t_0, t_0 + h/2, t_0 + h, ...


def rk4_propagate_numpy(Ls, h, steps):
    N = Ls.shape[1]
    out = np.empty((steps + 1, N, N), dtype=np.complex128)
    X = np.eye(N, dtype=np.complex128)
    out[0] = X
    const = Ls.shape[0] == 1
    for k in range(steps):
        if const:
            L1 = L2 = L3 = Ls[0]
        else:
            L1, L2, L3 = Ls[2 * k], Ls[2 * k + 1], Ls[2 * k + 2]
        k1 = L1 @ X
        k2 = L2 @ (X + 0.5 * h * k1)
        k3 = L2 @ (X + 0.5 * h * k2)
        k4 = L3 @ (X + h * k3)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = X
    return out


@_njit
def _matmul(A, B, out):
    # i-k-j order keeps the inner loop on contiguous rows
    N = A.shape[0]
    for i in range(N):
        for j in range(N):
            out[i, j] = 0.0
        for k in range(N):
            aik = A[i, k]
            for j in range(N):
                out[i, j] += aik * B[k, j]


@_njit
def rk4_propagate_numba(Ls, h, steps):
    N = Ls.shape[1]
    out = np.empty((steps + 1, N, N), dtype=np.complex128)
    X = np.eye(N, dtype=np.complex128)
    out[0] = X
    k1 = np.empty((N, N), dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    const = Ls.shape[0] == 1
    for k in range(steps):
        if const:
            i1 = 0
            i2 = 0
            i3 = 0
        else:
            i1 = 2 * k
            i2 = 2 * k + 1
            i3 = 2 * k + 2
        _matmul(Ls[i1], X, k1)
        for i in range(N):
            for j in range(N):
                tmp[i, j] = X[i, j] + 0.5 * h * k1[i, j]
        _matmul(Ls[i2], tmp, k2)
        for i in range(N):
            for j in range(N):
                tmp[i, j] = X[i, j] + 0.5 * h * k2[i, j]
        _matmul(Ls[i2], tmp, k3)
        for i in range(N):
            for j in range(N):
                tmp[i, j] = X[i, j] + h * k3[i, j]
        _matmul(Ls[i3], tmp, k4)
        for i in range(N):
            for j in range(N):
                X[i, j] += (h / 6.0) * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        out[k + 1] = X
    return out


def rk4_propagate(Ls, h, steps):
    Ls = np.ascontiguousarray(Ls, dtype=np.complex128)
    if numba_enabled():
        return rk4_propagate_numba(Ls, float(h), int(steps))
    return rk4_propagate_numpy(Ls, float(h), int(steps))
