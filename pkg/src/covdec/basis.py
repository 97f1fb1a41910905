"""Canonical and Frobenius (generalized Gell-Mann) bases of M_n.

The Frobenius basis is ordered in three blocks::

    F_1 .. F_m          symmetric      (E_mn + E_nm) / sqrt(2)
    F_m+1 .. F_2m       antisymmetric  -i (E_mn - E_nm) / sqrt(2)
    F_2m+1 .. F_n^2     diagonal       K_1 .. K_{n-1}, I / sqrt(n)

with m = n(n-1)/2.  Pairs (mu, nu), mu < nu, are enumerated in
lexicographic order and the same enumeration is used for the symmetric and
antisymmetric blocks.  Indices are 0-based throughout the code.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import DimensionError

__all__ = [
    "FrobeniusBasis",
    "build_frobenius_basis",
    "canonical_basis",
    "diagonal_generator",
    "expand",
    "reconstruct",
]


def _check_dim(n):
    if int(n) != n or n < 2:
        raise DimensionError(f"dimension must be an integer >= 2, got {n!r}")
    return int(n)


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FrobeniusBasis:
    """Ordered Hermitian orthonormal basis of M_n.

    Attributes:
        n: matrix dimension.
        matrices: array of shape (n^2, n, n); ``matrices[i]`` is F_{i+1}.
        pair_map: tuple of 0-based pairs (mu, nu), mu < nu, one per index of
            the symmetric (and antisymmetric) block.
    """

    n: int
    matrices: np.ndarray
    pair_map: tuple

    @property
    def size(self):
        return self.n * self.n

    @property
    def n_pairs(self):
        return len(self.pair_map)

    @property
    def sym(self):
        return slice(0, self.n_pairs)

    @property
    def asym(self):
        return slice(self.n_pairs, 2 * self.n_pairs)

    @property
    def diag(self):
        return slice(2 * self.n_pairs, self.size)

    @property
    def vec_matrix(self):
        """Unitary whose columns are the row-major vectorizations of F_i."""
        return self.matrices.reshape(self.size, self.size).T

    def diagonal_entries(self):
        """D[a, k] = (F^d_k)_{aa}; D is a real orthogonal n x n matrix."""
        return np.real(np.einsum("kaa->ak", self.matrices[self.diag]))

    def __len__(self):
        return self.size

    def __getitem__(self, i):
        return self.matrices[i]


def diagonal_generator(k, n):
    """K_k = (sum_{j<=k} E_jj - k E_{k+1,k+1}) / sqrt(k(k+1)), k = 1..n-1."""
    if not 1 <= k <= n - 1:
        raise DimensionError(f"K_k needs 1 <= k <= n-1, got k={k}, n={n}")
    d = np.zeros(n)
    d[:k] = 1.0
    d[k] = -k
    return np.diag(d / np.sqrt(k * (k + 1))).astype(complex)


@lru_cache(maxsize=None)
def build_frobenius_basis(n):
    n = _check_dim(n)
    pairs = tuple(combinations(range(n), 2))
    m = len(pairs)
    F = np.zeros((n * n, n, n), dtype=complex)
    s = 1.0 / np.sqrt(2.0)
    for k, (mu, nu) in enumerate(pairs):
        F[k, mu, nu] = F[k, nu, mu] = s
        F[m + k, mu, nu] = -1j * s
        F[m + k, nu, mu] = 1j * s
    for k in range(1, n):
        F[2 * m + k - 1] = diagonal_generator(k, n)
    F[-1] = np.eye(n) / np.sqrt(n)
    return FrobeniusBasis(n=n, matrices=_frozen(F), pair_map=pairs)


@lru_cache(maxsize=None)
def _canonical(n):
    E = np.zeros((n * n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            E[i * n + j, i, j] = 1.0
    return _frozen(E)


def canonical_basis(n):
    """E_ij in row-major order, as an array of shape (n^2, n, n)."""
    return _canonical(_check_dim(n))


def expand(A, basis):
    """Hilbert-Schmidt coefficients v_i = tr(F_i^dagger A)."""
    A = np.asarray(A)
    n = basis.n
    if A.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} matrix, got shape {A.shape}")
    return np.einsum("iab,ab->i", basis.matrices.conj(), A)


def reconstruct(v, basis):
    """Inverse of :func:`expand`."""
    v = np.asarray(v)
    if v.shape != (basis.size,):
        raise DimensionError(f"expected {basis.size} coefficients, got shape {v.shape}")
    return np.einsum("i,iab->ab", v, basis.matrices)
