"""Random matrices and maps used by the checks, suites and tests."""

import numpy as np

from .linmap import FROBENIUS, MapMatrix, from_kraus


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(n, rng, k=None):
    k = n if k is None else k
    return rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))


def random_unitary(n, seed=None):
    """Haar-distributed unitary via QR with the phase correction on R's diagonal."""
    rng = _rng(seed)
    Q, R = np.linalg.qr(ginibre(n, rng))
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_hermitian(n, seed=None, scale=1.0):
    G = ginibre(n, _rng(seed))
    return 0.5 * scale * (G + G.conj().T)


def random_density(n, seed=None, rank=None):
    G = ginibre(n, _rng(seed), rank)
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_cp_map(n, seed=None, rank=None, basis=FROBENIUS):
    """A -> sum_k X_k A X_k^dagger with ``rank`` Gaussian Kraus operators."""
    rng = _rng(seed)
    r = n * n if rank is None else rank
    X = rng.normal(size=(r, n, n)) + 1j * rng.normal(size=(r, n, n))
    return from_kraus(X / np.sqrt(r * n), basis=basis)


def random_generic_map(n, seed=None):
    rng = _rng(seed)
    N = n * n
    return MapMatrix(n, rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))


def random_hp_map(n, seed=None):
    c = random_hermitian(n * n, seed)
    return MapMatrix(n, c)
