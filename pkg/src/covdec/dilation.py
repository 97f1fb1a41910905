"""Finite-dimensional dilations phi(a) = V^dagger pi(a) V.

* CP maps dilate through a *-homomorphism pi(a) = a kron I_r,
* coCP maps through a *-antihomomorphism pi(a) = a^T kron I_r,
* decomposable maps through the Jordan morphism pi_1 (+) pi_2 on the direct
  sum of the two spaces.

The dilation space is C^n kron C^r with the n-index leading, so V is an
(n r) x n matrix whose k-th row block (rows i*r + k) is the k-th Kraus
operator's adjoint.  Covariant maps carry unitary intertwiners
W(g) = R(g) kron N(g) with V U(g) = W(g) V, R = U or conj(U).
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import block_diag

from .basis import canonical_basis
from .covariance import _rng, _sample_points, _torus, diag_unitary
from .errors import CertificateError, NoIntertwinerError
from .linmap import (
    DEFAULT_PSD_TOL,
    OperatorSum,
    apply,
    compose_transpose,
    cp_check,
    is_cocp,
    is_cp,
    zero_map,
)

__all__ = [
    "HOMOMORPHISM",
    "ANTIHOMOMORPHISM",
    "JORDAN",
    "Dilation",
    "CovarianceIntertwiner",
    "KrausCovarianceWitness",
    "stinespring",
    "costinespring",
    "jordan_dilation",
    "dilate",
    "kraus_covariance_witness",
    "covariance_intertwiner",
]

HOMOMORPHISM = "homomorphism"
ANTIHOMOMORPHISM = "antihomomorphism"
JORDAN = "jordan"

RANK_CUTOFF = 1e-10
NOISE_FLOOR = 1e-13
INTERTWINER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Dilation:
    """V : C^n -> K and a morphism pi : M_n -> B(K) with phi = V^dagger pi(.) V.

    Attributes:
        n: input dimension.
        V: K_dim x n matrix.
        kind: homomorphism, antihomomorphism or jordan.
        multiplicity: r, so that K = C^n kron C^r (homomorphism and
            antihomomorphism kinds; the sum r_1 + r_2 for jordan).
        parts: the two summand dilations of a jordan dilation.
        truncated_weight: total |eigenvalue| of the coefficient matrix dropped
            below the rank cutoff, ignoring roundoff-level entries.
    """

    n: int
    V: np.ndarray
    kind: str
    multiplicity: int
    parts: tuple = ()
    truncated_weight: float = 0.0

    @property
    def K_dim(self):
        return self.V.shape[0]

    @property
    def truncated(self):
        return self.truncated_weight > 0.0

    def pi(self, a):
        a = np.asarray(a, dtype=complex)
        if self.kind == JORDAN:
            return block_diag(self.parts[0].pi(a), self.parts[1].pi(a))
        if self.multiplicity == 0:
            return np.zeros((0, 0), dtype=complex)
        base = a if self.kind == HOMOMORPHISM else a.T
        return np.kron(base, np.eye(self.multiplicity))

    @property
    def P1(self):
        return self._projection(0)

    @property
    def P2(self):
        return self._projection(1)

    def _projection(self, which):
        if self.kind != JORDAN:
            raise AttributeError("block projections exist only for jordan dilations")
        k1 = self.parts[0].K_dim
        d = np.zeros(self.K_dim)
        if which == 0:
            d[:k1] = 1.0
        else:
            d[k1:] = 1.0
        return np.diag(d)

    def kraus_blocks(self):
        """Row blocks V_k (n x n) with V = sum_k V_k kron e_k."""
        r = self.multiplicity
        return self.V.reshape(self.n, r, self.n).transpose(1, 0, 2)

    def compress(self, a):
        return self.V.conj().T @ self.pi(a) @ self.V

    def reconstruction_error(self, m):
        """max over E_ij of ||V^dagger pi(E_ij) V - phi(E_ij)||."""
        return max(float(np.linalg.norm(self.compress(E) - apply(m, E))) for E in canonical_basis(self.n))

    def morphism_residual(self, pairs=20, seed=0):
        """Max residual of the multiplicative law matching ``kind``."""
        rng = _rng(seed)
        worst = 0.0
        for _ in range(pairs):
            a, b = (rng.normal(size=(2, self.n, self.n)) + 1j * rng.normal(size=(2, self.n, self.n)))
            pa, pb = self.pi(a), self.pi(b)
            if self.kind == HOMOMORPHISM:
                res = self.pi(a @ b) - pa @ pb
            elif self.kind == ANTIHOMOMORPHISM:
                res = self.pi(a @ b) - pb @ pa
            else:
                res = self.pi(a @ b + b @ a) - (pa @ pb + pb @ pa)
            worst = max(worst, float(np.linalg.norm(res)))
        return worst


def _kraus_from_cp(m, cutoff):
    c = m.c
    lam, vec = np.linalg.eigh(0.5 * (c + c.conj().T))
    keep = lam > cutoff
    # eigenvalues at roundoff level are exact zeros, not truncation
    small = np.abs(lam[~keep])
    dropped = float(small[small > NOISE_FLOOR].sum())
    G = np.einsum("ik,iab->kab", vec[:, keep], m.basis_matrices)
    return np.sqrt(lam[keep])[:, None, None] * G, dropped


def _stack(kraus, n):
    """V with row (i, k) equal to row i of A_k^dagger."""
    Adag = np.asarray(kraus).conj().transpose(0, 2, 1)
    r = len(Adag)
    return np.einsum("kij->ikj", Adag).reshape(n * r, n)


def stinespring_from_kraus(kraus, n=None):
    """Homomorphism dilation of A -> sum_k A_k A A_k^dagger."""
    kraus = np.asarray(kraus, dtype=complex)
    if n is None:
        n = kraus.shape[-1]
    kraus = kraus.reshape(-1, n, n)
    return Dilation(n, _stack(kraus, n), HOMOMORPHISM, len(kraus))


def stinespring(m, cutoff=RANK_CUTOFF, tol=DEFAULT_PSD_TOL):
    """Minimal Stinespring dilation of a CP map.

    The Kraus rank is the number of eigenvalues of the coefficient matrix
    above ``cutoff``.

    Raises:
        CertificateError: if m is not CP.
    """
    rep = cp_check(m, tol)
    if not rep.ok:
        raise CertificateError(f"map is not CP (min eigenvalue {rep.min_eigenvalue:.3e})")
    kraus, dropped = _kraus_from_cp(m, cutoff)
    return Dilation(m.n, _stack(kraus, m.n), HOMOMORPHISM, len(kraus), truncated_weight=dropped)


def costinespring(m, cutoff=RANK_CUTOFF, tol=DEFAULT_PSD_TOL):
    """Antihomomorphism dilation of a coCP map.

    Dilates tau o m with a homomorphism X and conjugates entrywise: V = conj(X).

    Raises:
        CertificateError: if m is not coCP.
    """
    if not is_cocp(m, tol):
        raise CertificateError("map is not coCP")
    inner = stinespring(compose_transpose(m), cutoff, tol)
    return Dilation(m.n, inner.V.conj(), ANTIHOMOMORPHISM, inner.multiplicity,
                    truncated_weight=inner.truncated_weight)


def jordan_dilation(m1, m2, cutoff=RANK_CUTOFF, tol=DEFAULT_PSD_TOL):
    """Direct-sum dilation of m1 + m2 with m1 CP and m2 coCP."""
    d1 = stinespring(m1, cutoff, tol)
    d2 = costinespring(m2, cutoff, tol)
    V = np.vstack([d1.V, d2.V])
    return Dilation(m1.n, V, JORDAN, d1.multiplicity + d2.multiplicity, (d1, d2),
                    d1.truncated_weight + d2.truncated_weight)


def dilate(m, kind="auto", cutoff=RANK_CUTOFF, tol=DEFAULT_PSD_TOL):
    """Dispatch on ``kind``: auto, cp, cocp or jordan.

    ``auto`` prefers the certificate when one is attached, then tries CP, then
    coCP.  ``jordan`` without a certificate uses the trivial split.
    """
    if kind == "cp":
        return stinespring(m, cutoff, tol)
    if kind == "cocp":
        return costinespring(m, cutoff, tol)
    if kind == "jordan":
        if m.certificate is not None:
            return jordan_dilation(*m.certificate, cutoff=cutoff, tol=tol)
        z = zero_map(m.n, m.basis)
        return jordan_dilation(m, z, cutoff, tol) if is_cp(m, tol) else jordan_dilation(z, m, cutoff, tol)
    if kind == "auto":
        if m.certificate is not None:
            return jordan_dilation(*m.certificate, cutoff=cutoff, tol=tol)
        if is_cp(m, tol):
            return stinespring(m, cutoff, tol)
        if is_cocp(m, tol):
            return costinespring(m, cutoff, tol)
        raise CertificateError("map is neither CP nor coCP and carries no certificate")
    raise ValueError(f"unknown dilation kind {kind!r}")


# -- covariance witnesses -------------------------------------------------------


def _mixing_matrix(targets, sources):
    """Least-squares N with targets[k] = sum_m N[k, m] sources[m].

    Returns (N, residual, rank) with the residual the Frobenius norm of the
    misfit over all k.
    """
    r = len(sources)
    if r == 0:
        return np.zeros((0, 0), dtype=complex), 0.0, 0
    X = np.asarray(sources).reshape(r, -1)
    Y = np.asarray(targets).reshape(r, -1)
    Nt, *_ = np.linalg.lstsq(X.T, Y.T, rcond=None)
    N = Nt.T
    residual = float(np.linalg.norm(N @ X - Y))
    return N, residual, int(np.linalg.matrix_rank(X))


def _unitarity(N):
    return float(np.linalg.norm(N @ N.conj().T - np.eye(len(N)))) if len(N) else 0.0


@dataclass(frozen=True, eq=False)
class KrausCovarianceWitness:
    N: np.ndarray
    residual: float
    unitarity_residual: float
    rank_deficient: bool

    def ok(self, tol=INTERTWINER_TOL):
        return self.residual <= tol and self.unitarity_residual <= tol


def kraus_covariance_witness(kraus, g, conjugate=False):
    """N with Ad(X_k) = sum_m N_km X_m for one torus element.

    The left conjugation is by U(g) (or conj U(g) when ``conjugate``) and the
    right by U(g)^-1.  ``kraus`` is an OperatorSum with nonnegative weights
    (folded into the operators) or an array of Kraus operators.  A linearly
    dependent family only fixes N on its span; that case sets
    ``rank_deficient`` and issues a warning.
    """
    X = kraus.folded() if isinstance(kraus, OperatorSum) else np.asarray(kraus, dtype=complex)
    if X.ndim == 2:
        X = X[None]
    g = _torus(g)
    U = diag_unitary(g)
    L = U.conj() if conjugate else U
    Y = np.einsum("ab,kbc,cd->kad", L, X, U.conj().T)
    N, res, rank = _mixing_matrix(Y, X)
    deficient = rank < len(X)
    if deficient:
        warnings.warn("Kraus family is linearly dependent; N is determined only on its span", RuntimeWarning,
                      stacklevel=2)
    return KrausCovarianceWitness(N, res, _unitarity(N), deficient)


@dataclass(frozen=True, eq=False)
class CovarianceIntertwiner:
    """W(g) with V U(g) = W(g) V and pi(U a U^-1) = W pi(a) W^-1.

    Attributes:
        W: callable g -> K_dim x K_dim unitary (Z(g) for jordan dilations).
        vu_residual: max over samples of ||V U(g) - W(g) V||.
        pi_residual: max over samples of ||pi(g(a)) - W(g) pi(a) W(g)^-1||.
        unitarity_residual: max over samples of ||W W^dagger - I||.
        truncated: True when the underlying dilation dropped spectral weight,
            in which case residuals only cover the retained Kraus span.
    """

    W: Callable
    vu_residual: float
    pi_residual: float
    unitarity_residual: float
    points: int
    truncated: bool = False
    witnesses: Optional[list] = field(default=None, repr=False)

    @property
    def residual(self):
        return max(self.vu_residual, self.pi_residual, self.unitarity_residual)


def _simple_W(d, g):
    U = diag_unitary(g)
    R = U if d.kind == HOMOMORPHISM else U.conj()
    blocks = d.kraus_blocks()
    targets = np.einsum("ab,kbc,cd->kad", R.conj().T, blocks, U)
    N, _, _ = _mixing_matrix(targets, blocks)
    return np.kron(R, N), N


def _W_of(d, g):
    if d.kind == JORDAN:
        W1, _ = _simple_W(d.parts[0], g)
        W2, _ = _simple_W(d.parts[1], g)
        return block_diag(W1, W2)
    return _simple_W(d, g)[0]


def covariance_intertwiner(d, samples=30, seed=0, tol=INTERTWINER_TOL, points=None):
    """Build and verify the unitary intertwiners of a dilation.

    N(g) is fitted by least squares over the Kraus blocks of V and is then
    checked, not forced, to be unitary.  For a jordan dilation each summand
    must be covariant on its own.

    Raises:
        NoIntertwinerError: if any residual exceeds ``tol``.
    """
    rng = _rng(seed)
    pts = points if points is not None else _sample_points(d.n, samples, rng)
    vu = pr = un = 0.0
    for g in pts:
        g = _torus(g)
        U = diag_unitary(g)
        W = _W_of(d, g)
        a = rng.normal(size=(d.n, d.n)) + 1j * rng.normal(size=(d.n, d.n))
        a /= np.linalg.norm(a)
        vu = max(vu, float(np.linalg.norm(d.V @ U - W @ d.V)))
        lhs = d.pi(U @ a @ U.conj().T)
        pr = max(pr, float(np.linalg.norm(lhs - W @ d.pi(a) @ W.conj().T)))
        un = max(un, _unitarity(W))
    result = CovarianceIntertwiner(lambda g: _W_of(d, _torus(g)), vu, pr, un, len(pts), d.truncated_weight > 0)
    worst = max(vu / max(1.0, float(np.linalg.norm(d.V))), pr, un)
    if worst > tol:
        raise NoIntertwinerError(f"no intertwiner within {tol:.1e} (residual {worst:.3e}); map is not covariant",
                                 residual=worst)
    return result

