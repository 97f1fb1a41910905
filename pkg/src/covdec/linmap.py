"""Linear maps on M_n in coefficient-matrix form.

A map is stored as the n^2 x n^2 matrix c with

    phi(A) = sum_ij c_ij B_i A B_j^dagger

where {B_i} is either the Frobenius basis or the canonical basis {E_ij}
(row-major).  Conversions go through the superoperator S acting on
row-major vectorizations, vec(X A Y) = (X kron Y^T) vec(A).  In the
canonical basis c is exactly the index reshuffle of S, and the Frobenius
coefficient matrix is a unitary change of basis of that.

Complex conjugation J is entrywise conjugation in the computational basis,
so the transpose map is plain matrix transposition.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .basis import build_frobenius_basis, canonical_basis
from .errors import CertificateError, DimensionError

__all__ = [
    "MapMatrix",
    "OperatorSum",
    "CanonicalCovariantForm",
    "PositivityReport",
    "apply",
    "compose_transpose",
    "dual_map",
    "is_hermiticity_preserving",
    "cp_check",
    "is_cp",
    "is_cocp",
    "decomposable_certificate",
    "certify_decomposable",
    "to_operator_sum",
    "from_canonical_covariant",
    "from_superop",
    "from_kraus",
    "identity_map",
    "transpose_map",
    "zero_map",
    "adjoint_action",
    "superop_to_coefficients",
    "coefficients_to_superop",
]

FROBENIUS = "frobenius"
CANONICAL = "canonical"
_TAGS = (FROBENIUS, CANONICAL)

DEFAULT_PSD_TOL = 1e-9


def _reshuffle(X, n):
    # swaps the middle two of the four n-sized indices; an involution
    return X.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)


def coefficients_to_superop(c, n, basis=FROBENIUS):
    if basis == FROBENIUS:
        B = build_frobenius_basis(n).vec_matrix
        c = B @ c @ B.conj().T
    return _reshuffle(c, n)


def superop_to_coefficients(S, n, basis=FROBENIUS):
    c = _reshuffle(S, n)
    if basis == FROBENIUS:
        B = build_frobenius_basis(n).vec_matrix
        c = B.conj().T @ c @ B
    return c


@dataclass(frozen=True, eq=False)
class MapMatrix:
    """A linear map on M_n given by its coefficient matrix.

    ``certificate``, when present, is a pair (CP part, coCP part) whose sum is
    this map; it is set by :func:`decomposable_certificate`.
    """

    n: int
    c: np.ndarray
    basis: str = FROBENIUS
    certificate: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if self.basis not in _TAGS:
            raise ValueError(f"unknown basis tag {self.basis!r}")
        c = np.array(self.c, dtype=complex)
        N = self.n * self.n
        if self.n < 2 or c.shape != (N, N):
            raise DimensionError(f"coefficient matrix for n={self.n} must be {N}x{N}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def basis_matrices(self):
        if self.basis == FROBENIUS:
            return build_frobenius_basis(self.n).matrices
        return canonical_basis(self.n)

    def superop(self):
        return coefficients_to_superop(self.c, self.n, self.basis)

    def to_basis(self, tag):
        if tag == self.basis:
            return self
        c = superop_to_coefficients(self.superop(), self.n, tag)
        cert = None
        if self.certificate is not None:
            cert = tuple(part.to_basis(tag) for part in self.certificate)
        return MapMatrix(self.n, c, tag, cert)

    def frobenius(self):
        return self.to_basis(FROBENIUS)

    def __call__(self, A):
        return apply(self, A)

    def _coerce(self, other):
        if not isinstance(other, MapMatrix):
            return NotImplemented
        if other.n != self.n:
            raise DimensionError("maps act on different dimensions")
        return other.to_basis(self.basis)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return MapMatrix(self.n, self.c + other.c, self.basis)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return MapMatrix(self.n, self.c - other.c, self.basis)

    def __mul__(self, scalar):
        cert = None
        # nonnegative scaling keeps CP and coCP parts valid
        if self.certificate is not None and np.isreal(scalar) and np.real(scalar) >= 0:
            cert = tuple(scalar * part for part in self.certificate)
        return MapMatrix(self.n, scalar * self.c, self.basis, cert)

    __rmul__ = __mul__

    def __neg__(self):
        return MapMatrix(self.n, -self.c, self.basis)

    def compose(self, other):
        """self o other."""
        other = self._coerce(other)
        return from_superop(self.superop() @ other.superop(), self.basis)

    def distance(self, other):
        """Frobenius distance between coefficient matrices (basis-independent)."""
        other = self._coerce(other)
        return float(np.linalg.norm(self.c - other.c))


class OperatorSum(NamedTuple):
    """phi(A) = sum_k weights[k] G_k A G_k^dagger with orthonormal G_k."""

    weights: np.ndarray
    operators: np.ndarray

    def apply(self, A):
        return np.einsum("k,kab,bc,kdc->ad", self.weights, self.operators, A, self.operators.conj())

    def folded(self, tol=1e-10):
        """Kraus operators sqrt(w_k) G_k; requires all weights >= -tol."""
        w = np.asarray(self.weights)
        if w.size and w.min() < -tol:
            raise CertificateError(f"negative weight {w.min():.3e} cannot be folded into a Kraus operator")
        return np.sqrt(np.clip(w, 0.0, None))[:, None, None] * self.operators


@dataclass(frozen=True)
class CanonicalCovariantForm:
    """phi(A) = sum_{i!=j} a_ij E_ij A E_ji + sum_ij b_ij E_ii A E_jj."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        b = np.asarray(self.b, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
            raise DimensionError(f"a and b must be equal square matrices, got {a.shape} and {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.a.shape[0]


class PositivityReport(NamedTuple):
    ok: bool
    min_eigenvalue: float
    hermiticity_residual: float


def _as_matrix(A, n):
    A = np.asarray(A)
    if A.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} matrix, got shape {A.shape}")
    return A


def apply(m, A):
    """Evaluate sum_ij c_ij B_i A B_j^dagger directly from the definition."""
    A = _as_matrix(A, m.n)
    B = m.basis_matrices
    left = np.einsum("iab,bc->iac", B, A)
    return np.einsum("ij,iac,jdc->ad", m.c, left, B.conj())


def from_superop(S, basis=FROBENIUS):
    S = np.asarray(S)
    n = int(round(np.sqrt(S.shape[0])))
    if S.shape != (n * n, n * n):
        raise DimensionError(f"superoperator must be n^2 x n^2, got {S.shape}")
    return MapMatrix(n, superop_to_coefficients(S, n, basis), basis)


def identity_map(n, basis=FROBENIUS):
    return from_superop(np.eye(n * n, dtype=complex), basis)


def zero_map(n, basis=FROBENIUS):
    return MapMatrix(n, np.zeros((n * n, n * n)), basis)


def _transpose_superop(n):
    T = np.zeros((n * n, n * n))
    for a in range(n):
        for b in range(n):
            T[b * n + a, a * n + b] = 1.0
    return T


def transpose_map(n, basis=FROBENIUS):
    return from_superop(_transpose_superop(n), basis)


def from_kraus(operators, weights=None, basis=FROBENIUS):
    """Map A -> sum_k w_k X_k A X_k^dagger."""
    X = np.asarray(operators, dtype=complex)
    if X.ndim == 2:
        X = X[None]
    w = np.ones(len(X)) if weights is None else np.asarray(weights)
    S = np.einsum("k,kab,kcd->acbd", w, X, X.conj())
    n = X.shape[1]
    return from_superop(S.reshape(n * n, n * n), basis)


def adjoint_action(W, basis=FROBENIUS):
    """Ad_W : A -> W A W^dagger."""
    return from_kraus([W], basis=basis)


def compose_transpose(m):
    """Coefficient matrix of tau o m, tau the matrix transposition."""
    S = _transpose_superop(m.n) @ m.superop()
    return MapMatrix(m.n, superop_to_coefficients(S, m.n, m.basis), m.basis)


def dual_map(m):
    """Map m* with tr(A^dagger m(B)) = tr(m*(A)^dagger B)."""
    S = m.superop().conj().T
    return MapMatrix(m.n, superop_to_coefficients(S, m.n, m.basis), m.basis)


def is_hermiticity_preserving(m, tol=1e-10):
    return bool(np.linalg.norm(m.c - m.c.conj().T) <= tol)


def cp_check(m, tol=DEFAULT_PSD_TOL):
    """PSD test of the coefficient matrix after Hermitian symmetrization."""
    c = m.c
    herm = float(np.linalg.norm(c - c.conj().T))
    lam = float(np.linalg.eigvalsh(0.5 * (c + c.conj().T))[0])
    return PositivityReport(herm <= tol and lam >= -tol, lam, herm)


def is_cp(m, tol=DEFAULT_PSD_TOL):
    return cp_check(m, tol).ok


def is_cocp(m, tol=DEFAULT_PSD_TOL):
    return is_cp(compose_transpose(m), tol)


def decomposable_certificate(m1, m2, tol=DEFAULT_PSD_TOL):
    """Return m1 + m2 carrying the certificate (m1, m2).

    Raises:
        CertificateError: if m1 is not CP or m2 is not coCP.
    """
    if m1.n != m2.n:
        raise DimensionError("certificate parts act on different dimensions")
    m2 = m2.to_basis(m1.basis)
    r1 = cp_check(m1, tol)
    if not r1.ok:
        raise CertificateError(f"CP part fails: min eigenvalue {r1.min_eigenvalue:.3e}")
    r2 = cp_check(compose_transpose(m2), tol)
    if not r2.ok:
        raise CertificateError(f"coCP part fails: min eigenvalue {r2.min_eigenvalue:.3e}")
    return MapMatrix(m1.n, m1.c + m2.c, m1.basis, (m1, m2))


def certify_decomposable(m, tol=DEFAULT_PSD_TOL):
    """Attach a trivial certificate when m itself is CP or coCP."""
    if m.certificate is not None:
        return m
    z = zero_map(m.n, m.basis)
    if is_cp(m, tol):
        return decomposable_certificate(m, z, tol)
    if is_cocp(m, tol):
        return decomposable_certificate(z, m, tol)
    raise CertificateError("map is neither CP nor coCP; supply an explicit (CP, coCP) split")


def to_operator_sum(m, cutoff=1e-10):
    """Spectral form of a Hermiticity-preserving map.

    Eigenpairs of c with |lambda| <= cutoff are dropped.  Weights keep their
    sign; operators are orthonormal in the Hilbert-Schmidt inner product.
    """
    if not is_hermiticity_preserving(m, tol=1e-9):
        raise CertificateError("coefficient matrix is not Hermitian; no real operator-sum form")
    lam, vec = np.linalg.eigh(0.5 * (m.c + m.c.conj().T))
    keep = np.abs(lam) > cutoff
    G = np.einsum("ik,iab->kab", vec[:, keep], m.basis_matrices)
    return OperatorSum(lam[keep], G)


def from_canonical_covariant(f):
    n = f.n
    c = np.zeros((n * n, n * n), dtype=complex)
    off = ~np.eye(n, dtype=bool)
    idx = np.arange(n * n).reshape(n, n)
    c[idx[off], idx[off]] = f.a[off]
    d = np.diag(idx)
    c[np.ix_(d, d)] += f.b
    return MapMatrix(n, c, CANONICAL).to_basis(FROBENIUS)
