"""Covariance with respect to the maximal torus of U(n).

A torus element g is a point x in [0, 2pi)^n acting by U(g) = diag(e^{i x_j}).
A map phi is covariant when phi(U A U^-1) = U phi(A) U^-1 for all g, and
conjugate covariant when the right-hand U is replaced by its entrywise
conjugate.  In the Frobenius basis, covariance is equivalent to the
coefficient matrix commuting with the frame alpha(g) (resp. beta(g)); the
commutants have the block forms implemented by :class:`CovariantBlocks` and
:class:`ConjugateCovariantBlocks`.
"""

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from . import _accel
from .basis import build_frobenius_basis
from .errors import CongruenceError, ConsistencyError, DimensionError
from .linmap import (
    DEFAULT_PSD_TOL,
    FROBENIUS,
    MapMatrix,
    apply,
    compose_transpose,
    decomposable_certificate,
    from_superop,
    zero_map,
)

__all__ = [
    "TorusElement",
    "CovariantBlocks",
    "ConjugateCovariantBlocks",
    "BlockClassificationFailure",
    "CovarianceReport",
    "CommutationVerdict",
    "diag_unitary",
    "conj_diag_unitary",
    "frame_matrix",
    "alpha_inner",
    "alpha_closed",
    "beta_inner",
    "beta_closed",
    "build_alpha",
    "build_beta",
    "alpha_log",
    "covariance_report",
    "is_covariant",
    "is_conjugate_covariant",
    "is_uv_covariant",
    "exp_commutation_equiv",
    "congruence_free_check",
    "congruence_free_scale",
    "project_covariant",
    "classify_covariant_blocks",
    "cp_covariant_test",
    "cocp_conjugate_test",
    "build_c33",
    "random_covariant_blocks",
    "random_conjugate_blocks",
    "random_covariant_map",
    "superop_commutation_residual",
]

TWO_PI = 2.0 * np.pi
QUADRATURE_MAX_N = 5


@dataclass(frozen=True, eq=False)
class TorusElement:
    """g = (e^{i x_1}, ..., e^{i x_n}) with each x_j reduced into [0, 2pi)."""

    x: np.ndarray

    def __post_init__(self):
        x = np.mod(np.asarray(self.x, dtype=float).ravel(), TWO_PI)
        x[x >= TWO_PI] = 0.0
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self):
        return self.x.size

    def __mul__(self, other):
        return TorusElement(self.x + _torus(other).x)

    def inverse(self):
        return TorusElement(-self.x)

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n))

    @classmethod
    def random(cls, n, rng):
        return cls(rng.uniform(0.0, TWO_PI, size=n))


def _torus(g):
    return g if isinstance(g, TorusElement) else TorusElement(g)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def diag_unitary(g):
    return np.diag(np.exp(1j * _torus(g).x))


def conj_diag_unitary(g):
    return np.diag(np.exp(-1j * _torus(g).x))


# -- frames ---------------------------------------------------------------------


def _basis_for(g, basis):
    if basis is None:
        return build_frobenius_basis(g.n)
    if basis.n != g.n:
        raise DimensionError(f"torus element has n={g.n}, basis has n={basis.n}")
    return basis


def frame_matrix(U, V, basis):
    """alpha_{U,V}: entries tr(F_i^dagger V^-1 F_j U) for unitaries U, V."""
    F = basis.matrices
    Fp = np.linalg.inv(V) @ F @ U
    return np.einsum("iab,jab->ij", F.conj(), Fp)


def alpha_inner(g, basis=None):
    g = _torus(g)
    basis = _basis_for(g, basis)
    u = np.exp(1j * g.x)
    Fp = u.conj()[:, None] * basis.matrices * u[None, :]
    return np.einsum("iab,jab->ij", basis.matrices.conj(), Fp)


def _pair_angles(g, basis, sign):
    mu, nu = np.array(basis.pair_map, dtype=int).T
    return g.x[mu] + sign * g.x[nu]


def block_matrix(C1, C2, C3):
    """[[C1, -C2, 0], [C2, C1, 0], [0, 0, C3]]."""
    m = C1.shape[0]
    n = C3.shape[0]
    c = np.zeros((2 * m + n, 2 * m + n), dtype=complex)
    c[:m, :m] = C1
    c[:m, m : 2 * m] = -C2
    c[m : 2 * m, :m] = C2
    c[m : 2 * m, m : 2 * m] = C1
    c[2 * m :, 2 * m :] = C3
    return c


def alpha_closed(g, basis=None):
    g = _torus(g)
    basis = _basis_for(g, basis)
    delta = _pair_angles(g, basis, -1.0)
    return block_matrix(np.diag(np.cos(delta)), np.diag(np.sin(delta)), np.eye(g.n))


def beta_inner(g, basis=None):
    g = _torus(g)
    basis = _basis_for(g, basis)
    u = np.exp(1j * g.x)
    Fp = u[:, None] * basis.matrices * u[None, :]
    return np.einsum("iab,jab->ij", basis.matrices.conj(), Fp)


def r_matrix(g, basis=None):
    """Diagonal block of beta: sum_j e^{2 i x_j} r_j r_j^T."""
    g = _torus(g)
    D = _basis_for(g, basis).diagonal_entries()
    return D.T @ np.diag(np.exp(2j * g.x)) @ D


def beta_closed(g, basis=None):
    g = _torus(g)
    basis = _basis_for(g, basis)
    phase = np.exp(1j * _pair_angles(g, basis, 1.0))
    m = len(phase)
    b = np.zeros((basis.size, basis.size), dtype=complex)
    b[np.arange(m), np.arange(m)] = phase
    b[np.arange(m, 2 * m), np.arange(m, 2 * m)] = phase
    b[2 * m :, 2 * m :] = r_matrix(g, basis)
    return b


def _checked(inner, closed, what, tol):
    err = float(np.abs(inner - closed).max())
    if err > tol:
        raise ConsistencyError(f"{what}: inner-product and closed forms differ by {err:.3e}")
    return inner


def build_alpha(g, basis=None, tol=1e-12):
    """Frame of the covariance action, cross-checked against its block form."""
    return _checked(alpha_inner(g, basis), alpha_closed(g, basis), "alpha", tol)


def build_beta(g, basis=None, tol=1e-12):
    """Frame of the conjugate-covariance action, cross-checked likewise."""
    return _checked(beta_inner(g, basis), beta_closed(g, basis), "beta", tol)


def alpha_log(g, basis=None, verify=True):
    """Real antisymmetric A(g) with expm(A(g)) = alpha(g).

    With ``verify`` the exponential, the spectral radius bound and the
    2*pi*i-congruence freedom of the spectrum are all checked.
    """
    g = _torus(g)
    basis = _basis_for(g, basis)
    delta = _pair_angles(g, basis, -1.0)
    A = block_matrix(np.zeros((len(delta),) * 2), np.diag(delta), np.zeros((g.n, g.n))).real
    if verify:
        err = float(np.abs(expm(A) - build_alpha(g, basis)).max())
        if err > 1e-11:
            raise ConsistencyError(f"expm(A(g)) misses alpha(g) by {err:.3e}")
        spec = np.linalg.eigvals(A)
        if np.abs(spec).max(initial=0.0) >= TWO_PI:
            raise ConsistencyError("spectral radius of A(g) is not below 2*pi")
        if not congruence_free_check(spec, 2j * np.pi):
            raise ConsistencyError("spectrum of A(g) is not 2*pi*i-congruence free")
    return A


# -- sampled covariance tests ---------------------------------------------------


class CovarianceReport(NamedTuple):
    identity_residual: float
    commutation_residual: float
    tolerance: float
    points: int

    @property
    def covariant(self):
        return self.identity_residual <= self.tolerance and self.commutation_residual <= self.tolerance


def structured_points(n):
    """Deterministic torus points with all x_j and all x_j - x_k distinct."""
    j = np.arange(1, n + 1)
    return [TorusElement(np.sqrt(2.0) * j**2), TorusElement(np.pi * np.sqrt(j + 2.0))]


def _sample_points(n, samples, rng):
    return structured_points(n) + [TorusElement.random(n, rng) for _ in range(samples)]


def _random_matrix(n, rng):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A / np.linalg.norm(A)


def covariance_report(m, samples=20, tol=1e-10, seed=0, conjugate=False, points=None):
    """Residuals of the defining identity and of the frame commutation.

    Residuals are absolute; ``tol`` is scaled by max(1, ||c||_2) when the
    verdict is formed.
    """
    rng = _rng(seed)
    mf = m.frobenius()
    basis = build_frobenius_basis(m.n)
    pts = points if points is not None else _sample_points(m.n, samples, rng)
    frame = build_beta if conjugate else build_alpha
    ident = comm = 0.0
    for g in pts:
        g = _torus(g)
        U = diag_unitary(g)
        Uout = U.conj() if conjugate else U
        A = _random_matrix(m.n, rng)
        lhs = apply(mf, U @ A @ U.conj().T)
        rhs = Uout @ apply(mf, A) @ Uout.conj().T
        ident = max(ident, float(np.linalg.norm(lhs - rhs)))
        F = frame(g, basis)
        comm = max(comm, float(np.linalg.norm(mf.c @ F - F @ mf.c)))
    scale = max(1.0, float(np.linalg.norm(mf.c, 2)))
    return CovarianceReport(ident, comm, tol * scale, len(pts))


def is_covariant(m, samples=20, tol=1e-10, seed=0):
    return covariance_report(m, samples, tol, seed).covariant


def is_conjugate_covariant(m, samples=20, tol=1e-10, seed=0):
    return covariance_report(m, samples, tol, seed, conjugate=True).covariant


def is_uv_covariant(m, reps, tol=1e-10, seed=0):
    """Sampled (U, V)-covariance for user-supplied unitary pairs.

    Checks phi o Ad_U = Ad_V o phi on random inputs and [c, alpha_{U,V}] = 0
    for every pair; no block classification is attempted.
    """
    rng = _rng(seed)
    mf = m.frobenius()
    basis = build_frobenius_basis(m.n)
    ident = comm = 0.0
    for U, V in reps:
        A = _random_matrix(m.n, rng)
        lhs = apply(mf, U @ A @ np.linalg.inv(U))
        rhs = V @ apply(mf, A) @ np.linalg.inv(V)
        ident = max(ident, float(np.linalg.norm(lhs - rhs)))
        F = frame_matrix(U, V, basis)
        comm = max(comm, float(np.linalg.norm(mf.c @ F - F @ mf.c)))
    scale = max(1.0, float(np.linalg.norm(mf.c, 2)))
    return CovarianceReport(ident, comm, tol * scale, len(reps))


def superop_commutation_residual(S, g):
    """||S o Ad_U(g) - Ad_U(g) o S|| for a superoperator S on M_n."""
    u = np.exp(1j * _torus(g).x)
    d = np.outer(u, u.conj()).ravel()
    return float(np.linalg.norm(S * (d[None, :] - d[:, None])))


# -- congruence freedom and the exponential ------------------------------------


def congruence_free_check(spectrum, z, tol=1e-9):
    """True iff no two points differ by a nonzero integer multiple of z."""
    if z == 0:
        raise ValueError("z must be nonzero")
    s = np.asarray(spectrum, dtype=complex).ravel()
    d = (s[:, None] - s[None, :])[np.triu_indices(s.size, 1)]
    k = np.rint((d / z).real)
    hit = (k != 0) & (np.abs(d - k * z) <= tol * max(1.0, abs(z)))
    return not bool(hit.any())


def congruence_free_scale(points, z):
    """tau = |z| / diameter; every t in (0, tau) makes t*points z-congruence free."""
    if z == 0:
        raise ValueError("z must be nonzero")
    p = np.asarray(points, dtype=complex).ravel()
    if p.size == 0:
        raise ValueError("point set must be nonempty")
    diam = float(np.abs(p[:, None] - p[None, :]).max())
    return np.inf if diam == 0.0 else abs(z) / diam


class CommutationVerdict(enum.Enum):
    BOTH_COMMUTE = "both_commute"
    NEITHER = "neither"
    VIOLATION = "violation"


def exp_commutation_equiv(A, B, tol=1e-10, check=True):
    """Compare [e^A, B] = 0 with [A, B] = 0.

    Raises:
        CongruenceError: if ``check`` and spec(A) is not 2*pi*i-congruence free.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if check and not congruence_free_check(np.linalg.eigvals(A), 2j * np.pi):
        raise CongruenceError("spectrum of A is not 2*pi*i-congruence free")
    eA = expm(A)
    scale = max(1.0, np.linalg.norm(B))
    exp_zero = np.linalg.norm(eA @ B - B @ eA) <= tol * scale * max(1.0, np.linalg.norm(eA))
    gen_zero = np.linalg.norm(A @ B - B @ A) <= tol * scale * max(1.0, np.linalg.norm(A))
    if exp_zero and gen_zero:
        return CommutationVerdict.BOTH_COMMUTE
    if not exp_zero and not gen_zero:
        return CommutationVerdict.NEITHER
    return CommutationVerdict.VIOLATION


# -- block structure ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CovariantBlocks:
    """c = [[C1, -C2, 0], [C2, C1, 0], [0, 0, C3]] with C1, C2 diagonal."""

    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray

    @property
    def n(self):
        return self.C3.shape[0]

    def to_c(self):
        return block_matrix(self.C1, self.C2, self.C3)

    def to_map(self):
        return MapMatrix(self.n, self.to_c(), FROBENIUS)


@dataclass(frozen=True)
class BlockClassificationFailure:
    residual: float

    def __bool__(self):
        return False


@dataclass(frozen=True, eq=False)
class ConjugateCovariantBlocks:
    """c = [[C11, C12, 0], [C21, C22, 0], [0, 0, C33(a)]], all Cij diagonal."""

    C11: np.ndarray
    C12: np.ndarray
    C21: np.ndarray
    C22: np.ndarray
    a: np.ndarray

    @property
    def n(self):
        return len(self.a)

    @property
    def C33(self):
        return build_c33(self.a)

    def to_c(self):
        m = self.C11.shape[0]
        n = self.n
        c = np.zeros((2 * m + n, 2 * m + n), dtype=complex)
        c[:m, :m] = self.C11
        c[:m, m : 2 * m] = self.C12
        c[m : 2 * m, :m] = self.C21
        c[m : 2 * m, m : 2 * m] = self.C22
        c[2 * m :, 2 * m :] = self.C33
        return c

    def to_map(self):
        return MapMatrix(self.n, self.to_c(), FROBENIUS)


def build_c33(a):
    """Symmetric diagonal-block matrix of a conjugate-covariant map.

    Entries follow the closed formulas in the 1-based indices r, s:
    r < s < n, s = n, r = s < n and r = s = n.
    """
    a = np.asarray(a, dtype=complex).ravel()
    n = a.size
    C = np.zeros((n, n), dtype=complex)
    csum = np.cumsum(a)
    for r in range(1, n):
        head = csum[r - 1]
        diff = head - r * a[r]
        for s in range(r + 1, n):
            C[r - 1, s - 1] = diff / np.sqrt(r * s * (r + 1) * (s + 1))
        C[r - 1, n - 1] = diff / np.sqrt(n * r * (r + 1))
        C[r - 1, r - 1] = (head + r * r * a[r]) / (r * (r + 1))
    C[n - 1, n - 1] = csum[-1] / n
    iu = np.triu_indices(n, 1)
    C[iu[1], iu[0]] = C[iu]
    return C


def _mask_blocks(c, m):
    M11, M12 = c[:m, :m], c[:m, m : 2 * m]
    M21, M22 = c[m : 2 * m, :m], c[m : 2 * m, m : 2 * m]
    C1 = np.diag(0.5 * (np.diag(M11) + np.diag(M22)))
    C2 = np.diag(0.5 * (np.diag(M21) - np.diag(M12)))
    return CovariantBlocks(C1, C2, c[2 * m :, 2 * m :].copy())


def project_covariant(m, mode="closed_form"):
    """Projection onto the covariant maps.

    ``quadrature`` averages Ad_U o phi o Ad_U^-1 over an 8-node-per-circle
    tensor grid (exact for this integrand); ``closed_form`` masks the
    coefficient matrix onto the commutant block pattern.
    """
    if mode in ("quadrature", "quad"):
        if m.n > QUADRATURE_MAX_N:
            raise ValueError(f"quadrature mode supports n <= {QUADRATURE_MAX_N}, got n={m.n}")
        S = _accel.twirl_torus(m.superop(), m.n, 8)
        return from_superop(S, FROBENIUS)
    if mode in ("closed_form", "closed"):
        c = m.frobenius().c
        return _mask_blocks(c, m.n * (m.n - 1) // 2).to_map()
    raise ValueError(f"unknown projection mode {mode!r}")


def classify_covariant_blocks(m, tol=1e-10):
    """Blocks (C1, C2, C3) of a covariant map, or a failure carrying the residual."""
    c = m.frobenius().c
    blocks = _mask_blocks(c, m.n * (m.n - 1) // 2)
    residual = float(np.linalg.norm(c - blocks.to_c()))
    if residual > tol * max(1.0, float(np.linalg.norm(c))):
        return BlockClassificationFailure(residual)
    return blocks


def cp_covariant_test(blocks, tol=DEFAULT_PSD_TOL):
    """CP criterion C1 >= |C2| (entrywise) and C3 >= 0.

    Raises:
        ValueError: if the blocks do not describe a Hermiticity-preserving map.
    """
    c1, c2, C3 = np.diag(blocks.C1), np.diag(blocks.C2), blocks.C3
    if np.abs(c1.imag).max(initial=0.0) > tol or np.abs(c2.real).max(initial=0.0) > tol:
        raise ValueError("blocks are not Hermiticity preserving: C1 must be real and C2 imaginary")
    if np.linalg.norm(C3 - C3.conj().T) > tol:
        raise ValueError("blocks are not Hermiticity preserving: C3 must be Hermitian")
    pairs_ok = bool(np.all(c1.real - np.abs(c2) >= -tol))
    lam = np.linalg.eigvalsh(0.5 * (C3 + C3.conj().T))[0]
    return pairs_ok and bool(lam >= -tol)


def cocp_conjugate_test(blocks, tol=DEFAULT_PSD_TOL):
    """CP criterion for a conjugate-covariant map.

    C11, C22 >= 0, C12 = C21^dagger, |C12|^2 <= C11 C22 entrywise and a >= 0.
    Applied to tau o phi it decides whether the covariant phi is coCP.
    """
    s, r = np.diag(blocks.C11), np.diag(blocks.C22)
    w12, w21 = np.diag(blocks.C12), np.diag(blocks.C21)
    a = np.asarray(blocks.a, dtype=complex)
    real_ok = max(np.abs(s.imag).max(initial=0.0), np.abs(r.imag).max(initial=0.0), np.abs(a.imag).max()) <= tol
    if not real_ok or np.abs(w12 - w21.conj()).max(initial=0.0) > tol:
        return False
    if np.any(s.real < -tol) or np.any(r.real < -tol) or np.any(a.real < -tol):
        return False
    return bool(np.all(np.abs(w12) ** 2 <= s.real * r.real + tol * (1.0 + s.real + r.real)))


# -- random structured maps -----------------------------------------------------


def _random_psd(n, rng, rank=None):
    k = n if rank is None else rank
    G = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    return G @ G.conj().T / k


def random_covariant_blocks(n, rng, kind="generic"):
    """Random blocks; kind is 'generic' (complex), 'hp' or 'cp'."""
    m = n * (n - 1) // 2
    if kind == "generic":
        cplx = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)  # noqa: E731
        return CovariantBlocks(np.diag(cplx(m)), np.diag(cplx(m)), cplx(n, n))
    t = rng.normal(size=m)
    if kind == "cp":
        c1 = np.abs(t) + rng.exponential(size=m)
        C3 = _random_psd(n, rng)
    elif kind == "hp":
        c1 = rng.normal(size=m)
        H = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        C3 = H + H.conj().T
    else:
        raise ValueError(f"unknown block kind {kind!r}")
    return CovariantBlocks(np.diag(c1).astype(complex), np.diag(1j * t), C3)


def random_conjugate_blocks(n, rng, kind="cp"):
    """Random conjugate-covariant blocks; kind 'cp' (PSD) or 'hp' (Hermitian)."""
    m = n * (n - 1) // 2
    if kind == "cp":
        s = rng.exponential(size=m)
        r = rng.exponential(size=m)
        w = np.sqrt(s * r) * rng.uniform(0, 1, size=m) * np.exp(1j * rng.uniform(0, TWO_PI, size=m))
        a = rng.exponential(size=n)
    elif kind == "hp":
        s = rng.normal(size=m)
        r = rng.normal(size=m)
        w = rng.normal(size=m) + 1j * rng.normal(size=m)
        a = rng.normal(size=n)
    else:
        raise ValueError(f"unknown block kind {kind!r}")
    return ConjugateCovariantBlocks(np.diag(s + 0j), np.diag(w.conj()), np.diag(w), np.diag(r + 0j), a + 0j)


def random_covariant_map(kind, n, seed=None):
    """Random covariant map with a (CP, coCP) certificate.

    kind: 'cp', 'cocp' or 'decomposable' (alias 'dec').
    """
    rng = _rng(seed)
    z = zero_map(n)
    if kind == "cp":
        return decomposable_certificate(random_covariant_blocks(n, rng, "cp").to_map(), z)
    if kind == "cocp":
        psi = random_conjugate_blocks(n, rng, "cp").to_map()
        return decomposable_certificate(z, compose_transpose(psi))
    if kind in ("decomposable", "dec"):
        cp = random_covariant_blocks(n, rng, "cp").to_map()
        co = compose_transpose(random_conjugate_blocks(n, rng, "cp").to_map())
        return decomposable_certificate(cp, co)
    raise ValueError(f"unknown kind {kind!r}; expected cp, cocp or decomposable")
