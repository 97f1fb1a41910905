"""Time-local generators with decomposable dissipators and their evolutions.

Everything runs in the Schroedinger picture on row-major vectorized density
matrices.  A generator

    L_t(rho) = -i[H_t, rho] + phi_t(rho) - 1/2 {phi_t^*(I), rho}

has superoperator

    -i (H kron I - I kron H^T) + S_phi - 1/2 (K kron I + I kron K^T),

K = phi^*(I).  The map-valued equation d/dt Lambda_t = L_t Lambda_t,
Lambda_0 = id is integrated with classical fixed-step RK4.  A family is
called covariant when every Lambda_t commutes with Ad_U(g) for all torus
elements g.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import expm

from . import _accel
from .covariance import (
    _rng,
    _sample_points,
    covariance_report,
    diag_unitary,
    superop_commutation_residual,
)
from .errors import CertificateError, ConditioningError, DimensionError, IntegrationError
from .linmap import (
    FROBENIUS,
    MapMatrix,
    apply,
    cp_check,
    decomposable_certificate,
    dual_map,
    from_superop,
    zero_map,
)

__all__ = [
    "Generator",
    "EvolutionFamily",
    "build_generator",
    "check_density",
    "evolve",
    "propagator",
    "rk4_order_ratio",
    "generator_covariance_report",
    "dynamics_covariance_check",
    "propagator_covariance_check",
    "semigroup_structure_check",
    "semigroup_law_residual",
    "d_divisibility_witness",
    "regularity_norm",
]

HERMITIAN_TOL = 1e-13
MAX_CONDITION = 1e8
BLOWUP_BOUND = 1e8


def check_density(rho, n=None):
    """Validate a density matrix and return it as a complex array.

    Raises:
        ValueError: if rho is not Hermitian, not PSD or not of unit trace.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or (n is not None and rho.shape[0] != n):
        raise DimensionError(f"density matrix has shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > HERMITIAN_TOL:
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -1e-12:
        raise ValueError("density matrix has a negative eigenvalue")
    if abs(np.trace(rho) - 1.0) > 1e-12:
        raise ValueError("density matrix does not have unit trace")
    return rho


def _vec(A):
    return np.asarray(A).reshape(-1)


def _unvec(v, n):
    return v.reshape(n, n)


def lindblad_superop(H, phi):
    n = H.shape[0]
    I = np.eye(n)
    K = apply(dual_map(phi), I)
    return (
        -1j * (np.kron(H, I) - np.kron(I, H.T))
        + phi.superop()
        - 0.5 * (np.kron(K, I) + np.kron(I, K.T))
    )


def _check_hermitian(H):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"H must be square, got shape {H.shape}")
    if np.abs(H - H.conj().T).max(initial=0.0) > HERMITIAN_TOL * max(1.0, np.abs(H).max(initial=0.0)):
        raise ValueError("H is not Hermitian")
    return H


def _check_certified(phi, tol=1e-10):
    if not isinstance(phi, MapMatrix):
        raise TypeError("phi must be a MapMatrix")
    if phi.certificate is None:
        raise CertificateError("phi carries no decomposability certificate; see certify_decomposable")
    m1, m2 = phi.certificate
    gap = np.linalg.norm(phi.c - (m1.to_basis(phi.basis).c + m2.to_basis(phi.basis).c))
    if gap > tol * max(1.0, np.linalg.norm(phi.c)):
        raise CertificateError(f"certificate parts do not sum to phi (gap {gap:.3e})")
    return phi


def _timedep(x):
    # MapMatrix is itself callable, so test for it explicitly
    return callable(x) and not isinstance(x, (MapMatrix, np.ndarray))


@dataclass(eq=False)
class Generator:
    """L_t built from H_t and a certified decomposable phi_t.

    ``H`` and ``phi`` are either constant values or callables of t; time
    dependence is sampled at the integrator nodes.  Superoperators are cached
    per time node, which also caches phi_t^*(I).
    """

    n: int
    H: object
    phi: object
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def constant(self):
        return not (_timedep(self.H) or _timedep(self.phi))

    def H_at(self, t=0.0):
        return _check_hermitian(self.H(t) if _timedep(self.H) else self.H)

    def phi_at(self, t=0.0):
        return _check_certified(self.phi(t) if _timedep(self.phi) else self.phi)

    def superop(self, t=0.0):
        key = 0.0 if self.constant else float(t)
        if key not in self._cache:
            self._cache[key] = lindblad_superop(self.H_at(key), self.phi_at(key))
        return self._cache[key]

    def dual_superop(self, t=0.0):
        """Heisenberg-picture generator."""
        return self.superop(t).conj().T

    def __call__(self, rho, t=0.0):
        return _unvec(self.superop(t) @ _vec(rho), self.n)

    def trace_residual(self, t=0.0):
        """||vec(I)^T L_t||, zero iff tr L_t(rho) = 0 for every rho."""
        return float(np.linalg.norm(_vec(np.eye(self.n)) @ self.superop(t)))


def build_generator(H, phi=None, n=None):
    """Generator from Hermitian H and certified decomposable phi.

    ``phi=None`` is the zero dissipator.  Constant inputs are validated here;
    callables are validated at t = 0 here and at every node when evaluated.

    Raises:
        ValueError: if H is not Hermitian.
        CertificateError: if phi has no valid certificate.
    """
    H0 = H(0.0) if _timedep(H) else H
    H0 = _check_hermitian(H0)
    n = H0.shape[0] if n is None else n
    if H0.shape != (n, n):
        raise DimensionError(f"H has shape {H0.shape}, expected ({n}, {n})")
    if phi is None:
        z = zero_map(n)
        phi = decomposable_certificate(z, z)
    phi0 = phi(0.0) if _timedep(phi) else phi
    if phi0.n != n:
        raise DimensionError("H and phi act on different dimensions")
    _check_certified(phi0)
    gen = Generator(n, H if _timedep(H) else H0, phi)
    gen.superop(0.0)
    return gen


# -- integration ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EvolutionFamily:
    """Lambda_{t_k} on the uniform grid t_k = k h.

    Attributes:
        grid: node times, grid[0] = 0.
        superops: array (M+1, n^2, n^2); superops[0] is the identity.
        step: h.
        trajectory: rho(t_k) for the supplied rho0, or None.
        trace_residual: max over the grid of ||vec(I)^T Lambda_t - vec(I)^T||.
        regularity: sup over the sampled nodes of ||L_t||_2.
    """

    n: int
    grid: np.ndarray
    superops: np.ndarray
    step: float
    generator: Generator
    trajectory: Optional[np.ndarray] = None
    trace_residual: float = 0.0
    regularity: float = 0.0
    regular: bool = True

    def index(self, t):
        k = int(round(t / self.step))
        if k < 0 or k >= len(self.grid) or abs(self.grid[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a grid node")
        return k

    def superop_at(self, t):
        return self.superops[self.index(t)]

    def map_at(self, t, basis=FROBENIUS):
        return from_superop(self.superop_at(t), basis)

    def trajectory_trace_residual(self):
        if self.trajectory is None:
            return None
        tr = np.einsum("kaa->k", self.trajectory)
        return float(np.abs(tr - tr[0]).max())


def regularity_norm(gen, times):
    return max(float(np.linalg.norm(gen.superop(t), 2)) for t in times)


def evolve(gen, T, h, rho0=None, bound=None, blowup=BLOWUP_BOUND):
    """Integrate d/dt Lambda = L_t Lambda with RK4 on [0, T].

    Args:
        gen: the generator.
        T: horizon; must be an integer multiple of h.
        h: step.
        rho0: optional initial density matrix; its trajectory is stored.
        bound: optional bound on sup ||L_t||; exceeding it marks the family
            as not regular.
        blowup: ||Lambda|| beyond this raises IntegrationError.
    """
    if not h > 0 or not T >= h:
        raise ValueError("need h > 0 and T >= h")
    steps = int(round(T / h))
    if abs(steps * h - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of h={h}")
    if gen.constant:
        Ls = gen.superop(0.0)[None]
        reg = float(np.linalg.norm(Ls[0], 2))
    else:
        Ls = np.stack([gen.superop(0.5 * k * h) for k in range(2 * steps + 1)])
        reg = float(np.linalg.norm(Ls, 2, axis=(1, 2)).max())
    out = _accel.rk4_propagate(Ls, h, steps)
    if not np.all(np.isfinite(out)) or np.abs(out).max() > blowup:
        raise IntegrationError(f"propagator norm exceeded {blowup:.1e}; reduce h")
    n = gen.n
    tvec = _vec(np.eye(n))
    tr_res = float(np.abs(np.einsum("a,kab->kb", tvec, out) - tvec).max())
    traj = None
    if rho0 is not None:
        rho0 = check_density(rho0, n)
        traj = (out @ _vec(rho0)).reshape(-1, n, n)
    grid = h * np.arange(steps + 1)
    regular = bound is None or reg <= bound
    return EvolutionFamily(n, grid, out, float(h), gen, traj, tr_res, reg, regular)


def rk4_order_ratio(gen, T, h):
    """err(h) / err(h/2) for the terminal map against a reference at h/8."""
    ref = evolve(gen, T, h / 8).superops[-1]
    e1 = np.linalg.norm(evolve(gen, T, h).superops[-1] - ref)
    e2 = np.linalg.norm(evolve(gen, T, h / 2).superops[-1] - ref)
    return float(e1 / e2)


def propagator(fam, t, s, max_condition=MAX_CONDITION):
    """V_{t,s} = Lambda_t o Lambda_s^-1.

    Raises:
        ValueError: if s > t.
        ConditioningError: if cond(Lambda_s) >= max_condition.
    """
    if s > t:
        raise ValueError("propagator needs s <= t")
    Ls = fam.superop_at(s)
    cond = float(np.linalg.cond(Ls))
    if not cond < max_condition:
        raise ConditioningError(f"Lambda_s is ill-conditioned (cond = {cond:.3e})", cond)
    V = np.linalg.solve(Ls.T, fam.superop_at(t).T).T
    return from_superop(V)


def semigroup_law_residual(fam, pairs=10, seed=0):
    """max ||Lambda_{t+s} - Lambda_t Lambda_s|| over random grid pairs."""
    rng = _rng(seed)
    M = len(fam.grid) - 1
    worst = 0.0
    for _ in range(pairs):
        j = int(rng.integers(0, M + 1))
        k = int(rng.integers(0, M - j + 1))
        worst = max(worst, float(np.linalg.norm(fam.superops[j + k] - fam.superops[j] @ fam.superops[k])))
    return worst


# -- covariance of generators and families --------------------------------------


class GeneratorCovarianceReport(NamedTuple):
    commutator_residual: float
    phi_residual: float
    superop_residual: float
    tolerance: float
    covariant: bool


def generator_covariance_report(gen, samples=10, tol=1e-10, seed=0, times=(0.0,)):
    """Structural covariance: H_t in the torus commutant and phi_t covariant.

    ``superop_residual`` is the direct commutator of L_t with Ad_U(g), kept for
    diagnostics; the verdict uses the structural conditions only.
    """
    rng = _rng(seed)
    pts = _sample_points(gen.n, samples, rng)
    if gen.constant:
        times = (0.0,)
    comm = phi_res = sup_res = 0.0
    for t in times:
        H = gen.H_at(t)
        for g in pts:
            U = diag_unitary(g)
            comm = max(comm, float(np.linalg.norm(H @ U - U @ H)))
            sup_res = max(sup_res, superop_commutation_residual(gen.superop(t), g))
        rep = covariance_report(gen.phi_at(t), samples, tol, rng)
        phi_res = max(phi_res, rep.identity_residual, rep.commutation_residual)
        phi_tol = rep.tolerance
    ok = comm <= tol * max(1.0, np.linalg.norm(gen.H_at(times[0]))) and phi_res <= phi_tol
    return GeneratorCovarianceReport(comm, phi_res, sup_res, tol, bool(ok))


class FamilyCovarianceReport(NamedTuple):
    residual: float
    tolerance: float
    points: int
    covariant: bool


def _family_times(fam, samples, rng):
    M = len(fam.grid) - 1
    idx = {M, max(1, M // 2)} | {int(i) for i in rng.integers(1, M + 1, size=samples)}
    return sorted(idx)


def dynamics_covariance_check(fam, samples=10, tol=1e-9, seed=0):
    """Sampled test of Lambda_t o Ad_U(g) = Ad_U(g) o Lambda_t."""
    rng = _rng(seed)
    pts = _sample_points(fam.n, samples, rng)
    worst = 0.0
    count = 0
    for k in _family_times(fam, samples, rng):
        S = fam.superops[k]
        scale = max(1.0, float(np.linalg.norm(S)))
        for g in pts:
            worst = max(worst, superop_commutation_residual(S, g) / scale)
            count += 1
    return FamilyCovarianceReport(worst, tol, count, worst <= tol)


def propagator_covariance_check(fam, samples=10, tol=1e-9, seed=0, max_condition=MAX_CONDITION):
    """Sampled test of [V_{t,s}, Ad_U(g)] = 0 over grid pairs s <= t."""
    rng = _rng(seed)
    pts = _sample_points(fam.n, samples, rng)
    ks = _family_times(fam, samples, rng)
    worst = 0.0
    count = 0
    for k in ks:
        j = int(rng.integers(0, k + 1))
        V = propagator(fam, fam.grid[k], fam.grid[j], max_condition).superop()
        scale = max(1.0, float(np.linalg.norm(V)))
        for g in pts:
            worst = max(worst, superop_commutation_residual(V, g) / scale)
            count += 1
    return FamilyCovarianceReport(worst, tol, count, worst <= tol)


class SemigroupReport(NamedTuple):
    exp_covariant: bool
    structural_covariant: bool
    exp_residual: float
    law_residual: float

    @property
    def agree(self):
        return self.exp_covariant == self.structural_covariant


def semigroup_structure_check(gen, samples=10, tol=1e-9, seed=0, times=(0.3, 1.0, 2.5)):
    """Covariance of e^{tL} against the structural conditions on (H, phi).

    e^{tL} is computed by scaling and squaring.  ``law_residual`` is
    max ||e^{(t+s)L} - e^{tL} e^{sL}|| over the sampled times.
    """
    if not gen.constant:
        raise ValueError("semigroup check needs a constant generator")
    rng = _rng(seed)
    L = gen.superop()
    pts = _sample_points(gen.n, samples, rng)
    exps = {t: expm(t * L) for t in times}
    worst = 0.0
    for E in exps.values():
        scale = max(1.0, float(np.linalg.norm(E)))
        for g in pts:
            worst = max(worst, superop_commutation_residual(E, g) / scale)
    law = 0.0
    for t in times:
        for s in times:
            law = max(law, float(np.linalg.norm(expm((t + s) * L) - exps[t] @ exps[s])))
    struct = generator_covariance_report(gen, samples, seed=rng).covariant
    return SemigroupReport(worst <= tol, struct, worst, law)


class DivisibilityWitness(NamedTuple):
    min_eigenvalue: float
    ok: bool


def d_divisibility_witness(gen, h=1e-3, t=0.0, tol=1e-6):
    """First-order proxy for decomposability of V_{t+h,t}.

    id + h L_t splits as [id - ih[H,.] - h/2 {K,.} + h phi_cp] + h phi_cocp.
    The second summand is coCP by the certificate; the first is CP up to
    O(h^2), which is checked through the smallest eigenvalue of its
    coefficient matrix.
    """
    H = gen.H_at(t)
    phi = gen.phi_at(t)
    cp_part = phi.certificate[0]
    n = gen.n
    I = np.eye(n)
    K = apply(dual_map(phi), I)
    S = (
        np.eye(n * n)
        + h * (-1j * (np.kron(H, I) - np.kron(I, H.T)) - 0.5 * (np.kron(K, I) + np.kron(I, K.T)))
        + h * cp_part.superop()
    )
    lam = cp_check(from_superop(S), tol).min_eigenvalue
    return DivisibilityWitness(lam, lam >= -tol)

