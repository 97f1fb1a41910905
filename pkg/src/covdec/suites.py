"""Property suites run by ``covdec selftest`` and the acceptance tests.

Each suite returns a :class:`SuiteResult` holding named checks with their
measured value, threshold and verdict.  ``scale`` multiplies every sample
count (1.0 is the full size) and ``n`` caps the dimensions visited.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import covariance as cov
from .basis import build_frobenius_basis, expand, reconstruct
from .dilation import NoIntertwinerError, costinespring, covariance_intertwiner, jordan_dilation, stinespring
from .dynamics import (
    build_generator,
    d_divisibility_witness,
    dynamics_covariance_check,
    evolve,
    generator_covariance_report,
    propagator_covariance_check,
    rk4_order_ratio,
    semigroup_law_residual,
    semigroup_structure_check,
)
from .errors import CongruenceError
from .linmap import (
    adjoint_action,
    certify_decomposable,
    compose_transpose,
    decomposable_certificate,
    is_cocp,
    is_cp,
)
from .sampling import random_cp_map, random_generic_map, random_hermitian

__all__ = ["Check", "SuiteResult", "SUITES", "run_suites"]


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool

    def as_dict(self):
        return {"name": self.name, "value": float(self.value), "threshold": float(self.threshold),
                "passed": bool(self.passed)}


@dataclass
class SuiteResult:
    number: int
    name: str
    budget: float
    checks: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def within_budget(self):
        return self.elapsed <= self.budget

    def below(self, name, value, threshold):
        self.checks.append(Check(name, float(value), threshold, bool(value < threshold)))

    def at_most(self, name, value, threshold):
        self.checks.append(Check(name, float(value), threshold, bool(value <= threshold)))

    def as_dict(self):
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def _count(k, scale):
    return max(2, int(round(k * scale)))


def _dims(default, n):
    if n is None:
        return list(default)
    return [d for d in default if d <= n] or [min(default)]


def _max_abs(x):
    return float(np.abs(x).max(initial=0.0))


# -- 1 --------------------------------------------------------------------------


def basis_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(1, "basis", 5.0)
    rng = np.random.default_rng(seed)
    gram = trip = herm = 0.0
    for d in _dims(range(2, 9), n):
        B = build_frobenius_basis(d)
        F = B.matrices.reshape(d * d, -1)
        gram = max(gram, _max_abs(F.conj() @ F.T - np.eye(d * d)))
        herm = max(herm, _max_abs(B.matrices - B.matrices.conj().transpose(0, 2, 1)))
        for _ in range(_count(100, scale)):
            A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            trip = max(trip, _max_abs(reconstruct(expand(A, B), B) - A))
    res.below("gram_deviation", gram, 1e-12)
    res.below("round_trip", trip, 1e-12)
    res.below("hermitian", herm, 1e-12)
    return res


# -- 2 --------------------------------------------------------------------------


def frame_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(2, "frames", 10.0)
    rng = np.random.default_rng(seed)
    da = db = ua = ub = rs = 0.0
    for d in _dims(range(2, 6), n):
        B = build_frobenius_basis(d)
        I = np.eye(d * d)
        for _ in range(_count(50, scale)):
            g = cov.TorusElement.random(d, rng)
            a, b = cov.alpha_inner(g, B), cov.beta_inner(g, B)
            da = max(da, _max_abs(a - cov.alpha_closed(g, B)))
            db = max(db, _max_abs(b - cov.beta_closed(g, B)))
            ua = max(ua, _max_abs(a @ a.conj().T - I))
            ub = max(ub, _max_abs(b @ b.conj().T - I))
            R = cov.r_matrix(g, B)
            rs = max(rs, _max_abs(R - R.T))
    res.below("alpha_closed_form", da, 1e-12)
    res.below("beta_closed_form", db, 1e-12)
    res.below("alpha_unitary", ua, 1e-12)
    res.below("beta_unitary", ub, 1e-12)
    res.below("r_symmetric", rs, 1e-12)
    return res


# -- 3 --------------------------------------------------------------------------


def covariance_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(3, "covariance_equivalence", 20.0)
    rng = np.random.default_rng(seed)
    dims = _dims(range(2, 5), n)
    k = _count(50, scale)
    disagreements = missed = 0
    worst_cov = 0.0
    for i in range(k):
        d = dims[i % len(dims)]
        m = cov.random_covariant_blocks(d, rng, "generic").to_map()
        rep = cov.covariance_report(m, samples=30, tol=1e-10, seed=rng)
        ident_ok = rep.identity_residual <= rep.tolerance
        comm_ok = rep.commutation_residual <= rep.tolerance
        disagreements += ident_ok != comm_ok
        missed += not (ident_ok and comm_ok)
        worst_cov = max(worst_cov, rep.identity_residual, rep.commutation_residual)
    for i in range(k):
        d = dims[i % len(dims)]
        rep = cov.covariance_report(random_generic_map(d, rng), samples=30, tol=1e-10, seed=rng)
        ident_ok = rep.identity_residual <= rep.tolerance
        comm_ok = rep.commutation_residual <= rep.tolerance
        disagreements += ident_ok != comm_ok
        missed += ident_ok or comm_ok
    res.at_most("disagreements", disagreements, 0)
    res.at_most("misclassified", missed, 0)
    res.below("covariant_residual", worst_cov, 1e-10)
    return res


# -- 4 --------------------------------------------------------------------------


def projector_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(4, "projector", 30.0)
    rng = np.random.default_rng(seed)
    agree = idem = 0.0
    lam = np.inf
    for d in _dims(range(2, 5), n):
        for _ in range(_count(20, scale)):
            m = random_generic_map(d, rng)
            pc = cov.project_covariant(m, "closed_form")
            pq = cov.project_covariant(m, "quadrature")
            agree = max(agree, pc.distance(pq))
            idem = max(idem, cov.project_covariant(pc, "closed_form").distance(pc),
                       cov.project_covariant(pc, "quadrature").distance(pc))
        for _ in range(_count(20, scale)):
            m = random_cp_map(d, rng)
            for mode in ("closed_form", "quadrature"):
                p = cov.project_covariant(m, mode)
                lam = min(lam, float(np.linalg.eigvalsh(0.5 * (p.c + p.c.conj().T))[0]))
    res.below("quadrature_vs_closed", agree, 1e-11)
    res.below("idempotence", idem, 1e-11)
    res.checks.append(Check("cp_preservation_min_eig", lam, -1e-9, bool(lam >= -1e-9)))
    return res


# -- 5 --------------------------------------------------------------------------


def _borderline_covariant(d, rng):
    """HP covariant blocks, CP or not with roughly equal odds."""
    m = d * (d - 1) // 2
    t = rng.normal(size=m)
    c1 = np.abs(t) + rng.exponential(size=m)
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    C3 = G @ G.conj().T
    if rng.random() < 0.5:
        if rng.random() < 0.5 and m:
            j = rng.integers(m)
            c1[j] = np.abs(t[j]) - rng.uniform(0.01, 1.0)
        else:
            C3 = C3 - (np.linalg.eigvalsh(C3)[0] + rng.uniform(0.01, 1.0)) * np.eye(d)
    return cov.CovariantBlocks(np.diag(c1 + 0j), np.diag(1j * t), C3)


def _borderline_conjugate(d, rng):
    m = d * (d - 1) // 2
    s, r = rng.exponential(size=m), rng.exponential(size=m)
    w = np.sqrt(s * r) * rng.uniform(0, 1, size=m) * np.exp(1j * rng.uniform(0, 2 * np.pi, size=m))
    a = rng.exponential(size=d)
    if rng.random() < 0.5:
        what = rng.integers(3) if m else 2
        if what == 0:
            j = rng.integers(m)
            w[j] = np.sqrt(s[j] * r[j]) * rng.uniform(1.01, 2.0) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        elif what == 1:
            j = rng.integers(m)
            s[j] = -rng.uniform(0.01, 1.0)
            w[j] = 0.0
        else:
            a[rng.integers(d)] = -rng.uniform(0.01, 1.0)
    return cov.ConjugateCovariantBlocks(np.diag(s + 0j), np.diag(w.conj()), np.diag(w), np.diag(r + 0j), a + 0j)


def structure_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(5, "structure_theorems", 30.0)
    rng = np.random.default_rng(seed)
    dims = _dims(range(2, 5), n)
    k = _count(200, scale)
    cp_dis = co_dis = 0
    spec_err = 0.0
    for i in range(k):
        d = dims[i % len(dims)]
        b = _borderline_covariant(d, rng)
        m = b.to_map()
        cp_dis += cov.cp_covariant_test(b) != is_cp(m)
        c1, c2 = np.diag(b.C1), np.diag(b.C2)
        pred = np.sort(np.concatenate([(c1 + 1j * c2).real, (c1 - 1j * c2).real, np.linalg.eigvalsh(b.C3)]))
        spec_err = max(spec_err, _max_abs(pred - np.linalg.eigvalsh(m.c)))
    for i in range(k):
        d = dims[i % len(dims)]
        b = _borderline_conjugate(d, rng)
        psi = b.to_map()
        verdict = cov.cocp_conjugate_test(b)
        co_dis += verdict != is_cp(psi)
        co_dis += verdict != is_cocp(compose_transpose(psi))
        s, r, w = np.diag(b.C11).real, np.diag(b.C22).real, np.diag(b.C21)
        root = np.sqrt((s - r) ** 2 + 4 * np.abs(w) ** 2)
        pred = np.sort(np.concatenate([(s + r + root) / 2, (s + r - root) / 2, np.linalg.eigvalsh(b.C33)]))
        spec_err = max(spec_err, _max_abs(pred - np.linalg.eigvalsh(psi.c)))
    c33 = 0.0
    for d in _dims(range(2, 9), n):
        D = build_frobenius_basis(d).diagonal_entries()
        for _ in range(_count(20, scale)):
            a = rng.normal(size=d) + 1j * rng.normal(size=d)
            c33 = max(c33, _max_abs(cov.build_c33(a) - D.T @ np.diag(a) @ D))
    res.at_most("cp_covariant_disagreements", cp_dis, 0)
    res.at_most("cocp_conjugate_disagreements", co_dis, 0)
    res.below("block_spectrum_formulas", spec_err, 1e-10)
    res.below("c33_vs_spectral_oracle", c33, 1e-12)
    return res


# -- 6 --------------------------------------------------------------------------


def exp_commutation_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(6, "exp_commutation", 10.0)
    rng = np.random.default_rng(seed)
    dims = _dims(range(2, 5), n)
    violations = skipped = 0
    k = _count(500, scale)
    for i in range(k):
        d = dims[i % len(dims)]
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        tau = cov.congruence_free_scale(np.linalg.eigvals(G), 2j * np.pi)
        A = rng.uniform(0.05, 0.95) * tau * G
        if i % 2:
            B = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        else:
            B = A @ A + rng.normal() * A + rng.normal() * np.eye(d)
        try:
            verdict = cov.exp_commutation_equiv(A, B)
        except CongruenceError:
            skipped += 1
            continue
        violations += verdict is cov.CommutationVerdict.VIOLATION
    A = np.diag([0.0, 2j * np.pi])
    B = np.array([[0.0, 1.0], [0.0, 0.0]])
    eA = expm(A)
    exp_comm = float(np.linalg.norm(eA @ B - B @ eA))
    gen_comm = float(np.linalg.norm(A @ B - B @ A))
    flagged = not cov.congruence_free_check(np.diag(A), 2j * np.pi)
    reproduced = cov.exp_commutation_equiv(A, B, check=False) is cov.CommutationVerdict.VIOLATION
    res.at_most("violations", violations, 0)
    res.at_most("precondition_skips", skipped, 0)
    res.below("counterexample_exp_commutator", exp_comm, 1e-12)
    res.checks.append(Check("counterexample_generator_commutator", gen_comm, 1.0, gen_comm >= 1.0))
    res.checks.append(Check("counterexample_flagged", float(flagged and reproduced), 1.0, flagged and reproduced))
    return res


# -- 7 --------------------------------------------------------------------------


def dilation_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(7, "dilation", 30.0)
    rng = np.random.default_rng(seed)
    recon = morph = inter = 0.0
    for d in _dims((2, 3), n):
        for i in range(_count(20, scale)):
            covariant = i % 2 == 0
            if covariant:
                mcp = cov.random_covariant_map("cp", d, rng)
                mco = cov.random_covariant_map("cocp", d, rng)
                mdec = cov.random_covariant_map("dec", d, rng)
            else:
                mcp = random_cp_map(d, rng, rank=int(rng.integers(1, d * d + 1)))
                mco = compose_transpose(random_cp_map(d, rng))
                mdec = decomposable_certificate(random_cp_map(d, rng), compose_transpose(random_cp_map(d, rng)))
            dils = [(stinespring(mcp), mcp), (costinespring(mco), mco), (jordan_dilation(*mdec.certificate), mdec)]
            for dil, m in dils:
                recon = max(recon, dil.reconstruction_error(m))
                morph = max(morph, dil.morphism_residual(5, rng))
                if covariant:
                    inter = max(inter, covariance_intertwiner(dil, samples=10, seed=rng).residual)
    raised = 0
    controls = _count(10, scale)
    for i in range(controls):
        d = _dims((2, 3), n)[i % len(_dims((2, 3), n))]
        m = random_cp_map(d, rng)
        dil = stinespring(m) if i % 2 == 0 else costinespring(compose_transpose(m))
        try:
            covariance_intertwiner(dil, samples=10, seed=rng)
        except NoIntertwinerError:
            raised += 1
    res.below("reconstruction", recon, 1e-10)
    res.below("morphism_law", morph, 1e-11)
    res.below("intertwiner_residual", inter, 1e-9)
    res.checks.append(Check("non_covariant_controls_raised", raised, controls, raised == controls))
    return res


# -- 8 --------------------------------------------------------------------------


def _battery(d, rng, count):
    """Half covariant-structured generators, half perturbed ones."""
    gens = []
    for i in range(count):
        H = np.diag(rng.normal(size=d)).astype(complex)
        phi = 0.3 * cov.random_covariant_map("dec", d, rng)
        if i % 2:
            eps = 10.0 ** rng.uniform(-3, -1)
            if rng.random() < 0.5:
                H = H + eps * random_hermitian(d, rng)
            else:
                cp, co = phi.certificate
                phi = decomposable_certificate(cp + eps * random_cp_map(d, rng), co)
        gens.append((i % 2 == 0, build_generator(H, phi)))
    return gens


def dynamics_suite(seed=0, scale=1.0, n=None):
    res = SuiteResult(8, "dynamics", 60.0)
    rng = np.random.default_rng(seed)
    sz = np.diag([1.0, -1.0])
    deph = build_generator(np.zeros((2, 2)), certify_decomposable(adjoint_action(sz)))
    fam = evolve(deph, 2.0, 1e-3, rho0=np.full((2, 2), 0.5))
    err = max(abs(fam.trajectory[fam.index(t)][0, 1] - 0.5 * np.exp(-2 * t)) for t in (0.5, 1.0, 2.0))
    res.below("dephasing_closed_form", err, 1e-6)

    d = 3 if n is None else min(max(n, 2), 4)
    H = random_hermitian(d, rng, 0.5)
    phi = 0.3 * decomposable_certificate(random_cp_map(d, rng), compose_transpose(random_cp_map(d, rng)))
    gen = build_generator(H, phi)
    long = evolve(gen, 5.0, 1e-3, rho0=np.eye(d) / d)
    res.below("trace_drift", max(long.trace_residual, long.trajectory_trace_residual()), 1e-8)
    ratio = rk4_order_ratio(gen, 1.0, 0.05)
    res.checks.append(Check("rk4_order_ratio", ratio, 16.0, bool(abs(ratio - 16.0) <= 3.2)))

    mismatches = 0
    for expected, g in _battery(d, rng, _count(20, scale)):
        f = evolve(g, 1.0, 0.01)
        v_gen = generator_covariance_report(g, samples=5, seed=rng).covariant
        v_fam = dynamics_covariance_check(f, samples=5, seed=rng).covariant
        v_prop = propagator_covariance_check(f, samples=3, seed=rng).covariant
        v_semi = semigroup_structure_check(g, samples=3, seed=rng)
        mismatches += len({expected, v_gen, v_fam, v_prop, v_semi.exp_covariant, v_semi.structural_covariant}) != 1
    res.at_most("battery_verdict_mismatches", mismatches, 0)

    law = max(semigroup_law_residual(long, 10, rng), semigroup_structure_check(gen, samples=2, seed=rng).law_residual)
    res.below("semigroup_law", law, 1e-8)
    wit = d_divisibility_witness(gen, 1e-3)
    res.checks.append(Check("d_divisibility_first_order_min_eig", wit.min_eigenvalue, -1e-6, wit.ok))
    return res


SUITES = {
    1: basis_suite,
    2: frame_suite,
    3: covariance_suite,
    4: projector_suite,
    5: structure_suite,
    6: exp_commutation_suite,
    7: dilation_suite,
    8: dynamics_suite,
}


def run_suite(number, seed=0, scale=1.0, n=None):
    t0 = time.perf_counter()
    result = SUITES[number](seed=seed, scale=scale, n=n)
    result.elapsed = time.perf_counter() - t0
    return result


def run_suites(numbers=None, seed=0, scale=1.0, n=None):
    return [run_suite(k, seed, scale, n) for k in (numbers or sorted(SUITES))]
