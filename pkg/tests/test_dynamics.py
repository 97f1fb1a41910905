import numpy as np
import pytest
from scipy.linalg import expm

from covdec import covariance as cov
from covdec import dynamics as dyn
from covdec import _accel
from covdec.errors import CertificateError, ConditioningError, IntegrationError
from covdec.linmap import (
    adjoint_action,
    certify_decomposable,
    compose_transpose,
    decomposable_certificate,
    from_kraus,
    is_cp,
    zero_map,
)
from covdec.sampling import random_cp_map, random_density, random_hermitian, random_unitary

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


@pytest.fixture
def dephasing():
    return dyn.build_generator(np.zeros((2, 2)), certify_decomposable(adjoint_action(SZ)))


def test_dephasing_generator_action(dephasing, rng):
    rho = random_density(2, rng)
    np.testing.assert_allclose(dephasing(rho), SZ @ rho @ SZ - rho, atol=1e-14)
    assert dephasing.trace_residual() < 1e-14


def test_dephasing_closed_form(dephasing, kernel_path):
    fam = dyn.evolve(dephasing, 2.0, 1e-3, rho0=np.full((2, 2), 0.5))
    for t in (0.5, 1.0, 2.0):
        rho = fam.trajectory[fam.index(t)]
        assert abs(rho[0, 1] - 0.5 * np.exp(-2 * t)) < 1e-6
        assert rho[0, 0] == pytest.approx(0.5)
    assert fam.trace_residual < 1e-12


def test_hamiltonian_only(rng):
    H = 0.5 * SZ
    gen = dyn.build_generator(H)
    rho0 = random_density(2, rng)
    fam = dyn.evolve(gen, 1.0, 1e-2, rho0=rho0)
    Ut = expm(-1j * H * 1.0)
    np.testing.assert_allclose(fam.trajectory[-1], Ut @ rho0 @ Ut.conj().T, atol=1e-9)
    purity = np.einsum("kab,kba->k", fam.trajectory, fam.trajectory).real
    np.testing.assert_allclose(purity, purity[0], atol=1e-9)


def test_zero_generator_is_identity():
    fam = dyn.evolve(dyn.build_generator(np.zeros((3, 3))), 1.0, 0.1)
    np.testing.assert_array_equal(fam.superops, np.broadcast_to(np.eye(9), fam.superops.shape))


def test_cocp_dissipator_is_valid(rng):
    W = random_unitary(2, rng)
    phi = certify_decomposable(adjoint_action(W).compose(compose_transpose(adjoint_action(np.eye(2)))))
    assert phi.certificate[0].distance(zero_map(2)) == 0
    gen = dyn.build_generator(np.zeros((2, 2)), phi)
    assert gen.trace_residual() < 1e-13
    fam = dyn.evolve(gen, 1.0, 1e-2)
    assert fam.trace_residual < 1e-12


def test_build_generator_errors(rng):
    with pytest.raises(ValueError):
        dyn.build_generator(np.array([[0, 1], [0, 0]]))
    with pytest.raises(CertificateError):
        dyn.build_generator(np.zeros((2, 2)), adjoint_action(SZ))
    with pytest.raises(ValueError):
        dyn.build_generator(np.zeros((3, 3)), certify_decomposable(adjoint_action(SZ)))


def test_dual_generator(rng):
    gen = dyn.build_generator(random_hermitian(2, rng), certify_decomposable(random_cp_map(2, rng)))
    A, B = rng.normal(size=(2, 2, 2))
    lhs = np.vdot(A.ravel(), gen.superop() @ B.ravel())
    rhs = np.vdot(gen.dual_superop() @ A.ravel(), B.ravel())
    assert lhs == pytest.approx(rhs)
    # Heisenberg generator is unital
    np.testing.assert_allclose(gen.dual_superop() @ np.eye(2).ravel(), 0, atol=1e-13)


def test_time_dependent_hamiltonian():
    # H(t) = cos(t) sz / 2 rotates the coherence by the integrated phase sin(t)
    gen = dyn.build_generator(lambda t: 0.5 * np.cos(t) * SZ)
    assert not gen.constant
    fam = dyn.evolve(gen, 2.0, 1e-2, rho0=np.full((2, 2), 0.5))
    for t in (0.5, 2.0):
        rho = fam.trajectory[fam.index(t)]
        assert abs(rho[0, 1] - 0.5 * np.exp(-1j * np.sin(t))) < 1e-8


def test_time_dependent_dissipator():
    # gamma(t) dephasing: coherence decays as exp(-2 int gamma)
    base = certify_decomposable(adjoint_action(SZ))
    gen = dyn.build_generator(np.zeros((2, 2)), lambda t: (1.0 + t) * base)
    fam = dyn.evolve(gen, 1.0, 1e-2, rho0=np.full((2, 2), 0.5))
    assert abs(fam.trajectory[-1][0, 1] - 0.5 * np.exp(-2 * 1.5)) < 1e-8


def test_evolve_argument_errors(dephasing):
    with pytest.raises(ValueError):
        dyn.evolve(dephasing, 1.0, 0.0)
    with pytest.raises(ValueError):
        dyn.evolve(dephasing, 0.05, 0.1)
    with pytest.raises(ValueError):
        dyn.evolve(dephasing, 1.05, 0.1)
    with pytest.raises(ValueError):
        dyn.evolve(dephasing, 1.0, 0.1, rho0=np.eye(2))


def test_blowup_raises():
    phi = certify_decomposable(200.0 * adjoint_action(np.eye(2)))
    # dissipation and gain cancel for the trace, but a huge step explodes the scheme
    gen = dyn.build_generator(100 * SX, phi)
    with pytest.raises(IntegrationError):
        dyn.evolve(gen, 5.0, 0.5)


def test_regularity_flag(dephasing):
    fam = dyn.evolve(dephasing, 0.1, 0.01, bound=1.0)
    assert fam.regularity == pytest.approx(2.0)
    assert not fam.regular
    assert dyn.regularity_norm(dephasing, [0.0]) == pytest.approx(2.0)


def test_density_validation():
    with pytest.raises(ValueError):
        dyn.check_density(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        dyn.check_density(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        dyn.check_density(np.eye(2))
    dyn.check_density(np.eye(2) / 2)


def test_order_four(rng):
    gen = dyn.build_generator(random_hermitian(3, rng, 0.5), 0.3 * cov.random_covariant_map("dec", 3, rng))
    assert dyn.rk4_order_ratio(gen, 1.0, 0.05) == pytest.approx(16.0, rel=0.2)


def test_trace_drift_long_horizon(rng):
    phi = 0.2 * decomposable_certificate(random_cp_map(4, rng), compose_transpose(random_cp_map(4, rng)))
    gen = dyn.build_generator(random_hermitian(4, rng), phi)
    fam = dyn.evolve(gen, 5.0, 1e-3, rho0=random_density(4, rng))
    assert fam.trace_residual < 1e-8
    assert fam.trajectory_trace_residual() < 1e-8


# -- propagators ----------------------------------------------------------------


def test_propagator_identity_and_composition(dephasing):
    fam = dyn.evolve(dephasing, 2.0, 1e-2)
    assert dyn.propagator(fam, 1.0, 1.0).distance(fam.map_at(0.0)) < 1e-12
    V = dyn.propagator(fam, 2.0, 0.5)
    assert V.compose(fam.map_at(0.5)).distance(fam.map_at(2.0)) < 1e-8
    with pytest.raises(ValueError):
        dyn.propagator(fam, 0.5, 1.0)
    with pytest.raises(ValueError):
        fam.index(0.005)


def test_propagator_semigroup(rng):
    gen = dyn.build_generator(random_hermitian(2, rng), certify_decomposable(random_cp_map(2, rng)))
    fam = dyn.evolve(gen, 2.0, 1e-2)
    V = dyn.propagator(fam, 1.5, 0.5)
    assert V.distance(fam.map_at(1.0)) < 1e-8
    assert dyn.semigroup_law_residual(fam) < 1e-8


def test_dephasing_propagator_is_cp(dephasing):
    fam = dyn.evolve(dephasing, 2.0, 1e-2)
    assert is_cp(dyn.propagator(fam, 2.0, 1.0))


def test_ill_conditioned_propagator():
    # full depolarizing at rate 20 shrinks the traceless part to exp(-20 t)
    E = np.zeros((4, 2, 2))
    for k, (i, j) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        E[k, i, j] = 1.0
    phi = certify_decomposable(10.0 * from_kraus(E))
    gen = dyn.build_generator(np.zeros((2, 2)), phi)
    fam = dyn.evolve(gen, 1.5, 1e-2)
    with pytest.raises(ConditioningError) as info:
        dyn.propagator(fam, 1.5, 1.5)
    assert info.value.condition_number >= 1e8


# -- covariance of dynamics -----------------------------------------------------


def test_generator_report_examples(rng):
    phi = cov.random_covariant_map("dec", 2, rng)
    assert dyn.generator_covariance_report(dyn.build_generator(np.diag([0.2, -0.4]), phi)).covariant
    rep = dyn.generator_covariance_report(dyn.build_generator(SX, phi))
    assert not rep.covariant
    # the commutator witness at g = (pi/2, 0)
    U = cov.diag_unitary([np.pi / 2, 0.0])
    assert np.linalg.norm(SX @ U - U @ SX) > 1.0
    bad = certify_decomposable(random_cp_map(2, rng))
    assert not dyn.generator_covariance_report(dyn.build_generator(np.zeros((2, 2)), bad)).covariant


def test_family_checks(dephasing, rng):
    fam = dyn.evolve(dephasing, 1.0, 1e-2)
    assert dyn.dynamics_covariance_check(fam).covariant
    assert dyn.propagator_covariance_check(fam).covariant
    phi = cov.random_covariant_map("dec", 2, rng)
    fx = dyn.evolve(dyn.build_generator(SX, phi), 1.0, 1e-2)
    assert not dyn.dynamics_covariance_check(fx).covariant
    assert not dyn.propagator_covariance_check(fx).covariant
    assert not dyn.generator_covariance_report(fx.generator).covariant
    zero = dyn.evolve(dyn.build_generator(np.zeros((2, 2))), 1.0, 0.1)
    assert dyn.dynamics_covariance_check(zero).covariant


def test_semigroup_structure(rng):
    phi = cov.random_covariant_map("dec", 3, rng)
    rep = dyn.semigroup_structure_check(dyn.build_generator(np.diag([0.1, 0.5, -0.3]), phi))
    assert rep.exp_covariant and rep.structural_covariant and rep.agree
    assert rep.law_residual < 1e-8
    H = np.zeros((3, 3), dtype=complex)
    H[0, 1] = H[1, 0] = 1.0
    rep = dyn.semigroup_structure_check(dyn.build_generator(H, phi))
    assert not rep.exp_covariant and not rep.structural_covariant
    assert dyn.semigroup_structure_check(dyn.build_generator(np.zeros((3, 3)))).exp_covariant
    with pytest.raises(ValueError):
        dyn.semigroup_structure_check(dyn.build_generator(lambda t: t * np.eye(2)))


def test_d_divisibility_witness(rng):
    phi = decomposable_certificate(random_cp_map(3, rng), compose_transpose(random_cp_map(3, rng)))
    gen = dyn.build_generator(random_hermitian(3, rng), phi)
    assert dyn.d_divisibility_witness(gen, 1e-3).ok


def test_kernel_paths_agree(rng):
    L = 0.3 * (rng.normal(size=(3, 4, 4)) + 1j * rng.normal(size=(3, 4, 4)))
    a = _accel.rk4_propagate_numpy(L, 0.1, 1)
    b = _accel.rk4_propagate_numba(L, 0.1, 1)
    np.testing.assert_allclose(a, b, atol=1e-14)
    c = _accel.rk4_propagate_numpy(L[:1], 0.05, 40)
    d = _accel.rk4_propagate_numba(L[:1], 0.05, 40)
    np.testing.assert_allclose(c, d, atol=1e-12)
    np.testing.assert_allclose(c[-1], expm(2.0 * L[0]), atol=1e-5)
