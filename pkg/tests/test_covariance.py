import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from covdec import covariance as cov
from covdec.basis import build_frobenius_basis
from covdec.errors import CongruenceError, ConsistencyError
from covdec.linmap import (
    MapMatrix,
    adjoint_action,
    compose_transpose,
    from_kraus,
    identity_map,
    is_cocp,
    is_cp,
    transpose_map,
)
from covdec.sampling import random_cp_map, random_generic_map


def test_torus_reduction_and_group_law():
    g = cov.TorusElement([2 * np.pi, -0.5, 7.0])
    np.testing.assert_allclose(g.x, [0.0, 2 * np.pi - 0.5, 7.0 - 2 * np.pi])
    h = cov.TorusElement([1.0, 2.0, 3.0])
    np.testing.assert_allclose(cov.diag_unitary(g * h), cov.diag_unitary(g) @ cov.diag_unitary(h), atol=1e-14)
    np.testing.assert_allclose(cov.diag_unitary(g.inverse()), cov.conj_diag_unitary(g), atol=1e-15)
    assert not g.x.flags.writeable


def test_alpha_n2_frozen():
    x1, x2 = 0.7, 2.9
    d = x1 - x2
    expected = np.array([
        [np.cos(d), -np.sin(d), 0, 0],
        [np.sin(d), np.cos(d), 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
    ])
    np.testing.assert_allclose(cov.build_alpha([x1, x2]), expected, atol=1e-14)


def test_beta_n2_frozen():
    x1, x2 = 0.7, 2.9
    u1, u2 = np.exp(2j * x1), np.exp(2j * x2)
    e = np.exp(1j * (x1 + x2))
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 0] = expected[1, 1] = e
    expected[2:, 2:] = 0.5 * np.array([[u1 + u2, u1 - u2], [u1 - u2, u1 + u2]])
    np.testing.assert_allclose(cov.build_beta([x1, x2]), expected, atol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_frames_agree_unitary(n, rng):
    B = build_frobenius_basis(n)
    for _ in range(5):
        g = cov.TorusElement.random(n, rng)
        a, b = cov.build_alpha(g, B), cov.build_beta(g, B)
        np.testing.assert_allclose(a @ a.conj().T, np.eye(n * n), atol=1e-12)
        np.testing.assert_allclose(b @ b.conj().T, np.eye(n * n), atol=1e-12)
        R = cov.r_matrix(g, B)
        np.testing.assert_allclose(R, R.T, atol=1e-14)


def test_frame_matrix_general_pair(rng):
    g = cov.TorusElement.random(3, rng)
    U = cov.diag_unitary(g)
    B = build_frobenius_basis(3)
    np.testing.assert_allclose(cov.frame_matrix(U, U, B), cov.alpha_inner(g, B), atol=1e-13)
    np.testing.assert_allclose(cov.frame_matrix(U, U.conj(), B), cov.beta_inner(g, B), atol=1e-13)


def test_inconsistent_routes_raise(monkeypatch):
    monkeypatch.setattr(cov, "alpha_closed", lambda g, basis=None: np.eye(4))
    with pytest.raises(ConsistencyError):
        cov.build_alpha([0.3, 1.2])


def test_alpha_log(rng):
    g = cov.TorusElement.random(4, rng)
    A = cov.alpha_log(g)
    assert np.isrealobj(A)
    np.testing.assert_allclose(A, -A.T)
    np.testing.assert_allclose(expm(A), cov.build_alpha(g), atol=1e-12)


def test_identity_covariant_transpose_conjugate_covariant():
    assert cov.is_covariant(identity_map(3))
    assert not cov.is_conjugate_covariant(identity_map(3))
    assert cov.is_conjugate_covariant(transpose_map(3))
    assert not cov.is_covariant(transpose_map(3))


def test_diagonal_kraus_covariant(rng):
    D = np.diag(rng.normal(size=3) + 1j * rng.normal(size=3))
    assert cov.is_covariant(adjoint_action(D))


def test_all_ones_not_covariant():
    m = MapMatrix(2, np.ones((4, 4)))
    rep = cov.covariance_report(m)
    assert not rep.covariant
    assert rep.identity_residual > 0.1 and rep.commutation_residual > 0.1


def test_structured_points_distinct():
    for n in (2, 5):
        for g in cov.structured_points(n):
            d = g.x[:, None] - g.x[None, :]
            off = d[~np.eye(n, dtype=bool)]
            assert np.abs(np.exp(1j * off) - 1).min() > 1e-3


def test_uv_covariance_general_pair(rng):
    # A -> W A^T W^dagger is (U, W conj(U) W^dagger)-covariant
    W = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    m = adjoint_action(W).compose(transpose_map(3))
    reps = []
    for _ in range(5):
        U = cov.diag_unitary(cov.TorusElement.random(3, rng))
        reps.append((U, W @ U.conj() @ W.T))
    assert cov.is_uv_covariant(m, reps).covariant
    assert not cov.is_uv_covariant(m, [(U, U) for U, _ in reps]).covariant


# -- congruence and exponentials ------------------------------------------------


def test_congruence_free_check_examples():
    z = 2j * np.pi
    assert cov.congruence_free_check([0, 1j, 2j], z)
    assert not cov.congruence_free_check([0, 2j * np.pi], z)
    assert not cov.congruence_free_check([1.0, 1.0 + 4j * np.pi], z)
    # equal points are allowed (k = 0)
    assert cov.congruence_free_check([1.0, 1.0], z)
    with pytest.raises(ValueError):
        cov.congruence_free_check([0, 1], 0)


def test_congruence_free_scale():
    pts = np.array([0, 3j, 10j])
    tau = cov.congruence_free_scale(pts, 2j * np.pi)
    assert tau == pytest.approx(2 * np.pi / 10)
    assert cov.congruence_free_check(0.99 * tau * pts, 2j * np.pi)
    assert cov.congruence_free_scale([1 + 1j], 2j * np.pi) == np.inf
    with pytest.raises(ValueError):
        cov.congruence_free_scale([], 2j * np.pi)


def test_exp_commutation_counterexample():
    A = np.diag([0, 2j * np.pi])
    B = np.array([[0, 1], [0, 0]])
    assert cov.exp_commutation_equiv(A, B, check=False) is cov.CommutationVerdict.VIOLATION
    with pytest.raises(CongruenceError):
        cov.exp_commutation_equiv(A, B)


def test_exp_commutation_verdicts(rng):
    A = 0.1 * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    assert cov.exp_commutation_equiv(A, A @ A - 2 * A) is cov.CommutationVerdict.BOTH_COMMUTE
    B = rng.normal(size=(3, 3))
    assert cov.exp_commutation_equiv(A, B) is cov.CommutationVerdict.NEITHER


# -- projection and block structure ---------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4])
def test_projection_modes_agree(n, rng, kernel_path):
    m = random_generic_map(n, rng)
    pc = cov.project_covariant(m, "closed_form")
    pq = cov.project_covariant(m, "quadrature")
    assert pc.distance(pq) < 1e-11
    assert cov.is_covariant(pc)
    assert cov.project_covariant(pc).distance(pc) == 0.0


def test_projection_fixes_covariant_maps(rng):
    m = cov.random_covariant_map("dec", 3, rng)
    assert cov.project_covariant(m, "quadrature").distance(m) < 1e-12


def test_projection_keeps_cp(rng):
    m = random_cp_map(3, rng)
    assert is_cp(cov.project_covariant(m))
    assert is_cp(cov.project_covariant(m, "quadrature"))


def test_projection_mode_errors(rng):
    with pytest.raises(ValueError):
        cov.project_covariant(random_generic_map(6, rng), "quadrature")
    with pytest.raises(ValueError):
        cov.project_covariant(random_generic_map(2, rng), "monte_carlo")


def test_projection_of_transpose_is_diagonal_part():
    # covariant part of tau keeps only the diagonal block
    p = cov.project_covariant(transpose_map(3))
    expected = np.zeros((9, 9))
    expected[6:, 6:] = np.eye(3)
    np.testing.assert_allclose(p.c, expected, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 5), seed=st.integers(0, 2**32 - 1))
def test_block_round_trip_exact(n, seed):
    b = cov.random_covariant_blocks(n, np.random.default_rng(seed), "generic")
    out = cov.classify_covariant_blocks(b.to_map())
    assert np.array_equal(out.C1, b.C1)
    assert np.array_equal(out.C2, b.C2)
    assert np.array_equal(out.C3, b.C3)


def test_classify_failure_carries_residual(rng):
    out = cov.classify_covariant_blocks(random_generic_map(3, rng))
    assert not out
    assert out.residual > 1.0


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_commutant_commutes_with_alpha(n, seed):
    rng = np.random.default_rng(seed)
    c = cov.random_covariant_blocks(n, rng, "generic").to_c()
    a = cov.build_alpha(cov.TorusElement.random(n, rng))
    assert np.abs(c @ a - a @ c).max() < 1e-12


def test_cp_covariant_examples():
    n = 2
    ok = cov.CovariantBlocks(np.diag([2.0 + 0j]), np.diag([1j]), np.eye(n, dtype=complex))
    assert cov.cp_covariant_test(ok) and is_cp(ok.to_map())
    bad = cov.CovariantBlocks(np.diag([1.0 + 0j]), np.diag([2j]), np.eye(n, dtype=complex))
    assert not cov.cp_covariant_test(bad) and not is_cp(bad.to_map())
    indef = cov.CovariantBlocks(np.diag([1.0 + 0j]), np.diag([0j]), np.diag([1.0, -0.1]).astype(complex))
    assert not cov.cp_covariant_test(indef)


def test_cp_covariant_rejects_non_hp():
    with pytest.raises(ValueError):
        cov.cp_covariant_test(cov.CovariantBlocks(np.diag([1j]), np.diag([0j]), np.eye(2, dtype=complex)))
    with pytest.raises(ValueError):
        cov.cp_covariant_test(cov.CovariantBlocks(np.diag([1 + 0j]), np.diag([1.0 + 0j]), np.eye(2, dtype=complex)))
    with pytest.raises(ValueError):
        C3 = np.array([[1, 1], [0, 1]], dtype=complex)
        cov.cp_covariant_test(cov.CovariantBlocks(np.diag([1 + 0j]), np.diag([0j]), C3))


def _conj_blocks(s, w, r, a):
    d = lambda v: np.diag(np.atleast_1d(np.asarray(v, dtype=complex)))  # noqa: E731
    return cov.ConjugateCovariantBlocks(d(s), d(np.conj(w)), d(w), d(r), np.asarray(a, dtype=complex))


def test_cocp_conjugate_examples():
    # |C12|^2 <= C11 C22 is the PSD condition of [[C11, C12], [C21, C22]]
    half = _conj_blocks(1.0, 0.5, 1.0, [1.0, 1.0])
    assert cov.cocp_conjugate_test(half)
    assert is_cp(half.to_map())
    assert is_cocp(compose_transpose(half.to_map()))
    two = _conj_blocks(1.0, 2.0, 1.0, [1.0, 1.0])
    assert not cov.cocp_conjugate_test(two)
    assert not is_cp(two.to_map())
    neg_a = _conj_blocks(1.0, 0.0, 1.0, [1.0, -0.5])
    assert not cov.cocp_conjugate_test(neg_a)
    assert not is_cp(neg_a.to_map())


def test_conjugate_blocks_are_conjugate_covariant(rng):
    b = cov.random_conjugate_blocks(3, rng, "hp")
    assert cov.is_conjugate_covariant(b.to_map())
    assert cov.is_covariant(compose_transpose(b.to_map()))


def test_build_c33_n2_frozen():
    a1, a2 = 0.3 + 0.1j, -1.7
    expected = 0.5 * np.array([[a1 + a2, a1 - a2], [a1 - a2, a1 + a2]])
    np.testing.assert_allclose(cov.build_c33([a1, a2]), expected, atol=1e-15)


@pytest.mark.parametrize("n", range(2, 9))
def test_build_c33_spectral_oracle(n, rng):
    D = build_frobenius_basis(n).diagonal_entries()
    for _ in range(5):
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        C = cov.build_c33(a)
        np.testing.assert_allclose(C, D.T @ np.diag(a) @ D, atol=1e-12)
        np.testing.assert_allclose(C, C.T, atol=0)


def test_build_c33_is_beta_commutant(rng):
    # the diagonal block must commute with R(g) for every g
    n = 4
    C = cov.build_c33(rng.normal(size=n))
    R = cov.r_matrix(cov.TorusElement.random(n, rng))
    assert np.abs(C @ R - R @ C).max() < 1e-12


@pytest.mark.parametrize("kind", ["cp", "cocp", "decomposable", "dec"])
def test_random_covariant_map_kinds(kind):
    m = cov.random_covariant_map(kind, 3, seed=4)
    cp, co = m.certificate
    assert is_cp(cp) and is_cocp(co)
    assert cov.is_covariant(m)
    assert cov.is_covariant(cp) and cov.is_covariant(co)


def test_random_covariant_map_deterministic():
    a = cov.random_covariant_map("dec", 3, seed=11)
    b = cov.random_covariant_map("dec", 3, seed=11)
    assert np.array_equal(a.c, b.c)
    with pytest.raises(ValueError):
        cov.random_covariant_map("positive", 3)


def test_superop_commutation_residual_matches_frame(rng):
    m = random_cp_map(2, rng)
    g = cov.TorusElement.random(2, rng)
    S = m.superop()
    U = cov.diag_unitary(g)
    Ad = np.kron(U, U.conj())
    assert cov.superop_commutation_residual(S, g) == pytest.approx(np.linalg.norm(S @ Ad - Ad @ S))


def test_matrix_unit_kraus_maps_are_covariant():
    # A -> sum a_ij E_ij A E_ji is covariant; a single off-diagonal unit is enough
    E = np.zeros((3, 3, 3))
    E[0, 0, 1] = E[1, 2, 0] = E[2, 1, 2] = 1.0
    assert cov.is_covariant(from_kraus(E, weights=[0.5, 2.0, 1.0]))
    assert not cov.is_covariant(from_kraus([E[0] + E[1]]))
