import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from kondo_phonon.cones import (
    Cone,
    HSIdentification,
    check_ergodicity,
    check_operator_inequality,
    check_positivity_preserving,
    heat_actions,
    is_in_cone,
    phase_normalize,
    sample_pairs,
)
from kondo_phonon.errors import BasisMismatch, DegenerateGroundState, UnsupportedExactTest
from kondo_phonon.fock import build_boson_space, enumerate_basis


@pytest.fixture(scope="module")
def idents(ex1):
    return {p: HSIdentification.from_basis(enumerate_basis(ex1, p)) for p in ("none", "Q0")}


@pytest.fixture(scope="module")
def grid(ex1):
    return build_boson_space(ex1, "grid", n_points=5, extent=4.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["none", "Q0"]))
def test_identification_is_isometric(idents, seed, proj):
    ident = idents[proj]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(ident.basis.dim) + 1j * rng.standard_normal(ident.basis.dim)
    M = ident.psi_theta(v)
    assert np.isclose(np.linalg.norm(M), np.linalg.norm(v))
    assert np.allclose(ident.psi_theta_inverse(M), v)
    # adjoint of the matrix corresponds to the complex conjugate of the transposed vector
    assert np.isclose(np.vdot(ident.psi_theta(v), M), np.vdot(v, v))


def test_identification_rejects_p0(ex1):
    with pytest.raises(BasisMismatch):
        HSIdentification.from_basis(enumerate_basis(ex1, "P0"))


def test_q0_blocks_partition(idents):
    blocks = idents["Q0"].blocks()
    allidx = np.sort(np.concatenate(blocks))
    assert np.array_equal(allidx, np.arange(idents["Q0"].size))
    assert len(blocks) == 4


@pytest.mark.parametrize("kind,proj", [("L_N_plus", "none"), ("Q0_L_N_plus", "Q0")])
def test_samples_and_reference_lie_in_electron_cones(idents, kind, proj):
    cone = Cone(kind, idents[proj])
    V = cone.sample(np.random.default_rng(0), 60)
    assert np.allclose(np.linalg.norm(V, axis=0), 1)
    assert all(is_in_cone(V[:, k], cone, 1e-12) for k in range(V.shape[1]))
    assert is_in_cone(cone.reference(), cone)
    assert not is_in_cone(-cone.reference(), cone)


def test_product_cone_membership_exact_on_grid(idents, grid):
    cone = Cone("Q_product", idents["Q0"], grid)
    V = cone.sample(np.random.default_rng(1), 40)
    assert all(is_in_cone(V[:, k], cone, 1e-12) for k in range(40))
    # an electron-cone vector times a sign-changing phonon function leaves the cone
    e = idents["Q0"].identity_vector()
    f = np.ones(grid.dim)
    f[3] = -1
    assert not is_in_cone(np.kron(e, f), cone)
    assert cone.min_eigenvalues(V).min() > -1e-12


def test_product_cone_needs_grid(idents, ex1):
    cone = Cone("Q_product", idents["Q0"], build_boson_space(ex1, "number", n_max=2))
    with pytest.raises(UnsupportedExactTest):
        is_in_cone(np.zeros(cone.dim), cone)
    with pytest.raises(UnsupportedExactTest):
        cone.sample(np.random.default_rng(0), 3)
    with pytest.raises(BasisMismatch):
        Cone("P_grid", None, build_boson_space(ex1, "number", n_max=2))


def test_sample_pairs_deterministic(idents):
    cone = Cone("L_N_plus", idents["none"])
    U1, V1 = sample_pairs(cone, 50, 7)
    U2, V2 = sample_pairs(cone, 50, 7)
    assert np.array_equal(U1, U2) and np.array_equal(V1, V2)


def test_positivity_preserving_accepts_and_rejects(grid):
    cone = Cone("P_grid", None, grid)
    n = grid.dim
    lap = sp.diags([np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0)], [-1, 0, 1]).toarray()
    good = expm(-0.5 * lap)
    assert check_positivity_preserving(good, cone, 200, seed=0).passed
    bad = np.eye(n) - 0.9 * np.ones((n, n))
    rep = check_positivity_preserving(bad, cone, 200, seed=0)
    assert not rep.passed and rep.min_statistic < 0
    assert rep.to_dict()["pass"] is False


def test_operator_inequality_on_electron_cone(idents):
    cone = Cone("L_N_plus", idents["none"])
    n = cone.dim
    A = np.eye(n) * 2
    assert check_operator_inequality(A, np.eye(n), cone, 100).passed
    assert not check_operator_inequality(np.eye(n), A, cone, 100).passed


def test_heat_actions_match_expm():
    rng = np.random.default_rng(3)
    n = 2100  # above the dense limit, exercises the shared Krylov sweep
    main = rng.uniform(0, 2, n)
    A = sp.diags([np.full(n - 1, -0.5), main, np.full(n - 1, -0.5)], [-1, 0, 1], format="csr")
    V = rng.standard_normal((n, 3))
    out = heat_actions(A, [0.5, 1.0], V)
    D = A.toarray()
    for beta, got in zip((0.5, 1.0), out):
        assert np.allclose(got, expm(-beta * D) @ V, atol=1e-10)
    small = D[:200, :200]
    assert np.allclose(heat_actions(small, [1.0], V[:200])[0], expm(-small) @ V[:200], atol=1e-12)
    with pytest.raises(ValueError):
        heat_actions(A, [1.0, np.pi / 10], V)


def test_ergodicity_rejects_degenerate(idents):
    cone = Cone("L_N_plus", idents["none"])
    A = np.diag(np.r_[0.0, 0.0, np.arange(1.0, cone.dim - 1)])
    with pytest.raises(DegenerateGroundState):
        check_ergodicity(A, 1.0, cone, 20)


def test_ergodicity_on_improving_semigroup(grid):
    cone = Cone("P_grid", None, grid)
    n = grid.dim
    lap = sp.diags([np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0)], [-1, 0, 1]).toarray()
    rep = check_ergodicity(lap, 1.0, cone, 100)
    assert rep.passed and rep.extra["min_ground_state_overlap"] > 0


def test_phase_normalize():
    ref = np.array([1.0, 0, 0])
    psi = np.exp(1.3j) * np.array([0.6, 0.8, 0])
    out = phase_normalize(psi, ref)
    assert np.isclose(np.vdot(ref, out), 0.6)
