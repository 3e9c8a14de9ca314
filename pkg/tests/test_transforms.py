import numpy as np
import pytest
import scipy.sparse as sp

from kondo_phonon.errors import BasisMismatch
from kondo_phonon.fock import DOWN, UP, FermionExpr, build_boson_space, enumerate_basis
from kondo_phonon.hamiltonians import build_hamiltonian, build_transformed
from kondo_phonon.model import example_model, validate
from kondo_phonon.spectra import lowest_eigenpairs
from kondo_phonon.transforms import (
    down_mode_signs,
    full_transform,
    hole_particle,
    lang_firsov,
    phase_rotation,
    residuals_non_increasing,
    transformed_hamiltonian_residuals,
)

MODELS = [
    ("example1", 2, {}),
    ("example1", 2, {"J": -1.0}),
    ("example1", 4, {}),
    ("star", 4, {}),
]


@pytest.fixture(scope="module", params=MODELS, ids=lambda p: f"{p[0]}{p[1]}{p[2]}")
def model(request):
    kind, size, params = request.param
    return validate(example_model(kind, size, params))


class TestHoleParticle:
    def test_exactly_unitary(self, model):
        U = hole_particle(model, enumerate_basis(model, "none"))
        assert U.unitarity_defect() == 0.0

    def test_exchanges_sectors(self, model):
        p0, q0 = enumerate_basis(model, "P0"), enumerate_basis(model, "Q0")
        U = hole_particle(model, q0, p0)
        assert U.unitarity_defect() == 0.0
        assert hole_particle(model, p0, q0).matrix.shape == (q0.dim, p0.dim)
        with pytest.raises(BasisMismatch):
            hole_particle(model, p0)

    def test_square_is_diagonal_signs(self, model):
        U = hole_particle(model, enumerate_basis(model, "none")).matrix
        S = (U @ U).toarray()
        assert np.array_equal(S, np.diag(np.diag(S))) and set(np.abs(np.diag(S))) == {1.0}

    def test_number_relations(self, model):
        basis = enumerate_basis(model, "none")
        U = hole_particle(model, basis).matrix
        order = basis.order
        I = sp.identity(basis.dim)
        for site in [("c", i) for i in range(model.n_lambda)] + [("f", u) for u in range(model.n_omega)]:
            nu = FermionExpr.number(order.mode(site, UP)).matrix(basis)
            nd = FermionExpr.number(order.mode(site, DOWN)).matrix(basis)
            assert abs(U.conj().T @ nu @ U - nu).max() == 0
            assert abs(U.conj().T @ nd @ U - (I - nd)).max() == 0

    def test_down_hopping_picks_up_signs(self, model):
        basis = enumerate_basis(model, "none")
        U = hole_particle(model, basis).matrix
        order = basis.order
        eps = down_mode_signs(model)
        sites = [("c", i) for i in range(model.n_lambda)] + [("f", u) for u in range(model.n_omega)]
        for a in range(len(sites)):
            for b in range(len(sites)):
                if a == b:
                    continue
                ma, mb = order.mode(sites[a], DOWN), order.mode(sites[b], DOWN)
                hop = (FermionExpr.create(ma) * FermionExpr.annihilate(mb)).matrix(basis)
                rev = (FermionExpr.create(mb) * FermionExpr.annihilate(ma)).matrix(basis)
                assert abs(U.conj().T @ hop @ U + eps[a] * eps[b] * rev).max() == 0

    def test_unique_up_to_phase(self, ex1):
        # any unitary with the same action on the ladder operators differs by a scalar;
        # rebuilding from the same data must give exactly the same matrix
        b = enumerate_basis(ex1, "none")
        assert abs(hole_particle(ex1, b).matrix - hole_particle(ex1, b).matrix).max() == 0


class TestPhononFactors:
    def test_lang_firsov_inverse_exact(self, ex1_phonon):
        p0 = enumerate_basis(ex1_phonon, "P0")
        B = build_boson_space(ex1_phonon, "number", n_max=4)
        L = lang_firsov(ex1_phonon, B, p0, +1).matrix
        Li = lang_firsov(ex1_phonon, B, p0, -1).matrix
        assert abs(L @ Li - sp.identity(L.shape[0])).max() < 1e-12
        assert lang_firsov(ex1_phonon, B, p0).unitarity_defect() < 1e-12

    def test_lang_firsov_trivial_without_coupling(self, ex1):
        p0 = enumerate_basis(ex1, "P0")
        B = build_boson_space(ex1, "number", n_max=3)
        assert abs(lang_firsov(ex1, B, p0).matrix - sp.identity(p0.dim * B.dim)).max() == 0

    def test_lang_firsov_displaces_on_low_states(self, ex1_phonon):
        # e^{-i a p} q e^{i a p} = q - a on states far from the truncation edge
        B = build_boson_space(ex1_phonon, "number", n_max=30)
        from scipy.linalg import expm

        a = 0.4
        W = expm(-1j * a * B.p)
        lhs = W @ B.q @ W.conj().T
        low = slice(0, 6)
        assert np.allclose(lhs[low, low], (B.q - a * np.eye(B.d))[low, low], atol=1e-8)

    def test_phase_rotation_number_basis(self, ex1):
        B = build_boson_space(ex1, "number", n_max=4)
        R = phase_rotation(B, 0.3).matrix.toarray()
        b0 = B.embed(B.b, 0).toarray()
        assert np.allclose(R @ b0 @ R.conj().T, np.exp(-0.3j) * b0, atol=1e-14)

    def test_phase_rotation_entries_and_period(self, ex1):
        B = build_boson_space(ex1, "number", n_max=5)
        R = phase_rotation(B).matrix.toarray()
        d = np.diag(R)
        assert np.allclose(np.abs(d - np.round(d.real) - 1j * np.round(d.imag)), 0, atol=1e-15)
        assert np.allclose(np.linalg.matrix_power(R, 4), np.eye(B.dim), atol=1e-14)

    def test_phase_rotation_turns_q_into_p(self, ex1):
        B = build_boson_space(ex1, "number", n_max=6)
        R = phase_rotation(B).matrix.toarray()
        q0, p0 = B.embed(B.q, 0).toarray(), B.embed(B.p, 0).toarray()
        assert np.allclose(R @ q0 @ R.conj().T, p0, atol=1e-14)

    def test_phase_rotation_grid_is_unitary(self, ex1):
        B = build_boson_space(ex1, "grid", n_points=9)
        assert phase_rotation(B).unitarity_defect() < 1e-12


class TestTransformedHamiltonian:
    def test_decoupled_identity_exact(self, ex1):
        rows = transformed_hamiltonian_residuals(ex1, [2, 4])
        assert all(r["residual"] < 1e-10 for r in rows)

    @pytest.mark.parametrize("J", [1.0, -1.0])
    def test_decoupled_identity_matrices(self, J):
        m = validate(example_model("example1", 2, {"J": J}))
        p0, q0 = enumerate_basis(m, "P0"), enumerate_basis(m, "Q0")
        B = build_boson_space(m, "number", n_max=2)
        T = full_transform(m, B, p0, q0)
        lhs = (T.conj().T @ build_hamiltonian(m, p0, B).full() @ T).toarray()
        assert np.allclose(lhs, build_transformed(m, q0, B).H.to_dense(), atol=1e-12)

    def test_residuals_shrink_with_truncation(self):
        m = validate(example_model("example1", 2, {"g": 0.3}))
        rows = transformed_hamiltonian_residuals(m, [4, 6, 8])
        assert residuals_non_increasing(rows)
        assert rows[-1]["residual"] < rows[0]["residual"]
        # two modes with total phonon number ≤ k give (k+1)(k+2)/2 states
        assert [r["n_test"] for r in rows] == [10 * 6, 10 * 10, 10 * 15]

    def test_spectra_agree_within_truncation(self, ex1_phonon):
        p0, q0 = enumerate_basis(ex1_phonon, "P0"), enumerate_basis(ex1_phonon, "Q0")
        diffs = []
        for n in (2, 4, 6):
            B = build_boson_space(ex1_phonon, "number", n_max=n)
            a = lowest_eigenpairs(build_hamiltonian(ex1_phonon, p0, B)).eigenvalues
            b = lowest_eigenpairs(build_transformed(ex1_phonon, q0, B).H).eigenvalues
            diffs.append(np.abs(a - b).max())
        assert diffs[0] > diffs[1] > diffs[2]
        assert diffs[2] < 1e-5
