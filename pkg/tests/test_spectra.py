import csv
import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from kondo_phonon.errors import InsufficientEigenpairs, NoConvergence
from kondo_phonon.fock import build_boson_space, enumerate_basis
from kondo_phonon.hamiltonians import SparseHermitianOperator, build_hamiltonian
from kondo_phonon.spectra import (
    block_krylov,
    ground_state_degeneracy,
    lowest_eigenpairs,
    sweep_to_csv,
    truncation_sweep,
)


def random_hermitian(rng, n, density=0.3):
    A = sp.random(n, n, density=density, random_state=rng, format="csr") * (1 + 0j)
    A = A + 1j * sp.random(n, n, density=density, random_state=rng, format="csr")
    return (A + A.conj().T).tocsr()


@settings(max_examples=25, deadline=None)
@given(st.integers(12, 120), st.integers(1, 4), st.integers(0, 2**16))
def test_iterative_matches_dense_on_random_matrices(n, k, seed):
    rng = np.random.default_rng(seed)
    A = random_hermitian(rng, n)
    d = lowest_eigenpairs(A, k=k, method="dense")
    it = lowest_eigenpairs(A, k=k, method="iterative", seed=seed)
    assert np.allclose(d.eigenvalues, it.eigenvalues, atol=1e-9 * (1 + abs(d.E0)))
    assert it.residuals.max() < 1e-8


def test_physical_hamiltonian_dense_vs_iterative(ex1_phonon):
    H = build_hamiltonian(ex1_phonon, enumerate_basis(ex1_phonon, "P0"), build_boson_space(ex1_phonon, "number", n_max=4))
    d = lowest_eigenpairs(H, k=3, method="dense")
    it = lowest_eigenpairs(H, k=3, method="iterative")
    assert abs(d.E0 - it.E0) <= 1e-9 * abs(d.E0)
    assert it.method == "iterative" and it.iterations >= 1


def test_shift_is_applied():
    op = SparseHermitianOperator.from_matrix(sp.diags([0.0, 1.0, 2.0]).tocsr(), shift=-5.0)
    r = lowest_eigenpairs(op, k=2)
    assert np.allclose(r.eigenvalues, [-5.0, -4.0])
    assert r.residuals.max() < 1e-14


@pytest.mark.parametrize(
    "gap,status",
    [(1e-3, "unique"), (1e-12, "degenerate"), (0.0, "degenerate"), (1e-8, "undecided")],
)
def test_degeneracy_bands(gap, status):
    r = lowest_eigenpairs(sp.diags([0.0, gap, 1.0]).tocsr(), k=2)
    assert ground_state_degeneracy(r).status == status


def test_insufficient_eigenpairs():
    r = lowest_eigenpairs(np.diag([1.0, 2.0]), k=1)
    with pytest.raises(InsufficientEigenpairs):
        ground_state_degeneracy(r)
    with pytest.raises(InsufficientEigenpairs):
        r.gap


def test_no_convergence_reports_best_residual():
    rng = np.random.default_rng(1)
    A = random_hermitian(rng, 400, density=0.05)
    with pytest.raises(NoConvergence) as info:
        block_krylov(lambda B: A @ B, 400, 2, tol=1e-15, max_basis=12, max_restarts=2)
    assert info.value.iterations == 2 and info.value.best_residual > 0


def test_truncation_sweep(ex1_phonon):
    table = truncation_sweep(ex1_phonon, [0, 1, 2, 3])
    assert table["monotone"]
    rows = table["rows"]
    assert [r["n_max"] for r in rows] == [0, 1, 2, 3]
    assert all(abs(r["S2"]) < 1e-8 for r in rows)
    text = sweep_to_csv(table)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert len(parsed) == 4 and float(parsed[2]["E0"]) == rows[2]["E0"]
    with pytest.raises(ValueError):
        truncation_sweep(ex1_phonon, [2, 2])
