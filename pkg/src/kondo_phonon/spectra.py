"""Lowest eigenpairs, degeneracy classification and truncation sweeps.

Small problems go to LAPACK.  Larger ones use a restarted block Krylov
(Rayleigh-Ritz) iteration with full two-pass reorthogonalization; the working
block has k + 4 vectors so near-degenerate pairs are resolved together.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import InsufficientEigenpairs, NoConvergence
from .fock import FermionExpr, build_boson_space, enumerate_basis
from .hamiltonians import SparseHermitianOperator, build_hamiltonian, build_spin_operators
from .model import ValidatedModel

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    method: str
    iterations: int = 0

    @property
    def E0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        if len(self.eigenvalues) < 2:
            raise InsufficientEigenpairs("gap needs at least two eigenpairs")
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]


def _as_operator(A):
    """Return (matvec, dim, shift, dense_getter)."""
    if isinstance(A, SparseHermitianOperator):
        M, shift = A.matrix, A.shift
    else:
        M, shift = A, 0.0
    if sp.issparse(M):
        M = M.tocsr()
    else:
        M = np.asarray(M)
    return M, shift


def residual_norms(M, shift: float, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    R = M @ vectors + (shift - values)[None, :] * vectors
    return np.linalg.norm(R, axis=0)


def _orthonormalize(W: np.ndarray, Q: np.ndarray | None, rng: np.random.Generator) -> np.ndarray:
    """Orthonormalize the columns of W against Q and each other (two passes).

    Columns that vanish are replaced by fresh random directions.
    """
    n, b = W.shape
    out = np.empty_like(W)
    for j in range(b):
        w = W[:, j].copy()
        for _ in range(3):
            for _ in range(2):
                if Q is not None and Q.shape[1]:
                    w -= Q @ (Q.conj().T @ w)
                if j:
                    w -= out[:, :j] @ (out[:, :j].conj().T @ w)
            norm = np.linalg.norm(w)
            if norm > 1e-10 * max(1.0, np.linalg.norm(W[:, j])):
                break
            w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        out[:, j] = w / np.linalg.norm(w)
    return out


def block_krylov(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    k: int,
    tol: float,
    seed: int = 0,
    max_basis: int | None = None,
    max_restarts: int = 300,
):
    """Lowest k eigenpairs of a Hermitian operator given by ``matvec`` on n×b blocks."""
    rng = np.random.default_rng(seed)
    p = min(k + 4, n)
    m = min(n, max_basis or max(8 * p, 80))
    X = _orthonormalize(rng.standard_normal((n, p)) + 1j * rng.standard_normal((n, p)), None, rng)
    best = np.inf
    for it in range(1, max_restarts + 1):
        Q = X
        AQ = matvec(Q)
        blocks, ablocks = [Q], [AQ]
        size = p
        while size < m:
            W = ablocks[-1]
            basis = np.hstack(blocks)
            nb = min(p, m - size)
            V = _orthonormalize(W[:, :nb], basis, rng)
            blocks.append(V)
            ablocks.append(matvec(V))
            size += nb
        Q = np.hstack(blocks)
        AQ = np.hstack(ablocks)
        T = Q.conj().T @ AQ
        T = 0.5 * (T + T.conj().T)
        theta, Y = np.linalg.eigh(T)
        Y = Y[:, :p]
        X = Q @ Y
        AX = AQ @ Y
        res = np.linalg.norm(AX - X * theta[None, :p], axis=0)
        best = min(best, float(res[:k].max()))
        if np.all(res[:k] <= tol) or m == n:
            return theta[:k], X[:, :k], res[:k], it
        X = _orthonormalize(X, None, rng)
    raise NoConvergence(max_restarts, best)


def lowest_eigenpairs(A, k: int = 2, tol: float = 1e-9, method: str | None = None, seed: int = 0) -> SpectralResult:
    """k lowest eigenpairs of a Hermitian operator (dense when dim <= 2000)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    M, shift = _as_operator(A)
    n = M.shape[0]
    k = min(k, n)
    method = method or ("dense" if n <= DENSE_LIMIT else "iterative")
    if method == "dense":
        D = M.toarray() if sp.issparse(M) else M
        w, V = np.linalg.eigh(0.5 * (D + D.conj().T))
        w, V = w[:k] + shift, V[:, :k]
        return SpectralResult(w, V, residual_norms(M, shift, w, V), "dense")
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    theta, X, _, its = block_krylov(lambda B: M @ B, n, k, tol, seed)
    w = theta + shift
    # residuals recomputed from scratch rather than taken from the iteration
    return SpectralResult(w, X, residual_norms(M, shift, w, X), "iterative", its)


class Degeneracy(NamedTuple):
    status: str
    gap: float
    gap_threshold: float
    tol_resolution: float


def ground_state_degeneracy(result: SpectralResult, gap_threshold: float | None = None, tol_resolution: float | None = None) -> Degeneracy:
    """``unique`` above the threshold, ``degenerate`` below the resolution, else ``undecided``."""
    if len(result.eigenvalues) < 2:
        raise InsufficientEigenpairs("degeneracy needs at least two eigenpairs")
    scale = 1.0 + abs(result.E0)
    gt = 1e-7 * scale if gap_threshold is None else gap_threshold
    tr = 1e-10 * scale if tol_resolution is None else tol_resolution
    gap = result.gap
    if gap > gt:
        status = "unique"
    elif gap < tr:
        status = "degenerate"
    else:
        status = "undecided"
    return Degeneracy(status, gap, gt, tr)


def electron_expectation(psi: np.ndarray, O, electron_dim: int) -> complex:
    """<ψ|O ⊗ 1|ψ> for an electron-sector operator O."""
    Psi = psi.reshape(electron_dim, -1)
    return complex(np.vdot(Psi, O @ Psi))


def truncation_sweep(
    model: ValidatedModel,
    n_max_list,
    observables: Mapping[str, FermionExpr] | None = None,
    k: int = 2,
    tol: float = 1e-9,
    seed: int = 0,
) -> dict:
    """Ground-state energy, gap, <S²> and requested expectations per truncation.

    ``observables`` maps column names to electron expressions evaluated on the
    singly-occupied-f sector.  E₀ of nested truncations must not increase; the
    ``monotone`` flag records whether that held.
    """
    n_max_list = list(n_max_list)
    if any(b <= a for a, b in zip(n_max_list, n_max_list[1:])):
        raise ValueError("n_max_list must be increasing")
    basis = enumerate_basis(model, "P0")
    S2 = build_spin_operators(basis)["S2_tot"]
    obs = {name: e.matrix(basis) for name, e in (observables or {}).items()}
    rows = []
    for n_max in n_max_list:
        bosons = build_boson_space(model, "number", n_max=n_max)
        res = lowest_eigenpairs(build_hamiltonian(model, basis, bosons), k=k, tol=tol, seed=seed)
        psi = res.ground_state
        row = {"n_max": n_max, "E0": res.E0, "gap": res.gap if k > 1 else float("nan"),
               "S2": electron_expectation(psi, S2, basis.dim).real}
        for name, O in obs.items():
            row[name] = electron_expectation(psi, O, basis.dim).real
        rows.append(row)
    scale = 1e-10 * (1 + max(abs(r["E0"]) for r in rows))
    monotone = all(b["E0"] <= a["E0"] + scale for a, b in zip(rows, rows[1:]))
    return {"rows": rows, "monotone": monotone}


def sweep_to_csv(table: dict) -> str:
    rows = table["rows"]
    fields = list(rows[0]) if rows else ["n_max", "E0", "gap", "S2"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
