"""Self-dual cones on the electron-phonon space and randomized positivity checks.

A state ``Σ c(X,Y) |X↑,Y↓>`` is identified with the matrix ``M[X,Y] = c(X,Y)``
indexed by up and down configurations (complex conjugation in the occupation
basis plays the role of the antiunitary).  The electron cone is the set of
positive semidefinite M; restricted to doubly-occupied-or-empty f-sites it is
block diagonal, one block per f-pattern.  With grid phonons the product cone
is generated by ``ψ ⊗ f`` with ψ in the electron cone and f ≥ 0 pointwise.

All checks are randomized: they can refute a positivity statement or
corroborate it on the sampled generators, never prove it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import BasisMismatch, DegenerateGroundState, UnsupportedExactTest
from .fock import BosonSpace, ElectronBasis
from .spectra import ground_state_degeneracy, lowest_eigenpairs

CONE_KINDS = ("L_N_plus", "Q0_L_N_plus", "P_grid", "Q_product")
TOL_STRICT = 1e-12


@dataclass(frozen=True)
class HSIdentification:
    """Vector ↔ matrix map for an unprojected or Q0 electron basis."""

    basis: ElectronBasis
    up_configs: tuple
    rows: np.ndarray
    cols: np.ndarray
    f_bits: int

    @classmethod
    def from_basis(cls, basis: ElectronBasis) -> "HSIdentification":
        if basis.projection not in ("none", "Q0"):
            raise BasisMismatch("the matrix picture needs the unprojected or Q0 basis")
        ups = sorted({c.up_mask for c in basis.configs} | {c.down_mask for c in basis.configs})
        pos = {m: i for i, m in enumerate(ups)}
        rows = np.array([pos[c.up_mask] for c in basis.configs])
        cols = np.array([pos[c.down_mask] for c in basis.configs])
        order = basis.order
        f_bits = ((1 << order.n_omega) - 1) << order.n_lambda
        return cls(basis, tuple(ups), rows, cols, f_bits)

    @property
    def size(self) -> int:
        return len(self.up_configs)

    def blocks(self) -> list:
        """Index sets of up configurations sharing an f-pattern."""
        groups = {}
        for i, m in enumerate(self.up_configs):
            groups.setdefault(m & self.f_bits, []).append(i)
        return [np.array(v) for _, v in sorted(groups.items())]

    def psi_theta(self, v: np.ndarray) -> np.ndarray:
        """Matrix of a vector; a (dim, K) array gives a (K, n, n) stack."""
        v = np.asarray(v)
        if v.shape[0] != self.basis.dim:
            raise BasisMismatch(f"vector length {v.shape[0]} does not match basis dimension {self.basis.dim}")
        if v.ndim == 1:
            M = np.zeros((self.size, self.size), dtype=complex)
            M[self.rows, self.cols] = v
            return M
        M = np.zeros((v.shape[1], self.size, self.size), dtype=complex)
        M[:, self.rows, self.cols] = v.T
        return M

    def psi_theta_inverse(self, M: np.ndarray) -> np.ndarray:
        M = np.asarray(M)
        if M.shape[-2:] != (self.size, self.size):
            raise BasisMismatch("matrix shape does not match the identification")
        if M.ndim == 2:
            return M[self.rows, self.cols].astype(complex)
        return M[:, self.rows, self.cols].T.astype(complex)

    def identity_vector(self) -> np.ndarray:
        return self.psi_theta_inverse(np.eye(self.size))


@dataclass
class Cone:
    """A cone on a concrete carrier space together with its generator sampler."""

    kind: str
    ident: HSIdentification | None = None
    bosons: BosonSpace | None = None

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone {self.kind!r}")
        if self.kind in ("L_N_plus", "Q0_L_N_plus", "Q_product") and self.ident is None:
            raise BasisMismatch(f"{self.kind} needs an electron identification")
        if self.kind == "Q0_L_N_plus" and self.ident.basis.projection != "Q0":
            raise BasisMismatch("Q0 cone needs the Q0 basis")
        if self.kind == "P_grid" and (self.bosons is None or self.bosons.representation != "grid"):
            raise BasisMismatch("P_grid needs grid phonons")
        if self.kind == "Q_product" and self.bosons is None:
            raise BasisMismatch("Q_product needs a boson space")

    def _require_grid(self):
        if self.kind == "Q_product" and self.bosons.representation != "grid":
            raise UnsupportedExactTest("the product cone is only realized on grid phonons")

    @property
    def dim(self) -> int:
        if self.kind == "P_grid":
            return self.bosons.dim
        if self.kind == "Q_product":
            return self.ident.basis.dim * self.bosons.dim
        return self.ident.basis.dim

    # -- generators ----------------------------------------------------------------

    def _electron_generators(self, rng, n: int, coordinate: bool) -> np.ndarray:
        ident = self.ident
        blocks = ident.blocks() if ident.basis.projection == "Q0" else [np.arange(ident.size)]
        X = np.zeros((ident.size, n), dtype=complex)
        n_coord = min(ident.size, n) if coordinate else 0
        for j in range(n_coord):
            X[j, j] = 1.0
        for j in range(n_coord, n):
            blk = blocks[rng.integers(len(blocks))]
            X[blk, j] = rng.standard_normal(len(blk)) + 1j * rng.standard_normal(len(blk))
        X /= np.linalg.norm(X, axis=0)
        M = np.einsum("ik,jk->kij", X, X.conj())
        return ident.psi_theta_inverse(M)

    def _phonon_generators(self, rng, n: int) -> np.ndarray:
        F = np.abs(rng.standard_normal((self.bosons.dim, n)))
        return F / np.linalg.norm(F, axis=0)

    def sample(self, rng: np.random.Generator, n: int, coordinate: bool = True) -> np.ndarray:
        """n unit-norm generators as columns.

        Electron cones: every coordinate ray |e_X><e_X| first, then rank-one
        |x><x| with complex Gaussian x (within one f-pattern block for Q0).
        Phonon parts are dense |Gaussian| vectors.
        """
        if self.kind == "P_grid":
            return self._phonon_generators(rng, n)
        self._require_grid()
        E = self._electron_generators(rng, n, coordinate)
        if self.kind != "Q_product":
            return E
        F = self._phonon_generators(rng, n)
        return np.einsum("ik,jk->ijk", E, F).reshape(-1, n)

    def reference(self) -> np.ndarray:
        """A fixed interior-type element: identity (Q0-pinched) ⊗ uniform positive f."""
        if self.kind == "P_grid":
            f = np.ones(self.bosons.dim)
            return f / np.linalg.norm(f)
        e = self.ident.identity_vector()
        if self.kind == "Q_product":
            e = np.kron(e, np.ones(self.bosons.dim))
        return e / np.linalg.norm(e)

    # -- membership ----------------------------------------------------------------

    def min_eigenvalues(self, V: np.ndarray) -> np.ndarray:
        """Smallest eigenvalue of the Hermitian part of each matrix image
        (per grid point for the product cone), one value per column of V."""
        V = V.reshape(V.shape[0], -1)
        out = np.empty(V.shape[1])
        for k in range(V.shape[1]):
            if self.kind == "Q_product":
                cols = V[:, k].reshape(self.ident.basis.dim, self.bosons.dim)
                M = self.ident.psi_theta(cols)
            else:
                M = self.ident.psi_theta(V[:, k])[None]
            H = 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))
            out[k] = np.linalg.eigvalsh(H)[..., 0].min()
        return out

    def contains(self, v: np.ndarray, tol: float = 0.0) -> bool:
        v = np.asarray(v)
        if self.kind == "P_grid":
            return bool(np.max(np.abs(v.imag), initial=0.0) <= tol and np.min(v.real) >= -tol)
        self._require_grid()
        if self.kind == "Q_product":
            cols = v.reshape(self.ident.basis.dim, self.bosons.dim)
            M = self.ident.psi_theta(cols)
        else:
            M = self.ident.psi_theta(v)[None]
        anti = np.max(np.abs(M - np.conj(np.swapaxes(M, -1, -2))), initial=0.0)
        if anti > max(tol, 1e-14 * (1 + np.max(np.abs(M), initial=0.0))):
            return False
        H = 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))
        return bool(np.linalg.eigvalsh(H)[..., 0].min() >= -tol)


def is_in_cone(vector: np.ndarray, cone: Cone, tol: float = 0.0) -> bool:
    """Membership test.

    On grid phonons the product cone is decided exactly: a vector belongs to it
    iff its electron part at every grid point lies in the electron cone.
    """
    return cone.contains(vector, tol)


# -- reports ---------------------------------------------------------------------------


@dataclass
class ConeReport:
    check: str
    cone: str
    seed: int
    n_samples: int
    min_statistic: float
    tol: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _apply(A, V: np.ndarray) -> np.ndarray:
    if callable(A) and not sp.issparse(A) and not isinstance(A, np.ndarray):
        return A(V)
    return A @ V


def _max_abs(A) -> float | None:
    if sp.issparse(A):
        return float(abs(A).max()) if A.nnz else 0.0
    if isinstance(A, np.ndarray):
        return float(np.max(np.abs(A), initial=0.0))
    return None


def default_tol(A) -> float:
    m = _max_abs(A)
    return 1e-10 * (1.0 + (m if m is not None else 0.0))


def sample_pairs(cone: Cone, n_samples: int, seed: int):
    """Two independent generator families; both start with the coordinate rays,
    offset by one so that paired rays differ."""
    rng = np.random.default_rng(seed)
    U = cone.sample(rng, n_samples)
    V = np.roll(cone.sample(rng, n_samples), 1, axis=1)
    return U, V


def _pairings(cone: Cone, A, n_samples: int, seed: int, applied=None):
    U, V = sample_pairs(cone, n_samples, seed)
    AV = _apply(A, V) if applied is None else applied
    P = np.einsum("ik,ik->k", U.conj(), AV)
    return P, AV


def check_positivity_preserving(A, cone: Cone, n_samples: int = 1000, tol: float | None = None, seed: int = 0, image_check: bool = True, name: str = "positivity_preserving", applied=None) -> ConeReport:
    """Randomized test of A(cone) ⊆ cone.

    Statistics: min over sampled pairs of Re<u, Av>, and (electron cones) the
    smallest eigenvalue of the matrix image of Av.  ``applied`` may carry A V for
    the V of ``sample_pairs(cone, n_samples, seed)`` when it is already known.
    """
    tol = default_tol(A) if tol is None else tol
    P, AV = _pairings(cone, A, n_samples, seed, applied)
    stat = float(P.real.min())
    extra = {"max_abs_imag_pairing": float(np.abs(P.imag).max())}
    ok = stat >= -tol
    if image_check and cone.kind != "P_grid":
        eig = float(cone.min_eigenvalues(AV).min())
        extra["min_image_eigenvalue"] = eig
        ok = ok and eig >= -tol
    elif cone.kind == "P_grid":
        extra["min_image_entry"] = float(AV.real.min())
        ok = ok and extra["min_image_entry"] >= -tol
    return ConeReport(name, cone.kind, seed, n_samples, stat, tol, bool(ok), extra)


def check_operator_inequality(A, B, cone: Cone, n_samples: int = 1000, tol: float | None = None, seed: int = 0, name: str = "operator_inequality") -> ConeReport:
    """Randomized test of A ⊵ B: Re<u, (A - B) v> ≥ -tol on sampled generator pairs."""
    if callable(A) and not (sp.issparse(A) or isinstance(A, np.ndarray)):
        D = lambda V: A(V) - _apply(B, V)  # noqa: E731
    else:
        D = A - B
    tol = default_tol(D) if tol is None else tol
    P, _ = _pairings(cone, D, n_samples, seed)
    stat = float(P.real.min())
    return ConeReport(name, cone.kind, seed, n_samples, stat, tol, bool(stat >= -tol),
                      {"max_abs_imag_pairing": float(np.abs(P.imag).max())})


def _hermitian_parts(A):
    from .hamiltonians import SparseHermitianOperator

    if isinstance(A, SparseHermitianOperator):
        return A.matrix, A.shift
    return A, 0.0


def heat_semigroup(A, beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """V ↦ exp(-βA) V for a Hermitian matrix (dense eigendecomposition when small)."""
    return lambda V: heat_actions(A, [beta], V)[0]


def heat_actions(A, betas, V: np.ndarray) -> list:
    """[exp(-βA) V for β in betas], sharing one Krylov sweep for large sparse A.

    ``betas`` must be positive multiples of a common step when A is large
    (they are evaluated on the grid 0, β_max/num, ..., β_max).
    """
    M, shift = _hermitian_parts(A)
    betas = list(betas)
    n = M.shape[0]
    if n <= 2000:
        D = M.toarray() if sp.issparse(M) else np.asarray(M)
        w, Q = np.linalg.eigh(0.5 * (D + D.conj().T))
        C = Q.conj().T @ V
        return [(Q * np.exp(-b * (w + shift))) @ C for b in betas]
    M = sp.csr_matrix(M)
    bmax = max(betas)
    steps = [b / bmax for b in betas]
    num = _common_grid(steps)
    out = expm_multiply(-bmax * M, V, start=0.0, stop=1.0, num=num + 1, endpoint=True)
    return [out[int(round(s * num))] * np.exp(-b * shift) for s, b in zip(steps, betas)]


def _common_grid(fractions) -> int:
    for num in range(1, 65):
        if all(abs(f * num - round(f * num)) < 1e-12 for f in fractions):
            return num
    raise ValueError("inverse temperatures must share a common step")


def phase_normalize(psi: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Multiply ψ by the phase making <reference, ψ> real and positive."""
    ov = np.vdot(reference, psi)
    if abs(ov) == 0:
        return psi
    return psi * (abs(ov) / ov)


def check_ergodicity(A, beta: float, cone: Cone, n_samples: int = 1000, tol_strict: float = TOL_STRICT, seed: int = 0, name: str = "ergodicity", applied=None) -> ConeReport:
    """Strict positivity of <u, e^{-βA} v> on sampled pairs, and of <ψ₀, u> for
    the phase-normalized ground state ψ₀ of A.

    Raises DegenerateGroundState when the computed gap is below threshold.
    """
    res = lowest_eigenpairs(A, k=2)
    verdict = ground_state_degeneracy(res)
    if verdict.status != "unique":
        raise DegenerateGroundState(verdict.gap, verdict.gap_threshold)
    P, _ = _pairings(cone, heat_semigroup(A, beta), n_samples, seed, applied)
    psi = phase_normalize(res.ground_state, cone.reference())
    rng = np.random.default_rng(seed + 1)
    G = cone.sample(rng, n_samples)
    overlaps = G.conj().T @ psi
    stat = float(min(P.real.min(), overlaps.real.min()))
    extra = {
        "min_pairing": float(P.real.min()),
        "min_ground_state_overlap": float(overlaps.real.min()),
        "beta": beta,
        "gap": verdict.gap,
        "max_abs_imag_pairing": float(np.abs(P.imag).max()),
    }
    return ConeReport(name, cone.kind, seed, n_samples, stat, tol_strict, bool(stat > tol_strict), extra)
