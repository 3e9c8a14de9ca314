"""Hole-particle, Lang-Firsov and phase-rotation unitaries as explicit matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import BasisMismatch
from .fock import BosonSpace, ElectronBasis, apply_mode, build_boson_space, enumerate_basis
from .hamiltonians import build_hamiltonian, build_transformed
from .model import ValidatedModel


@dataclass(frozen=True)
class UnitaryFactor:
    kind: str
    matrix: sp.csr_matrix
    meta: dict = field(default_factory=dict)

    @property
    def H(self) -> sp.csr_matrix:
        return self.matrix.conj().T.tocsr()

    def unitarity_defect(self) -> float:
        """max |M†M - I| entrywise."""
        M = self.matrix
        D = (M.conj().T @ M - sp.identity(M.shape[1], format="csr")).tocoo()
        return float(np.max(np.abs(D.data), initial=0.0))


def down_mode_signs(model: ValidatedModel) -> np.ndarray:
    """ε_z with U†a_{z↓}U = ε_z a†_{z↓}: γ_x on conduction sites, γ_u sgnJ_u on localized ones."""
    return np.concatenate([model.gamma_lambda, model.gamma_omega * model.sgnJ]).astype(int)


def hole_particle_image(model: ValidatedModel, mask: int, n_sites: int):
    """U applied to one basis state: ``(new_mask, sign)``.

    U leaves up modes alone and sends the empty down band to the filled one,
    so U|X↑, Y↓> = ∏_{X} c† ∏_{m∈Y} (ε_m c_m) |0↑, full↓>.
    """
    eps = down_mode_signs(model)
    up = mask & ((1 << n_sites) - 1)
    down = mask >> n_sites
    m = ((1 << n_sites) - 1) << n_sites
    sign = 1
    for site in reversed([i for i in range(n_sites) if down >> i & 1]):
        m, s = apply_mode("annihilate", n_sites + site, m)
        sign *= s * eps[site]
    for site in reversed([i for i in range(n_sites) if up >> i & 1]):
        m, s = apply_mode("create", site, m)
        sign *= s
    return m, sign


def hole_particle(model: ValidatedModel, basis: ElectronBasis, target: ElectronBasis | None = None) -> UnitaryFactor:
    """Matrix of U from ``basis`` into ``target`` (default: ``basis`` itself).

    With ``basis`` the doubly-occupied-or-empty sector and ``target`` the
    singly-occupied sector this is the block of U between them.
    """
    target = basis if target is None else target
    if basis.projection == "P0" and target is basis:
        raise BasisMismatch("U maps the singly-occupied sector out of itself; pass the target basis")
    n = basis.order.n_sites
    rows, cols, vals = [], [], []
    for j, mask in enumerate(basis.combined_masks()):
        new, sign = hole_particle_image(model, mask, n)
        i = target.index_of_mask(new)
        if i is None:
            raise BasisMismatch("target basis does not contain the image of U")
        rows.append(i)
        cols.append(j)
        vals.append(float(sign))
    M = sp.csr_matrix((vals, (rows, cols)), shape=(target.dim, basis.dim), dtype=complex)
    return UnitaryFactor("hole_particle_U", M, {"source": basis.projection, "target": target.projection})


def _displacements(model: ValidatedModel, basis: ElectronBasis) -> np.ndarray:
    """(√2/ω₀) Σ_x g_{x,y} n_x for every config, shape (dim, |Λ|)."""
    nl = model.n_lambda
    n = basis.order.n_sites
    occ = np.array(
        [[(m >> x & 1) + (m >> (n + x) & 1) for x in range(nl)] for m in basis.combined_masks()],
        dtype=float,
    )
    return np.sqrt(2.0) / model.spec.omega0 * occ @ model.spec.g


def lang_firsov(model: ValidatedModel, bosons: BosonSpace, basis: ElectronBasis, sign: int = +1) -> UnitaryFactor:
    """exp(sign · L_c), L_c = -i(√2/ω₀) Σ g_{x,y} n_x p_y, block-diagonal over electron configs."""
    disp = _displacements(model, basis)
    cache = {}
    blocks = []
    for a in disp:
        key = tuple(np.round(a, 14))
        if key not in cache:
            factors = [expm(-1j * sign * ay * bosons.p) if ay else np.eye(bosons.d, dtype=complex) for ay in a]
            cache[key] = sp.csr_matrix(bosons.kron_all(factors))
        blocks.append(cache[key])
    M = sp.block_diag(blocks, format="csr")
    return UnitaryFactor("lang_firsov", M, {"sign": sign, "representation": bosons.representation})


def phase_rotation(bosons: BosonSpace, theta: float = np.pi / 2) -> UnitaryFactor:
    """exp(iθN_p) on the phonon space (grid: through the eigenbasis of the discrete N_p)."""
    if bosons.representation == "number":
        single = np.diag(np.exp(1j * theta * np.diag(bosons.Np).real))
    else:
        w, V = np.linalg.eigh(bosons.Np)
        single = (V * np.exp(1j * theta * w)) @ V.conj().T
    M = sp.csr_matrix(bosons.kron_all([single] * bosons.modes))
    return UnitaryFactor("phase_rotation", M, {"theta": theta, "representation": bosons.representation})


def full_transform(model: ValidatedModel, bosons: BosonSpace, p0: ElectronBasis, q0: ElectronBasis) -> sp.csr_matrix:
    """e^{-L_c} e^{-iπN_p/2} U as a map from (Q0 sector ⊗ phonons) to (P0 sector ⊗ phonons)."""
    U = hole_particle(model, q0, p0).matrix
    rot = phase_rotation(bosons, -np.pi / 2).matrix
    lf = lang_firsov(model, bosons, p0, sign=-1).matrix
    return (lf @ sp.kron(sp.identity(p0.dim), rot) @ sp.kron(U, sp.identity(bosons.dim))).tocsr()


def low_phonon_columns(bosons: BosonSpace, n_electron: int) -> np.ndarray:
    """Indices of product states whose total phonon number is at most n_max // 2."""
    occ = bosons.occupation_numbers()
    keep = np.flatnonzero(occ.sum(axis=1) <= bosons.n_max // 2)
    return (np.arange(n_electron)[:, None] * bosons.dim + keep[None, :]).ravel()


def transformed_hamiltonian_residuals(model: ValidatedModel, n_max_list) -> list:
    """‖𝒰†H𝒰 - Ĥ‖₂ on low-phonon test vectors for each truncation.

    Returns rows ``{n_max, residual, n_test}``.  Residuals shrink with n_max when
    the truncated transformation converges.
    """
    p0 = enumerate_basis(model, "P0")
    q0 = enumerate_basis(model, "Q0")
    rows = []
    for n_max in n_max_list:
        bosons = build_boson_space(model, "number", n_max=n_max)
        H = build_hamiltonian(model, p0, bosons).full()
        T = full_transform(model, bosons, p0, q0)
        conj = (T.conj().T @ H @ T).tocsc()
        Hhat = build_transformed(model, q0, bosons).H.full().tocsc()
        cols = low_phonon_columns(bosons, q0.dim)
        D = (conj - Hhat)[:, cols].toarray()
        residual = float(np.linalg.norm(D, 2)) if D.size else 0.0
        rows.append({"n_max": int(n_max), "residual": residual, "n_test": int(len(cols))})
    return rows


def residuals_non_increasing(rows) -> bool:
    r = [row["residual"] for row in rows]
    return all(b <= a for a, b in zip(r, r[1:]))
