"""Sparse matrices of the physical Hamiltonian, its transformed form and auxiliaries.

Product states are ordered electron-major: the index of ``e ⊗ ph`` is
``e * boson_dim + ph``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import BasisMismatch, NotSymmetric
from .fock import DOWN, UP, BosonSpace, ElectronBasis, FermionExpr, ModeOrder, esum
from .model import ValidatedModel, effective_coulomb

SPINS = (UP, DOWN)


@dataclass(frozen=True)
class SparseHermitianOperator:
    """Hermitian matrix stored through its upper triangle, plus a scalar shift.

    The full matrix is rebuilt as ``triu + triu(k=1)^H`` with a real diagonal,
    so it is exactly Hermitian regardless of rounding in the input.
    """

    upper: sp.coo_matrix
    shift: float = 0.0
    domain: dict = field(default_factory=dict)

    @classmethod
    def from_matrix(cls, M, shift: float = 0.0, domain: dict | None = None, check: bool = True):
        M = sp.csr_matrix(M, dtype=complex)
        if check and M.nnz:
            scale = 1.0 + abs(M).max()
            if abs(M - M.conj().T).max() > 1e-10 * scale:
                raise NotSymmetric("operator is not Hermitian")
        return cls(sp.triu(M, format="coo"), float(shift), dict(domain or {}))

    @property
    def dim(self) -> int:
        return self.upper.shape[0]

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Full matrix without the scalar shift."""
        strict = sp.triu(self.upper, k=1, format="csr")
        diag = sp.diags(self.upper.diagonal().real.astype(complex))
        return (strict + strict.conj().T + diag).tocsr()

    def full(self, with_shift: bool = True) -> sp.csr_matrix:
        if with_shift and self.shift:
            return (self.matrix + self.shift * sp.identity(self.dim, format="csr")).tocsr()
        return self.matrix

    def to_dense(self, with_shift: bool = True) -> np.ndarray:
        return self.full(with_shift).toarray()

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v + self.shift * v

    def __add__(self, other: "SparseHermitianOperator") -> "SparseHermitianOperator":
        return SparseHermitianOperator.from_matrix(
            self.matrix + other.matrix, self.shift + other.shift, self.domain, check=False
        )

    def __sub__(self, other: "SparseHermitianOperator") -> "SparseHermitianOperator":
        return SparseHermitianOperator.from_matrix(
            self.matrix - other.matrix, self.shift - other.shift, self.domain, check=False
        )

    def __mul__(self, c: float) -> "SparseHermitianOperator":
        return SparseHermitianOperator.from_matrix(c * self.matrix, c * self.shift, self.domain, check=False)

    __rmul__ = __mul__

    def with_shift(self, shift: float) -> "SparseHermitianOperator":
        return SparseHermitianOperator(self.upper, float(shift), self.domain)

    def to_coordinate_text(self) -> str:
        """``row col re im`` per stored entry of the full matrix; shift in a header comment."""
        m = self.matrix.tocoo()
        order = np.lexsort((m.col, m.row))
        lines = [f"# dim {self.dim} shift {self.shift!r}"]
        lines += [
            f"{m.row[k]} {m.col[k]} {m.data[k].real!r} {m.data[k].imag!r}" for k in order
        ]
        return "\n".join(lines) + "\n"


class OperatorBundle(dict):
    """Named operators with attribute access."""

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None


# -- fermion building blocks -----------------------------------------------------------


class _Ops:
    """Expression factory for one mode order."""

    def __init__(self, order: ModeOrder):
        self.order = order

    def mode(self, kind, i, spin):
        return self.order.mode((kind, i), spin)

    def cdag(self, kind, i, spin):
        return FermionExpr.create(self.mode(kind, i, spin))

    def c(self, kind, i, spin):
        return FermionExpr.annihilate(self.mode(kind, i, spin))

    def n(self, kind, i, spin=None):
        if spin is None:
            return self.n(kind, i, UP) + self.n(kind, i, DOWN)
        return FermionExpr.number(self.mode(kind, i, spin))

    def splus(self, kind, i):
        return self.cdag(kind, i, UP) * self.c(kind, i, DOWN)

    def sminus(self, kind, i):
        return self.cdag(kind, i, DOWN) * self.c(kind, i, UP)

    def s3(self, kind, i):
        return 0.5 * (self.n(kind, i, UP) - self.n(kind, i, DOWN))

    def sites(self):
        return [("c", x) for x in range(self.order.n_lambda)] + [("f", u) for u in range(self.order.n_omega)]

    def hop(self, a, b, spin):
        """c†_a c_b for sites ``a = (kind, i)``."""
        return self.cdag(*a, spin) * self.c(*b, spin)

    def pair(self, x, u):
        """c†_{x↑} f_{u↑} c†_{x↓} f_{u↓}."""
        return self.cdag("c", x, UP) * self.c("f", u, UP) * self.cdag("c", x, DOWN) * self.c("f", u, DOWN)

    def half_filling_interaction(self):
        """Σ (n↑ - ½)(n↓ - ½) over every site."""
        return esum((self.n(k, i, UP) - 0.5) * (self.n(k, i, DOWN) - 0.5) for k, i in self.sites())


def _domain(basis: ElectronBasis, bosons: BosonSpace | None = None) -> dict:
    d = {"electron_projection": basis.projection, "electron_dim": basis.dim}
    if bosons is not None:
        d.update(boson_representation=bosons.representation, boson_dim=bosons.dim)
    return d


def _require(basis: ElectronBasis, *projections):
    if basis.projection not in projections:
        raise BasisMismatch(f"expected projection in {projections}, got {basis.projection}")


def _lift(E, bosons: BosonSpace | None) -> sp.csr_matrix:
    if bosons is None:
        return sp.csr_matrix(E)
    return sp.kron(E, bosons.identity(), format="csr")


# -- spin operators -------------------------------------------------------------------


def spin_expressions(order: ModeOrder) -> OperatorBundle:
    ops = _Ops(order)
    nl, no = order.n_lambda, order.n_omega
    s_plus = [ops.splus("c", x) for x in range(nl)]
    s_minus = [ops.sminus("c", x) for x in range(nl)]
    S_plus = [ops.splus("f", u) for u in range(no)]
    S_minus = [ops.sminus("f", u) for u in range(no)]
    Sp = esum(s_plus + S_plus)
    Sm = esum(s_minus + S_minus)
    S3 = esum(ops.s3(k, i) for k, i in ops.sites())
    S2 = 0.5 * (Sp * Sm + Sm * Sp) + S3 * S3
    return OperatorBundle(
        s_plus=s_plus, s_minus=s_minus, S_plus=S_plus, S_minus=S_minus,
        Splus_tot=Sp, Sminus_tot=Sm, S3_tot=S3, S2_tot=S2,
    )


def build_spin_operators(basis: ElectronBasis) -> OperatorBundle:
    """Spin and number operators on the electron sector.

    Ladder operators are returned as expressions (they leave the S³ = 0 sector);
    ``S3_tot``, ``S2_tot`` and the occupation numbers are sparse matrices.
    """
    order = basis.order
    ops = _Ops(order)
    bundle = spin_expressions(order)
    bundle["S3_tot"] = bundle["S3_tot"].matrix(basis)
    bundle["S2_tot"] = bundle["S2_tot"].matrix(basis)
    bundle["n_c"] = {(x, s): ops.n("c", x, s).matrix(basis) for x in range(order.n_lambda) for s in SPINS}
    bundle["n_f"] = {(u, s): ops.n("f", u, s).matrix(basis) for u in range(order.n_omega) for s in SPINS}
    return bundle


def spin_from_s2(s2: float) -> float:
    """Invert S(S+1) = s2."""
    return (-1.0 + np.sqrt(1.0 + 4.0 * max(s2, 0.0))) / 2.0


# -- physical Hamiltonian -------------------------------------------------------------


def electronic_hamiltonian(model: ValidatedModel, order: ModeOrder) -> FermionExpr:
    """Hopping, Kondo exchange and Coulomb terms."""
    spec = model.spec
    ops = _Ops(order)
    nl, no = spec.n_lambda, spec.n_omega
    terms = []
    for x in range(nl):
        for y in range(nl):
            if spec.t[x, y]:
                for s in SPINS:
                    terms.append(-spec.t[x, y] * ops.hop(("c", x), ("c", y), s))
    for x in range(nl):
        for u in range(no):
            J = spec.J[x, u]
            if J:
                terms.append(
                    J * (0.5 * (ops.splus("c", x) * ops.sminus("f", u) + ops.sminus("c", x) * ops.splus("f", u))
                         + ops.s3("c", x) * ops.s3("f", u))
                )
    for x in range(nl):
        for y in range(nl):
            if spec.U[x, y]:
                terms.append(spec.U[x, y] * ((ops.n("c", x) - 1) * (ops.n("c", y) - 1)))
    return esum(terms)


def electron_phonon_matrix(model: ValidatedModel, basis: ElectronBasis, bosons: BosonSpace) -> sp.csr_matrix:
    """Σ g_{x,y} n_x ⊗ (b_y† + b_y)."""
    ops = _Ops(basis.order)
    g = model.spec.g
    dim = basis.dim * bosons.dim
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for x in range(model.n_lambda):
        if not np.any(g[x]):
            continue
        nx = ops.n("c", x).matrix(basis)
        for y in range(model.n_lambda):
            if g[x, y]:
                out = out + g[x, y] * sp.kron(nx, bosons.embed(bosons.b + bosons.bdag, y), format="csr")
    return out


def build_hamiltonian(model: ValidatedModel, basis: ElectronBasis, bosons: BosonSpace) -> SparseHermitianOperator:
    """The full Hamiltonian on the singly-occupied-f sector times phonons."""
    _require(basis, "P0")
    H_el = electronic_hamiltonian(model, basis.order).matrix(basis)
    H = (
        _lift(H_el, bosons)
        + electron_phonon_matrix(model, basis, bosons)
        + model.spec.omega0 * sp.kron(sp.identity(basis.dim), bosons.total_Np(), format="csr")
    )
    return SparseHermitianOperator.from_matrix(H, domain=_domain(basis, bosons))


# -- transformed Hamiltonian ----------------------------------------------------------


def phase_factor(model: ValidatedModel, bosons: BosonSpace, x: int, y: int, sign: int) -> sp.csr_matrix:
    """exp(sign · iΦ_{x,y}) with Φ_{x,y} = (√2/ω₀) Σ_z (g_{xz} - g_{yz}) q_z."""
    g = model.spec.g
    theta = sign * np.sqrt(2.0) / model.spec.omega0 * (g[x] - g[y])
    if not np.any(theta):
        return bosons.identity()
    if bosons.representation == "grid":
        q = bosons.grid
        phase = np.zeros(bosons.dim)
        for z, th in enumerate(theta):
            if th:
                idx = np.unravel_index(np.arange(bosons.dim), (bosons.d,) * bosons.modes)[z]
                phase += th * q[idx]
        return sp.diags(np.exp(1j * phase), format="csr")
    factors = [expm(1j * th * bosons.q) if th else np.eye(bosons.d) for th in theta]
    M = bosons.kron_all(factors)
    M[np.abs(M) < 1e-300] = 0
    return sp.csr_matrix(M)


def pair_hopping(model: ValidatedModel, order: ModeOrder) -> FermionExpr:
    """½ Σ |J_{x,u}| (c†↑ f↑ c†↓ f↓ + h.c.)."""
    ops = _Ops(order)
    J = model.spec.J
    terms = []
    for x in range(model.n_lambda):
        for u in range(model.n_omega):
            if J[x, u]:
                V = ops.pair(x, u)
                terms.append(0.5 * abs(J[x, u]) * (V + V.adjoint()))
    return esum(terms)


def build_transformed(model: ValidatedModel, basis: ElectronBasis, bosons: BosonSpace) -> OperatorBundle:
    """Components of the Hamiltonian after hole-particle, Lang-Firsov and phase rotation.

    ``H = R - J_op - U_tilde + Np_term`` with the constant ``shift = -g²|Λ|/ω₀``
    kept on the operator as a scalar.
    """
    _require(basis, "Q0")
    spec = model.spec
    ops = _Ops(basis.order)
    nl, no = spec.n_lambda, spec.n_omega
    Ueff = effective_coulomb(model)
    dom = _domain(basis, bosons)

    def herm(M, shift=0.0):
        return SparseHermitianOperator.from_matrix(M, shift, dom)

    hop = sp.csr_matrix((basis.dim * bosons.dim,) * 2, dtype=complex)
    for x in range(nl):
        for y in range(nl):
            if not spec.t[x, y]:
                continue
            for spin, sign in ((UP, +1), (DOWN, -1)):
                E = ops.hop(("c", x), ("c", y), spin).matrix(basis)
                if E.nnz:
                    hop = hop + spec.t[x, y] * sp.kron(E, phase_factor(model, bosons, x, y, sign), format="csr")

    diag = esum(
        0.25 * spec.J[x, u] * ((ops.n("c", x) - 1) * (ops.n("f", u) - 1))
        for x in range(nl) for u in range(no) if spec.J[x, u]
    )
    same = esum(
        Ueff[x, y] * (ops.n("c", x, UP) * ops.n("c", y, UP) + ops.n("c", x, DOWN) * ops.n("c", y, DOWN))
        for x in range(nl) for y in range(nl) if Ueff[x, y]
    )
    opposite = esum(
        2.0 * Ueff[x, y] * (ops.n("c", x, UP) * ops.n("c", y, DOWN))
        for x in range(nl) for y in range(nl) if Ueff[x, y]
    )

    R = herm(-hop + _lift((diag + same).matrix(basis), bosons))
    J_op = herm(_lift(pair_hopping(model, basis.order).matrix(basis), bosons))
    U_tilde = herm(_lift(opposite.matrix(basis), bosons))
    Np_term = herm(spec.omega0 * sp.kron(sp.identity(basis.dim), bosons.total_Np(), format="csr"))
    gsum = model.common_g_column_sum
    shift = -gsum**2 * nl / spec.omega0
    H = (R - J_op - U_tilde + Np_term).with_shift(shift)
    return OperatorBundle(
        H=H, R=R, J_op=J_op, U_tilde=U_tilde, Np_term=Np_term, shift=shift,
        hopping=herm(hop),
    )


def ergodicity_operator(model: ValidatedModel, bundle: OperatorBundle) -> SparseHermitianOperator:
    """R - J_op - U_tilde + ω₀N_p - ½ J_min N: the transformed Hamiltonian with the
    constant replaced by the shift used for the strict-positivity statement."""
    return bundle.H.with_shift(-0.5 * model.j_min * model.n_sites)


def double_occupancy_bound(model: ValidatedModel, basis: ElectronBasis):
    """Electron matrices ``(A, B)`` with A = (8/J²)(J N + 𝕁)² and B = Σ n↑n↓ over all sites.

    ``J`` is the smallest nonzero |J_{x,u}| and N = |Λ| + |Ω|.
    """
    _require(basis, "Q0")
    ops = _Ops(basis.order)
    Jm = model.j_min
    X = Jm * model.n_sites * sp.identity(basis.dim, format="csr") + pair_hopping(model, basis.order).matrix(basis)
    A = (8.0 / Jm**2) * (X @ X)
    B = esum(ops.n(k, i, UP) * ops.n(k, i, DOWN) for k, i in ops.sites()).matrix(basis)
    return sp.csr_matrix(A), B


# -- auxiliary Hamiltonians -----------------------------------------------------------


def _exchange_pairs(model: ValidatedModel, kind: str):
    """(x, u, weight) for the spin-flip terms of K1 or K'."""
    spec = model.spec
    if kind == "K1":
        return [(x, u, abs(spec.J[x, u]) ** 2) for x in range(spec.n_lambda) for u in range(spec.n_omega) if spec.J[x, u]]
    gl, go = model.gamma_lambda, model.gamma_omega
    return [(x, u, 1.0) for x in range(spec.n_lambda) for u in range(spec.n_omega) if gl[x] == go[u]]


def auxiliary_expression(kind: str, model: ValidatedModel, order: ModeOrder) -> FermionExpr:
    spec = model.spec
    ops = _Ops(order)
    nl = spec.n_lambda
    inter = ops.half_filling_interaction()
    if kind in ("K1", "K_prime"):
        flips = esum(
            0.5 * abs(spec.t[x, y]) ** 2 * (ops.splus("c", x) * ops.sminus("c", y) + ops.sminus("c", x) * ops.splus("c", y))
            for x in range(nl) for y in range(nl) if spec.t[x, y]
        )
        ex = esum(
            w * (ops.splus("c", x) * ops.sminus("f", u) + ops.sminus("c", x) * ops.splus("f", u))
            for x, u, w in _exchange_pairs(model, "K1" if kind == "K1" else "K_prime")
        )
        return flips + ex + inter
    if kind in ("H_H", "H_H_prime"):
        sgn = -1.0 if kind == "H_H" else 1.0
        hop = esum(
            sgn * spec.t[x, y] * ops.hop(("c", x), ("c", y), s)
            for x in range(nl) for y in range(nl) if spec.t[x, y] for s in SPINS
        )
        if kind == "H_H":
            pairs = [(x, u, -spec.J[x, u]) for x in range(nl) for u in range(spec.n_omega) if spec.J[x, u]]
        else:
            pairs = _exchange_pairs(model, "K_prime")
        hyb = esum(
            w * (ops.hop(("c", x), ("f", u), s) + ops.hop(("f", u), ("c", x), s))
            for x, u, w in pairs for s in SPINS
        )
        return hop + hyb + inter
    raise ValueError(f"unknown auxiliary kind {kind!r}")


AUXILIARY_KINDS = ("K1", "H_H", "K_prime", "H_H_prime", "L2", "L2_prime")


def build_auxiliary(kind: str, model: ValidatedModel, basis: ElectronBasis, bosons: BosonSpace | None = None) -> SparseHermitianOperator:
    """Auxiliary Hamiltonians used by the total-spin argument.

    K1/K_prime: spin-flip models; H_H/H_H_prime: Hubbard models on Λ ⊔ Ω;
    L2/L2_prime: K1 (resp. K') on the singly-occupied-f sector plus ω₀N_p.
    """
    if kind not in AUXILIARY_KINDS:
        raise ValueError(f"unknown auxiliary kind {kind!r}")
    if kind in ("L2", "L2_prime"):
        _require(basis, "P0")
        if bosons is None:
            raise BasisMismatch(f"{kind} needs a boson space")
        K = auxiliary_expression("K1" if kind == "L2" else "K_prime", model, basis.order).matrix(basis)
        M = _lift(K, bosons) + model.spec.omega0 * sp.kron(sp.identity(basis.dim), bosons.total_Np(), format="csr")
        return SparseHermitianOperator.from_matrix(M, domain=_domain(basis, bosons))
    if kind in ("H_H", "H_H_prime"):
        _require(basis, "none")
    else:
        _require(basis, "none", "P0")
    M = auxiliary_expression(kind, model, basis.order).matrix(basis)
    return SparseHermitianOperator.from_matrix(M, domain=_domain(basis))
