"""Electron basis states with fermionic signs, and truncated phonon spaces.

Fermionic modes are ordered with every spin-up mode (conduction sites, then
localized sites) before every spin-down mode.  A basis state is

    c†_{m1} c†_{m2} ... c†_{mk} |0>,   m1 < m2 < ... < mk,

so the up factor and the down factor separate without a sign and a state
vector reshapes directly into a matrix indexed by (up config, down config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from itertools import combinations
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .errors import BasisMismatch, InvalidTruncation, SectorEmpty, UnsupportedSize
from .model import ValidatedModel

MAX_MODES = 64
UP, DOWN = 0, 1
PROJECTIONS = ("none", "P0", "Q0")


@dataclass(frozen=True)
class ModeOrder:
    """Linear order of the (site, spin) modes.

    Sites are ``("c", i)`` for the i-th conduction site and ``("f", u)`` for
    the u-th localized site; spins are ``UP`` / ``DOWN``.
    """

    n_lambda: int
    n_omega: int

    @property
    def n_sites(self) -> int:
        return self.n_lambda + self.n_omega

    @property
    def n_modes(self) -> int:
        return 2 * self.n_sites

    def site_bit(self, site) -> int:
        kind, i = site
        if kind == "c":
            if not 0 <= i < self.n_lambda:
                raise IndexError(f"conduction site {i} out of range")
            return i
        if kind == "f":
            if not 0 <= i < self.n_omega:
                raise IndexError(f"localized site {i} out of range")
            return self.n_lambda + i
        raise ValueError(f"unknown site kind {kind!r}")

    def mode(self, site, spin: int) -> int:
        return self.site_bit(site) + (self.n_sites if spin == DOWN else 0)

    def modes(self) -> list:
        sites = [("c", i) for i in range(self.n_lambda)] + [("f", u) for u in range(self.n_omega)]
        return [(s, UP) for s in sites] + [(s, DOWN) for s in sites]


@dataclass(frozen=True, order=True)
class ElectronConfig:
    up_mask: int
    down_mask: int

    def combined(self, n_sites: int) -> int:
        return self.up_mask | (self.down_mask << n_sites)

    @classmethod
    def from_combined(cls, mask: int, n_sites: int) -> "ElectronConfig":
        return cls(mask & ((1 << n_sites) - 1), mask >> n_sites)


def parity_before(mask: int, mode: int) -> int:
    """(-1)^(number of occupied modes below ``mode``)."""
    return -1 if (mask & ((1 << mode) - 1)).bit_count() & 1 else 1


def apply_mode(kind: str, mode: int, mask: int):
    """Act with a creation/annihilation operator on a combined occupation mask.

    Returns ``(new_mask, sign)`` or ``None`` when the result vanishes.
    """
    bit = 1 << mode
    if kind == "create":
        if mask & bit:
            return None
        return mask | bit, parity_before(mask, mode)
    if kind == "annihilate":
        if not mask & bit:
            return None
        return mask & ~bit, parity_before(mask, mode)
    raise ValueError(f"unknown operator kind {kind!r}")


def apply_fermion(kind: str, site, spin: int, config: ElectronConfig, order: ModeOrder):
    """Apply c†/c on one mode of ``config``; ``None`` if Pauli-blocked or empty."""
    n = order.n_sites
    out = apply_mode(kind, order.mode(site, spin), config.combined(n))
    if out is None:
        return None
    mask, sign = out
    return ElectronConfig.from_combined(mask, n), sign


def _masks_with_popcount(n: int, k: int) -> list:
    return sorted(sum(1 << i for i in c) for c in combinations(range(n), k))


@dataclass(frozen=True)
class ElectronBasis:
    order: ModeOrder
    configs: tuple
    projection: str

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.configs)})
        n = self.order.n_sites
        object.__setattr__(
            self, "_combined_index", {c.combined(n): i for i, c in enumerate(self.configs)}
        )

    @property
    def dim(self) -> int:
        return len(self.configs)

    @property
    def index(self) -> dict:
        return self._index

    def index_of_mask(self, combined_mask: int):
        return self._combined_index.get(combined_mask)

    def combined_masks(self) -> Iterator[int]:
        n = self.order.n_sites
        return (c.combined(n) for c in self.configs)

    def to_json(self) -> str:
        """Debug dump: list of ``[up_mask, down_mask]`` hex strings."""
        return json.dumps([[hex(c.up_mask), hex(c.down_mask)] for c in self.configs])


def _f_pattern_ok(up: int, down: int, f_bits: int, projection: str) -> bool:
    if projection == "none":
        return True
    fu, fd = up & f_bits, down & f_bits
    if projection == "P0":
        return fu ^ fd == f_bits and fu & fd == 0
    return fu == fd


def enumerate_basis(model: ValidatedModel, projection: str = "none") -> ElectronBasis:
    """Half-filled, S^3 = 0 configurations, optionally projected on the f-sites."""
    if projection not in PROJECTIONS:
        raise ValueError(f"projection must be one of {PROJECTIONS}")
    order = ModeOrder(model.n_lambda, model.n_omega)
    n = order.n_sites
    if order.n_modes > MAX_MODES:
        raise UnsupportedSize(f"{order.n_modes} fermionic modes exceed the limit of {MAX_MODES}")
    f_bits = ((1 << model.n_omega) - 1) << model.n_lambda
    masks = _masks_with_popcount(n, n // 2)
    configs = tuple(
        ElectronConfig(up, down)
        for up in masks
        for down in masks
        if _f_pattern_ok(up, down, f_bits, projection)
    )
    if not configs:
        raise SectorEmpty(f"no configurations for projection {projection}")
    return ElectronBasis(order, configs, projection)


def full_fock_basis(order: ModeOrder) -> ElectronBasis:
    """Every occupation pattern of every mode; used for small algebra checks."""
    n = order.n_sites
    if order.n_modes > 16:
        raise UnsupportedSize("full Fock space is only built for at most 16 modes")
    configs = tuple(ElectronConfig.from_combined(m, n) for m in range(1 << order.n_modes))
    return ElectronBasis(order, tuple(sorted(configs)), "fock")


def operator_matrix(basis: ElectronBasis, terms, target: ElectronBasis | None = None) -> sp.csr_matrix:
    """Sparse matrix of ``sum coef * op_1 op_2 ... op_k``.

    ``terms`` is an iterable of ``(coef, [(kind, mode), ...])``; the rightmost
    operator acts first.  Images outside ``target`` (default: ``basis``) are dropped,
    so the result is the compression onto ``target``.
    """
    target = basis if target is None else target
    if target.order != basis.order:
        raise BasisMismatch("bases use different mode orders")
    terms = [(coef, list(ops)) for coef, ops in terms if coef != 0]
    rows, cols, vals = [], [], []
    for j, mask in enumerate(basis.combined_masks()):
        for coef, ops in terms:
            m, sign = mask, 1
            for kind, mode in reversed(ops):
                out = apply_mode(kind, mode, m)
                if out is None:
                    break
                m, s = out
                sign *= s
            else:
                i = target.index_of_mask(m)
                if i is not None:
                    rows.append(i)
                    cols.append(j)
                    vals.append(coef * sign)
    return sp.csr_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(target.dim, basis.dim)
    )


class FermionExpr:
    """Polynomial in creation/annihilation operators.

    Each term is ``(coef, ((kind, mode), ...))`` read left to right as an
    operator product.  Products are kept unexpanded, so matrices of products are
    exact even when intermediate states leave the basis.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        self.terms = tuple((complex(c), tuple(ops)) for c, ops in terms if c != 0)

    @classmethod
    def identity(cls, coef=1.0) -> "FermionExpr":
        return cls([(coef, ())])

    @classmethod
    def create(cls, mode: int) -> "FermionExpr":
        return cls([(1.0, (("create", mode),))])

    @classmethod
    def annihilate(cls, mode: int) -> "FermionExpr":
        return cls([(1.0, (("annihilate", mode),))])

    @classmethod
    def number(cls, mode: int) -> "FermionExpr":
        return cls([(1.0, (("create", mode), ("annihilate", mode)))])

    def __add__(self, other):
        if not isinstance(other, FermionExpr):
            other = FermionExpr.identity(other)
        return FermionExpr(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return FermionExpr((-c, ops) for c, ops in self.terms)

    def __sub__(self, other):
        return self + (-other if isinstance(other, FermionExpr) else FermionExpr.identity(-other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FermionExpr):
            return FermionExpr(
                (c1 * c2, o1 + o2) for c1, o1 in self.terms for c2, o2 in other.terms
            )
        return FermionExpr((c * other, ops) for c, ops in self.terms)

    def __rmul__(self, other):
        return FermionExpr((other * c, ops) for c, ops in self.terms)

    def adjoint(self) -> "FermionExpr":
        flip = {"create": "annihilate", "annihilate": "create"}
        return FermionExpr(
            (np.conj(c), tuple((flip[k], m) for k, m in reversed(ops))) for c, ops in self.terms
        )

    def matrix(self, basis: ElectronBasis, target: ElectronBasis | None = None) -> sp.csr_matrix:
        return operator_matrix(basis, self.terms, target)


def esum(exprs) -> FermionExpr:
    """Sum of an iterable of expressions (empty sum is the zero operator)."""
    return FermionExpr(t for e in exprs for t in e.terms)


# -- phonons -------------------------------------------------------------------------


@dataclass(frozen=True)
class BosonSpace:
    """Per-mode oscillator matrices and their multi-mode Kronecker embedding.

    Mode order follows the conduction-site list; the first mode is the slowest
    index of the tensor product.
    """

    representation: str
    modes: int
    d: int
    b: np.ndarray
    bdag: np.ndarray
    Np: np.ndarray
    q: np.ndarray
    p: np.ndarray
    grid: np.ndarray | None = None
    n_max: int | None = None
    extent: float | None = None

    @property
    def dim(self) -> int:
        return self.d**self.modes

    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, dtype=complex, format="csr")

    def embed(self, op, mode: int) -> sp.csr_matrix:
        """``I ⊗ ... ⊗ op ⊗ ... ⊗ I`` with ``op`` in slot ``mode``."""
        if not 0 <= mode < self.modes:
            raise IndexError(mode)
        left = sp.identity(self.d**mode, format="csr")
        right = sp.identity(self.d ** (self.modes - mode - 1), format="csr")
        return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr").astype(complex)

    def kron_all(self, ops) -> np.ndarray:
        """Dense Kronecker product of one d×d matrix per mode."""
        return reduce(np.kron, ops, np.ones((1, 1), dtype=complex))

    def total_Np(self) -> sp.csr_matrix:
        return sum((self.embed(self.Np, y) for y in range(self.modes)), sp.csr_matrix((self.dim, self.dim), dtype=complex))

    def occupation_numbers(self) -> np.ndarray:
        """Per-mode occupation of each number-basis product state, shape (dim, modes)."""
        if self.representation != "number":
            raise BasisMismatch("occupation numbers need the number representation")
        return np.array(np.unravel_index(np.arange(self.dim), (self.d,) * self.modes)).T


def _number_mode(n_max: int):
    d = n_max + 1
    b = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)
    bdag = b.conj().T
    q = (b + bdag) / np.sqrt(2)
    p = 1j * (bdag - b) / np.sqrt(2)
    Np = np.diag(np.arange(d, dtype=float)).astype(complex)
    return b, bdag, Np, q, p


def _grid_mode(n_points: int, extent: float):
    x = np.linspace(-extent / 2, extent / 2, n_points)
    h = x[1] - x[0]
    lap = (np.diag(np.full(n_points - 1, 1.0), 1) + np.diag(np.full(n_points - 1, 1.0), -1) - 2 * np.eye(n_points)) / h**2
    d1 = (np.diag(np.full(n_points - 1, 1.0), 1) - np.diag(np.full(n_points - 1, 1.0), -1)) / (2 * h)
    q = np.diag(x).astype(complex)
    p = (-1j * d1).astype(complex)
    Np = (0.5 * (-lap + np.diag(x**2) - np.eye(n_points))).astype(complex)
    b = (q + 1j * p) / np.sqrt(2)
    bdag = b.conj().T
    return b, bdag, Np, q, p, x


def build_boson_space(model: ValidatedModel, representation: str = "number", **params) -> BosonSpace:
    """Truncated phonon space, one mode per conduction site.

    number: ``n_max`` (default 6) quanta per mode.
    grid: ``n_points`` (default 48) equally spaced points covering ``[-extent/2, extent/2]``
    (default extent 7) with Dirichlet boundaries.
    """
    modes = model.n_lambda
    if representation == "number":
        n_max = int(params.get("n_max", 6))
        if n_max < 0:
            raise InvalidTruncation("n_max must be non-negative")
        b, bdag, Np, q, p = _number_mode(n_max)
        return BosonSpace("number", modes, n_max + 1, b, bdag, Np, q, p, n_max=n_max)
    if representation == "grid":
        n_points = int(params.get("n_points", 48))
        extent = float(params.get("extent", 7.0))
        if n_points < 3:
            raise InvalidTruncation("grid needs at least 3 points")
        if not extent > 0:
            raise InvalidTruncation("grid extent must be positive")
        b, bdag, Np, q, p, x = _grid_mode(n_points, extent)
        return BosonSpace("grid", modes, n_points, b, bdag, Np, q, p, grid=x, extent=extent)
    raise InvalidTruncation(f"unknown boson representation {representation!r}")
