"""Lattice and coupling specification, validation and derived quantities."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from .errors import (
    ConditionViolation,
    DimensionMismatch,
    MixedCouplingSigns,
    NotSymmetric,
    UnsupportedSize,
)

ANTIFERROMAGNETIC = "antiferromagnetic"
FERROMAGNETIC = "ferromagnetic"
MIXED = "mixed"

_ZERO = 0.0


@dataclass(frozen=True)
class ModelSpec:
    """Full input of the Hamiltonian.

    Matrices are indexed in the order of ``lambda_sites`` (conduction sites)
    and ``omega_sites`` (localized sites). Partitions map a site id to 1 or 2.
    """

    lambda_sites: tuple
    lambda_partition: Mapping[Any, int]
    omega_sites: tuple
    omega_partition: Mapping[Any, int]
    t: np.ndarray
    J: np.ndarray
    U: np.ndarray
    g: np.ndarray
    omega0: float

    def __post_init__(self):
        object.__setattr__(self, "lambda_sites", tuple(self.lambda_sites))
        object.__setattr__(self, "omega_sites", tuple(self.omega_sites))
        object.__setattr__(self, "lambda_partition", dict(self.lambda_partition))
        object.__setattr__(self, "omega_partition", dict(self.omega_partition))
        for name in ("t", "J", "U", "g"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "omega0", float(self.omega0))

    @property
    def n_lambda(self) -> int:
        return len(self.lambda_sites)

    @property
    def n_omega(self) -> int:
        return len(self.omega_sites)

    @property
    def n_sites(self) -> int:
        return self.n_lambda + self.n_omega

    def sublattice_counts(self) -> dict:
        """Return ``{"L1", "L2", "O1", "O2"}`` cardinalities."""
        lp = [self.lambda_partition[s] for s in self.lambda_sites]
        op = [self.omega_partition[s] for s in self.omega_sites]
        return {
            "L1": lp.count(1),
            "L2": lp.count(2),
            "O1": op.count(1),
            "O2": op.count(2),
        }

    # -- serialization -------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "lambda": [{"id": s, "sublattice": self.lambda_partition[s]} for s in self.lambda_sites],
            "omega": [{"id": s, "sublattice": self.omega_partition[s]} for s in self.omega_sites],
            "t": self.t.tolist(),
            "J": self.J.tolist(),
            "U": self.U.tolist(),
            "g": self.g.tolist(),
            "omega0": self.omega0,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelSpec":
        lam = list(data["lambda"])
        om = list(data["omega"])
        n_l, n_o = len(lam), len(om)

        def mat(key, shape):
            arr = np.asarray(data[key], dtype=float)
            if n_l == 0 or (shape[1] == 0):
                arr = arr.reshape(shape)
            if arr.shape != shape:
                raise DimensionMismatch(f"{key} has shape {arr.shape}, expected {shape}")
            return arr

        return cls(
            lambda_sites=[d["id"] for d in lam],
            lambda_partition={d["id"]: int(d["sublattice"]) for d in lam},
            omega_sites=[d["id"] for d in om],
            omega_partition={d["id"]: int(d["sublattice"]) for d in om},
            t=mat("t", (n_l, n_l)),
            J=mat("J", (n_l, n_o)),
            U=mat("U", (n_l, n_l)),
            g=mat("g", (n_l, n_l)),
            omega0=float(data["omega0"]),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ValidatedModel:
    """A spec that passed validation, with the sign data derived from it."""

    spec: ModelSpec
    coupling_class: str
    gamma_lambda: np.ndarray
    gamma_omega: np.ndarray
    sgnJ: np.ndarray
    common_g_column_sum: float
    meta: dict = field(default_factory=dict)

    @property
    def n_lambda(self) -> int:
        return self.spec.n_lambda

    @property
    def n_omega(self) -> int:
        return self.spec.n_omega

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    @property
    def j_min(self) -> float:
        """Smallest nonzero |J_{x,u}|."""
        nz = np.abs(self.spec.J[self.spec.J != 0])
        return float(nz.min())

    def gamma(self, kind: str, index: int) -> int:
        arr = self.gamma_lambda if kind == "c" else self.gamma_omega
        return int(arr[index])

    def sign_witness(self, u: int) -> int:
        """Index of the first conduction site x with J_{x,u} != 0."""
        return int(np.flatnonzero(self.spec.J[:, u])[0])


def _check_shapes(spec: ModelSpec) -> None:
    nl, no = spec.n_lambda, spec.n_omega
    expected = {"t": (nl, nl), "U": (nl, nl), "g": (nl, nl), "J": (nl, no)}
    for name, shape in expected.items():
        if getattr(spec, name).shape != shape:
            raise DimensionMismatch(f"{name} has shape {getattr(spec, name).shape}, expected {shape}")
    for sites, part, label in (
        (spec.lambda_sites, spec.lambda_partition, "lambda"),
        (spec.omega_sites, spec.omega_partition, "omega"),
    ):
        if len(set(sites)) != len(sites):
            raise DimensionMismatch(f"duplicate {label} site ids")
        if set(part) != set(sites):
            raise DimensionMismatch(f"{label} partition keys do not match site list")
        bad = [s for s in sites if part[s] not in (1, 2)]
        if bad:
            raise DimensionMismatch(f"{label} sublattice labels must be 1 or 2, got {bad}")


def _connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    if n == 0:
        return True
    seen = {0}
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in np.flatnonzero(adj[x]):
            if int(y) not in seen:
                seen.add(int(y))
                queue.append(int(y))
    return len(seen) == n


def validate(spec: ModelSpec) -> ValidatedModel:
    """Check the lattice conditions and return the validated model.

    Raises ``ConditionViolation`` listing every failed condition by label.
    """
    _check_shapes(spec)
    for name in ("t", "U", "g"):
        m = getattr(spec, name)
        if not np.array_equal(m, m.T):
            raise NotSymmetric(f"{name} must be symmetric")
    if not spec.omega0 > 0:
        raise ValueError("omega0 must be strictly positive")

    lam_part = np.array([spec.lambda_partition[s] for s in spec.lambda_sites], dtype=int)
    om_part = np.array([spec.omega_partition[s] for s in spec.omega_sites], dtype=int)
    t, J, g = spec.t, spec.J, spec.g
    violations = []

    # C.1 connectivity of the hopping graph and bipartiteness w.r.t. the declared split
    if not _connected(t != 0):
        violations.append(("C.1", "hopping graph is not connected"))
    same = lam_part[:, None] == lam_part[None, :]
    if np.any((t != 0) & same):
        x, y = np.argwhere((t != 0) & same)[0]
        violations.append(
            ("C.1", f"t[{spec.lambda_sites[x]},{spec.lambda_sites[y]}] nonzero within one sublattice")
        )

    # C.2 every localized site is coupled, with a site-independent sign
    for u, uid in enumerate(spec.omega_sites):
        col = J[:, u]
        nz = col[col != 0]
        if nz.size == 0:
            violations.append(("C.2", f"omega site {uid} has no nonzero J"))
        elif not (np.all(nz > 0) or np.all(nz < 0)):
            violations.append(("C.2", f"sign of J[:, {uid}] depends on x"))

    # C.3 no coupling between (L1, O1) or (L2, O2)
    forbidden = lam_part[:, None] == om_part[None, :]
    if np.any((J != 0) & forbidden):
        x, u = np.argwhere((J != 0) & forbidden)[0]
        violations.append(
            ("C.3", f"J[{spec.lambda_sites[x]},{spec.omega_sites[u]}] nonzero between same-index sublattices")
        )

    # C.4 even cardinalities
    if spec.n_lambda % 2:
        violations.append(("C.4", "|Λ| must be even"))
    if spec.n_omega % 2:
        violations.append(("C.4", "|Ω| must be even"))

    # C.5 equal column sums of g
    col_sums = g.sum(axis=0)
    if col_sums.size and not np.allclose(col_sums, col_sums[0], rtol=1e-12, atol=1e-12):
        violations.append(("C.5", f"column sums of g differ: {col_sums.tolist()}"))

    if violations:
        raise ConditionViolation(violations)

    if np.all(J >= 0):
        cls = ANTIFERROMAGNETIC
    elif np.all(J <= 0):
        cls = FERROMAGNETIC
    else:
        cls = MIXED

    sgn = np.array([np.sign(J[np.flatnonzero(J[:, u])[0], u]) for u in range(spec.n_omega)], dtype=int)
    return ValidatedModel(
        spec=spec,
        coupling_class=cls,
        gamma_lambda=np.where(lam_part == 1, -1, 1),
        gamma_omega=np.where(om_part == 1, -1, 1),
        sgnJ=sgn,
        common_g_column_sum=float(col_sums[0]) if col_sums.size else 0.0,
    )


def effective_coulomb(model: ValidatedModel) -> np.ndarray:
    """U - g g^T / omega0."""
    spec = model.spec
    return spec.U - spec.g @ spec.g.T / spec.omega0


def psd_tolerance(M: np.ndarray) -> float:
    return 1e-10 * (1.0 + float(np.max(np.abs(M), initial=0.0)))


def is_positive_semidefinite(M: np.ndarray, tol: float | None = None) -> bool:
    M = np.asarray(M, dtype=float)
    if tol is None:
        tol = psd_tolerance(M)
    if M.shape[0] != M.shape[1] or np.max(np.abs(M - M.T), initial=0.0) > tol:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    if M.size == 0:
        return True
    return bool(np.linalg.eigvalsh(M)[0] >= -tol)


def predicted_total_spin(model: ValidatedModel) -> Fraction:
    """Sublattice-counting prediction of the ground-state total spin."""
    c = model.spec.sublattice_counts()
    if model.coupling_class == ANTIFERROMAGNETIC:
        return Fraction(abs(c["L1"] + c["O1"] - c["L2"] - c["O2"]), 2)
    if model.coupling_class == FERROMAGNETIC:
        return Fraction(abs(c["L1"] + c["O2"] - c["L2"] - c["O1"]), 2)
    raise MixedCouplingSigns("total spin prediction needs J of a single sign")


# -- example lattices ----------------------------------------------------------------

_DEFAULT_PARAMS = {"t": 1.0, "J": 1.0, "U": 1.0, "g": 0.0, "omega0": 1.0}


def _params(params: Mapping | None) -> dict:
    p = dict(_DEFAULT_PARAMS)
    if params:
        unknown = set(params) - set(p)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}")
        p.update(params)
    return p


def _onsite_spec(lam, lam_part, om, om_part, bonds, couplings, p) -> ModelSpec:
    nl, no = len(lam), len(om)
    t = np.zeros((nl, nl))
    for x, y in bonds:
        t[x, y] = t[y, x] = p["t"]
    J = np.zeros((nl, no))
    for x, u in couplings:
        J[x, u] = p["J"]
    return ModelSpec(
        lambda_sites=lam,
        lambda_partition=dict(zip(lam, lam_part)),
        omega_sites=om,
        omega_partition=dict(zip(om, om_part)),
        t=t,
        J=J,
        U=p["U"] * np.eye(nl),
        g=p["g"] * np.eye(nl),
        omega0=p["omega0"],
    )


def _example1(size, p):
    if size < 2 or size % 2:
        raise UnsupportedSize("example1 needs an even number of sites >= 2")
    lam = [f"c{i}" for i in range(size)]
    om = [f"f{i}" for i in range(size)]
    lam_part = [1 if i % 2 == 0 else 2 for i in range(size)]
    om_part = [3 - s for s in lam_part]
    bonds = [(i, i + 1) for i in range(size - 1)]
    if size > 2:
        bonds.append((size - 1, 0))
    return _onsite_spec(lam, lam_part, om, om_part, bonds, [(i, i) for i in range(size)], p)


def _example2(size, p):
    # size x size periodic square cells; L1 at corners, L2 at edge midpoints,
    # localized spins on plaquette centers in a checkerboard (O1 over L2, O2 over L1)
    if size < 2 or size % 2:
        raise UnsupportedSize("example2 needs an even number of cells per direction")
    L = size
    lam, lam_part, index = [], [], {}

    def add(key, part):
        index[key] = len(lam)
        lam.append(f"{key[0]}{key[1]},{key[2]}")
        lam_part.append(part)

    for i in range(L):
        for j in range(L):
            add(("a", i, j), 1)
    for i in range(L):
        for j in range(L):
            add(("h", i, j), 2)
            add(("v", i, j), 2)
    bonds = []
    for i in range(L):
        for j in range(L):
            a = index[("a", i, j)]
            bonds += [
                (a, index[("h", i, j)]),
                (a, index[("h", (i - 1) % L, j)]),
                (a, index[("v", i, j)]),
                (a, index[("v", i, (j - 1) % L)]),
            ]
    om, om_part, couplings = [], [], []
    for i in range(L):
        for j in range(L):
            u = len(om)
            if (i + j) % 2 == 0:
                om.append(f"p{i},{j}")
                om_part.append(1)
                for key in (("h", i, j), ("h", i, (j + 1) % L), ("v", i, j), ("v", (i + 1) % L, j)):
                    couplings.append((index[key], u))
            else:
                om.append(f"p{i},{j}")
                om_part.append(2)
                for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1)):
                    couplings.append((index[("a", (i + di) % L, (j + dj) % L)], u))
    bonds = sorted({tuple(sorted(b)) for b in bonds})
    return _onsite_spec(lam, lam_part, om, om_part, bonds, couplings, p)


def _example3(size, p):
    # periodic chain of cells (L1, L2, L1, L2); O1 above each L2 site,
    # O2 below every other L2 site coupled to its two L1 neighbours
    if size < 2 or size % 2:
        raise UnsupportedSize("example3 needs an even number of cells")
    n = 4 * size
    lam = [f"c{i}" for i in range(n)]
    lam_part = [1 if i % 2 == 0 else 2 for i in range(n)]
    bonds = [(i, (i + 1) % n) for i in range(n)]
    om, om_part, couplings = [], [], []
    for i in range(1, n, 2):
        couplings.append((i, len(om)))
        om.append(f"a{i}")
        om_part.append(1)
    for i in range(1, n, 4):
        u = len(om)
        couplings += [(i - 1, u), ((i + 1) % n, u)]
        om.append(f"b{i}")
        om_part.append(2)
    return _onsite_spec(lam, lam_part, om, om_part, bonds, couplings, p)


def _star(size, p):
    if size != 4:
        raise UnsupportedSize("star lattice has exactly four conduction sites")
    lam = ["c", "l1", "l2", "l3"]
    om = ["a", "b"]
    bonds = [(0, 1), (0, 2), (0, 3)]
    couplings = [(0, 0), (1, 1), (2, 1), (3, 1)]
    return _onsite_spec(lam, [1, 2, 2, 2], om, [2, 1], bonds, couplings, p)


_GENERATORS = {"example1": _example1, "example2": _example2, "example3": _example3, "star": _star}


def example_model(kind: str, size: int, params: Mapping | None = None) -> ModelSpec:
    """Generate one of the reference lattices.

    ``size`` is the number of conduction sites for ``example1`` and ``star``,
    cells per direction for ``example2`` and cells along the chain for ``example3``.
    """
    try:
        gen = _GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown example kind {kind!r}") from None
    return gen(int(size), _params(params))
