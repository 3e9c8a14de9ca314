"""Numerical checks of the ground-state claims, collected into a report.

Every check returns a ``CheckRecord`` whose status is one of ``pass``,
``fail``, ``undecided`` or ``skipped``; ``run_all`` never aborts because a
single check fails.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .cones import (
    Cone,
    HSIdentification,
    check_ergodicity,
    check_operator_inequality,
    check_positivity_preserving,
    heat_actions,
    phase_normalize,
    sample_pairs,
)
from .errors import DegenerateGroundState, KondoPhononError, MixedCouplingSigns
from .fock import build_boson_space, enumerate_basis
from .hamiltonians import (
    build_auxiliary,
    build_hamiltonian,
    build_spin_operators,
    build_transformed,
    double_occupancy_bound,
    ergodicity_operator,
    spin_expressions,
)
from .model import (
    FERROMAGNETIC,
    MIXED,
    ModelSpec,
    ValidatedModel,
    effective_coulomb,
    is_positive_semidefinite,
    predicted_total_spin,
    validate,
)
from .spectra import electron_expectation, ground_state_degeneracy, lowest_eigenpairs
from .transforms import hole_particle

SCHEMA_VERSION = 1
STATUSES = ("pass", "fail", "undecided", "skipped")
TOL_STRICT = 1e-10
SPIN_TOL = 1e-6
OVERLAP_TOL = 1e-8


@dataclass
class VerifyConfig:
    n_max: int = 6
    grid_points: int = 32
    grid_extent: float = 7.0
    k: int = 2
    tol: float = 1e-9
    seed: int = 0
    n_samples: int = 1000
    cone_suite: bool = True
    hooks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("hooks")
        return d


@dataclass
class CheckRecord:
    name: str
    claim: str
    status: str
    statistics: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    note: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"invalid status {self.status!r}")


@dataclass
class VerificationReport:
    model_digest: str
    checks: list
    truncation: dict
    seed: int

    @property
    def failed(self) -> bool:
        return any(c.status == "fail" for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model_digest": self.model_digest,
            "seed": self.seed,
            "truncation": self.truncation,
            "checks": [asdict(c) for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "name", "status", "claim", "statistics", "note"])
        for c in self.checks:
            w.writerow([SCHEMA_VERSION, c.name, c.status, c.claim,
                        json.dumps(_jsonable(c.statistics), sort_keys=True), c.note])
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def model_digest(spec: ModelSpec) -> str:
    text = json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def ueff_psd(model: ValidatedModel) -> bool:
    return is_positive_semidefinite(effective_coulomb(model))


def _strict_status(value: float, tol: float) -> str:
    if value > tol:
        return "pass"
    if value < -tol:
        return "fail"
    return "undecided"


class Context:
    """Lazily built bases, operators and ground states shared between checks."""

    def __init__(self, model: ValidatedModel, config: VerifyConfig):
        self.model = model
        self.config = config
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def basis(self, projection):
        return self._get(("basis", projection), lambda: enumerate_basis(self.model, projection))

    def bosons(self, n_max):
        return self._get(("bosons", n_max), lambda: build_boson_space(self.model, "number", n_max=n_max))

    def s2(self):
        return self._get("s2", lambda: build_spin_operators(self.basis("P0"))["S2_tot"])

    def spectrum(self, n_max=None):
        n_max = self.config.n_max if n_max is None else n_max

        def build():
            H = build_hamiltonian(self.model, self.basis("P0"), self.bosons(n_max))
            return lowest_eigenpairs(H, k=max(2, self.config.k), tol=self.config.tol, seed=self.config.seed)

        return self._get(("spectrum", n_max), build)

    def measured_s2(self, psi_p0):
        return electron_expectation(psi_p0, self.s2(), self.basis("P0").dim).real

    def s2_variance(self, psi_p0):
        """<S⁴> - <S²>²; zero exactly when the state is a total-spin eigenvector."""
        d = self.basis("P0").dim
        Psi = psi_p0.reshape(d, -1)
        SPsi = self.s2() @ Psi
        mean = np.vdot(Psi, SPsi).real
        return float(np.vdot(SPsi, SPsi).real - mean**2)


# -- individual checks -----------------------------------------------------------------


def check_uniqueness(model: ValidatedModel, config: VerifyConfig, ctx: Context | None = None) -> CheckRecord:
    ctx = ctx or Context(model, config)
    claim = "ground state of H is unique when U_eff is positive semidefinite"
    if not ueff_psd(model):
        return CheckRecord("uniqueness", claim, "skipped", note="U_eff is not positive semidefinite")
    stats, statuses = {}, []
    for n_max in (config.n_max, config.n_max + 2):
        v = ground_state_degeneracy(ctx.spectrum(n_max))
        stats[f"n_max={n_max}"] = {"status": v.status, "gap": v.gap, "E0": ctx.spectrum(n_max).E0}
        statuses.append(v.status)
    status = "pass" if all(s == "unique" for s in statuses) else "fail" if "degenerate" in statuses else "undecided"
    return CheckRecord("uniqueness", claim, status, stats,
                       {"gap_threshold": "1e-7*(1+|E0|)", "tol_resolution": "1e-10*(1+|E0|)"})


def check_total_spin(model: ValidatedModel, config: VerifyConfig, ctx: Context | None = None) -> CheckRecord:
    """Compare <S²> of the ground state with the sublattice-count prediction."""
    ctx = ctx or Context(model, config)
    claim = "ground-state total spin equals the sublattice-count formula"
    S = predicted_total_spin(model)  # raises MixedCouplingSigns
    if not ueff_psd(model):
        return CheckRecord("total_spin", claim, "skipped", note="U_eff is not positive semidefinite")
    res = ctx.spectrum()
    verdict = ground_state_degeneracy(res)
    s2 = ctx.measured_s2(res.ground_state)
    target = float(S * (S + 1))
    stats = {"predicted_S": float(S), "measured_S2": s2, "target_S2": target, "gap": verdict.gap}
    if verdict.status != "unique":
        return CheckRecord("total_spin", claim, "undecided", stats, {"S2": SPIN_TOL}, note="ground state not resolved as unique")
    status = "pass" if abs(s2 - target) < SPIN_TOL else "fail"
    return CheckRecord("total_spin", claim, status, stats, {"S2": SPIN_TOL})


def correlation_values(model: ValidatedModel, psi: np.ndarray, basis) -> dict:
    """Sign-corrected transverse spin correlators of a state on the P0 sector.

    Keys ``("c", x, y)`` hold γ_xγ_y<s⁺_x s⁻_y>; keys ``("f", u, v)`` hold
    γ_uγ_v sgnJ_{x_u,u} sgnJ_{x_v,v} <S⁺_u S⁻_v> with the first coupled x as witness.
    """
    ex = spin_expressions(basis.order)
    gl, go = model.gamma_lambda, model.gamma_omega
    out = {}
    for x in range(model.n_lambda):
        for y in range(model.n_lambda):
            O = (ex.s_plus[x] * ex.s_minus[y]).matrix(basis)
            out[("c", x, y)] = gl[x] * gl[y] * electron_expectation(psi, O, basis.dim).real
    J = model.spec.J
    for u in range(model.n_omega):
        for v in range(model.n_omega):
            xu, xv = model.sign_witness(u), model.sign_witness(v)
            sign = go[u] * go[v] * np.sign(J[xu, u]) * np.sign(J[xv, v])
            O = (ex.S_plus[u] * ex.S_minus[v]).matrix(basis)
            out[("f", u, v)] = sign * electron_expectation(psi, O, basis.dim).real
    return out


def check_correlation_signs(model: ValidatedModel, config: VerifyConfig, ctx: Context | None = None) -> CheckRecord:
    ctx = ctx or Context(model, config)
    claim = "sign-corrected transverse spin correlations are strictly positive"
    if not ueff_psd(model):
        return CheckRecord("correlation_signs", claim, "skipped", note="U_eff is not positive semidefinite")
    res = ctx.spectrum()
    if ground_state_degeneracy(res).status != "unique":
        return CheckRecord("correlation_signs", claim, "undecided", note="ground state not resolved as unique")
    vals = correlation_values(model, res.ground_state, ctx.basis("P0"))
    lo = min(vals.values())
    stats = {
        "min": lo,
        "values": {f"{k[0]}:{k[1]},{k[2]}": v for k, v in sorted(vals.items())},
        "witnesses": {str(u): model.sign_witness(u) for u in range(model.n_omega)},
    }
    return CheckRecord("correlation_signs", claim, _strict_status(lo, TOL_STRICT), stats, {"strict": TOL_STRICT})


def _vacuum(bosons) -> np.ndarray:
    e = np.zeros(bosons.dim)
    e[0] = 1.0
    return e


def overlap_data(model: ValidatedModel, config: VerifyConfig, ctx: Context | None = None) -> dict:
    """Ground states of the transformed Hamiltonian and of U†L₂U (or U†L₂'U)
    on the Q0 sector in the number basis, each phase-fixed against the
    Q0-pinched identity ⊗ phonon vacuum."""
    ctx = ctx or Context(model, config)
    if model.coupling_class == MIXED:
        raise MixedCouplingSigns("overlap argument needs J of a single sign")
    p0, q0 = ctx.basis("P0"), ctx.basis("Q0")
    bosons = ctx.bosons(config.n_max)
    Hhat = build_transformed(model, q0, bosons).H
    kind = "L2_prime" if model.coupling_class == FERROMAGNETIC else "L2"
    L2 = build_auxiliary(kind, model, p0, bosons)
    ra = lowest_eigenpairs(Hhat, k=2, tol=config.tol, seed=config.seed)
    rb = lowest_eigenpairs(L2, k=2, tol=config.tol, seed=config.seed)
    for r in (ra, rb):
        v = ground_state_degeneracy(r)
        if v.status != "unique":
            raise DegenerateGroundState(v.gap, v.gap_threshold)
    U = sp.kron(hole_particle(model, q0, p0).matrix, sp.identity(bosons.dim), format="csr")
    ref = np.kron(HSIdentification.from_basis(q0).identity_vector(), _vacuum(bosons))
    psi_a = phase_normalize(ra.ground_state, ref)
    psi_b = phase_normalize(U.conj().T @ rb.ground_state, ref)
    return {
        "psi_a": psi_a,
        "psi_b": psi_b,
        "overlap": complex(np.vdot(psi_a, psi_b)),
        "S2_a": ctx.measured_s2(U @ psi_a),
        "S2_b": ctx.measured_s2(U @ psi_b),
        "S2_var_a": ctx.s2_variance(U @ psi_a),
        "S2_var_b": ctx.s2_variance(U @ psi_b),
        "auxiliary": kind,
    }


def check_overlap_method(model: ValidatedModel, config: VerifyConfig, ctx: Context | None = None) -> CheckRecord:
    claim = "transformed ground states of H and the auxiliary model overlap and share S"
    ctx = ctx or Context(model, config)
    d = overlap_data(model, config, ctx)
    ov = d["overlap"]
    stats = {"overlap_re": ov.real, "overlap_im": ov.imag, "S2_H": d["S2_a"], "S2_aux": d["S2_b"],
             "S2_variance_H": d["S2_var_a"], "S2_variance_aux": d["S2_var_b"], "auxiliary": d["auxiliary"]}
    same = abs(d["S2_a"] - d["S2_b"]) < SPIN_TOL
    if ov.real > OVERLAP_TOL and same:
        status = "pass"
    elif ov.real < -OVERLAP_TOL or (ov.real > OVERLAP_TOL and not same):
        status = "fail"
    else:
        status = "undecided"
    note = ""
    if d["S2_var_b"] > SPIN_TOL:
        note = "auxiliary ground state is not a total-spin eigenvector (spin-flip terms are XY only)"
    return CheckRecord("overlap_method", claim, status, stats, {"overlap": OVERLAP_TOL, "S2": SPIN_TOL}, note=note)


def _record(report, name, claim, seed) -> CheckRecord:
    status = "pass" if report.passed else "fail"
    stats = {"min_statistic": report.min_statistic, "n_samples": report.n_samples, "cone": report.cone, **report.extra}
    return CheckRecord(name, claim, status, stats, {"tol": report.tol}, seed)


def hubbard_inequality_pair(model: ValidatedModel, primed: bool = False):
    """(e^{-U†KU} e^{c}, e^{-U†H_H U}) on the unprojected sector.

    c = |Λ|² + |Λ||Ω| for the unprimed pair and |Λ|² + 2|Λ₁||Ω₁| + 2|Λ₂||Ω₂| for the primed one.
    """
    basis = enumerate_basis(model, "none")
    U = hole_particle(model, basis).matrix.toarray()
    K = build_auxiliary("K_prime" if primed else "K1", model, basis).to_dense()
    HH = build_auxiliary("H_H_prime" if primed else "H_H", model, basis).to_dense()
    nl, no = model.n_lambda, model.n_omega
    if primed:
        c = model.spec.sublattice_counts()
        const = nl**2 + 2 * c["L1"] * c["O1"] + 2 * c["L2"] * c["O2"]
    else:
        const = nl**2 + nl * no
    A = expm(-(U.conj().T @ K @ U)) * np.exp(const)
    B = expm(-(U.conj().T @ HH @ U))
    return A, B, basis


def check_hubbard_inequality(model: ValidatedModel, config: VerifyConfig, primed: bool | None = None) -> CheckRecord:
    primed = model.coupling_class == FERROMAGNETIC if primed is None else primed
    name = "spin_flip_vs_hubbard" + ("_primed" if primed else "")
    claim = "exp(-U†KU)·e^c dominates exp(-U†H_H U) on the unprojected PSD cone"
    A, B, basis = hubbard_inequality_pair(model, primed)
    cone = Cone("L_N_plus", HSIdentification.from_basis(basis))
    rep = check_operator_inequality(A, B, cone, config.n_samples, seed=config.seed, name=name)
    return _record(rep, name, claim, config.seed)


def check_cone_suite(model: ValidatedModel, config: VerifyConfig) -> list:
    """Positivity preservation, ergodicity and the double-occupancy bound on grid phonons,
    plus the spin-flip/Hubbard semigroup inequality."""
    records = []
    q0 = enumerate_basis(model, "Q0")
    bosons = build_boson_space(model, "grid", n_points=config.grid_points, extent=config.grid_extent)
    cone = Cone("Q_product", HSIdentification.from_basis(q0), bosons)
    n, seed = config.n_samples, config.seed
    psd = ueff_psd(model)

    if psd:
        bundle = build_transformed(model, q0, bosons)
        _, V = sample_pairs(cone, n, seed)
        betas = (0.5, 1.0)
        applied = dict(zip(betas, heat_actions(bundle.H, betas, V)))
        for beta in betas:
            rep = check_positivity_preserving(None, cone, n, tol=1e-10, seed=seed, applied=applied[beta],
                                              name=f"positivity_preserving_beta={beta}")
            records.append(_record(rep, rep.check, f"exp(-βĤ) preserves the product cone (β={beta})", seed))
        Herg = ergodicity_operator(model, bundle)
        factor = np.exp(-(Herg.shift - bundle.H.shift))
        try:
            rep = check_ergodicity(Herg, 1.0, cone, n, seed=seed, applied=applied[1.0] * factor)
            records.append(_record(rep, "ergodicity", "exp(-βĤ) is positivity improving for the product cone", seed))
        except DegenerateGroundState as exc:
            records.append(CheckRecord("ergodicity", "exp(-βĤ) is positivity improving for the product cone",
                                       "undecided", {"gap": exc.gap}, note=str(exc), seed=seed))
    else:
        for name in ("positivity_preserving", "ergodicity"):
            records.append(CheckRecord(name, "semigroup positivity of the transformed Hamiltonian", "skipped",
                                       note="U_eff is not positive semidefinite"))

    A, B = double_occupancy_bound(model, q0)
    I = sp.identity(bosons.dim, format="csr")
    rep = check_operator_inequality(sp.kron(A, I, format="csr"), sp.kron(B, I, format="csr"), cone, n,
                                    tol=1e-10, seed=seed, name="double_occupancy_bound")
    records.append(_record(rep, rep.check, "(8/J²)(JN + 𝕁)² dominates the double-occupancy count", seed))

    if model.coupling_class != MIXED:
        records.append(check_hubbard_inequality(model, config))
    return records


def run_all(model, config: VerifyConfig | None = None) -> VerificationReport:
    """Run every applicable check; a spec that fails validation yields a one-entry report."""
    config = config or VerifyConfig()
    spec = model.spec if isinstance(model, ValidatedModel) else model
    digest = model_digest(spec)
    trunc = {"n_max": config.n_max, "grid_points": config.grid_points, "grid_extent": config.grid_extent}
    if not isinstance(model, ValidatedModel):
        try:
            model = validate(spec)
        except KondoPhononError as exc:
            rec = CheckRecord("validation", "model satisfies the lattice conditions", "fail",
                              {"error": type(exc).__name__}, note=str(exc))
            return VerificationReport(digest, [rec], trunc, config.seed)
    ctx = Context(model, config)
    checks = []

    def guarded(name, fn):
        try:
            out = fn()
        except MixedCouplingSigns as exc:
            checks.append(CheckRecord(name, "requires J of a single sign", "skipped", note=str(exc)))
            return
        except DegenerateGroundState as exc:
            checks.append(CheckRecord(name, "requires a unique ground state", "undecided", {"gap": exc.gap}, note=str(exc)))
            return
        checks.extend(out if isinstance(out, list) else [out])

    guarded("uniqueness", lambda: check_uniqueness(model, config, ctx))
    guarded("total_spin", lambda: check_total_spin(model, config, ctx))
    guarded("correlation_signs", lambda: check_correlation_signs(model, config, ctx))
    guarded("overlap_method", lambda: check_overlap_method(model, config, ctx))
    if config.cone_suite:
        guarded("cone_suite", lambda: check_cone_suite(model, config))
    for hook in config.hooks:
        guarded(getattr(hook, "__name__", "hook"), lambda hook=hook: hook(model, config))
    return VerificationReport(digest, checks, trunc, config.seed)


def check_operator_uniqueness(H, name: str = "operator_uniqueness") -> CheckRecord:
    """Uniqueness verdict for an arbitrary Hermitian operator (used by test hooks)."""
    v = ground_state_degeneracy(lowest_eigenpairs(H, k=2))
    status = {"unique": "pass", "degenerate": "fail"}.get(v.status, "undecided")
    return CheckRecord(name, "ground state is unique", status, {"gap": v.gap})
