"""Command-line front end: ``kondo-phonon {validate,solve,verify} model.json``.

Exit codes: 0 success, 1 validation failure or failed check, 2 unreadable
input, 3 solver did not converge.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

from . import __version__
from .errors import ConditionViolation, KondoPhononError, NoConvergence
from .fock import build_boson_space
from .hamiltonians import build_hamiltonian
from .model import ModelSpec, validate
from .spectra import ground_state_degeneracy, lowest_eigenpairs, sweep_to_csv, truncation_sweep
from .verify import SCHEMA_VERSION, Context, VerifyConfig, correlation_values, model_digest, run_all


class InputError(Exception):
    pass


def load_spec(path) -> ModelSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return ModelSpec.from_json(text)
    except (ValueError, KeyError, TypeError) as exc:
        # json.JSONDecodeError is a ValueError
        raise InputError(f"cannot parse {path}: {exc}") from exc


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"{text} must be positive")
        return v
    return parse


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kondo-phonon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the lattice conditions of a model file")
    p.add_argument("model")

    for name, helptext in (("solve", "ground state, gap, spin and correlators"),
                           ("verify", "run the numerical checks and write a report")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("model")
        p.add_argument("--bosons", choices=("number", "grid"), default="number")
        p.add_argument("--nmax", type=int, default=6)
        p.add_argument("--grid-points", type=int, default=32)
        p.add_argument("--grid-extent", type=_positive(float), default=7.0)
        p.add_argument("--k", type=_positive(int), default=2)
        p.add_argument("--tol", type=_positive(float), default=1e-9)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=_positive(int), default=1000)
        p.add_argument("--out", default="out")
        p.add_argument("--no-cache", action="store_true")
        p.add_argument("--nmax-sweep", type=_int_list, default=None)
        if name == "verify":
            p.add_argument("--no-cone-suite", action="store_true", help="skip the grid cone checks")
    return parser


def run_config(args) -> dict:
    cfg = {
        "command": args.command,
        "bosons": args.bosons,
        "nmax": args.nmax,
        "grid_points": args.grid_points,
        "grid_extent": args.grid_extent,
        "k": args.k,
        "tol": args.tol,
        "seed": args.seed,
        "samples": args.samples,
        "nmax_sweep": args.nmax_sweep,
    }
    if args.command == "verify":
        cfg["cone_suite"] = not args.no_cone_suite
    return cfg


def cache_key(spec: ModelSpec, cfg: dict) -> str:
    text = json.dumps({"model": spec.to_dict(), "config": cfg, "version": __version__},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _spin_from_s2(s2: float) -> float:
    return 0.5 * (math.sqrt(max(1.0 + 4.0 * s2, 0.0)) - 1.0)


def solve(spec: ModelSpec, cfg: dict) -> dict:
    """Files to write, keyed by name."""
    model = validate(spec)
    vcfg = VerifyConfig(n_max=cfg["nmax"], k=cfg["k"], tol=cfg["tol"], seed=cfg["seed"])
    ctx = Context(model, vcfg)
    p0 = ctx.basis("P0")
    if cfg["bosons"] == "grid":
        bosons = build_boson_space(model, "grid", n_points=cfg["grid_points"], extent=cfg["grid_extent"])
    else:
        bosons = build_boson_space(model, "number", n_max=cfg["nmax"])
    res = lowest_eigenpairs(build_hamiltonian(model, p0, bosons), k=max(2, cfg["k"]), tol=cfg["tol"], seed=cfg["seed"])
    verdict = ground_state_degeneracy(res)
    s2 = ctx.measured_s2(res.ground_state)
    corr = correlation_values(model, res.ground_state, p0)
    spectrum = {
        "schema_version": SCHEMA_VERSION,
        "model_digest": model_digest(spec),
        "config": cfg,
        "E0": res.E0,
        "gap": res.gap,
        "degeneracy": verdict.status,
        "eigenvalues": [float(v) for v in res.eigenvalues],
        "residuals": [float(r) for r in res.residuals],
        "method": res.method,
        "dimension": int(p0.dim * bosons.dim),
        "S2": s2,
        "S": _spin_from_s2(s2),
        "correlators": {f"{k[0]}:{k[1]},{k[2]}": float(v) for k, v in sorted(corr.items())},
    }
    files = {"spectrum.json": _dump(spectrum)}
    if cfg["nmax_sweep"]:
        files["sweep.csv"] = sweep_to_csv(truncation_sweep(model, cfg["nmax_sweep"], k=max(2, cfg["k"]),
                                                           tol=cfg["tol"], seed=cfg["seed"]))
    return files


def verify(spec: ModelSpec, cfg: dict, hooks=()) -> tuple[dict, bool]:
    vcfg = VerifyConfig(n_max=cfg["nmax"], grid_points=cfg["grid_points"], grid_extent=cfg["grid_extent"],
                        k=cfg["k"], tol=cfg["tol"], seed=cfg["seed"], n_samples=cfg["samples"],
                        cone_suite=cfg["cone_suite"], hooks=list(hooks))
    report = run_all(spec, vcfg)
    return {"report.json": report.to_json(), "report.csv": report.to_csv()}, report.failed


def _cached(out: Path, key: str, use_cache: bool, compute):
    path = out / "cache" / f"{key}.json"
    if use_cache and path.exists():
        data = json.loads(path.read_text())
        return data["files"], data["failed"]
    files, failed = compute()
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(_dump({"files": files, "failed": failed}))
    return files, failed


def main(argv=None, hooks=()) -> int:
    """Entry point; ``hooks`` are extra verification checks (used by tests)."""
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.model)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        try:
            validate(spec)
        except ConditionViolation as exc:
            for label, detail in exc.violations:
                print(f"{label}: {detail}")
            return 1
        except (KondoPhononError, ValueError) as exc:
            print(f"{type(exc).__name__}: {exc}")
            return 1
        print("ok")
        return 0

    cfg = run_config(args)
    out = Path(args.out)
    # hooks are code, not data: never cache their results
    use_cache = not args.no_cache and not hooks
    try:
        if args.command == "solve":
            files, failed = _cached(out, cache_key(spec, cfg), use_cache, lambda: (solve(spec, cfg), False))
        else:
            files, failed = _cached(out, cache_key(spec, cfg), use_cache, lambda: verify(spec, cfg, hooks))
    except ConditionViolation as exc:
        for label, detail in exc.violations:
            print(f"{label}: {detail}")
        return 1
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KondoPhononError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    if args.command == "verify":
        for row in json.loads(files["report.json"])["checks"]:
            print(f"{row['status']:>9}  {row['name']}")
    else:
        s = json.loads(files["spectrum.json"])
        print(f"E0 = {s['E0']:.12g}  gap = {s['gap']:.6g}  S = {s['S']:.6f}  ({s['degeneracy']})")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
