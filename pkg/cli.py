#!/usr/bin/env python3
"""
rpkit command-line front end.

Every subcommand assembles a set of named checks; run_pipeline executes them
(in parallel up to RPKIT_THREADS), orders the entries by name and emits one
JSON report. The exit code is 0 exactly when every check passes, 1 otherwise
and 2 when an input file cannot be read.
"""

import argparse
import json
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from bipartition import load_bipartition
from config import settings, setup_logging, validate_config
from errors import DimensionMismatch, ParseError, RPKitError
from groundstate import (
    cut_by,
    ground_state,
    ground_state_to_w,
    local_commutant,
    ltqo_check,
    maximal_support_check,
)
from localnet import (
    WINDOW_GEOMETRY,
    RegionFamily,
    boundary_reduction_check,
    extendability_check,
    inclusion,
    load_interaction,
    load_regions,
    modular_consistency_check,
    net_axioms_check,
    pullback_state,
)
from models import (
    build_toric_slab,
    builtin_fusion,
    fusion_hom_dims,
    fusion_hom_identities,
    fusion_signature,
    sphere_toric_instance,
    stringnet_modular_spectrum,
    stringnet_plaquette_product,
    toric_boundary_algebra,
    toric_jones_tower_check,
)
from osrecon import field_algebra, modular_residuals, modular_trivial
from pfengine import (
    SymmetricCPMap,
    canonical_pf,
    equilibrium_fixed_points_match,
    truncate,
    verify_eigenspace_structure,
    verify_lemma_support,
)
from reports import CheckEntry, CheckResult, Report, RunConfig, failed_entry, to_entry
from rpcore import RPHamiltonian, decompose_rp_hamiltonian, semigroup_verdicts
from staralg import algebra_equal
from tensorlab import frob, load_matrix, require_square

Check = Callable[[np.random.Generator], CheckResult]


def _floats(raw: Optional[str]) -> Optional[List[float]]:
    if raw is None:
        return None
    return [float(x) for x in raw.split(",") if x.strip()]


def _residuals_pass(values: Dict[str, float]) -> bool:
    return max((abs(v) for v in values.values()), default=0.0) < settings.residual_tol


def _rp_verdict(rp: RPHamiltonian) -> CheckResult:
    """An RP Hamiltonian whose Choi check was skipped does not pass."""
    values = {"verified": rp.verified, "tau": [t for t, _ in rp.semigroup],
              "min_choi_eigenvalue_per_tau": [v.min_eigenvalue for _, v in rp.semigroup]}
    if not rp.verified:
        values["reason"] = (f"d² = {rp.bipartition.dim_plus ** 2} exceeds choi_dim_limit = "
                            f"{settings.choi_dim_limit}")
    return CheckResult(passed=rp.is_rp, values=values)


# --- rp-check -------------------------------------------------------------------

def rp_checks(args) -> Dict[str, Check]:
    b = load_bipartition(args.bipartition)
    h = load_matrix(args.hamiltonian)
    require_square(h, b.dim, "Hamiltonian")
    taus = _floats(args.tau) or settings.taus

    def semigroup(rng):
        verdicts = semigroup_verdicts(h, b, taus, settings.tol)
        return CheckResult(
            passed=all(v.positive for _, v in verdicts),
            values={"rp": all(v.positive for _, v in verdicts), "tau": taus,
                    "min_choi_eigenvalue_per_tau": [v.min_eigenvalue for _, v in verdicts]},
        )

    def structure(rng):
        rp = decompose_rp_hamiltonian(h, b)
        return CheckResult(passed=True, values={"cross_terms": len(rp.cross_terms)},
                           matrices={"h_plus": rp.h_plus})

    return {"rp_semigroup": semigroup, "rp_structure": structure}


# --- pf -------------------------------------------------------------------------

def pf_checks(args) -> Dict[str, Check]:
    kraus = [load_matrix(p) for p in args.kraus.split(",") if p.strip()]
    projection = load_matrix(args.truncate) if args.truncate else None

    def psi():
        m = SymmetricCPMap.from_kraus(kraus)
        return truncate(m, projection) if projection is not None else m

    def vector(rng):
        pf = canonical_pf(psi())
        return CheckResult(
            passed=pf.maximal,
            values={"rho": pf.rho, "p_max_rank": pf.p_max_rank, "cesaro_iterations": pf.cesaro_iterations,
                    "residual": pf.residual},
            matrices={"xi": pf.xi},
        )

    def eigenspace(rng):
        rep = verify_eigenspace_structure(psi())
        return CheckResult(passed=rep.passed, values={
            "eigenspace_dimension": rep.eigenspace_dimension, "bim_dimension": rep.bim_dimension,
            "bim_pmax_dimension": rep.bim_pmax_dimension, "embedding_residual": rep.embedding_residual,
        })

    def support(rng):
        values = verify_lemma_support(psi(), rng)
        return CheckResult(passed=_residuals_pass(values), values=values)

    def equilibrium(rng):
        match = equilibrium_fixed_points_match(psi())
        return CheckResult(passed=match, values={"fixed_points_match_bim": match})

    return {"pf_vector": vector, "pf_eigenspace": eigenspace, "pf_support": support, "pf_equilibrium": equilibrium}


# --- ground ---------------------------------------------------------------------

def _ground_input(args):
    if args.model == "toric":
        slab = build_toric_slab(args.lx, args.ly)
        return slab.hamiltonian.assembled, slab.bipartition, slab.hamiltonian
    if not (args.hamiltonian and args.bipartition):
        raise DimensionMismatch("ground needs --model toric or --hamiltonian with --bipartition")
    b = load_bipartition(args.bipartition)
    h = load_matrix(args.hamiltonian)
    require_square(h, b.dim, "Hamiltonian")
    return h, b, None


def ground_checks(args) -> Dict[str, Check]:
    h, b, rp = _ground_input(args)

    def state(rng):
        g = ground_state(h, b)
        return CheckResult(
            passed=g.range_residual < settings.residual_tol,
            values={"energy": g.energy_e0, "degeneracy": g.degeneracy, "gap": g.gap,
                    "range_residual": g.range_residual},
            matrices={"xi": g.xi, "pi_hat": g.pi_hat},
        )

    def w_map(rng):
        g = ground_state(h, b)
        cut = cut_by(local_commutant(h, b), g.pi_hat)
        worst = max(ground_state_to_w(g.ground_basis[:, k], g, b, commutant_cut=cut).max_residual
                    for k in range(g.degeneracy))
        return CheckResult(passed=worst < settings.residual_tol and cut.shape[0] == g.degeneracy,
                           values={"w_residual": worst, "commutant_dimension": int(cut.shape[0]),
                                   "degeneracy": g.degeneracy})

    def support(rng):
        values = maximal_support_check(h, ground_state(h, b), b)
        return CheckResult(passed=_residuals_pass(values), values=values)

    checks = {"ground_state": state, "ground_w": w_map, "ground_support": support}
    if rp is not None:
        checks["reflection_positivity"] = lambda rng: _rp_verdict(rp)
    return checks


# --- ltqo -----------------------------------------------------------------------

def ltqo_checks(args) -> Dict[str, Check]:
    if args.model == "sphere":
        inst = sphere_toric_instance()
        h_minus, h_plus, cross, b = None, inst.h_plus, list(inst.cross_terms), inst.bipartition
    else:
        if not (args.hplus and args.bipartition):
            raise DimensionMismatch("ltqo needs --model sphere or --hplus with --bipartition")
        b = load_bipartition(args.bipartition)
        h_plus = load_matrix(args.hplus)
        h_minus = load_matrix(args.hminus) if args.hminus else None
        cross = [load_matrix(p) for p in (args.cross or "").split(",") if p.strip()]
        require_square(h_plus, b.dim_plus, "h_plus")

    def verdict(rng):
        rep = ltqo_check(h_minus, h_plus, cross, b)
        return CheckResult(passed=rep.agree and rep.rp_verified, values={
            "nondegenerate": rep.nondegenerate, "ltqo": rep.ltqo, "degeneracy": rep.degeneracy,
            "rp_verified": rep.rp_verified,
            "ltqo_dimension": rep.ltqo_dimension, "witness": rep.witness, "witness_defect": rep.witness_defect,
        })

    return {"ltqo": verdict}


# --- osr ------------------------------------------------------------------------

def osr_checks(args) -> Dict[str, Check]:
    b = load_bipartition(args.bipartition)
    pi = load_matrix(args.pi)
    require_square(pi, b.dim, "ground projection")

    def reconstruction(rng):
        osr = field_algebra(pi, b, rng)
        values = {f"residual_{k}": v for k, v in osr.residuals.items()}
        for t in settings.modular_grid:
            for k, v in modular_residuals(osr, t).items():
                values[f"modular_{k}_t{t}"] = v
        passed = _residuals_pass(values) and osr.rp_verified
        values.update({"rp_verified": osr.rp_verified, "phys_dim": osr.phys_dim,
                       "block_signature": list(osr.field_algebra.block_signature),
                       "modular_trivial": modular_trivial(osr)})
        return CheckResult(passed=passed, values=values, matrices={"xi": osr.xi, "f": osr.f_central})

    return {"osr": reconstruction}


# --- net ------------------------------------------------------------------------

def net_checks(args) -> Dict[str, Check]:
    spec = load_interaction(args.interaction)
    family = RegionFamily(spec, load_regions(args.regions, spec))

    def axioms(rng):
        rep = net_axioms_check(family)
        return CheckResult(passed=rep.passed, values={
            "composition_residual": rep.composition_residual, "commutation_residual": rep.commutation_residual,
            "chains": rep.chains, "disjoint_pairs": rep.disjoint_pairs, "violations": rep.violations,
        })

    def modular(rng):
        rep = modular_consistency_check(family)
        return CheckResult(passed=rep.passed, values={"residuals": {str(t): r for t, r in rep.residuals.items()},
                                                      "violations": rep.violations})

    def boundary(rng):
        rep = boundary_reduction_check(family)
        return CheckResult(passed=rep.passed, values={
            "interaction_range": rep.interaction_range,
            "pairs": [vars(p) for p in rep.pairs],
        })

    def extendability(rng):
        pairs = []
        for x, y in family.nested_pairs():
            inc = inclusion(x, y, family)
            pull = pullback_state(x, y, family, rng)
            pairs.append({"x": family.label(x), "y": family.label(y), "extendable": extendability_check(x, y, family),
                          "injective": inc.injective, "faithful": pull.faithful})
        return CheckResult(passed=all(p["extendable"] for p in pairs), values={"pairs": pairs})

    return {"axioms": axioms, "modular": modular, "boundary": boundary, "extendability": extendability}


# --- toric ----------------------------------------------------------------------

def toric_checks(args) -> Dict[str, Check]:
    L, depth = args.L, args.depth
    slab = build_toric_slab(L, depth)

    def degeneracy(rng):
        g = ground_state(slab.hamiltonian.assembled, slab.bipartition)
        expected = slab.expected_degeneracy()
        return CheckResult(passed=g.degeneracy == expected,
                           values={"degeneracy": g.degeneracy, "expected": expected, "energy": g.energy_e0,
                                   "stabilizers": len(slab.stabilizers)})

    def boundary_algebra(rng):
        alg = toric_boundary_algebra(L)
        values = {"dimension": alg.dimension, "signature": list(alg.exact.signature),
                  "expected_signature": list(alg.expected_signature)}
        passed = sorted(alg.exact.signature) == sorted(alg.expected_signature) and alg.dimension == 2 ** (L - 1)
        if alg.algebra is not None:
            values["dense_signature"] = list(alg.algebra.block_signature)
            passed = passed and sorted(alg.algebra.block_signature) == sorted(alg.expected_signature)
        return CheckResult(passed=passed, values=values)

    def jones(rng):
        rep = toric_jones_tower_check(L)
        return CheckResult(passed=rep.passed, values={
            "relation_holds": rep.relation_holds, "generates": rep.generates, "index_four": rep.index_four,
            "dense_residual": rep.dense_residual, "seed_residual": rep.seed_residual, "failures": rep.failures,
        })

    def full_pipeline(rng):
        g = ground_state(slab.hamiltonian.assembled, slab.bipartition)
        osr = field_algebra(g.projection_pi, slab.bipartition, rng)
        eye = np.eye(slab.bipartition.dim_plus)
        values = {
            "signature": list(osr.field_algebra.block_signature),
            "xi_identity_residual": frob(osr.xi - eye) if depth == 1 else None,
            "pi_hat_identity_residual": frob(osr.pi_hat - eye) if depth == 1 else None,
            "modular_trivial": modular_trivial(osr),
            "phys_dim": osr.phys_dim,
            "rp_verified": osr.rp_verified,
        }
        passed = values["modular_trivial"] and osr.rp_verified
        if depth == 1:
            reference = toric_boundary_algebra(L, dense_limit=L)
            values["matches_boundary_algebra"] = algebra_equal(osr.field_algebra, reference.algebra)
            passed = passed and values["matches_boundary_algebra"] and \
                max(values["xi_identity_residual"], values["pi_hat_identity_residual"]) < settings.residual_tol
        return CheckResult(passed=bool(passed), values=values)

    checks = {"degeneracy": degeneracy, "boundary_algebra": boundary_algebra,
              "reflection_positivity": lambda rng: _rp_verdict(slab.hamiltonian)}
    if L <= 10:
        checks["jones"] = jones
    if args.full_pipeline:
        checks["full_pipeline"] = full_pipeline
    return checks


# --- fusion ---------------------------------------------------------------------

class LabelsFile(BaseModel):
    plaquettes: List[List[str]] = Field(..., description="(i, i', k, k') per plaquette, left to right")


def _load_labels(path: str) -> List[tuple]:
    try:
        payload = LabelsFile.model_validate(json.loads(Path(path).read_text()))
    except FileNotFoundError as e:
        raise ParseError(path, "file not found") from e
    except json.JSONDecodeError as e:
        raise ParseError(path, e.msg, offset=e.pos) from e
    except ValidationError as e:
        raise ParseError(path, str(e)) from e
    return [tuple(p) for p in payload.plaquettes]


def fusion_checks(args) -> Dict[str, Check]:
    data = builtin_fusion(args.category)
    labels = _load_labels(args.modular_spectrum) if args.modular_spectrum else None

    def dimensions(rng):
        residual = data.dimension_residual()
        return CheckResult(passed=residual < settings.residual_tol, values={
            "labels": list(data.labels), "quantum_dimensions": data.quantum_dimensions,
            "global_dimension": data.global_dimension, "fusion_residual": residual,
        })

    checks: Dict[str, Check] = {"quantum_dimensions": dimensions}
    if args.hom:
        m, n = args.hom

        def hom(rng):
            identities = fusion_hom_identities(data, m, n)
            return CheckResult(passed=_residuals_pass(identities), values={
                "m": m, "n": n, "dimension": fusion_hom_dims(data, m, n),
                "signature": fusion_signature(data, m) if m == n else None, "identities": identities,
            })

        checks["hom"] = hom
    if labels is not None:

        def spectrum(rng):
            exponent = stringnet_modular_spectrum(data, labels)
            factors, total = stringnet_plaquette_product(data, labels)
            return CheckResult(passed=abs(total - exponent) < settings.residual_tol,
                               values={"exponent": exponent, "plaquette_factors": factors})

        checks["modular_spectrum"] = spectrum
    return checks


# --- pipeline -------------------------------------------------------------------

def _failing(error: RPKitError) -> Check:
    def check(rng):
        raise error

    return check


def run_pipeline(config: RunConfig, checks: Dict[str, Check], side_dir: Optional[Path] = None) -> Report:
    """Run the selected checks; entries come back ordered by name."""
    if config.checks is None:
        selected = sorted(checks)
    else:
        unknown = sorted(set(config.checks) - set(checks))
        if unknown:
            logger.warning(f"Unknown checks ignored: {unknown}; available {sorted(checks)}")
        selected = sorted(n for n in checks if n in config.checks)

    def run_one(name: str) -> CheckEntry:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, zlib.crc32(name.encode())]))
        start = time.perf_counter()
        try:
            entry = to_entry(name, checks[name](rng), side_dir)
        except RPKitError as e:
            logger.error(f"Check {name} raised {type(e).__name__}: {e}")
            entry = failed_entry(name, e)
        entry.wall_clock = round(time.perf_counter() - start, 6)
        logger.info(f"{name}: {'pass' if entry.passed else 'FAIL'} ({entry.wall_clock:.2f}s)")
        return entry

    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        entries = list(pool.map(run_one, selected))
    return Report(config=config, checks=entries)


BUILDERS = {
    "rp-check": rp_checks,
    "pf": pf_checks,
    "ground": ground_checks,
    "ltqo": ltqo_checks,
    "osr": osr_checks,
    "net": net_checks,
    "toric": toric_checks,
    "fusion": fusion_checks,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpkit", description="Reflection positivity toolkit")
    parser.add_argument("--tol", type=float, help="Verdict tolerance (default RPKIT_TOL)")
    parser.add_argument("--rank-tol", type=float, help="Rank threshold (default RPKIT_RANK_TOL)")
    parser.add_argument("--seed", type=int, help="Root seed (default RPKIT_SEED)")
    parser.add_argument("--out", help="Report path")
    parser.add_argument("--json", action="store_true", help="Print the report to stdout")
    parser.add_argument("--checks", help="Comma-separated check names to run; empty runs none")
    parser.add_argument("--log-level", help="Console log level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rp-check", help="Reflection positivity of e^{-τH}")
    p.add_argument("--hamiltonian", required=True)
    p.add_argument("--bipartition", required=True)
    p.add_argument("--tau", help="Comma-separated τ grid")

    p = sub.add_parser("pf", help="Perron-Frobenius data of a symmetric CP map")
    p.add_argument("--kraus", required=True, help="Comma-separated Kraus matrix files")
    p.add_argument("--truncate", help="Projection file for Ψ(pXp)")

    p = sub.add_parser("ground", help="Canonical PF ground state")
    p.add_argument("--model", choices=["toric"])
    p.add_argument("--lx", type=int, default=2, help="Toric window length along the axis")
    p.add_argument("--ly", type=int, default=1, help="Toric edge levels above the axis")
    p.add_argument("--hamiltonian")
    p.add_argument("--bipartition")

    p = sub.add_parser("ltqo", help="LTQO against ground-state uniqueness")
    p.add_argument("--model", choices=["sphere"])
    p.add_argument("--hminus")
    p.add_argument("--hplus")
    p.add_argument("--cross", help="Comma-separated cross term files")
    p.add_argument("--bipartition")

    p = sub.add_parser("osr", help="Osterwalder-Schrader reconstruction of a ground projection")
    p.add_argument("--pi", required=True)
    p.add_argument("--bipartition", required=True)

    p = sub.add_parser("net", help="Local net axioms over a region family")
    p.add_argument("--interaction", required=True)
    p.add_argument("--regions", required=True)

    p = sub.add_parser("toric", help="Toric code slab, boundary algebra and Jones tower")
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--full-pipeline", action="store_true")

    p = sub.add_parser("fusion", help="Fusion data, hom dimensions and string-net spectra")
    p.add_argument("--category", required=True, help="trivial, vec_z2, fibonacci or ising")
    p.add_argument("--hom", type=int, nargs=2, metavar=("M", "N"))
    p.add_argument("--modular-spectrum", help="Plaquette label file")
    return parser


@contextmanager
def overridden_settings(**overrides):
    saved = {k: getattr(settings, k) for k in overrides}
    for k, v in overrides.items():
        setattr(settings, k, v)
    try:
        yield
    finally:
        for k, v in saved.items():
            setattr(settings, k, v)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        setup_logging(args.log_level)
    overrides = {k: v for k, v in (("tol", args.tol), ("rank_tol", args.rank_tol), ("seed", args.seed))
                 if v is not None}
    with overridden_settings(**overrides):
        if not validate_config():
            return 2
        parameters = {k: v for k, v in vars(args).items()
                      if k not in ("tol", "rank_tol", "seed", "out", "json", "checks", "log_level", "command")}
        config = RunConfig(
            command=args.command, seed=settings.seed, tol=settings.tol, rank_tol=settings.rank_tol,
            residual_tol=settings.residual_tol, cluster_tol=settings.cluster_tol, tau_grid=settings.taus,
            checks=None if args.checks is None else [c.strip() for c in args.checks.split(",") if c.strip()],
            parameters=parameters,
            geometry=WINDOW_GEOMETRY if args.command in ("net", "toric") else None,
        )
        try:
            checks = BUILDERS[args.command](args)
        except (ParseError, DimensionMismatch) as e:
            logger.error(f"{type(e).__name__}: {e}")
            print(f"rpkit: {e}", file=sys.stderr)
            return 2
        except RPKitError as e:
            logger.error(f"Setup of {args.command} failed: {e}")
            checks = {"setup": _failing(e)}
        out = Path(args.out) if args.out else None
        report = run_pipeline(config, checks, out.parent if out else None)

    if out:
        report.write(out)
    if args.json:
        print(report.document())
    else:
        for line in report.summary():
            print(line)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
