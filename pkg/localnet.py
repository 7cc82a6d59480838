"""
Local nets of field algebras over symmetric regions.

An ``InteractionSpec`` lists sites (dimension and signed height above the
reflection hyperplane), the mirror map and local terms. A ``RegionFamily``
assembles H_X for symmetric regions X and caches the ground data and the
field algebra ℳ_X = 𝒜₊(Π(X))Π̂(X) per region.
"""

import itertools
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from bipartition import Bipartition, Region
from config import settings
from errors import CommutationFailure, DimensionMismatch, NotReflectionPositive, ParseError
from groundstate import GroundData, ground_state
from rpcore import conjugate_superop, decompose_rp_hamiltonian
from staralg import MatrixStarAlgebra, interaction_algebra, orthonormal_span, span_residual
from tensorlab import (
    ComplexMatrix,
    MatrixFile,
    as_matrix,
    dagger,
    embed_operator,
    frob,
    hermitian_part,
    is_hermitian,
    numerical_rank,
    partial_trace,
    permute_factors,
    psd_function,
    range_projection,
)

WINDOW_GEOMETRY = "rectangular windows"


@dataclass(frozen=True)
class SiteInfo:
    name: str
    dim: int
    height: float


@dataclass(frozen=True, eq=False)
class Term:
    """Local term acting on ``support`` in the listed factor order"""

    support: Tuple[str, ...]
    matrix: ComplexMatrix
    label: str = ""


class InteractionSpec:
    """Sites, mirror map and local terms of a reflection compatible interaction"""

    def __init__(self, sites: Sequence[SiteInfo], mirror: Mapping[str, str], terms: Sequence[Term],
                 name: str = "interaction"):
        self.name = name
        self.sites: Dict[str, SiteInfo] = {s.name: s for s in sites}
        self.order: Dict[str, int] = {s.name: k for k, s in enumerate(sites)}
        self.mirror: Dict[str, str] = dict(mirror)
        self.unmirror: Dict[str, str] = {m: p for p, m in self.mirror.items()}
        self.terms: Tuple[Term, ...] = tuple(
            Term(tuple(t.support), as_matrix(t.matrix, f"term {t.label}"), t.label) for t in terms
        )
        self.validate()

    @property
    def plus_sites(self) -> List[str]:
        return sorted(self.mirror, key=self.order.__getitem__)

    def dim(self, site: str) -> int:
        return self.sites[site].dim

    def side(self, term: Term) -> str:
        plus = [s in self.mirror for s in term.support]
        if all(plus):
            return "plus"
        if not any(plus):
            return "minus"
        return "cross"

    @property
    def interaction_range(self) -> float:
        """R: largest vertical extent of a term support."""
        extents = [max(self.sites[s].height for s in t.support) - min(self.sites[s].height for s in t.support)
                   for t in self.terms if t.support]
        return float(max(extents, default=0.0))

    def _reordered(self, term: Term, order: Sequence[str]) -> np.ndarray:
        dims = [self.dim(s) for s in term.support]
        perm = [term.support.index(s) for s in order]
        p = permute_factors(dims, perm)
        return p @ term.matrix @ dagger(p)

    def validate(self) -> None:
        for p, m in self.mirror.items():
            if p not in self.sites or m not in self.sites:
                raise DimensionMismatch(f"mirror pair ({p}, {m}) names an unknown site")
            if self.dim(p) != self.dim(m):
                raise DimensionMismatch(f"mirror pair ({p}, {m}) has unequal dimensions")
            if abs(self.sites[p].height + self.sites[m].height) > 1e-12 or self.sites[p].height <= 0:
                raise DimensionMismatch(f"site {p} must sit at height h > 0 and {m} at −h")
        for t in self.terms:
            if len(set(t.support)) != len(t.support) or any(s not in self.sites for s in t.support):
                raise DimensionMismatch(f"term {t.label or t.support} has an invalid support")
            size = int(np.prod([self.dim(s) for s in t.support]))
            if t.matrix.shape != (size, size):
                raise DimensionMismatch(f"term {t.label or t.support} is {t.matrix.shape}, support needs {size}")
            if not is_hermitian(t.matrix):
                raise NotReflectionPositive(f"term {t.label or t.support} is not Hermitian")
        self._check_mirrored_terms()
        for t in self.terms:
            if self.side(t) == "cross":
                self._check_cross_term(t)
        logger.debug(f"Interaction {self.name}: {len(self.sites)} sites, {len(self.terms)} terms, "
                     f"range {self.interaction_range}")

    def _check_mirrored_terms(self) -> None:
        """Θ(Φ(X)) = Φ(θX): summed one-sided terms on mirrored supports agree after conjugation."""
        plus: Dict[frozenset, np.ndarray] = {}
        minus: Dict[frozenset, np.ndarray] = {}
        for t in self.terms:
            side = self.side(t)
            if side == "cross":
                continue
            key = frozenset(t.support)
            if side == "plus":
                order = sorted(t.support, key=self.order.__getitem__)
                plus[key] = plus.get(key, 0) + self._reordered(t, order)
            else:
                order = [self.mirror[p] for p in sorted((self.unmirror[s] for s in t.support),
                                                       key=self.order.__getitem__)]
                pkey = frozenset(self.unmirror[s] for s in t.support)
                minus[pkey] = minus.get(pkey, 0) + self._reordered(t, order)
        for key in set(plus) | set(minus):
            a = plus.get(key)
            b = minus.get(key)
            if a is None or b is None:
                raise NotReflectionPositive(f"term on {sorted(key)} has no mirrored partner")
            if frob(np.conj(a) - b) > settings.residual_tol * max(1.0, frob(a)):
                raise NotReflectionPositive(f"minus term on the mirror of {sorted(key)} is not Θ of the plus term")

    def _check_cross_term(self, t: Term) -> None:
        closure = sorted({s for s in t.support if s in self.mirror} |
                         {self.unmirror[s] for s in t.support if s not in self.mirror},
                         key=self.order.__getitem__)
        factors = [self.mirror[s] for s in closure] + closure
        dims = [self.dim(s) for s in factors]
        op = embed_operator(t.matrix, [factors.index(s) for s in t.support], dims)
        decompose_rp_hamiltonian(op, Bipartition.plain([self.dim(s) for s in closure]))

    def region(self, plus: Iterable[str], label: str = "") -> Region:
        return Region.symmetric(plus, self.mirror, label)


@dataclass(frozen=True, eq=False)
class RegionData:
    """Hamiltonian, ground data and field algebra of one region"""

    region: Region
    plus_order: Tuple[str, ...]
    minus_order: Tuple[str, ...]
    bipartition: Bipartition
    hamiltonian: ComplexMatrix
    ground: GroundData
    interaction: MatrixStarAlgebra
    algebra: MatrixStarAlgebra

    @property
    def plus_dims(self) -> List[int]:
        return list(self.bipartition.plus_shape)

    @property
    def full_order(self) -> Tuple[str, ...]:
        return self.minus_order + self.plus_order

    @property
    def pi_hat(self) -> ComplexMatrix:
        return self.ground.pi_hat

    @property
    def xi(self) -> ComplexMatrix:
        return self.ground.xi


class RegionFamily:
    """Symmetric regions of one interaction with per-region caches"""

    def __init__(self, spec: InteractionSpec, regions: Sequence[Region], geometry: str = WINDOW_GEOMETRY):
        self.spec = spec
        self.geometry = geometry
        unique: Dict[Tuple[str, ...], Region] = {}
        for r in regions:
            if not r.is_symmetric(spec.mirror):
                raise DimensionMismatch(f"region {r.label or r.key()} is not reflection symmetric")
            unique.setdefault(r.key(), r)
        self.regions: List[Region] = sorted(unique.values(), key=lambda r: (len(r.plus), r.key()))
        self._cache: Dict[Tuple[str, ...], RegionData] = {}
        self._locks: Dict[Tuple[str, ...], threading.Lock] = {}
        self._guard = threading.Lock()

    def label(self, region: Region) -> str:
        return region.label or ",".join(region.key())

    def hamiltonian(self, region: Region) -> Tuple[Tuple[str, ...], Tuple[str, ...], ComplexMatrix]:
        """H_X: every term supported inside X, on the factors minus_order + plus_order."""
        plus = tuple(sorted(region.plus, key=self.spec.order.__getitem__))
        minus = tuple(self.spec.mirror[s] for s in plus)
        factors = list(minus + plus)
        dims = [self.spec.dim(s) for s in factors]
        total = int(np.prod(dims))
        h = np.zeros((total, total), dtype=np.complex128)
        sites = region.sites
        for t in self.spec.terms:
            if set(t.support) <= sites:
                h = h + embed_operator(t.matrix, [factors.index(s) for s in t.support], dims)
        return plus, minus, as_matrix(h, f"H({self.label(region)})")

    def _compute(self, region: Region) -> RegionData:
        plus, minus, h = self.hamiltonian(region)
        b = Bipartition.from_sites([(s, self.spec.dim(s)) for s in plus], minus,
                                   {s: self.spec.mirror[s] for s in plus})
        g = ground_state(h, b)
        interaction = interaction_algebra(g.projection_pi, b)
        cut = orthonormal_span([a @ g.pi_hat for a in interaction.basis])
        algebra = MatrixStarAlgebra(ambient_dim=b.dim_plus, unit=g.pi_hat, basis=cut, seed=settings.seed)
        logger.debug(f"Region {self.label(region)}: degeneracy {g.degeneracy}, dim ℳ = {algebra.dimension}")
        return RegionData(region=region, plus_order=plus, minus_order=minus, bipartition=b,
                          hamiltonian=h, ground=g, interaction=interaction, algebra=algebra)

    def data(self, region: Region) -> RegionData:
        key = region.key()
        with self._guard:
            if key in self._cache:
                return self._cache[key]
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._cache:
                computed = self._compute(region)
                with self._guard:
                    self._cache[key] = computed
        return self._cache[key]

    def nested_pairs(self) -> List[Tuple[Region, Region]]:
        return [(x, y) for x in self.regions for y in self.regions if x != y and x.issubset(y)]

    def chains(self) -> List[Tuple[Region, Region, Region]]:
        return [(x, y, z) for x, y, z in itertools.permutations(self.regions, 3)
                if x.issubset(y) and y.issubset(z)]

    def disjoint_triples(self) -> List[Tuple[Region, Region, Region]]:
        out = []
        for x, y in itertools.combinations(self.regions, 2):
            if not x.isdisjoint(y):
                continue
            out.extend((x, y, z) for z in self.regions if x.issubset(z) and y.issubset(z))
        return out


def _plus_positions(x: RegionData, y: RegionData) -> List[int]:
    return [y.plus_order.index(s) for s in x.plus_order]


def lift(a: np.ndarray, x: RegionData, y: RegionData) -> ComplexMatrix:
    """a ⊗ I_{Y₊∖X₊} on ℋ_{Y₊}."""
    return embed_operator(a, _plus_positions(x, y), y.plus_dims)


def include(a: np.ndarray, x: RegionData, y: RegionData) -> ComplexMatrix:
    """α_{Y,X}(a) = (a⊗I)Π̂(Y)."""
    return as_matrix(lift(a, x, y) @ y.pi_hat, "α(a)")


@dataclass
class InclusionData:
    """The homomorphism α_{Y,X}: ℳ_X → ℳ_Y on a basis of ℳ_X"""

    images: np.ndarray
    commutation_residual: float
    multiplicativity_residual: float
    target_residual: float
    image_dimension: int
    source_dimension: int
    target_dimension: int

    @property
    def injective(self) -> bool:
        return self.image_dimension == self.source_dimension

    @property
    def surjective(self) -> bool:
        return self.image_dimension == self.target_dimension and self.target_residual < settings.residual_tol


def inclusion(x_region: Region, y_region: Region, family: RegionFamily) -> InclusionData:
    if not x_region.issubset(y_region):
        raise DimensionMismatch(f"{family.label(x_region)} is not contained in {family.label(y_region)}")
    x = family.data(x_region)
    y = family.data(y_region)
    p = y.pi_hat
    commutation = 0.0
    images = []
    for a in x.algebra.basis:
        lifted = lift(a, x, y)
        commutation = max(commutation, frob(lifted @ p - p @ lifted) / max(1.0, frob(lifted)))
        images.append(lifted @ p)
    if commutation > settings.tol:
        raise CommutationFailure(
            f"[x⊗I, Π̂({family.label(y_region)})] = {commutation:.3e}; the interaction is not frustration free"
        )
    images = np.stack(images) if images else np.zeros((0, y.bipartition.dim_plus, y.bipartition.dim_plus))
    multiplicative = 0.0
    for (i, a), (j, b) in itertools.product(enumerate(x.algebra.basis), repeat=2):
        multiplicative = max(multiplicative, frob(include(a @ b, x, y) - images[i] @ images[j]))
    target = max((span_residual(im, y.algebra.basis) for im in images), default=0.0)
    rank = numerical_rank(images.reshape(len(images), -1), settings.residual_tol) if len(images) else 0
    return InclusionData(images=images, commutation_residual=commutation,
                         multiplicativity_residual=multiplicative, target_residual=target,
                         image_dimension=rank, source_dimension=x.algebra.dimension,
                         target_dimension=y.algebra.dimension)


def extendability_defect(x_region: Region, y_region: Region, family: RegionFamily) -> float:
    """‖range(Tr_{Y₊∖X₊}Π̂(Y)) − Π̂(X)‖"""
    x = family.data(x_region)
    y = family.data(y_region)
    reduced = partial_trace(y.pi_hat, y.plus_dims, keep=_plus_positions(x, y))
    return frob(range_projection(hermitian_part(reduced)) - x.pi_hat)


def extendability_check(x_region: Region, y_region: Region, family: RegionFamily) -> bool:
    return extendability_defect(x_region, y_region, family) < settings.tol


@dataclass
class PullbackData:
    """α*_{Y,X}(ω_Y) on ℳ_X"""

    density: ComplexMatrix
    expectation_density: ComplexMatrix
    faithful: bool
    identity_residual: float


def pullback_state(x_region: Region, y_region: Region, family: RegionFamily,
                   rng: Optional[np.random.Generator] = None) -> PullbackData:
    """
    Density Tr_{Y₊∖X₊}Tr_{Y₋}Π(Y)/TrΠ(Y) of ω_Y∘α_{Y,X}.

    Faithfulness on ℳ_X is read off its Hilbert–Schmidt projection onto ℳ_X,
    which must be invertible on the unit Π̂(X).
    """
    rng = np.random.default_rng(settings.seed) if rng is None else rng
    x = family.data(x_region)
    y = family.data(y_region)
    dims = [family.spec.dim(s) for s in y.full_order]
    offset = len(y.minus_order)
    pi_y = y.ground.projection_pi
    density = partial_trace(pi_y, dims, keep=[offset + k for k in _plus_positions(x, y)])
    density = as_matrix(density / np.trace(pi_y).real, "pullback density")
    projected = as_matrix(hermitian_part(x.algebra.project(density)), "E(ρ)")
    faithful = frob(range_projection(projected, 1e-8) - x.pi_hat) < settings.residual_tol
    vacuum_y = partial_trace(pi_y, dims, keep=range(offset, len(dims))) / np.trace(pi_y).real
    identity = 0.0
    k = x.algebra.dimension
    for _ in range(4):
        a = np.tensordot(rng.normal(size=k) + 1j * rng.normal(size=k), x.algebra.basis, axes=1)
        lhs = np.trace(vacuum_y @ include(a, x, y))
        identity = max(identity, abs(lhs - np.trace(density @ a)))
    return PullbackData(density=density, expectation_density=projected, faithful=bool(faithful),
                        identity_residual=float(identity))


def idempotent_transfer(pi: np.ndarray, order: Sequence[str], y: RegionData, family: RegionFamily) -> np.ndarray:
    """F = O(Π⊗I)O⁻¹ on 𝔄_{Y₊} for a projection Π on the factors ``order``."""
    dims = [family.spec.dim(s) for s in y.full_order]
    embedded = embed_operator(pi, [y.full_order.index(s) for s in order], dims)
    return conjugate_superop(embedded, y.bipartition).transfer()


def nested_idempotents_check(x_region: Region, y_region: Region, family: RegionFamily) -> Dict[str, float]:
    """F_Y∘F_X = F_Y = F_X∘F_Y as transfer matrices."""
    x = family.data(x_region)
    y = family.data(y_region)
    fx = idempotent_transfer(x.ground.projection_pi, x.full_order, y, family)
    fy = idempotent_transfer(y.ground.projection_pi, y.full_order, y, family)
    scale = max(1.0, frob(fy))
    return {
        "left": frob(fy @ fx - fy) / scale,
        "right": frob(fx @ fy - fy) / scale,
        "idempotent_x": frob(fx @ fx - fx) / max(1.0, frob(fx)),
    }


@dataclass
class NetReport:
    """Composition law and disjoint commutation over a family"""

    composition_residual: float = 0.0
    commutation_residual: float = 0.0
    chains: int = 0
    disjoint_pairs: int = 0
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def net_axioms_check(family: RegionFamily) -> NetReport:
    tol = settings.residual_tol
    report = NetReport()
    for x_r, y_r, z_r in family.chains():
        x, y, z = family.data(x_r), family.data(y_r), family.data(z_r)
        worst = max((frob(include(include(a, x, y), y, z) - include(a, x, z)) for a in x.algebra.basis),
                    default=0.0)
        report.chains += 1
        report.composition_residual = max(report.composition_residual, worst)
        if worst >= tol:
            report.violations.append(
                f"ι∘ι ≠ ι on {family.label(x_r)} ⊆ {family.label(y_r)} ⊆ {family.label(z_r)} ({worst:.2e})")
    for x_r, y_r, z_r in family.disjoint_triples():
        x, y, z = family.data(x_r), family.data(y_r), family.data(z_r)
        worst = 0.0
        for a in x.algebra.basis:
            ia = include(a, x, z)
            for b in y.algebra.basis:
                ib = include(b, y, z)
                worst = max(worst, frob(ia @ ib - ib @ ia))
        report.disjoint_pairs += 1
        report.commutation_residual = max(report.commutation_residual, worst)
        if worst >= tol:
            report.violations.append(
                f"ℳ_{family.label(x_r)} and ℳ_{family.label(y_r)} do not commute in "
                f"{family.label(z_r)} ({worst:.2e})")
    logger.info(f"Net axioms: {report.chains} chains, {report.disjoint_pairs} disjoint pairs, "
                f"{len(report.violations)} violations")
    return report


def _flow_unitary(xi: np.ndarray, t: float) -> np.ndarray:
    return psd_function(xi, lambda v: np.power(v, 2j * t))


@dataclass
class ModularReport:
    """max ‖σ^Y_t(ι(x)) − ι(σ^X_t(x))‖ per sample time"""

    residuals: Dict[float, float] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def modular_consistency_check(family: RegionFamily, times: Optional[Sequence[float]] = None) -> ModularReport:
    times = settings.modular_grid if times is None else list(times)
    report = ModularReport()
    for t in times:
        worst = 0.0
        for x_r, y_r in family.nested_pairs():
            x, y = family.data(x_r), family.data(y_r)
            ux = _flow_unitary(x.xi, t)
            uy = _flow_unitary(y.xi, t)
            for a in x.algebra.basis:
                lhs = uy @ include(a, x, y) @ dagger(uy)
                rhs = include(ux @ a @ dagger(ux), x, y)
                worst = max(worst, frob(lhs - rhs))
            if worst >= settings.residual_tol:
                report.violations.append(
                    f"σ_t does not intertwine {family.label(x_r)} ⊆ {family.label(y_r)} at t = {t}")
        report.residuals[float(t)] = worst
    return report


@dataclass
class BoundaryPair:
    x: str
    y: str
    qualifying: bool
    iso: bool
    surjective: bool
    dim_x: int
    dim_y: int
    signature_x: Tuple[int, ...]
    signature_y: Tuple[int, ...]


@dataclass
class BoundaryReport:
    interaction_range: float
    pairs: List[BoundaryPair] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.iso and p.surjective for p in self.pairs if p.qualifying)


def qualifies(x_region: Region, y_region: Region, family: RegionFamily, r: float) -> bool:
    """Every site of Y∖X lies farther than R from the hyperplane."""
    grown = y_region.sites - x_region.sites
    return all(abs(family.spec.sites[s].height) > r for s in grown)


def boundary_pair(x_region: Region, y_region: Region, family: RegionFamily, r: float) -> BoundaryPair:
    x = family.data(x_region)
    y = family.data(y_region)
    inc = inclusion(x_region, y_region, family)
    sig_x = x.algebra.block_signature if x.algebra.dimension else ()
    sig_y = y.algebra.block_signature if y.algebra.dimension else ()
    return BoundaryPair(
        x=family.label(x_region), y=family.label(y_region),
        qualifying=qualifies(x_region, y_region, family, r),
        iso=sorted(sig_x) == sorted(sig_y), surjective=inc.surjective,
        dim_x=x.algebra.dimension, dim_y=y.algebra.dimension,
        signature_x=tuple(sig_x), signature_y=tuple(sig_y),
    )


def boundary_reduction_check(family: RegionFamily, r: Optional[float] = None) -> BoundaryReport:
    r = family.spec.interaction_range if r is None else r
    report = BoundaryReport(interaction_range=r)
    for x_r, y_r in family.nested_pairs():
        report.pairs.append(boundary_pair(x_r, y_r, family, r))
    failed = [p for p in report.pairs if p.qualifying and not (p.iso and p.surjective)]
    for p in failed:
        logger.warning(f"Boundary reduction fails for {p.x} ⊆ {p.y}: {p.signature_x} vs {p.signature_y}")
    return report


class SiteEntry(BaseModel):
    name: str = Field(..., description="Site identifier")
    dim: int = Field(..., gt=0, description="Local Hilbert space dimension")
    height: float = Field(..., description="Signed distance from the reflection hyperplane")


class TermEntry(BaseModel):
    support: List[str] = Field(..., min_length=1, description="Sites in factor order")
    matrix: MatrixFile = Field(..., description="Hermitian term on the support")
    label: str = Field("", description="Free-form tag")


class InteractionFile(BaseModel):
    """Interaction descriptor file"""

    name: str = Field("interaction", description="Interaction name")
    sites: List[SiteEntry]
    mirror: List[Tuple[str, str]] = Field(..., description="(plus site, minus site) pairs")
    terms: List[TermEntry]

    def build(self) -> InteractionSpec:
        return InteractionSpec(
            sites=[SiteInfo(s.name, s.dim, s.height) for s in self.sites],
            mirror=dict(self.mirror),
            terms=[Term(tuple(t.support), t.matrix.to_matrix(), t.label) for t in self.terms],
            name=self.name,
        )


class RegionEntry(BaseModel):
    label: str = Field("", description="Region name used in reports")
    plus: List[str] = Field(..., description="Upper-half sites; the lower half is their mirror")


class RegionsFile(BaseModel):
    regions: List[RegionEntry]


def _read_json(path: Path, model):
    try:
        return model.model_validate(json.loads(path.read_text()))
    except FileNotFoundError as e:
        raise ParseError(str(path), "file not found") from e
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.msg, offset=e.pos) from e
    except ValidationError as e:
        raise ParseError(str(path), str(e)) from e


def load_interaction(path: Union[str, Path]) -> InteractionSpec:
    return _read_json(Path(path), InteractionFile).build()


def load_regions(path: Union[str, Path], spec: InteractionSpec) -> List[Region]:
    payload = _read_json(Path(path), RegionsFile)
    regions = []
    for entry in payload.regions:
        unknown = [s for s in entry.plus if s not in spec.mirror]
        if unknown:
            raise ParseError(str(path), f"region {entry.label!r} names unknown plus sites {unknown}")
        regions.append(spec.region(entry.plus, entry.label))
    return regions
