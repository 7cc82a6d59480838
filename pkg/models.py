"""
Worked models: the toric code on a slab, its boundary algebras and Jones
tower, fusion data of a few fusion categories, and string-net modular data.

Pauli-group statements are checked twice: exactly over GF(2) and, for small
sizes, on dense matrices.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from bipartition import Bipartition, Region
from config import settings
from errors import DimensionMismatch, FrustrationDetected, Inadmissible, TooLarge
from localnet import InteractionSpec, RegionFamily, SiteInfo, Term
from rpcore import RPHamiltonian, build_rp_hamiltonian
from staralg import MatrixStarAlgebra, algebra_equal, generated_algebra
from tensorlab import ComplexMatrix, as_matrix, embed_operator, frob, kron

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


# --- Pauli strings over GF(2) -------------------------------------------------

def pauli_row(n: int, x: Sequence[int] = (), z: Sequence[int] = ()) -> np.ndarray:
    """Symplectic row (x | z) for X on qubits ``x`` and Z on qubits ``z`` (0-based)."""
    row = np.zeros(2 * n, dtype=np.uint8)
    row[list(x)] = 1
    row[[n + q for q in z]] = 1
    return row


def pauli_matrix(row: np.ndarray) -> ComplexMatrix:
    """X^x Z^z on each qubit; phases are irrelevant for spans."""
    n = len(row) // 2
    factors = []
    for q in range(n):
        f = np.eye(2, dtype=np.complex128)
        if row[q]:
            f = f @ PAULI["X"]
        if row[n + q]:
            f = f @ PAULI["Z"]
        factors.append(f)
    return kron(*factors)


def symplectic(a: np.ndarray, b: np.ndarray) -> int:
    n = len(a) // 2
    return int((a[:n] @ b[n:] + a[n:] @ b[:n]) % 2)


def gf2_reduce(rows: np.ndarray) -> np.ndarray:
    """Row echelon form over GF(2) with zero rows dropped."""
    m = (np.asarray(rows, dtype=np.uint8) % 2).copy()
    if m.ndim != 2 or m.shape[0] == 0:
        return m.reshape(0, m.shape[-1] if m.ndim == 2 else 0)
    rank = 0
    for col in range(m.shape[1]):
        pivot = next((r for r in range(rank, m.shape[0]) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(m.shape[0]):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
        if rank == m.shape[0]:
            break
    return m[:rank]


def gf2_rank(rows: np.ndarray) -> int:
    return int(gf2_reduce(rows).shape[0])


def in_row_space(row: np.ndarray, rows: np.ndarray) -> bool:
    return gf2_rank(np.vstack([rows, row])) == gf2_rank(rows) if len(rows) else not np.any(row)


def group_elements(rows: np.ndarray) -> List[np.ndarray]:
    """All 2^r elements of the group generated by ``rows`` (modulo phases)."""
    basis = gf2_reduce(rows)
    out = []
    for coeffs in itertools.product((0, 1), repeat=basis.shape[0]):
        c = np.array(coeffs, dtype=np.uint8)
        out.append((c @ basis) % 2 if basis.shape[0] else np.zeros(rows.shape[1], dtype=np.uint8))
    return out


def commutation_matrix(rows: np.ndarray) -> np.ndarray:
    k = rows.shape[0]
    return np.array([[symplectic(rows[i], rows[j]) for j in range(k)] for i in range(k)], dtype=np.uint8)


@dataclass(frozen=True)
class PauliAlgebraData:
    """Dimension, center and Wedderburn signature of the algebra of a Pauli group"""

    rank: int
    center_rank: int
    signature: Tuple[int, ...]

    @property
    def dimension(self) -> int:
        return 2 ** self.rank


def pauli_algebra_data(rows: np.ndarray) -> PauliAlgebraData:
    """
    The span of a Pauli group G is ⊕ over characters of Z(G) of M_m.

    With r = rank G and K the commutation matrix, the center has rank
    r − rank K and every block has size 2^{rank K / 2}.
    """
    r = gf2_rank(rows)
    k = gf2_rank(commutation_matrix(rows)) if len(rows) else 0
    c = r - k
    return PauliAlgebraData(rank=r, center_rank=c, signature=tuple([2 ** (k // 2)] * (2 ** c)))


def stabilizer_ground_degeneracy(rows: np.ndarray, n: int) -> int:
    """2^{n − rank} for commuting, sign-consistent stabilizer generators."""
    for a, b in itertools.combinations(rows, 2):
        if symplectic(a, b):
            raise DimensionMismatch("stabilizer generators do not commute")
    return 2 ** (n - gf2_rank(rows)) if len(rows) else 2 ** n


# --- toric code on a slab -----------------------------------------------------

def edge_name(level: int, index: int, minus: bool = False) -> str:
    return f"e{'-' if minus else ''}{level}.{index}"


@dataclass(frozen=True)
class Stabilizer:
    """Star (X) or plaquette (Z) term around the point ``center``"""

    kind: str
    center: Tuple[int, int]
    sites: Tuple[str, ...]
    side: str

    @property
    def label(self) -> str:
        return f"{self.kind}{self.center}{'' if self.side == 'plus' else self.side}"


def toric_stabilizers(L: int, depth: int, start: int = 1) -> List[Stabilizer]:
    """
    Edges k of level ℓ sit at (k − ½, ℓ − ½) and mirror to (k − ½, −(ℓ − ½)).

    A lattice point (a, h) touches edges a and a+1 of levels h and h+1, level 0
    standing for the mirror of level 1. Points with a + h odd carry a star.
    """
    out = []
    for a in range(start, start + L - 1):
        kind = "X" if a % 2 else "Z"
        sites = (edge_name(1, a, True), edge_name(1, a + 1, True), edge_name(1, a), edge_name(1, a + 1))
        out.append(Stabilizer(kind, (a, 0), sites, "cross"))
    for h in range(1, depth):
        for a in range(start, start + L - 1):
            kind = "X" if (a + h) % 2 else "Z"
            for minus, side in ((False, "plus"), (True, "minus")):
                sites = tuple(edge_name(lv, k, minus) for lv in (h, h + 1) for k in (a, a + 1))
                out.append(Stabilizer(kind, (a, h), sites, side))
    return out


def _stabilizer_term(s: Stabilizer) -> Term:
    return Term(s.sites, as_matrix(-kron(*[PAULI[s.kind]] * len(s.sites))), s.label)


def toric_interaction(L: int, depth: int = 1, start: int = 1) -> InteractionSpec:
    """InteractionSpec of H = −Σ stabilizers on an L×depth window and its mirror."""
    if L < 2 or depth < 1:
        raise DimensionMismatch(f"window needs L ≥ 2 and depth ≥ 1, got L={L}, depth={depth}")
    if 2 * L * depth > settings.max_qubits:
        raise TooLarge(f"{2 * L * depth} qubits exceed max_qubits = {settings.max_qubits}")
    plus = [(lv, k) for lv in range(1, depth + 1) for k in range(start, start + L)]
    sites = [SiteInfo(edge_name(lv, k), 2, lv - 0.5) for lv, k in plus]
    sites += [SiteInfo(edge_name(lv, k, True), 2, -(lv - 0.5)) for lv, k in plus]
    mirror = {edge_name(lv, k): edge_name(lv, k, True) for lv, k in plus}
    terms = [_stabilizer_term(s) for s in toric_stabilizers(L, depth, start)]
    return InteractionSpec(sites, mirror, terms, name=f"toric L={L} depth={depth}")


def toric_window(spec: InteractionSpec, start: int, width: int, levels: int, label: str = "") -> Region:
    plus = [edge_name(lv, k) for lv in range(1, levels + 1) for k in range(start, start + width)]
    missing = [s for s in plus if s not in spec.mirror]
    if missing:
        raise DimensionMismatch(f"window leaves the slab at {missing}")
    return spec.region(plus, label or f"[{start}..{start + width - 1}]x{levels}")


def stabilizer_rows(stabilizers: Sequence[Stabilizer], spec: InteractionSpec,
                    plus_order: Sequence[str]) -> np.ndarray:
    """Symplectic rows over the qubit order minus sites, then plus sites."""
    order = [spec.mirror[s] for s in plus_order] + list(plus_order)
    n = len(order)
    rows = []
    for s in stabilizers:
        q = [order.index(site) for site in s.sites]
        rows.append(pauli_row(n, x=q) if s.kind == "X" else pauli_row(n, z=q))
    return np.array(rows, dtype=np.uint8).reshape(len(rows), 2 * n)


def require_commuting(rows: np.ndarray, stabilizers: Sequence[Stabilizer]) -> None:
    """
    Commuting projector check: the projectors (I − S)/2 of Pauli stabilizers S
    commute iff every pair of symplectic rows has vanishing symplectic form.
    """
    for (i, a), (j, b) in itertools.combinations(enumerate(rows), 2):
        if symplectic(a, b):
            raise FrustrationDetected(f"stabilizers {stabilizers[i].label} and {stabilizers[j].label} anticommute")


@dataclass(frozen=True, eq=False)
class ToricSlab:
    """H = H₋ + H₀ˣ + H₊ for the toric code restricted to a window"""

    L: int
    depth: int
    start: int
    spec: InteractionSpec
    stabilizers: Tuple[Stabilizer, ...]
    hamiltonian: RPHamiltonian
    plus_order: Tuple[str, ...]

    @property
    def bipartition(self) -> Bipartition:
        return self.hamiltonian.bipartition

    @property
    def n_qubits(self) -> int:
        return 2 * len(self.plus_order)

    def symplectic_rows(self) -> np.ndarray:
        return stabilizer_rows(self.stabilizers, self.spec, self.plus_order)

    def expected_degeneracy(self) -> int:
        return stabilizer_ground_degeneracy(self.symplectic_rows(), self.n_qubits)


def build_toric_slab(L: int, depth: int = 1, start: int = 1, verify: bool = True) -> ToricSlab:
    spec = toric_interaction(L, depth, start)
    plus_order = tuple(spec.plus_sites)
    dims = [2] * len(plus_order)
    stabilizers = tuple(toric_stabilizers(L, depth, start))
    require_commuting(stabilizer_rows(stabilizers, spec, plus_order), stabilizers)
    h_plus = np.zeros((2 ** len(plus_order),) * 2, dtype=np.complex128)
    cross = []
    for s in stabilizers:
        if s.side == "plus":
            h_plus = h_plus - embed_operator(kron(*[PAULI[s.kind]] * 4), [plus_order.index(q) for q in s.sites],
                                             dims)
        elif s.side == "cross":
            half = [q for q in s.sites if q in spec.mirror]
            cross.append(embed_operator(kron(*[PAULI[s.kind]] * len(half)),
                                        [plus_order.index(q) for q in half], dims))
    b = Bipartition.from_sites([(s, 2) for s in plus_order], [spec.mirror[s] for s in plus_order],
                               spec.mirror)
    rp = build_rp_hamiltonian(h_plus, cross, b, verify=verify)
    logger.info(f"Toric slab L={L} depth={depth}: {2 * len(plus_order)} qubits, "
                f"{len(stabilizers)} stabilizers")
    return ToricSlab(L=L, depth=depth, start=start, spec=spec, stabilizers=stabilizers,
                     hamiltonian=rp, plus_order=plus_order)


def toric_family(L: int, depth: int = 1) -> RegionFamily:
    """Every window [s..s+w−1] × levels of the slab, w ≥ 2."""
    spec = toric_interaction(L, depth)
    regions = [toric_window(spec, s, w, lv)
               for lv in range(1, depth + 1) for w in range(2, L + 1) for s in range(1, L - w + 2)]
    return RegionFamily(spec, regions)


# --- boundary algebras and the Jones tower ------------------------------------

def boundary_generator_rows(L: int, n: Optional[int] = None) -> np.ndarray:
    """σˣ_{2k+1}σˣ_{2k+2} and σᶻ_{2k+2}σᶻ_{2k+3} with all indices ≤ L, on n ≥ L qubits."""
    n = L if n is None else n
    rows = []
    for q in range(1, L):
        # 1-based pair (q, q+1): odd q is an X pair, even q a Z pair
        if q % 2:
            rows.append(pauli_row(n, x=[q - 1, q]))
        else:
            rows.append(pauli_row(n, z=[q - 1, q]))
    return np.array(rows, dtype=np.uint8).reshape(len(rows), 2 * n)


def expected_boundary_signature(L: int) -> Tuple[int, ...]:
    if L % 2:
        return (2 ** ((L - 1) // 2),)
    return (2 ** (L // 2 - 1),) * 2


@dataclass(frozen=True, eq=False)
class BoundaryAlgebra:
    """𝒜_L with its exact Pauli-group data and, when small, its dense form"""

    L: int
    generators: np.ndarray
    exact: PauliAlgebraData
    expected_signature: Tuple[int, ...]
    algebra: Optional[MatrixStarAlgebra] = None

    @property
    def dimension(self) -> int:
        return self.exact.dimension

    def center_rows(self) -> List[np.ndarray]:
        return [g for g in group_elements(self.generators)
                if all(symplectic(g, r) == 0 for r in self.generators)]


def toric_boundary_algebra(L: int, dense_limit: int = 6) -> BoundaryAlgebra:
    if not 2 <= L <= 12:
        raise DimensionMismatch(f"boundary algebras are tabulated for 2 ≤ L ≤ 12, got {L}")
    rows = boundary_generator_rows(L)
    exact = pauli_algebra_data(rows)
    algebra = None
    if L <= dense_limit:
        algebra = generated_algebra([pauli_matrix(r) for r in rows])
    return BoundaryAlgebra(L=L, generators=rows, exact=exact,
                           expected_signature=expected_boundary_signature(L), algebra=algebra)


def jones_row(L: int, n: int) -> np.ndarray:
    """Q with e_L = (1 + Q)/2: Z_L Z_{L+1} for even L, X_L X_{L+1} for odd L."""
    return pauli_row(n, z=[L - 1, L]) if L % 2 == 0 else pauli_row(n, x=[L - 1, L])


@dataclass
class JonesReport:
    L: int
    relation_holds: bool
    generates: bool
    index_four: bool
    dense_residual: Optional[float] = None
    seed_residual: Optional[float] = None
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def toric_jones_tower_check(L: int, dense_limit: int = 4) -> JonesReport:
    """
    e_L a e_L = E_{L−1}(a) e_L on 𝒜_L, 𝒜_L ∪ {e_L} generates 𝒜_{L+1} and
    dim 𝒜_{L+1} = 4 dim 𝒜_{L−1}.

    For a Pauli element a the relation reads: a commutes with Q exactly when
    a ∈ 𝒜_{L−1}, since E_{L−1} is the Hilbert–Schmidt projection.
    """
    if not 2 <= L <= 10:
        raise DimensionMismatch(f"Jones tower check needs 2 ≤ L ≤ 10, got {L}")
    n = L + 1
    gens = boundary_generator_rows(L, n)
    lower = boundary_generator_rows(L - 1, n)
    upper = boundary_generator_rows(L + 1, n)
    q = jones_row(L, n)

    relation = all((symplectic(a, q) == 0) == in_row_space(a, lower) for a in group_elements(gens))
    generates = gf2_rank(np.vstack([gens, q])) == gf2_rank(upper) and \
        all(in_row_space(r, np.vstack([gens, q])) for r in upper)
    index_four = 2 ** gf2_rank(upper) == 4 * 2 ** gf2_rank(lower)
    report = JonesReport(L=L, relation_holds=relation, generates=bool(generates), index_four=index_four)

    if L <= dense_limit:
        d = 2 ** n
        e = 0.5 * (np.eye(d) + pauli_matrix(q))
        sub = generated_algebra([pauli_matrix(r) for r in lower], ambient_dim=d)
        worst = 0.0
        for a in group_elements(gens):
            am = pauli_matrix(a)
            worst = max(worst, frob(e @ am @ e - sub.project(am) @ e))
        report.dense_residual = worst
        tower = generated_algebra([pauli_matrix(r) for r in gens] + [e])
        if not algebra_equal(tower, generated_algebra([pauli_matrix(r) for r in upper])):
            report.failures.append("𝒜_L ∪ {e_L} does not generate 𝒜_{L+1} densely")
        if worst > settings.residual_tol:
            report.failures.append(f"e a e ≠ E(a) e densely (residual {worst:.2e})")
    if L == 2:
        d = 2 ** n
        e = 0.5 * (np.eye(d) + pauli_matrix(q))
        report.seed_residual = frob(e @ pauli_matrix(pauli_row(n, x=[0, 1])) @ e)
        if report.seed_residual > settings.residual_tol:
            report.failures.append("e σˣ₁σˣ₂ e ≠ 0")
    if not relation:
        report.failures.append("e a e = E(a) e fails on the Pauli group")
    if not generates:
        report.failures.append("𝒜_L ∪ {e_L} does not generate 𝒜_{L+1}")
    if not index_four:
        report.failures.append("dim 𝒜_{L+1} ≠ 4 dim 𝒜_{L−1}")
    return report


# --- a closed toric-like instance with a unique ground state ------------------

@dataclass(frozen=True, eq=False)
class SphereInstance:
    """Two edges per side glued into a closed surface: one star, four plaquette bonds"""

    h_plus: ComplexMatrix
    cross_terms: Tuple[ComplexMatrix, ...]
    bipartition: Bipartition
    symplectic_rows: np.ndarray

    @property
    def expected_degeneracy(self) -> int:
        return stabilizer_ground_degeneracy(self.symplectic_rows, 4)


def sphere_toric_instance() -> SphereInstance:
    """H = −X⁴ − Z_{−1}Z_{+1} − Z_{−2}Z_{+2} − Z_{−1}Z_{−2} − Z_{+1}Z_{+2} on ℂ²ˣ²⊗ℂ²ˣ²."""
    x, z, i = PAULI["X"], PAULI["Z"], PAULI["I"]
    h_plus = -kron(z, z)
    cross = (kron(x, x), kron(z, i), kron(i, z))
    # qubit order −1, −2, +1, +2
    rows = np.array([pauli_row(4, x=[0, 1, 2, 3]), pauli_row(4, z=[0, 2]), pauli_row(4, z=[1, 3]),
                     pauli_row(4, z=[0, 1]), pauli_row(4, z=[2, 3])], dtype=np.uint8)
    return SphereInstance(h_plus=as_matrix(h_plus), cross_terms=tuple(as_matrix(c) for c in cross),
                          bipartition=Bipartition.plain([2, 2]), symplectic_rows=rows)


# --- fusion categories ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FusionData:
    """Simple objects, duals and fusion multiplicities N[i, j, k] = N_ij^k; index 0 is the unit"""

    name: str
    labels: Tuple[str, ...]
    dual: Tuple[int, ...]
    fusion: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if self.fusion.shape != (n, n, n):
            raise DimensionMismatch(f"fusion tensor of {self.name} must be {n}x{n}x{n}")
        for i in range(n):
            if not (np.array_equal(self.fusion[0, i], np.eye(n, dtype=int)[i]) and
                    np.array_equal(self.fusion[i, 0], np.eye(n, dtype=int)[i])):
                raise DimensionMismatch(f"{self.labels[0]} is not a unit of {self.name}")
            if self.fusion[i, self.dual[i], 0] != 1:
                raise DimensionMismatch(f"{self.labels[i]} ⊗ dual does not contain the unit once")
            if self.dual[self.dual[i]] != i:
                raise DimensionMismatch(f"dual of {self.labels[i]} is not an involution")
        # N_ij^k = N_{j* i*}^{k*}
        dual = list(self.dual)
        mirrored = self.fusion[np.ix_(dual, dual, dual)].transpose(1, 0, 2)
        if not np.array_equal(self.fusion, mirrored):
            raise DimensionMismatch(f"fusion rules of {self.name} are not compatible with the duals")
        d = self.quantum_dimensions
        if not np.allclose(d, d[dual]):
            raise DimensionMismatch(f"quantum dimensions of {self.name} differ between objects and duals")

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise Inadmissible(f"{label!r} is not a simple object of {self.name}") from None

    def fusion_matrix(self, i: int) -> np.ndarray:
        """(N_i)_{jk} = N_ij^k."""
        return self.fusion[i].astype(float)

    @property
    def quantum_dimensions(self) -> np.ndarray:
        """Perron–Frobenius eigenvalue of each N_i."""
        return np.array([float(np.max(np.abs(np.linalg.eigvals(self.fusion_matrix(i)))))
                         for i in range(len(self.labels))])

    def qdim(self, label: str) -> float:
        return float(self.quantum_dimensions[self.index(label)])

    @property
    def global_dimension(self) -> float:
        return float(np.sum(self.quantum_dimensions ** 2))

    def dimension_residual(self) -> float:
        """max |d_i d_j − Σ_k N_ij^k d_k|."""
        d = self.quantum_dimensions
        return float(np.max(np.abs(np.einsum("i,j->ij", d, d) - np.einsum("ijk,k->ij", self.fusion, d))))


def _fusion(name: str, labels: Sequence[str], rules: Dict[Tuple[int, int], Sequence[int]],
            dual: Optional[Sequence[int]] = None) -> FusionData:
    n = len(labels)
    t = np.zeros((n, n, n), dtype=int)
    for i in range(n):
        t[0, i, i] = t[i, 0, i] = 1
    for (i, j), out in rules.items():
        t[i, j] = 0
        t[j, i] = 0
        for k in out:
            t[i, j, k] += 1
            if i != j:
                t[j, i, k] += 1
    return FusionData(name=name, labels=tuple(labels), dual=tuple(range(n)) if dual is None else tuple(dual),
                      fusion=t)


def trivial_fusion() -> FusionData:
    return _fusion("trivial", ["1"], {})


def vec_z2() -> FusionData:
    return _fusion("Vec(Z2)", ["0", "1"], {(1, 1): [0]})


def fibonacci() -> FusionData:
    return _fusion("Fibonacci", ["1", "τ"], {(1, 1): [0, 1]})


def ising() -> FusionData:
    return _fusion("Ising", ["1", "σ", "ψ"], {(1, 1): [0, 2], (1, 2): [1], (2, 2): [0]})


BUILTIN_FUSION = {
    "trivial": trivial_fusion,
    "vec_z2": vec_z2,
    "fibonacci": fibonacci,
    "ising": ising,
}


def builtin_fusion(name: str) -> FusionData:
    try:
        return BUILTIN_FUSION[name.lower()]()
    except KeyError:
        raise DimensionMismatch(f"unknown fusion category {name!r}; choose from {sorted(BUILTIN_FUSION)}") from None


def tensor_power_multiplicities(data: FusionData, m: int) -> np.ndarray:
    """Multiplicity of each simple in A^{⊗m} for A = ⊕ simples."""
    if m > settings.path_count_limit:
        raise TooLarge(f"tensor power {m} exceeds path_count_limit = {settings.path_count_limit}")
    step = data.fusion.sum(axis=1)
    mult = np.zeros(len(data.labels), dtype=np.int64)
    mult[0] = 1
    for _ in range(m):
        mult = mult @ step
    return mult


def fusion_hom_dims(data: FusionData, m: int, n: int) -> int:
    """dim hom(A^{⊗m}, A^{⊗n}) = Σ_k mult_m(k)·mult_n(k)."""
    if m < 0 or n < 0:
        raise DimensionMismatch("tensor powers must be non-negative")
    return int(tensor_power_multiplicities(data, m) @ tensor_power_multiplicities(data, n))


def fusion_hom_identities(data: FusionData, m: int, n: int) -> Dict[str, float]:
    """
    Residuals of dim hom(A^{⊗m}, A^{⊗n}) against identities computed apart from it.

    reciprocity: A is self-dual, so the dimension is the unit entry of M^{m+n}
    for the fusion matrix M of A. dimension_m, dimension_n: Σ_k mult(k)·d_k = D^m
    with D = Σ_i d_i, relative to D^m.
    """
    hom = fusion_hom_dims(data, m, n)
    step = data.fusion.sum(axis=1).astype(np.int64)
    unit_entry = int(np.linalg.matrix_power(step, m + n)[0, 0])
    d = data.quantum_dimensions
    total = float(np.sum(d))
    out = {"reciprocity": float(abs(hom - unit_entry))}
    for label, power in (("dimension_m", m), ("dimension_n", n)):
        weighted = float(tensor_power_multiplicities(data, power) @ d)
        out[label] = abs(weighted - total ** power) / total ** power
    return out


def fusion_signature(data: FusionData, m: int) -> Tuple[int, ...]:
    """Wedderburn signature of End(A^{⊗m})."""
    mult = tensor_power_multiplicities(data, m)
    return tuple(sorted((int(x) for x in mult if x > 0), reverse=True))


# --- string-net modular data ----------------------------------------------------

PlaquetteLabels = Tuple[str, str, str, str]


def _check_admissible(data: FusionData, labels: Sequence[PlaquetteLabels]) -> None:
    if not labels:
        raise Inadmissible("at least one plaquette is required")
    for l, plaquette in enumerate(labels):
        if len(plaquette) != 4:
            raise Inadmissible(f"plaquette {l + 1} needs labels (i, i', k, k')")
        for label in plaquette:
            data.index(label)
    for l in range(1, len(labels)):
        if labels[l][3] != labels[l - 1][0]:
            raise Inadmissible(f"k'_{l + 1} = {labels[l][3]} differs from i_{l} = {labels[l - 1][0]}")


def stringnet_modular_spectrum(data: FusionData, labels: Sequence[PlaquetteLabels]) -> float:
    """
    Modular exponent of a labelled strip: the flow multiplies the basis vector
    by exp(i·t·value).
    """
    _check_admissible(data, labels)
    d = data.qdim
    i_last = labels[-1][0]
    k_first = labels[0][3]
    value = np.log(d(i_last)) + sum(np.log(d(p[2])) for p in labels)
    value -= np.log(d(k_first)) + sum(np.log(d(p[1])) for p in labels)
    return float(value)


def stringnet_plaquette_product(data: FusionData, labels: Sequence[PlaquetteLabels]) -> Tuple[List[float], float]:
    """Per-plaquette log factors log(d_i d_k / d_i' d_k') and their sum."""
    for plaquette in labels:
        for label in plaquette:
            data.index(label)
    d = data.qdim
    factors = [float(np.log(d(i) * d(k)) - np.log(d(ip) * d(kp))) for i, ip, k, kp in labels]
    return factors, float(sum(factors))


def modular_phase(exponent: float, t: float) -> complex:
    return complex(np.exp(1j * t * exponent))
