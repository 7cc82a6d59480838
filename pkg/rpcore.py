"""
Operator-state correspondence, Choi matrices and reflection positivity verdicts.

O: ℋ₋⊗ℋ₊ → 𝔄₊ sends θ̂|η⟩⊗|ξ⟩ to |ξ⟩⟨η|. With v reshaped to V[a, i] and
θ̂ = U∘conj this is O(v) = (U†V)ᵀ.

Choi convention: Choi(Φ) = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|), i.e.
Choi[(i,p),(j,q)] = Φ(E_ij)[p,q].
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import null_space

from bipartition import Bipartition
from config import settings
from errors import (
    DimensionMismatch,
    LinearDependence,
    NotHermitian,
    NotHermitianAssembly,
    NotReflectionPositive,
    ZeroVector,
)
from tensorlab import (
    ComplexMatrix,
    as_matrix,
    as_vector,
    dagger,
    frob,
    heat_kernel,
    hermitian_part,
    is_hermitian,
    numerical_rank,
    realign,
    require_square,
)


def _check_state(v: np.ndarray, b: Bipartition) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.size != b.dim:
        raise DimensionMismatch(f"state of length {v.size} on a space of dimension {b.dim}")
    return v


def o_map(v: np.ndarray, b: Bipartition) -> ComplexMatrix:
    v = _check_state(v, b)
    mat = v.reshape(b.dim_minus, b.dim_plus)
    return as_matrix((dagger(b.theta_unitary) @ mat).T, "O(v)")


def o_inv(m: np.ndarray, b: Bipartition) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    require_square(m, b.dim_plus, "o_inv operand")
    return as_vector(b.theta_unitary @ m.T)


def reduced_density(v: np.ndarray, b: Bipartition) -> ComplexMatrix:
    """Tr_{ℋ₋}|v⟩⟨v| computed as O(v)O(v)†."""
    o = o_map(v, b)
    return as_matrix(o @ dagger(o), "reduced density")


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on d×d matrices stored by its Choi matrix"""

    choi: ComplexMatrix

    def __post_init__(self):
        c = as_matrix(self.choi, "choi")
        d = int(round(np.sqrt(c.shape[0])))
        if d * d != c.shape[0] or c.shape[0] != c.shape[1]:
            raise DimensionMismatch(f"Choi matrix must be d²×d², got {c.shape}")
        object.__setattr__(self, "choi", c)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.choi.shape[0])))

    def transfer(self) -> np.ndarray:
        """T with vec(Φ(X)) = T vec(X), row-major vec."""
        d = self.dim
        return self.choi.reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)

    @classmethod
    def from_transfer(cls, t: np.ndarray) -> "SuperOperator":
        d = int(round(np.sqrt(t.shape[0])))
        return cls(np.asarray(t).reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d))

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "SuperOperator":
        t = sum(np.kron(k, np.conj(k)) for k in kraus)
        return cls.from_transfer(t)

    def apply(self, x: np.ndarray) -> ComplexMatrix:
        d = self.dim
        require_square(np.asarray(x), d, "superoperator argument")
        return as_matrix((self.transfer() @ np.asarray(x).reshape(-1)).reshape(d, d), "Φ(x)")

    def compose(self, other: "SuperOperator") -> "SuperOperator":
        """self ∘ other"""
        return SuperOperator.from_transfer(self.transfer() @ other.transfer())


def conjugate_superop(t: np.ndarray, b: Bipartition) -> SuperOperator:
    """Choi matrix of X ↦ O(t·O⁻¹(X))."""
    t = np.asarray(t, dtype=np.complex128)
    require_square(t, b.dim, "conjugated operator")
    d = b.dim_plus
    u = b.theta_unitary
    t4 = t.reshape(d, d, d, d)
    choi = np.einsum("xq,xpai,aj->ipjq", np.conj(u), t4, u, optimize=True)
    return SuperOperator(choi.reshape(d * d, d * d))


@dataclass(frozen=True, eq=False)
class PositivityVerdict:
    """Outcome of a Choi or Gram positivity test"""

    positive: bool
    min_eigenvalue: float
    max_eigenvalue: float
    hermiticity_defect: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return {
            "positive": self.positive,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "hermiticity_defect": self.hermiticity_defect,
        }


def _psd_verdict(m: np.ndarray, tol: float) -> PositivityVerdict:
    defect = frob(m - dagger(m))
    w = np.linalg.eigvalsh(hermitian_part(m))
    lam_min, lam_max = float(w[0]), float(w[-1])
    scale = max(1.0, abs(lam_max))
    positive = defect <= tol * max(1.0, frob(m)) and lam_min >= -tol * scale
    return PositivityVerdict(positive, lam_min, lam_max, defect)


def is_completely_positive(s: SuperOperator, tol: Optional[float] = None) -> PositivityVerdict:
    tol = settings.tol if tol is None else tol
    return _psd_verdict(s.choi, tol)


def is_rp_operator(t: np.ndarray, b: Bipartition, tol: Optional[float] = None) -> PositivityVerdict:
    """Y ↦ Tr(tY) is reflection positive iff O t O⁻¹ is completely positive."""
    return is_completely_positive(conjugate_superop(t, b), tol)


def rp_functional(t: np.ndarray, x: np.ndarray, b: Bipartition) -> complex:
    """Z(Θ(X)⊗X) = Tr(t·Θ(X)⊗X)."""
    return complex(np.trace(np.asarray(t) @ np.kron(b.Theta(x), x)))


def rp_form_gram(t: np.ndarray, b: Bipartition) -> np.ndarray:
    """
    G[k, l] = Tr(t·Θ(E_k)⊗E_l) over the matrix units, so that
    Z(Θ(X)⊗X) = c†Gc for X = Σ c_k E_k.

    Evaluated term by term from the definition; independent of the Choi path.
    """
    t = np.asarray(t, dtype=np.complex128)
    require_square(t, b.dim, "RP form operator")
    d = b.dim_plus
    units = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = 1.0
            units.append(e)
    thetas = [b.Theta(e) for e in units]
    g = np.empty((d * d, d * d), dtype=np.complex128)
    for k, th in enumerate(thetas):
        for l, e in enumerate(units):
            g[k, l] = np.trace(t @ np.kron(th, e))
    return g


def rp_form_verdict(t: np.ndarray, b: Bipartition, tol: Optional[float] = None) -> PositivityVerdict:
    tol = settings.tol if tol is None else tol
    return _psd_verdict(rp_form_gram(t, b), tol)


def is_rp_state(v: np.ndarray, b: Bipartition, tol: Optional[float] = None) -> PositivityVerdict:
    """⟨v, θ̂ξ⊗ξ⟩ ≥ 0 for all ξ iff O(v) ⪰ 0."""
    tol = settings.tol if tol is None else tol
    v = _check_state(v, b)
    if np.linalg.norm(v) == 0:
        raise ZeroVector("reflection positivity of the zero vector is undefined")
    return _psd_verdict(o_map(v, b), tol)


def kraus_from_choi(choi: np.ndarray, rank_tol: Optional[float] = None) -> List[ComplexMatrix]:
    """Kraus operators K = √λ · unvec(v)ᵀ from the eigenvectors of a PSD Choi matrix."""
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    d = int(round(np.sqrt(choi.shape[0])))
    w, v = np.linalg.eigh(hermitian_part(np.asarray(choi)))
    if w.size == 0 or w[-1] <= 0:
        return []
    keep = w > rank_tol * w[-1]
    return [as_matrix(np.sqrt(w[k]) * v[:, k].reshape(d, d).T, "Kraus operator")
            for k in np.flatnonzero(keep)[::-1]]


def independence_rank(ops: Sequence[np.ndarray], tol: Optional[float] = None) -> int:
    tol = settings.independence_tol if tol is None else tol
    if not ops:
        return 0
    return numerical_rank(np.stack([np.asarray(o).reshape(-1) for o in ops]), tol)


@dataclass(frozen=True, eq=False)
class RPHamiltonian:
    """H = Θ(h₊)⊗I + I⊗h₊ − Σ_j Θ(O_j)⊗O_j"""

    h_plus: ComplexMatrix
    cross_terms: Tuple[ComplexMatrix, ...]
    assembled: ComplexMatrix
    bipartition: Bipartition
    semigroup: Tuple[Tuple[float, PositivityVerdict], ...] = field(default=())
    # False when the τ-grid Choi check was not run
    verified: bool = False

    @property
    def h_minus(self) -> ComplexMatrix:
        return self.bipartition.Theta(self.h_plus)

    @property
    def h_zero(self) -> ComplexMatrix:
        """The crossing part −Σ_j Θ(O_j)⊗O_j."""
        b = self.bipartition
        out = np.zeros((b.dim, b.dim), dtype=np.complex128)
        for o in self.cross_terms:
            out -= np.kron(b.Theta(o), o)
        return as_matrix(out, "H₀")

    @property
    def is_rp(self) -> bool:
        return self.verified and all(v.positive for _, v in self.semigroup)


def assemble_rp_hamiltonian(h_plus: np.ndarray, cross_terms: Sequence[np.ndarray],
                            b: Bipartition) -> ComplexMatrix:
    d = b.dim_plus
    eye = np.eye(d)
    h = np.kron(b.Theta(h_plus), eye) + np.kron(eye, np.asarray(h_plus))
    for o in cross_terms:
        h = h - np.kron(b.Theta(o), o)
    return as_matrix(h, "assembled Hamiltonian")


def semigroup_verdicts(h: np.ndarray, b: Bipartition, taus: Optional[Sequence[float]] = None,
                       tol: Optional[float] = None) -> List[Tuple[float, PositivityVerdict]]:
    """is_rp_operator(e^{−τH}) for every τ of the grid."""
    taus = settings.taus if taus is None else list(taus)
    return [(float(tau), is_rp_operator(heat_kernel(h, tau), b, tol)) for tau in taus]


def build_rp_hamiltonian(h_plus: np.ndarray, cross_terms: Sequence[np.ndarray], b: Bipartition,
                         taus: Optional[Sequence[float]] = None, verify: bool = True,
                         tol: Optional[float] = None) -> RPHamiltonian:
    h_plus = as_matrix(h_plus, "h_plus")
    require_square(h_plus, b.dim_plus, "h_plus")
    if not is_hermitian(h_plus):
        raise NotHermitian("h_plus must be Hermitian")
    cross_terms = tuple(as_matrix(o, "cross term") for o in cross_terms)
    for o in cross_terms:
        require_square(o, b.dim_plus, "cross term")
    rank = independence_rank(cross_terms)
    if rank != len(cross_terms):
        raise LinearDependence(f"{len(cross_terms)} cross terms span only rank {rank}")

    assembled = assemble_rp_hamiltonian(h_plus, cross_terms, b)
    if not is_hermitian(assembled):
        raise NotHermitianAssembly(
            f"‖H − H†‖ = {frob(assembled - dagger(assembled)):.3e}; "
            "Σ Θ(O_j)⊗O_j is not Hermitian"
        )

    verdicts: List[Tuple[float, PositivityVerdict]] = []
    if verify:
        if b.dim_plus ** 2 <= settings.choi_dim_limit:
            verdicts = semigroup_verdicts(assembled, b, taus, tol)
            failed = [tau for tau, v in verdicts if not v.positive]
            if failed:
                raise NotReflectionPositive(f"e^(-τH) not reflection positive at τ = {failed}")
            logger.debug(f"RP Hamiltonian verified on τ grid {[t for t, _ in verdicts]}")
        else:
            logger.warning(
                f"Skipping Choi verification: d² = {b.dim_plus ** 2} exceeds "
                f"choi_dim_limit = {settings.choi_dim_limit}"
            )

    return RPHamiltonian(h_plus=h_plus, cross_terms=cross_terms, assembled=assembled,
                         bipartition=b, semigroup=tuple(verdicts), verified=bool(verdicts))


def _traceless_frame(d: int) -> np.ndarray:
    """Real orthonormal d²×d² basis whose first column is vec(I)/√d."""
    first = np.eye(d).reshape(-1) / np.sqrt(d)
    rest = null_space(first.reshape(1, -1))
    return np.column_stack([first, rest])


def decompose_rp_hamiltonian(h: np.ndarray, b: Bipartition, tol: Optional[float] = None,
                             rank_tol: Optional[float] = None) -> RPHamiltonian:
    """
    Write a Hermitian H as Θ(h₊)⊗I + I⊗h₊ − Σ_j Θ(O_j)⊗O_j.

    H is expanded over {Θ(Q_k)⊗Q_l} with Q₀ = I/√d; the identity row and column
    give h₊ and the remaining block must be negative semidefinite.
    """
    tol = settings.tol if tol is None else tol
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    h = as_matrix(h, "Hamiltonian")
    require_square(h, b.dim, "Hamiltonian")
    if not is_hermitian(h):
        raise NotHermitian("only Hermitian Hamiltonians have a reflection positive structure")
    d = b.dim_plus
    u = b.theta_unitary
    lift = np.kron(u, np.eye(d))
    # frame in which θ̂ is plain conjugation
    h_frame = dagger(lift) @ h @ lift
    coeff_units = realign(h_frame, d, d)
    m = _traceless_frame(d)
    c = m.T @ coeff_units @ m
    basis = [m[:, k].reshape(d, d) for k in range(d * d)]
    scale = max(1.0, frob(c))

    asym = frob(np.conj(c[1:, 0]) - c[0, 1:])
    if asym > tol * scale:
        raise NotReflectionPositive(f"H is not reflection symmetric (defect {asym:.3e})")

    h_plus = sum((c[0, l] / np.sqrt(d)) * basis[l] for l in range(1, d * d)) if d > 1 else 0
    h_plus = h_plus + (c[0, 0].real / (2 * d)) * np.eye(d)

    cross_block = -c[1:, 1:]
    cross_terms: List[np.ndarray] = []
    if cross_block.size:
        verdict = _psd_verdict(cross_block, tol)
        if not verdict.positive:
            raise NotReflectionPositive(
                f"cross block not negative semidefinite (λ_min = {verdict.min_eigenvalue:.3e})"
            )
        w, v = np.linalg.eigh(hermitian_part(cross_block))
        cutoff = rank_tol * max(w[-1], 0.0)
        for j in np.flatnonzero(w > cutoff)[::-1]:
            o = sum(np.conj(v[l, j]) * basis[l + 1] for l in range(d * d - 1))
            cross_terms.append(np.sqrt(w[j]) * o)

    rp = build_rp_hamiltonian(hermitian_part(h_plus), cross_terms, b, verify=False)
    residual = frob(rp.assembled - h) / max(1.0, frob(h))
    if residual > settings.residual_tol:
        raise NotReflectionPositive(f"decomposition does not reproduce H (residual {residual:.3e})")
    logger.debug(f"Decomposed H into h₊ and {len(cross_terms)} cross terms (residual {residual:.2e})")
    return rp
