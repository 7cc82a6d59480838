"""
Perron–Frobenius analysis of symmetric completely positive maps on M_d.

For a †-closed Kraus family the transfer matrix T = Σ K⊗conj(K) is Hermitian,
so the peripheral spectrum lies in {ρ, −ρ} and averaging two consecutive
normalised iterates Ψⁿ(I)/ρⁿ removes the oscillating part of the Cesàro sum.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import null_space

from config import settings
from errors import NoConvergence, NotProjection, NotSymmetric, RPKitError
from rpcore import SuperOperator, independence_rank, kraus_from_choi
from staralg import (
    MatrixStarAlgebra,
    algebra_equal,
    commutant_of_set,
    orthonormal_span,
    range_isometry,
    span_residual,
)
from tensorlab import (
    ComplexMatrix,
    as_matrix,
    dagger,
    frob,
    hermitian_part,
    is_projection,
    psd_function,
    require_square,
    support_pinv,
    support_projection,
)


@dataclass(frozen=True, eq=False)
class CPMap:
    """Completely positive map X ↦ Σ K X K†"""

    kraus: Tuple[ComplexMatrix, ...]

    def __post_init__(self):
        kraus = tuple(as_matrix(k, "Kraus operator") for k in self.kraus)
        if not kraus:
            raise RPKitError("a CP map needs at least one nonzero Kraus operator")
        d = kraus[0].shape[0]
        for k in kraus:
            require_square(k, d, "Kraus operator")
        object.__setattr__(self, "kraus", kraus)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def transfer(self) -> np.ndarray:
        return sum(np.kron(k, np.conj(k)) for k in self.kraus)

    def apply(self, x: np.ndarray) -> ComplexMatrix:
        x = np.asarray(x, dtype=np.complex128)
        return as_matrix(sum(k @ x @ dagger(k) for k in self.kraus), "Ψ(x)")

    def apply_dual(self, y: np.ndarray) -> ComplexMatrix:
        y = np.asarray(y, dtype=np.complex128)
        return as_matrix(sum(dagger(k) @ y @ k for k in self.kraus), "Ψ*(y)")

    def superoperator(self) -> SuperOperator:
        return SuperOperator.from_kraus(self.kraus)


def symmetry_defect(kraus: Sequence[np.ndarray]) -> float:
    """‖Σ K⊗conj(K) − Σ K†⊗Kᵀ‖, zero iff Tr(Ψ(X)Y) = Tr(XΨ(Y))."""
    t = sum(np.kron(k, np.conj(k)) for k in kraus)
    t_sym = sum(np.kron(dagger(k), k.T) for k in kraus)
    return frob(t - t_sym) / max(1.0, frob(t))


@dataclass(frozen=True, eq=False)
class SymmetricCPMap(CPMap):
    """CP map with Tr(Ψ(X)Y) = Tr(XΨ(Y)) and independent Kraus operators"""

    def __post_init__(self):
        super().__post_init__()
        defect = symmetry_defect(self.kraus)
        if defect > settings.tol:
            raise NotSymmetric(f"Kraus family is not symmetric (defect {defect:.3e})")
        rank = independence_rank(self.kraus)
        if rank != len(self.kraus):
            raise NotSymmetric(f"{len(self.kraus)} Kraus operators span only rank {rank}")

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "SymmetricCPMap":
        """Drop zero operators and re-derive an independent family if needed."""
        kraus = [np.asarray(k, dtype=np.complex128) for k in kraus if np.linalg.norm(k) > 0]
        if independence_rank(kraus) != len(kraus):
            logger.debug("Kraus family is dependent; canonicalising through the Choi matrix")
            kraus = kraus_from_choi(SuperOperator.from_kraus(kraus).choi)
        return cls(tuple(kraus))

    @classmethod
    def from_superoperator(cls, s: SuperOperator) -> "SymmetricCPMap":
        return cls(tuple(kraus_from_choi(s.choi)))

    def scaled(self, factor: float) -> "SymmetricCPMap":
        return SymmetricCPMap(tuple(np.sqrt(factor) * k for k in self.kraus))


def _transfer_eig(psi: CPMap) -> Tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(hermitian_part(psi.transfer()))


def spectral_radius(psi: SymmetricCPMap) -> float:
    w, _ = _transfer_eig(psi)
    return float(np.max(np.abs(w)))


@dataclass(frozen=True, eq=False)
class PFResult:
    """Spectral radius, canonical PF eigenvector and its support"""

    rho: float
    xi: ComplexMatrix
    p_max: ComplexMatrix
    cesaro_iterations: int
    residual: float
    maximal: bool = True

    @property
    def p_max_rank(self) -> int:
        return int(round(np.trace(self.p_max).real))


def canonical_pf(psi: SymmetricCPMap, max_iters: Optional[int] = None,
                 tol: Optional[float] = None) -> PFResult:
    """
    Ξ = lim (1/N) Σ Ψⁿ(I)/ρⁿ.

    Ψ is symmetric, so its transfer matrix is Hermitian and the only spectrum
    of modulus ρ is {ρ, −ρ}. The two-term averages z_n = (y_n + y_{n+1})/2 of
    y_n = Ψⁿ(I)/ρⁿ cancel the −ρ part exactly and converge geometrically to
    the Cesàro limit; the running mean would only converge like 1/N.
    Iteration stops once successive z_n agree to ``tol``. Stalling without
    that agreement is only logged when z still passes the eigen-residual
    bound; otherwise NoConvergence is raised.
    """
    max_iters = settings.pf_max_iters if max_iters is None else max_iters
    tol = settings.pf_tol if tol is None else tol
    rho = spectral_radius(psi)
    if rho <= 0:
        raise RPKitError("spectral radius is zero; the PF eigenvector is undefined")

    d = psi.dim
    y = psi.apply(np.eye(d)) / rho
    z_prev = None
    step = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        y_next = psi.apply(y) / rho
        z = 0.5 * (y + y_next)
        if z_prev is not None:
            step = frob(z - z_prev) / max(1.0, frob(z))
            if step < tol:
                break
        z_prev, y = z, y_next
    xi = hermitian_part(z)
    residual = frob(psi.apply(xi) - rho * xi) / max(frob(rho * xi), 1e-300)
    if residual > settings.residual_tol:
        raise NoConvergence(max_iters, residual)
    if step >= tol:
        logger.warning(f"Cesàro averages still moving by {step:.2e} after {iterations} steps "
                       f"(eigen-residual {residual:.2e})")

    p_max = support_projection(xi)
    eig = pf_eigenspace(psi)
    maximal = all(frob(p_max @ x @ p_max - x) <= settings.residual_tol for x in eig)
    logger.debug(f"PF: ρ = {rho:.6g}, rank p_max = {int(round(np.trace(p_max).real))}, "
                 f"{iterations} iterations, residual {residual:.2e}")
    return PFResult(rho=rho, xi=as_matrix(xi, "Ξ"), p_max=p_max, cesaro_iterations=iterations,
                    residual=residual, maximal=maximal)


def truncate(psi: SymmetricCPMap, p: np.ndarray) -> SymmetricCPMap:
    """Ψ₀(X) = Ψ(pXp) through the Kraus operators K·p."""
    if not is_projection(np.asarray(p)):
        raise NotProjection("truncation needs an orthogonal projection")
    return SymmetricCPMap.from_kraus([k @ p for k in psi.kraus])


def bim(psi: CPMap) -> MatrixStarAlgebra:
    """Bim(Ψ) as the commutant of {K_i, K_i†}."""
    ops = list(psi.kraus) + [dagger(k) for k in psi.kraus]
    return commutant_of_set(ops, np.eye(psi.dim))


def bimodule_residual(psi: CPMap, algebra: MatrixStarAlgebra, rng: np.random.Generator,
                      samples: int = 4) -> float:
    """max ‖Ψ(YX) − Ψ(Y)X‖ and ‖Ψ(YX†) − Ψ(Y)X†‖ over basis X and random Y."""
    d = psi.dim
    worst = 0.0
    for _ in range(samples):
        y = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        py = psi.apply(y)
        for x in algebra.basis:
            worst = max(worst,
                        frob(psi.apply(y @ x) - py @ x),
                        frob(psi.apply(y @ dagger(x)) - py @ dagger(x)))
    return worst


def pf_eigenspace(psi: CPMap, cluster_tol: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (k, d, d) of the eigenspace of Ψ at ρ(Ψ)."""
    cluster_tol = settings.pf_cluster_tol if cluster_tol is None else cluster_tol
    w, v = _transfer_eig(psi)
    rho = float(np.max(np.abs(w)))
    d = psi.dim
    idx = np.flatnonzero(np.abs(w - rho) <= cluster_tol * max(rho, 1e-300))
    return np.stack([v[:, k].reshape(d, d) for k in idx]) if idx.size else np.zeros((0, d, d))


def bim_times_projection(algebra: MatrixStarAlgebra, p: np.ndarray) -> np.ndarray:
    return orthonormal_span([x @ p for x in algebra.basis])


@dataclass
class EigenspaceReport:
    """Eigenspace at ρ against Ξ^{1/2}·Bim(Ψ)p_max·Ξ^{1/2}"""

    eigenspace_dimension: int
    bim_pmax_dimension: int
    embedding_residual: float
    dims_match: bool
    passed: bool
    bim_dimension: int = 0
    details: Dict[str, float] = field(default_factory=dict)


def verify_eigenspace_structure(psi: SymmetricCPMap, pf: Optional[PFResult] = None) -> EigenspaceReport:
    pf = canonical_pf(psi) if pf is None else pf
    eig = pf_eigenspace(psi)
    algebra = bim(psi)
    bp = bim_times_projection(algebra, pf.p_max)
    root = psd_function(pf.xi, np.sqrt)
    residual = max((span_residual(root @ x @ root, eig) for x in bp), default=0.0)
    dims_match = eig.shape[0] == bp.shape[0]
    passed = dims_match and residual < settings.residual_tol
    if not passed:
        logger.warning(f"Eigenspace structure mismatch: dim E = {eig.shape[0]}, "
                       f"dim Bim·p_max = {bp.shape[0]}, residual {residual:.2e}")
    return EigenspaceReport(
        eigenspace_dimension=int(eig.shape[0]),
        bim_pmax_dimension=int(bp.shape[0]),
        embedding_residual=float(residual),
        dims_match=dims_match,
        passed=passed,
        bim_dimension=algebra.dimension,
    )


def verify_lemma_support(psi: SymmetricCPMap, rng: np.random.Generator, pf: Optional[PFResult] = None,
                         samples: int = 4) -> Dict[str, float]:
    """
    Residuals of Ψ(Xp) = Ψ(X)p, Ψ(pX) = pΨ(X), [K_i, p] = 0 for p = p_max, and
    the domination of PSD eigenvectors by Ξ.
    """
    pf = canonical_pf(psi) if pf is None else pf
    p = pf.p_max
    d = psi.dim
    right = left = 0.0
    for _ in range(samples):
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        px = psi.apply(x)
        right = max(right, frob(psi.apply(x @ p) - px @ p) / max(1.0, frob(px)))
        left = max(left, frob(psi.apply(p @ x) - p @ px) / max(1.0, frob(px)))
    kraus_comm = max(frob(k @ p - p @ k) for k in psi.kraus)

    # PSD eigenvectors Ξ^{1/2} B†B Ξ^{1/2} with B ∈ Bim·p_max
    root = psd_function(pf.xi, np.sqrt)
    xi_inv_norm = float(np.linalg.norm(support_pinv(pf.xi), 2))
    bp = bim_times_projection(bim(psi), p)
    domination = 0.0
    range_excess = 0.0
    for _ in range(samples):
        coeff = rng.normal(size=bp.shape[0]) + 1j * rng.normal(size=bp.shape[0])
        b = np.tensordot(coeff, bp, axes=1)
        x = root @ dagger(b) @ b @ root
        lam = xi_inv_norm * float(np.linalg.norm(x, 2))
        gap = np.linalg.eigvalsh(hermitian_part(lam * pf.xi - x))[0]
        domination = max(domination, max(0.0, -gap) / max(1.0, lam))
        range_excess = max(range_excess, frob(x - p @ x @ p) / max(1.0, frob(x)))
    return {
        "right_module_residual": right,
        "left_module_residual": left,
        "kraus_commutator": kraus_comm,
        "domination_defect": domination,
        "range_excess": range_excess,
    }


@dataclass(frozen=True, eq=False)
class EquilibriumMap:
    """Unital compression of Ψ to the PF support with its invariant state"""

    ucp: CPMap
    isometry: np.ndarray
    state: ComplexMatrix


def equilibrium_map(psi: SymmetricCPMap, pf: Optional[PFResult] = None) -> EquilibriumMap:
    """
    Ψ̃₀(X) = ρ⁻¹Ξ^{-1/2}Ψ(Ξ^{1/2}XΞ^{1/2})Ξ^{-1/2} on p_max𝔄p_max.

    Its invariant state has density Ξ²/Tr(Ξ²) on the support.
    """
    pf = canonical_pf(psi) if pf is None else pf
    v = range_isometry(pf.p_max)
    root = psd_function(pf.xi, np.sqrt)
    inv_root = psd_function(pf.xi, lambda x: x ** -0.5)
    kraus = [dagger(v) @ (inv_root @ k @ root) @ v / np.sqrt(pf.rho) for k in psi.kraus]
    kraus = [k for k in kraus if np.linalg.norm(k) > 0]
    state = dagger(v) @ pf.xi @ pf.xi @ v
    state = state / np.trace(state).real
    return EquilibriumMap(ucp=CPMap(tuple(kraus)), isometry=v, state=as_matrix(state, "invariant state"))


@dataclass
class FixedPointReport:
    """Fix(Ψ) against the multiplicative domain of a unital CP map"""

    fixed_dimension: int
    unital_residual: float
    invariance_residual: float
    schwarz_residual: float
    closure_residual: float
    passed: bool


def fixed_points(ucp: CPMap) -> np.ndarray:
    d = ucp.dim
    null = null_space(ucp.transfer() - np.eye(d * d), rcond=settings.tol)
    return orthonormal_span([null[:, k].reshape(d, d) for k in range(null.shape[1])])


def verify_fixed_points(ucp: CPMap, state: np.ndarray) -> FixedPointReport:
    """
    For a unital CP map with faithful invariant state, every fixed point x
    satisfies Ψ(x†x) = Ψ(x)†Ψ(x), and the fixed points form a *-algebra.
    """
    d = ucp.dim
    eye = np.eye(d)
    unital = frob(ucp.apply(eye) - eye)
    invariance = frob(ucp.apply_dual(state) - state)
    fix = fixed_points(ucp)
    schwarz = 0.0
    closure = 0.0
    for x in fix:
        image = ucp.apply(x)
        schwarz = max(schwarz, frob(ucp.apply(dagger(x) @ x) - dagger(image) @ image))
        closure = max(closure, span_residual(dagger(x), fix))
        for y in fix:
            closure = max(closure, span_residual(x @ y, fix))
    tol = settings.residual_tol
    passed = max(unital, invariance, schwarz, closure) < tol
    return FixedPointReport(
        fixed_dimension=int(fix.shape[0]),
        unital_residual=unital,
        invariance_residual=invariance,
        schwarz_residual=schwarz,
        closure_residual=closure,
        passed=passed,
    )


def equilibrium_fixed_points_match(psi: SymmetricCPMap, pf: Optional[PFResult] = None) -> bool:
    """Fix(Ψ̃₀) equals the compression of Bim(Ψ)p_max to the PF support."""
    pf = canonical_pf(psi) if pf is None else pf
    eq = equilibrium_map(psi, pf)
    v = eq.isometry
    compressed = orthonormal_span([dagger(v) @ x @ v for x in bim_times_projection(bim(psi), pf.p_max)])
    fix = fixed_points(eq.ucp)
    r = v.shape[1]
    unit = np.eye(r)
    a = MatrixStarAlgebra(ambient_dim=r, unit=as_matrix(unit), basis=compressed)
    b = MatrixStarAlgebra(ambient_dim=r, unit=as_matrix(unit), basis=fix)
    return algebra_equal(a, b, settings.residual_tol)
