"""
Osterwalder–Schrader reconstruction from a reflection positive projection Π.

The form ⟨Y, X⟩₀ = (1/TrΠ)Tr(Π·Θ(Y)⊗X) = Tr(ℰ(Y†)X) defines the physical
Hilbert space ℌ = 𝔄₊/ker. ℌ is represented by an orthonormal family e_m of
matrices (eigenvectors of the Gram matrix above the rank threshold).
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from bipartition import Bipartition
from config import settings
from errors import IsomorphismFailure, NotAFieldOperator, NotProjection, NotReflectionPositive
from groundstate import entanglement_support, pf_vector
from rpcore import is_rp_operator, o_map
from staralg import MatrixStarAlgebra, interaction_algebra, orthonormal_span, span_residual
from tensorlab import (
    ComplexMatrix,
    as_matrix,
    dagger,
    frob,
    herm_eig,
    hermitian_part,
    is_projection,
    psd_function,
    require_square,
    support_pinv,
)


def _check_rp_projection(pi: np.ndarray, b: Bipartition) -> Tuple[np.ndarray, bool]:
    """Π and whether its reflection positivity was checked on the Choi matrix."""
    pi = np.asarray(pi, dtype=np.complex128)
    require_square(pi, b.dim, "projection")
    if not is_projection(pi):
        raise NotProjection("Π must be an orthogonal projection")
    if b.dim_plus ** 2 > settings.choi_dim_limit:
        logger.warning(f"Π taken as reflection positive unchecked: d² = {b.dim_plus ** 2} exceeds "
                       f"choi_dim_limit = {settings.choi_dim_limit}")
        return pi, False
    verdict = is_rp_operator(pi, b)
    if not verdict.positive:
        raise NotReflectionPositive(f"Π is not reflection positive (λ_min = {verdict.min_eigenvalue:.3e})")
    return pi, True


def e_transfer(pi: np.ndarray, b: Bipartition) -> np.ndarray:
    """
    Transfer matrix of ℰ(X) = (1/TrΠ)·Tr_{ℋ₋}(Π·Θ(X†)⊗I), row-major vec.

    Θ(X†) = U·Xᵀ·U† is linear in X, so ℰ is a linear map.
    """
    dm, dp = b.dim_minus, b.dim_plus
    u = b.theta_unitary
    pi4 = np.asarray(pi).reshape(dm, dp, dm, dp)
    trace = np.trace(pi).real
    # ℰ(X)[i, j] = Σ Π[(a,i),(e,j)] U[e,p] conj(U[a,q]) X[q,p] / TrΠ
    t = np.einsum("aiej,ep,aq->ijqp", pi4, u, np.conj(u), optimize=True)
    return t.reshape(dp * dp, dp * dp) / trace


def e_map(x: np.ndarray, pi: np.ndarray, b: Bipartition) -> ComplexMatrix:
    """ℰ(X) = (1/TrΠ)·Tr_{ℋ₋}(Π·Θ(X†)⊗I)."""
    pi, _ = _check_rp_projection(pi, b)
    x = np.asarray(x, dtype=np.complex128)
    require_square(x, b.dim_plus, "ℰ argument")
    dm, dp = b.dim_minus, b.dim_plus
    pi4 = pi.reshape(dm, dp, dm, dp)
    theta = b.Theta(dagger(x))
    return as_matrix(np.einsum("aiej,ea->ij", pi4, theta) / np.trace(pi).real, "ℰ(X)")


def _apply(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = x.shape[0]
    return (t @ np.asarray(x).reshape(-1)).reshape(d, d)


def _matrix_units(d: int) -> np.ndarray:
    return np.eye(d * d, dtype=np.complex128).reshape(d * d, d, d)


def os_form(pi: np.ndarray, b: Bipartition, generating_set: Optional[Sequence[np.ndarray]] = None,
            transfer: Optional[np.ndarray] = None) -> np.ndarray:
    """
    gram[k, l] = ⟨B_k, B_l⟩₀ = Tr(ℰ(B_k†)B_l).

    Without a generating set the matrix units are used below gram_full_limit
    and the image of ℰ on the matrix units above it.
    """
    pi, _ = _check_rp_projection(pi, b)
    t = e_transfer(pi, b) if transfer is None else transfer
    gens = default_generating_set(b, t) if generating_set is None else np.asarray(generating_set)
    return _gram(t, gens)


def _gram(t: np.ndarray, gens: np.ndarray) -> np.ndarray:
    images = np.stack([_apply(t, dagger(g)) for g in gens])
    flat_images = images.reshape(len(gens), -1)
    # Tr(E_k B_l) = Σ E_k[i,j] B_l[j,i]
    gram = flat_images @ gens.transpose(0, 2, 1).reshape(len(gens), -1).T
    return hermitian_part(gram)


def default_generating_set(b: Bipartition, transfer: np.ndarray) -> np.ndarray:
    d = b.dim_plus
    units = _matrix_units(d)
    if d * d < settings.gram_full_limit:
        return units
    logger.warning(f"d² = {d * d} ≥ gram_full_limit; building the Gram matrix on ℰ(matrix units)")
    return orthonormal_span([_apply(transfer, e) for e in units])


@dataclass(frozen=True, eq=False)
class OSRResult:
    """Physical Hilbert space, field algebra and vacuum data of an RP projection"""

    pi: ComplexMatrix
    bipartition: Bipartition
    transfer: np.ndarray
    gram: np.ndarray
    generating_set: np.ndarray
    phys_basis: np.ndarray
    xi: ComplexMatrix
    pi_hat: ComplexMatrix
    f_central: ComplexMatrix
    field_algebra: MatrixStarAlgebra
    vacuum_density: ComplexMatrix
    vacuum_vector: np.ndarray
    representation: np.ndarray
    residuals: Dict[str, float] = field(default_factory=dict)
    rp_verified: bool = True

    @property
    def phys_dim(self) -> int:
        return int(self.phys_basis.shape[0])

    @property
    def trace_pi(self) -> float:
        return float(np.trace(self.pi).real)

    def inner(self, y: np.ndarray, x: np.ndarray) -> complex:
        """⟨Y, X⟩₀"""
        return complex(np.trace(_apply(self.transfer, dagger(y)) @ x))

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """ψ(X) in the orthonormal basis of ℌ."""
        duals = np.stack([_apply(self.transfer, dagger(e)) for e in self.phys_basis])
        return np.einsum("mij,ji->m", duals, np.asarray(x, dtype=np.complex128))

    def represent(self, t: np.ndarray) -> ComplexMatrix:
        """Φ(T)_{mn} = ⟨e_m, T e_n⟩₀ without the field operator criterion."""
        t = np.asarray(t, dtype=np.complex128)
        duals = np.stack([_apply(self.transfer, dagger(e)) for e in self.phys_basis])
        products = np.stack([t @ e for e in self.phys_basis])
        return as_matrix(np.einsum("mij,nji->mn", duals, products), "Φ(T)")

    def rho(self, a: np.ndarray) -> ComplexMatrix:
        """ρ(A) = Φ(Ξ^{-1/2}AΞ^{1/2})."""
        inv_root = psd_function(self.xi, lambda x: x ** -0.5)
        root = psd_function(self.xi, np.sqrt)
        return self.represent(inv_root @ np.asarray(a) @ root)

    def vacuum_expectation(self, a: np.ndarray) -> complex:
        """ω(A) = Tr(vacuum_density·A) on the field algebra presentation."""
        return complex(np.trace(self.vacuum_density @ np.asarray(a)))


def physical_basis(gram: np.ndarray, generating_set: np.ndarray,
                   rank_tol: Optional[float] = None) -> np.ndarray:
    """e_m = Σ_k u_m[k]·B_k / √g_m for the Gram eigenpairs above the rank threshold."""
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    eig = herm_eig(gram)
    w = eig.eigenvalues
    lam_max = max(float(w[-1]), 0.0)
    if w[0] < -1e-10 * max(lam_max, 1e-300):
        raise NotReflectionPositive(f"OS form is not positive (λ_min = {w[0]:.3e})")
    keep = np.flatnonzero(w > rank_tol * lam_max)[::-1]
    vecs = eig.eigenvectors[:, keep] / np.sqrt(w[keep])
    return np.einsum("km,kij->mij", vecs, generating_set)


def field_operator_check(t: np.ndarray, osr: OSRResult) -> Dict[str, float]:
    """Residuals of Π̂T(I−Π̂) = 0 and Π̂TΠ̂ ∈ 𝒜₊(Π)Π̂."""
    t = np.asarray(t, dtype=np.complex128)
    p = osr.pi_hat
    q = np.eye(p.shape[0]) - p
    scale = max(1.0, frob(t))
    return {
        "support": frob(p @ t @ q) / scale,
        "membership": span_residual(p @ t @ p, osr.field_algebra.basis),
    }


def field_operator(t: np.ndarray, osr: OSRResult, tol: Optional[float] = None) -> ComplexMatrix:
    """
    Φ(T) on ℌ, accepted iff Π̂T(I−Π̂) = 0 and Π̂TΠ̂ ∈ 𝒜₊(Π)Π̂.

    Φ(T) = Φ(Π̂TΠ̂), so the compressed operator is represented.
    """
    tol = settings.residual_tol if tol is None else tol
    t = np.asarray(t, dtype=np.complex128)
    require_square(t, osr.bipartition.dim_plus, "field operator candidate")
    residuals = field_operator_check(t, osr)
    for clause in ("support", "membership"):
        if residuals[clause] >= tol:
            raise NotAFieldOperator(clause, residuals[clause])
    p = osr.pi_hat
    return osr.represent(p @ t @ p)


def field_algebra(pi: np.ndarray, b: Bipartition, rng: Optional[np.random.Generator] = None,
                  samples: int = 6, tol: Optional[float] = None) -> OSRResult:
    """
    Build ℌ, the presentation 𝒜₊(Π)Π̂ of the field algebra and the vacuum.

    A ↦ Φ(Ξ^{-1/2}AΞ^{1/2}) must be unital, multiplicative, *-preserving and
    injective on 𝒜₊(Π)Π̂, and the vacuum must be faithful on it. Any residual
    at or above ``tol`` raises IsomorphismFailure.
    """
    pi, rp_verified = _check_rp_projection(pi, b)
    rng = np.random.default_rng(settings.seed) if rng is None else rng
    transfer = e_transfer(pi, b)
    gens = default_generating_set(b, transfer)
    gram = _gram(transfer, gens)
    phys = physical_basis(gram, gens)

    phi = pf_vector(pi, b)
    xi = as_matrix(hermitian_part(o_map(phi, b)), "Ξ")
    pi_hat = entanglement_support(pi, b)
    interaction = interaction_algebra(pi, b)
    cut = orthonormal_span([a @ pi_hat for a in interaction.basis])
    algebra = MatrixStarAlgebra(ambient_dim=b.dim_plus, unit=pi_hat, basis=cut, seed=settings.seed)

    # F = Σ W_i W_i† over an orthonormal ground basis, W_i = Ξ⁺O(φ_i)
    xi_pinv = support_pinv(xi)
    eig = herm_eig(pi)
    ground = eig.eigenvectors[:, eig.eigenvalues > 0.5]
    f = sum(xi_pinv @ o_map(ground[:, k], b) @ dagger(xi_pinv @ o_map(ground[:, k], b))
            for k in range(ground.shape[1]))
    f = as_matrix(hermitian_part(f), "F")
    vacuum = as_matrix(hermitian_part(_apply(transfer, np.eye(b.dim_plus))), "vacuum density")

    # Ω = ψ(I)
    duals = np.stack([_apply(transfer, dagger(e)) for e in phys])
    omega = np.einsum("mij,ji->m", duals, np.eye(b.dim_plus))

    osr = OSRResult(
        pi=as_matrix(pi), bipartition=b, transfer=transfer, gram=gram, generating_set=gens,
        phys_basis=phys, xi=xi, pi_hat=pi_hat, f_central=f, field_algebra=algebra,
        vacuum_density=vacuum, vacuum_vector=omega,
        representation=np.zeros((0, phys.shape[0], phys.shape[0]), dtype=np.complex128),
        rp_verified=rp_verified,
    )
    reps = np.stack([osr.rho(a) for a in algebra.basis]) if algebra.dimension else \
        np.zeros((0, osr.phys_dim, osr.phys_dim), dtype=np.complex128)
    object.__setattr__(osr, "representation", reps)
    osr.residuals.update(isomorphism_residuals(osr, rng, samples))
    check_isomorphism(osr, tol)
    logger.info(f"OS reconstruction: dim ℌ = {osr.phys_dim}, field algebra dimension {algebra.dimension}")
    return osr


def isomorphism_residuals(osr: OSRResult, rng: np.random.Generator, samples: int = 6) -> Dict[str, float]:
    """Residuals of the *-isomorphism, the vacuum identities and vacuum faithfulness."""
    f, algebra = osr.f_central, osr.field_algebra
    out = _iso_residuals(osr, rng, samples)
    out["vacuum_xi2f"] = frob(osr.trace_pi * osr.vacuum_density - osr.xi @ osr.xi @ f)
    out["f_central"] = max((frob(f @ a - a @ f) for a in algebra.basis), default=0.0)
    out["phys_dim_vs_algebra"] = float(abs(osr.phys_dim - algebra.dimension))
    out["vacuum_faithful_defect"] = _faithfulness_defect(osr)
    return out


def _faithfulness_defect(osr: OSRResult) -> float:
    """Number of directions A in 𝒜₊(Π)Π̂ with ω(A†A) = 0."""
    basis = osr.field_algebra.basis
    if not len(basis):
        return 0.0
    # G_kl = ω(A_k†A_l) = Tr(A_l ρ A_k†)
    weighted = np.einsum("lij,jm->lim", basis, osr.vacuum_density)
    g = hermitian_part(np.einsum("kij,lij->kl", np.conj(basis), weighted))
    w = np.linalg.eigvalsh(g)
    return float(np.count_nonzero(w <= settings.rank_tol * max(float(w[-1]), 1e-300)))


def check_isomorphism(osr: OSRResult, tol: Optional[float] = None) -> None:
    """Raise IsomorphismFailure on the first residual of ``osr`` at or above ``tol``."""
    tol = settings.residual_tol if tol is None else tol
    for clause, value in sorted(osr.residuals.items()):
        if not value < tol:
            logger.error(f"Field algebra check {clause} failed with residual {value:.3e}")
            raise IsomorphismFailure(clause, value)


def _iso_residuals(osr: OSRResult, rng: np.random.Generator, samples: int) -> Dict[str, float]:
    algebra = osr.field_algebra
    k = algebra.dimension
    reps = osr.representation
    eye = np.eye(osr.phys_dim)
    unital = frob(osr.rho(osr.pi_hat) - eye)
    multiplicative = 0.0
    star = 0.0
    vacuum = 0.0
    for _ in range(samples):
        ca = rng.normal(size=k) + 1j * rng.normal(size=k)
        cb = rng.normal(size=k) + 1j * rng.normal(size=k)
        a = np.tensordot(ca, algebra.basis, axes=1)
        bm = np.tensordot(cb, algebra.basis, axes=1)
        ra = np.tensordot(ca, reps, axes=1)
        rb = np.tensordot(cb, reps, axes=1)
        scale = max(1.0, frob(ra) * frob(rb))
        multiplicative = max(multiplicative, frob(osr.rho(a @ bm) - ra @ rb) / scale)
        star = max(star, frob(osr.rho(dagger(a)) - dagger(ra)) / max(1.0, frob(ra)))
        expectation = np.vdot(osr.vacuum_vector, ra @ osr.vacuum_vector)
        vacuum = max(vacuum, abs(expectation - osr.vacuum_expectation(a)))
    rank = np.linalg.matrix_rank(reps.reshape(k, -1), tol=1e-8 * max(1.0, frob(reps))) if k else 0
    return {
        "unital": unital,
        "multiplicative": multiplicative,
        "star": star,
        "injective_defect": float(k - rank),
        "vacuum": float(vacuum),
    }


def adjoint_rule_residual(a: np.ndarray, osr: OSRResult) -> float:
    """‖Φ(A)* − Φ(Ξ⁻¹A†Ξ)‖ for an accepted field operator A."""
    phi_a = field_operator(a, osr)
    xi_inv = support_pinv(osr.xi)
    mapped = field_operator(xi_inv @ dagger(np.asarray(a)) @ osr.xi, osr)
    return frob(dagger(phi_a) - mapped)


@dataclass(frozen=True, eq=False)
class ModularFlow:
    """σ_t(A) = Ξ^{2it}AΞ^{−2it} on the support of Ξ"""

    t: float
    unitary: ComplexMatrix

    def __call__(self, a: np.ndarray) -> ComplexMatrix:
        return as_matrix(self.unitary @ np.asarray(a) @ dagger(self.unitary), "σ_t(A)")


def modular_flow(osr: OSRResult, t: float) -> ModularFlow:
    u = psd_function(osr.xi, lambda x: np.power(x, 2j * t))
    return ModularFlow(t=float(t), unitary=u)


def modular_residuals(osr: OSRResult, t: float) -> Dict[str, float]:
    """Automorphism and vacuum-invariance residuals of σ_t on the field algebra basis."""
    sigma = modular_flow(osr, t)
    invariance = 0.0
    closure = 0.0
    for a in osr.field_algebra.basis:
        image = sigma(a)
        closure = max(closure, span_residual(image, osr.field_algebra.basis))
        invariance = max(invariance, abs(osr.vacuum_expectation(image) - osr.vacuum_expectation(a)))
    return {"closure": closure, "vacuum_invariance": invariance}


def modular_trivial(osr: OSRResult, tol: Optional[float] = None) -> bool:
    """σ_t is the identity for all t iff Ξ commutes with the field algebra."""
    tol = settings.residual_tol if tol is None else tol
    return all(frob(osr.xi @ a - a @ osr.xi) < tol * max(1.0, frob(osr.xi))
               for a in osr.field_algebra.basis)
