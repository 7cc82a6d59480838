"""
Ground-state structure of reflection positive Hamiltonians.

Covers the ground projection, the canonical PF ground state and entanglement
support, local commutants, the ground state ↔ W correspondence, the 2×2 block
dilation of a frustration-free RP Hamiltonian and the exact LTQO test.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import lstsq

from bipartition import Bipartition
from config import settings
from errors import (
    FrustrationDetected,
    GaplessWarning,
    NotGroundState,
    NotReflectionPositive,
    ZeroPF,
)
from rpcore import RPHamiltonian, build_rp_hamiltonian, o_map
from staralg import MatrixStarAlgebra, commutant_of_set, orthonormal_span, span_residual
from tensorlab import (
    ComplexMatrix,
    as_matrix,
    as_vector,
    dagger,
    frob,
    herm_eig,
    hermitian_part,
    operator_schmidt,
    partial_trace,
    range_projection,
    require_square,
    support_pinv,
    support_projection,
)


@dataclass(frozen=True, eq=False)
class GroundData:
    """Ground energy, ground projection and (once attached) the PF ground state"""

    energy_e0: float
    projection_pi: ComplexMatrix
    degeneracy: int
    gap: float
    ground_basis: np.ndarray
    phi_pf: Optional[np.ndarray] = None
    pi_hat: Optional[ComplexMatrix] = None
    xi: Optional[ComplexMatrix] = None
    range_residual: float = 0.0


def ground_projection(h: np.ndarray, cluster_tol: Optional[float] = None) -> GroundData:
    """Π = sum of eigenprojections with eigenvalue ≤ E₀ + cluster_tol·‖H‖."""
    cluster_tol = settings.cluster_tol if cluster_tol is None else cluster_tol
    eig = herm_eig(h)
    w = eig.eigenvalues
    e0 = float(w[0])
    norm = eig.lambda_max
    width = cluster_tol * norm
    idx = np.flatnonzero(w <= e0 + width)
    cols = eig.eigenvectors[:, idx]
    pi = as_matrix(cols @ dagger(cols), "ground projection")
    gap = float(w[idx[-1] + 1] - e0) if idx[-1] + 1 < w.size else float("inf")
    if gap < 10 * width:
        message = f"spectral gap {gap:.3e} is below 10·cluster_tol·‖H‖ = {10 * width:.3e}"
        logger.warning(message)
        warnings.warn(message, GaplessWarning)
    logger.debug(f"Ground energy {e0:.10g}, degeneracy {idx.size}, gap {gap:.4g}")
    return GroundData(energy_e0=e0, projection_pi=pi, degeneracy=int(idx.size), gap=gap,
                      ground_basis=np.array(cols))


def pf_vector(pi: np.ndarray, b: Bipartition) -> np.ndarray:
    """Π applied to Σ_i θ̂|i⟩⊗|i⟩."""
    return as_vector(np.asarray(pi) @ b.max_entangled(), "φ_PF")


def entanglement_support(pi: np.ndarray, b: Bipartition) -> ComplexMatrix:
    """Π̂: range projection of Tr_{ℋ₋}Π."""
    reduced = partial_trace(pi, [b.dim_minus, b.dim_plus], keep=[1])
    return range_projection(hermitian_part(reduced))


def canonical_pf_ground_state(g: GroundData, b: Bipartition) -> GroundData:
    """
    Attach φ_PF = Π·Σθ̂|i⟩⊗|i⟩, Ξ = O(φ_PF) and Π̂ to ``g``.

    O(φ_PF) must be PSD with range Π̂; the range mismatch is kept on the result.
    """
    require_square(g.projection_pi, b.dim, "ground projection")
    phi = pf_vector(g.projection_pi, b)
    if np.linalg.norm(phi) <= settings.tol * np.sqrt(b.dim_plus):
        raise ZeroPF("Π annihilates the maximally entangled vector; the Hamiltonian is not RP")
    xi = o_map(phi, b)
    scale = max(1.0, float(np.linalg.norm(xi, 2)))
    if frob(xi - dagger(xi)) > settings.herm_tol * scale * b.dim_plus:
        raise NotReflectionPositive("O(φ_PF) is not Hermitian")
    w = np.linalg.eigvalsh(hermitian_part(xi))
    if w[0] < -settings.tol * scale:
        raise NotReflectionPositive(f"O(φ_PF) has a negative eigenvalue {w[0]:.3e}")
    xi = as_matrix(hermitian_part(xi), "Ξ")
    pi_hat = entanglement_support(g.projection_pi, b)
    residual = frob(support_projection(xi) - pi_hat)
    if residual > settings.residual_tol:
        logger.warning(f"range(O(φ_PF)) differs from Π̂ by {residual:.3e}")
    return replace(g, phi_pf=phi, pi_hat=pi_hat, xi=xi, range_residual=residual)


def ground_state(h: np.ndarray, b: Bipartition, cluster_tol: Optional[float] = None) -> GroundData:
    return canonical_pf_ground_state(ground_projection(h, cluster_tol), b)


def local_commutant(o: np.ndarray, b: Bipartition, tol: Optional[float] = None) -> MatrixStarAlgebra:
    """
    Comm₊(O) = {X : [I⊗X, O] = [I⊗X, O†] = 0}.

    With O = Σ s_k A_k⊗B_k (operator Schmidt form, A_k independent) the
    condition is [X, B_k] = [X, B_k†] = 0 for every k.
    """
    o = np.asarray(o, dtype=np.complex128)
    require_square(o, b.dim, "operator")
    _, _, rights = operator_schmidt(o, b.dim_minus, b.dim_plus)
    ops = rights + [dagger(r) for r in rights]
    return commutant_of_set(ops, np.eye(b.dim_plus), tol)


def cut_by(algebra: MatrixStarAlgebra, p: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the linear space {X·p : X in the algebra}."""
    return orthonormal_span([x @ p for x in algebra.basis])


@dataclass
class WData:
    """W with φ = (I⊗W)φ_PF = (Θ(W†)⊗I)φ_PF"""

    w: ComplexMatrix
    plus_residual: float
    minus_residual: float
    commutant_residual: float
    support_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.plus_residual, self.minus_residual, self.commutant_residual, self.support_residual)


def ground_state_to_w(phi: np.ndarray, g: GroundData, b: Bipartition,
                      commutant_cut: Optional[np.ndarray] = None,
                      hamiltonian: Optional[np.ndarray] = None) -> WData:
    """
    W = Ξ⁺·O(φ) for a ground state φ.

    The membership W ∈ Comm₊(H)Π̂ is checked against ``commutant_cut`` (an
    orthonormal basis), the local commutant of ``hamiltonian``, or else
    Comm₊(Π)Π̂, which is the same space.
    """
    if g.phi_pf is None:
        g = canonical_pf_ground_state(g, b)
    phi = as_vector(phi, "ground state")
    pi = g.projection_pi
    if np.linalg.norm(pi @ phi - phi) > 1e-9 * max(1.0, np.linalg.norm(phi)):
        raise NotGroundState(f"‖Πφ − φ‖ = {np.linalg.norm(pi @ phi - phi):.3e}")
    w = as_matrix(support_pinv(g.xi) @ o_map(phi, b), "W")
    scale = max(1.0, np.linalg.norm(phi))
    eye = np.eye(b.dim_plus)
    plus = np.linalg.norm(np.kron(np.eye(b.dim_minus), w) @ g.phi_pf - phi) / scale
    minus = np.linalg.norm(np.kron(b.Theta(dagger(w)), eye) @ g.phi_pf - phi) / scale
    support = frob(w @ g.pi_hat - w) / max(1.0, frob(w))
    if commutant_cut is None:
        source = pi if hamiltonian is None else hamiltonian
        commutant_cut = cut_by(local_commutant(source, b), g.pi_hat)
    comm = span_residual(w, commutant_cut)
    return WData(w=w, plus_residual=float(plus), minus_residual=float(minus),
                 commutant_residual=float(comm), support_residual=float(support))


def maximal_support_check(h: np.ndarray, g: GroundData, b: Bipartition) -> Dict[str, float]:
    """
    Residuals relating H, Π and the entanglement support Π̂:
    Π lies under Θ(Π̂)⊗Π̂, Π̂ is central in Comm₊(H), Comm₊(H) ⊆ Comm₊(H·Θ(Π̂)⊗Π̂),
    and Comm₊(H)Π̂ = Comm₊(Π)Π̂.
    """
    if g.pi_hat is None:
        g = canonical_pf_ground_state(g, b)
    p = g.pi_hat
    q = np.kron(b.Theta(p), p)
    pi = g.projection_pi
    comm_h = local_commutant(h, b)
    comm_hq = local_commutant(np.asarray(h) @ q, b)
    comm_pi = local_commutant(pi, b)
    cut_h = cut_by(comm_h, p)
    cut_pi = cut_by(comm_pi, p)
    cut_hq = cut_by(comm_hq, p)
    return {
        "ground_under_support": frob(q @ pi - pi),
        "support_in_commutant": span_residual(p, comm_h.basis),
        "support_central": max((frob(p @ x - x @ p) for x in comm_h.basis), default=0.0),
        "commutant_inclusion": max((span_residual(x, comm_hq.basis) for x in comm_h.basis), default=0.0),
        "cut_h_vs_pi": max([span_residual(x, cut_pi) for x in cut_h] +
                           [span_residual(x, cut_h) for x in cut_pi] + [0.0]),
        "cut_h_vs_hq": max([span_residual(x, cut_hq) for x in cut_h] +
                           [span_residual(x, cut_h) for x in cut_hq] + [0.0]),
        "cut_dims": float(cut_h.shape[0] - cut_pi.shape[0]),
    }


BLOCK_LABELS = ("full", "zero_plus", "minus_zero", "zero")


@dataclass(frozen=True, eq=False)
class DilatedSystem:
    """𝐇 = 𝐇₋⊗I₂ + 𝐇₀ + I₂⊗𝐇₊ on (ℋ₋⊗ℂ²)⊗(ℋ₊⊗ℂ²)"""

    hamiltonian: RPHamiltonian
    bipartition: Bipartition
    blocks: Dict[str, ComplexMatrix]
    block_energies: Dict[str, float]
    lambda0: float
    phi_pf: np.ndarray
    block_pair_residual: float
    extraction_residual: float
    extraction_maps: Tuple[ComplexMatrix, ...] = field(default=())

    @property
    def is_rp(self) -> bool:
        return self.hamiltonian.is_rp

    @property
    def verified(self) -> bool:
        return self.hamiltonian.verified


# (minus qubit, plus qubit) index of each block; qubit value 0 switches H₋ or H₊ on
_BLOCK_INDEX = {"full": (0, 0), "zero_plus": (1, 0), "minus_zero": (0, 1), "zero": (1, 1)}


def _block(full: np.ndarray, b: Bipartition, label: str) -> ComplexMatrix:
    dm, dp = b.dim_minus, b.dim_plus
    a, c = _BLOCK_INDEX[label]
    t = np.asarray(full).reshape(dm, 2, dp, 2, dm, 2, dp, 2)
    return as_matrix(t[:, a, :, c, :, a, :, c].reshape(dm * dp, dm * dp), f"{label} block")


def _block_vector(v: np.ndarray, b: Bipartition, label: str) -> np.ndarray:
    a, c = _BLOCK_INDEX[label]
    return np.asarray(v).reshape(b.dim_minus, 2, b.dim_plus, 2)[:, a, :, c].reshape(-1)


def _check_h_minus(h_minus: Optional[np.ndarray], h_plus: np.ndarray, b: Bipartition) -> None:
    if h_minus is None:
        return
    defect = frob(np.asarray(h_minus) - b.Theta(h_plus))
    if defect > settings.residual_tol * max(1.0, frob(h_plus)):
        raise NotReflectionPositive(f"H₋ is not Θ(H₊) (defect {defect:.3e})")


def dilate(h_minus: Optional[np.ndarray], h_plus: np.ndarray, cross_terms: Sequence[np.ndarray],
           b: Bipartition) -> DilatedSystem:
    """
    Two-level dilation: 𝐇₊ = (H₊ − E₀(H₊))⊗|0⟩⟨0|, 𝐇₀ = −ΣΘ(O_j⊗I₂)⊗(O_j⊗I₂).

    The four diagonal blocks are H_full, H₀ + I⊗H₊, H₋⊗I + H₀ and H₀ (all
    shifted by the ground energies of H_±). Frustration-freeness is the
    coincidence of their ground energies.
    """
    h_plus = as_matrix(h_plus, "h_plus")
    _check_h_minus(h_minus, h_plus, b)
    e_plus = float(np.linalg.eigvalsh(hermitian_part(h_plus))[0])
    flag = np.diag([1.0, 0.0])
    lifted = b.lift(2)
    big_plus = np.kron(h_plus - e_plus * np.eye(b.dim_plus), flag)
    big_cross = [np.kron(np.asarray(o), np.eye(2)) for o in cross_terms]
    rp = build_rp_hamiltonian(big_plus, big_cross, lifted)

    blocks = {label: _block(rp.assembled, b, label) for label in BLOCK_LABELS}
    energies = {label: float(np.linalg.eigvalsh(hermitian_part(m))[0]) for label, m in blocks.items()}
    scale = max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(hermitian_part(rp.assembled))))))
    spread = max(energies.values()) - min(energies.values())
    if spread > settings.cluster_tol * scale:
        logger.error(f"Block ground energies disagree: {energies}")
        raise FrustrationDetected(f"block ground energies spread by {spread:.3e}: {energies}")
    lambda0 = energies["zero"]

    g = ground_state(rp.assembled, lifted)
    pair = {
        "full": ground_state(blocks["full"], b).phi_pf,
        "zero": ground_state(blocks["zero"], b).phi_pf,
    }
    pair_residual = max(
        np.linalg.norm(_block_vector(g.phi_pf, b, "full") - pair["full"]),
        np.linalg.norm(_block_vector(g.phi_pf, b, "zero") - pair["zero"]),
        np.linalg.norm(_block_vector(g.phi_pf, b, "zero_plus")),
        np.linalg.norm(_block_vector(g.phi_pf, b, "minus_zero")),
    )

    # ground states of H₀ + I⊗H₊ written as (I⊗V)φ⁰_PF
    xi0 = o_map(pair["zero"], b)
    target = ground_projection(blocks["zero_plus"])
    maps: List[np.ndarray] = []
    extraction = 0.0
    for k in range(target.ground_basis.shape[1]):
        psi = target.ground_basis[:, k]
        # O((I⊗V)φ) = V·O(φ), so V solves V·Ξ₀ = O(ψ)
        v_t, *_ = lstsq(xi0.T, o_map(psi, b).T)
        v = v_t.T
        maps.append(as_matrix(v, "V"))
        extraction = max(extraction, float(np.linalg.norm(
            np.kron(np.eye(b.dim_minus), v) @ pair["zero"] - psi)))
    logger.debug(f"Dilation: λ₀ = {lambda0:.8g}, pair residual {pair_residual:.2e}, "
                 f"extraction residual {extraction:.2e}")
    return DilatedSystem(
        hamiltonian=rp,
        bipartition=lifted,
        blocks=blocks,
        block_energies=energies,
        lambda0=lambda0,
        phi_pf=g.phi_pf,
        block_pair_residual=float(pair_residual),
        extraction_residual=extraction,
        extraction_maps=tuple(maps),
    )


@dataclass
class LTQOReport:
    """Non-degeneracy of H against exact LTQO of the ground states of H₀ + I⊗H₊"""

    nondegenerate: bool
    ltqo: bool
    degeneracy: int
    ltqo_dimension: int
    witness: Optional[Tuple[int, int]] = None
    witness_defect: float = 0.0
    # reflection positivity of the dilation was checked on the Choi matrix
    rp_verified: bool = True

    @property
    def agree(self) -> bool:
        return self.nondegenerate == self.ltqo


def g_matrix_witness(states: np.ndarray, b: Bipartition,
                     tol: Optional[float] = None) -> Tuple[Optional[Tuple[int, int]], float]:
    """
    First (j, k) with G_jk = O(φ_j)O(φ_k)† off the pattern G_jk = δ_jk·G₀₀.

    ``states`` holds an orthonormal ground basis as columns.
    """
    tol = settings.tol if tol is None else tol
    ops = [o_map(states[:, k], b) for k in range(states.shape[1])]
    g00 = ops[0] @ dagger(ops[0])
    scale = max(1.0, frob(g00))
    for j, oj in enumerate(ops):
        for k, ok in enumerate(ops):
            g = oj @ dagger(ok)
            defect = frob(g - g00) if j == k else frob(g)
            if defect > tol * scale:
                return (j, k), defect / scale
    return None, 0.0


def ltqo_check(h_minus: Optional[np.ndarray], h_plus: np.ndarray, cross_terms: Sequence[np.ndarray],
               b: Bipartition) -> LTQOReport:
    """Both sides of the LTQO ⇔ unique ground state equivalence, computed independently."""
    dilated = dilate(h_minus, h_plus, cross_terms, b)
    full = dilated.blocks["full"]
    degeneracy = ground_projection(full).degeneracy
    target = ground_projection(dilated.blocks["zero_plus"])
    witness, defect = g_matrix_witness(target.ground_basis, b)
    report = LTQOReport(
        nondegenerate=degeneracy == 1,
        ltqo=witness is None,
        degeneracy=degeneracy,
        ltqo_dimension=target.degeneracy,
        witness=witness,
        witness_defect=defect,
        rp_verified=dilated.verified,
    )
    if not report.agree:
        logger.warning(f"LTQO verdict {report.ltqo} disagrees with non-degeneracy {report.nondegenerate}")
    return report
