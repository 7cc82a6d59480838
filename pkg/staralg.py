"""
Finite-dimensional *-algebras of matrices.

An algebra is kept as a Hilbert–Schmidt orthonormal basis inside p·M_d·p for
its unit p. Commutants and centers reduce to null spaces of stacked
commutator maps; Wedderburn blocks come from the minimal central projections.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.linalg import null_space, qr

from bipartition import Bipartition
from config import settings
from errors import DimensionMismatch, InteractionAlgebraMismatch, NonIntegerBlock, RPKitError
from tensorlab import ComplexMatrix, as_matrix, dagger, frob, hermitian_part, is_hermitian, save_matrix


def _as_rows(mats: Sequence[np.ndarray]) -> np.ndarray:
    if len(mats) == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    return np.stack([np.asarray(m, dtype=np.complex128).reshape(-1) for m in mats])


def extend_orthonormal(basis: np.ndarray, candidates: np.ndarray, tol: float) -> np.ndarray:
    """
    Gram–Schmidt the candidate rows against ``basis`` (rows, orthonormal).

    Projection is applied twice. Returns only the new orthonormal rows.
    """
    if candidates.size == 0:
        return candidates.reshape(0, basis.shape[1] if basis.size else 0)
    norms = np.linalg.norm(candidates, axis=1)
    cand = candidates.copy()
    for _ in range(2):
        if basis.size:
            cand = cand - (cand @ np.conj(basis).T) @ basis
    new_rows: List[np.ndarray] = []
    for k in range(cand.shape[0]):
        v = cand[k]
        for _ in range(2):
            for w in new_rows:
                v = v - np.vdot(w, v) * w
        n = np.linalg.norm(v)
        if norms[k] > 0 and n > tol * max(1.0, norms[k]):
            new_rows.append(v / n)
    if not new_rows:
        return np.zeros((0, candidates.shape[1]), dtype=np.complex128)
    return np.stack(new_rows)


def orthonormal_span(mats: Sequence[np.ndarray], tol: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (k, d, d) of the linear span of ``mats``."""
    tol = settings.tol if tol is None else tol
    if len(mats) == 0:
        return np.zeros((0, 0, 0), dtype=np.complex128)
    d = np.asarray(mats[0]).shape[0]
    rows = extend_orthonormal(np.zeros((0, d * d), dtype=np.complex128), _as_rows(mats), tol)
    return rows.reshape(-1, d, d)


def span_residual(x: np.ndarray, basis: np.ndarray) -> float:
    """Relative distance of x from the span of an orthonormal basis."""
    x = np.asarray(x, dtype=np.complex128)
    if basis.shape[0] == 0:
        return frob(x) / max(1.0, frob(x)) if frob(x) else 0.0
    flat = basis.reshape(basis.shape[0], -1)
    coeff = np.conj(flat) @ x.reshape(-1)
    rest = x.reshape(-1) - coeff @ flat
    return float(np.linalg.norm(rest)) / max(1.0, frob(x))


def range_isometry(p: np.ndarray) -> np.ndarray:
    """Columns spanning the range of an orthogonal projection."""
    w, v = np.linalg.eigh(0.5 * (p + dagger(p)))
    return v[:, w > 0.5]


def _stacked_null_space(blocks, ncols: int, rcond: float) -> np.ndarray:
    """Null space of vstack(blocks) without materialising the stack."""
    r = np.zeros((0, ncols), dtype=np.complex128)
    for block in blocks:
        stacked = np.vstack([r, block])
        if stacked.shape[0] > ncols:
            r = qr(stacked, mode="r")[0][:ncols]
        else:
            r = stacked
    if r.shape[0] == 0:
        return np.eye(ncols, dtype=np.complex128)
    return null_space(r, rcond=rcond)


@dataclass(frozen=True, eq=False)
class AlgebraStructure:
    """Center and Wedderburn data of an algebra"""

    center: "MatrixStarAlgebra"
    minimal_central_projections: Tuple[ComplexMatrix, ...]
    block_signature: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class MatrixStarAlgebra:
    """*-subalgebra of p·M_d·p given by an orthonormal basis"""

    ambient_dim: int
    unit: ComplexMatrix
    basis: np.ndarray
    generators: Tuple[ComplexMatrix, ...] = field(default=())
    seed: int = 0

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    @cached_property
    def structure(self) -> AlgebraStructure:
        return center_and_blocks(self)

    @property
    def block_signature(self) -> Tuple[int, ...]:
        return self.structure.block_signature

    def contains(self, x: np.ndarray, tol: Optional[float] = None) -> bool:
        tol = settings.tol if tol is None else tol
        return span_residual(x, self.basis) <= tol

    def residual(self, x: np.ndarray) -> float:
        return span_residual(x, self.basis)

    def project(self, x: np.ndarray) -> ComplexMatrix:
        flat = self.basis.reshape(self.dimension, -1)
        coeff = np.conj(flat) @ np.asarray(x, dtype=np.complex128).reshape(-1)
        return as_matrix((coeff @ flat).reshape(self.ambient_dim, self.ambient_dim))

    def closure_residual(self, rng: np.random.Generator, samples: int = 8) -> float:
        """Worst span residual of products and adjoints of random basis pairs."""
        worst = 0.0
        k = self.dimension
        for _ in range(samples):
            a = self.basis[rng.integers(k)]
            b = self.basis[rng.integers(k)]
            worst = max(worst, span_residual(a @ b, self.basis), span_residual(dagger(a), self.basis))
        return worst

    def unit_residual(self) -> float:
        p = self.unit
        return max((frob(p @ b - b) + frob(b @ p - b) for b in self.basis), default=0.0)

    def compress(self, x: np.ndarray) -> ComplexMatrix:
        return as_matrix(self.unit @ np.asarray(x) @ self.unit)


def _full_unit(d: int) -> ComplexMatrix:
    return as_matrix(np.eye(d, dtype=np.complex128), "unit")


def generated_algebra(generators: Sequence[np.ndarray], unit: Optional[np.ndarray] = None,
                      tol: Optional[float] = None, ambient_dim: Optional[int] = None) -> MatrixStarAlgebra:
    """
    Smallest unital *-algebra containing ``generators``.

    Words are grown by left multiplication with the generators and their
    adjoints until a round adds nothing new.
    """
    tol = settings.tol if tol is None else tol
    gens = [as_matrix(g, "generator") for g in generators]
    if unit is None:
        d = gens[0].shape[0] if gens else ambient_dim
        if d is None:
            raise DimensionMismatch("ambient dimension unknown for an empty generator list")
        unit = _full_unit(d)
    unit = as_matrix(unit, "unit")
    d = unit.shape[0]
    for g in gens:
        if g.shape != (d, d):
            raise DimensionMismatch(f"generator shape {g.shape} does not match unit {unit.shape}")
        if frob(unit @ g @ unit - g) > tol * max(1.0, frob(g)):
            raise DimensionMismatch("generator does not live under the unit projection")

    letters = list(gens)
    letters += [dagger(g) for g in gens if not is_hermitian(g, tol)]
    basis = extend_orthonormal(np.zeros((0, d * d), dtype=np.complex128),
                               _as_rows([unit] + letters), tol)
    frontier = basis
    rounds = 0
    while frontier.shape[0] and letters:
        rounds += 1
        products = [g @ f.reshape(d, d) for f in frontier for g in letters]
        new = extend_orthonormal(basis, _as_rows(products), tol)
        basis = np.vstack([basis, new])
        frontier = new
    logger.debug(f"Generated algebra of dimension {basis.shape[0]} in M_{d} after {rounds} rounds")
    return MatrixStarAlgebra(ambient_dim=d, unit=unit, basis=basis.reshape(-1, d, d),
                             generators=tuple(gens))


def commutant_of_set(ops: Sequence[np.ndarray], unit: np.ndarray,
                     tol: Optional[float] = None) -> MatrixStarAlgebra:
    """
    {X ∈ p·M·p : [X, a] = 0 for all a in ops}.

    With C_a = I⊗aᵀ − a⊗I (row-major vec of Xa − aX) the commutant is the
    kernel of the PSD matrix Σ C_a†C_a, assembled in closed form:
    I⊗conj(Σaa†) + (Σa†a)⊗I − Σ a⊗conj(a) − Σ a†⊗conj(a†).
    """
    tol = settings.tol if tol is None else tol
    unit = as_matrix(unit, "unit")
    d = unit.shape[0]
    v = range_isometry(unit)
    r = v.shape[1]
    eye = np.eye(r)

    if len(ops):
        comp = np.stack([dagger(v) @ np.asarray(a, dtype=np.complex128) @ v for a in ops])
        adj = np.conj(comp).transpose(0, 2, 1)
        left = np.einsum("kij,kjl->il", comp, adj)
        right = np.einsum("kij,kjl->il", adj, comp)
        m = np.kron(eye, np.conj(left)) + np.kron(right, eye)
        m -= np.einsum("kij,kab->iajb", comp, np.conj(comp)).reshape(r * r, r * r)
        m -= np.einsum("kij,kab->iajb", adj, np.conj(adj)).reshape(r * r, r * r)
        w, vecs = np.linalg.eigh(hermitian_part(m))
        null = vecs[:, w <= tol * max(1.0, float(w[-1]))]
    else:
        null = np.eye(r * r, dtype=np.complex128)
    basis = np.stack([v @ null[:, k].reshape(r, r) @ dagger(v) for k in range(null.shape[1])]) \
        if null.shape[1] else np.zeros((0, d, d), dtype=np.complex128)
    logger.debug(f"Commutant of {len(ops)} operators on a rank-{r} unit has dimension {basis.shape[0]}")
    return MatrixStarAlgebra(ambient_dim=d, unit=unit, basis=basis)


def commutant(a: MatrixStarAlgebra, tol: Optional[float] = None) -> MatrixStarAlgebra:
    ops = list(a.generators) + [dagger(g) for g in a.generators] if a.generators else list(a.basis)
    return commutant_of_set(ops, a.unit, tol)


def _center(a: MatrixStarAlgebra, tol: float) -> MatrixStarAlgebra:
    ops = list(a.generators) + [dagger(g) for g in a.generators] if a.generators else list(a.basis)
    k = a.dimension

    def blocks():
        for g in ops:
            yield np.stack([(b @ g - g @ b).reshape(-1) for b in a.basis], axis=1)

    null = _stacked_null_space(blocks(), k, rcond=tol)
    mats = [np.tensordot(null[:, j], a.basis, axes=1) for j in range(null.shape[1])]
    basis = orthonormal_span(mats, tol)
    return MatrixStarAlgebra(ambient_dim=a.ambient_dim, unit=a.unit, basis=basis)


def center_and_blocks(a: MatrixStarAlgebra, tol: Optional[float] = None,
                      max_attempts: int = 10) -> AlgebraStructure:
    """
    Center, minimal central projections and Wedderburn block sizes.

    A random Hermitian central element is diagonalized on the range of the
    unit; its eigenspaces are the minimal central projections when the
    spectrum is simple on the center, otherwise a new draw is tried.
    """
    tol = settings.tol if tol is None else tol
    center = _center(a, tol)
    m = center.dimension
    v = range_isometry(a.unit)
    herm = [0.5 * (z + dagger(z)) for z in center.basis] + \
           [0.5j * (z - dagger(z)) for z in center.basis]

    projections: List[np.ndarray] = []
    for attempt in range(max_attempts):
        rng = np.random.default_rng([a.seed, attempt])
        h = sum(c * z for c, z in zip(rng.normal(size=len(herm)), herm))
        w, vecs = np.linalg.eigh(dagger(v) @ h @ v)
        scale = max(1.0, float(np.max(np.abs(w))))
        splits = np.flatnonzero(np.diff(w) > 1e-7 * scale) + 1
        groups = np.split(np.arange(w.size), splits)
        if len(groups) == m:
            projections = []
            for idx in groups:
                cols = v @ vecs[:, idx]
                projections.append(as_matrix(cols @ dagger(cols), "central projection"))
            break
        logger.debug(f"Central element draw {attempt} gave {len(groups)} eigenvalues for a center of dimension {m}")
    else:
        raise RPKitError(f"could not split the center of dimension {m} after {max_attempts} draws")

    sizes: List[int] = []
    for p in projections:
        cut = orthonormal_span([p @ b @ p for b in a.basis], tol)
        n = np.sqrt(cut.shape[0])
        if abs(n - round(n)) > settings.block_tol or round(n) == 0:
            raise NonIntegerBlock(f"block of dimension {cut.shape[0]} is not a full matrix algebra")
        sizes.append(int(round(n)))
    signature = tuple(sorted(sizes, reverse=True))
    if sum(s * s for s in signature) != a.dimension:
        raise NonIntegerBlock(f"signature {signature} does not account for dimension {a.dimension}")
    return AlgebraStructure(center=center, minimal_central_projections=tuple(projections),
                            block_signature=signature)


def algebra_equal(a: MatrixStarAlgebra, b: MatrixStarAlgebra, tol: Optional[float] = None) -> bool:
    tol = settings.tol if tol is None else tol
    if a.ambient_dim != b.ambient_dim:
        raise DimensionMismatch(f"ambient dimensions {a.ambient_dim} and {b.ambient_dim} differ")
    if a.dimension != b.dimension:
        return False
    worst = max([span_residual(x, b.basis) for x in a.basis] +
                [span_residual(y, a.basis) for y in b.basis] + [0.0])
    return worst < tol


def iso_signature_equal(a: Union[MatrixStarAlgebra, Sequence[int]],
                        b: Union[MatrixStarAlgebra, Sequence[int]]) -> bool:
    sig_a = a.block_signature if isinstance(a, MatrixStarAlgebra) else tuple(a)
    sig_b = b.block_signature if isinstance(b, MatrixStarAlgebra) else tuple(b)
    return sorted(sig_a) == sorted(sig_b)


def contraction_generators(o: np.ndarray, b: Bipartition) -> List[ComplexMatrix]:
    """Tr_{ℋ₋}((E_ji⊗I)·O) = O[(i, ·), (j, ·)] for all matrix units of 𝔄₋."""
    dm, dp = b.dim_minus, b.dim_plus
    o4 = np.asarray(o, dtype=np.complex128).reshape(dm, dp, dm, dp)
    mats = [o4[i, :, j, :] for i in range(dm) for j in range(dm)]
    return [as_matrix(m) for m in mats if np.linalg.norm(m) > 0]


def interaction_algebra(o: np.ndarray, b: Bipartition, tol: Optional[float] = None) -> MatrixStarAlgebra:
    """
    𝒜₊(O): generated by the partial contractions of O over ℋ₋.

    The result is compared with Comm₊(O)′; disagreement means a numerical bug.
    """
    from groundstate import local_commutant

    tol = settings.tol if tol is None else tol
    gens = orthonormal_span(contraction_generators(o, b), tol)
    generated = generated_algebra(list(gens), unit=np.eye(b.dim_plus), tol=tol)
    double = commutant(local_commutant(o, b, tol), tol)
    if not algebra_equal(generated, double, max(tol, settings.residual_tol)):
        raise InteractionAlgebraMismatch(
            f"generated dimension {generated.dimension} vs double commutant {double.dimension}"
        )
    return generated


def save_algebra(directory: Union[str, Path], name: str, a: MatrixStarAlgebra) -> Path:
    """Write unit, basis files and the block signature; returns the index file."""
    directory = Path(directory)
    unit_file = save_matrix(directory / f"{name}_unit.json", a.unit)
    basis_files = [save_matrix(directory / f"{name}_basis_{k}.json", x).name
                   for k, x in enumerate(a.basis)]
    index = directory / f"{name}.json"
    index.write_text(json.dumps({
        "unit_file": unit_file.name,
        "basis_files": basis_files,
        "block_signature": list(a.block_signature),
    }, indent=2))
    return index
