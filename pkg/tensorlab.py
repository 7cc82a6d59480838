"""
Dense complex linear algebra used by every other module.

Matrices are plain complex128 numpy arrays marked read-only by ``as_matrix``.
Vectorization is row-major throughout: vec(A X B) = (A ⊗ Bᵀ) vec(X).
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, model_validator

from config import settings
from errors import DimensionMismatch, NonFiniteEntry, NotHermitian, NotPSD, ParseError

ComplexMatrix = np.ndarray
FactorShape = Tuple[int, ...]


def as_matrix(data, name: str = "matrix") -> ComplexMatrix:
    """Copy ``data`` into an immutable complex128 matrix."""
    m = np.array(data, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteEntry(f"{name} has NaN or infinite entries")
    m.setflags(write=False)
    return m


def as_vector(data, name: str = "vector") -> np.ndarray:
    v = np.array(data, dtype=np.complex128).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NonFiniteEntry(f"{name} has NaN or infinite entries")
    v.setflags(write=False)
    return v


def require_square(m: np.ndarray, dim: Optional[int] = None, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise DimensionMismatch(f"{name} must be {dim}x{dim}, got {m.shape}")


def frob(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def relative_residual(a: np.ndarray, b: np.ndarray) -> float:
    """‖a − b‖ relative to max(1, ‖b‖)."""
    return frob(a - b) / max(1.0, frob(b))


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def is_hermitian(m: np.ndarray, herm_tol: Optional[float] = None) -> bool:
    herm_tol = settings.herm_tol if herm_tol is None else herm_tol
    return frob(m - dagger(m)) <= herm_tol * max(1.0, frob(m))


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dagger(m))


def kron(*factors: np.ndarray) -> ComplexMatrix:
    """Kronecker product of one or more operands, left factor most significant."""
    if not factors:
        raise DimensionMismatch("kron needs at least one operand")
    out = np.asarray(factors[0], dtype=np.complex128)
    for f in factors[1:]:
        out = np.kron(out, np.asarray(f, dtype=np.complex128))
    return as_matrix(out, "kron")


def partial_trace(m: np.ndarray, shape: Sequence[int], keep: Iterable[int]) -> ComplexMatrix:
    """
    Trace out every factor of ``shape`` not listed in ``keep``.

    Kept factors appear in ascending index order in the result. Keeping nothing
    returns the 1x1 matrix [[Tr m]].
    """
    dims = [int(d) for d in shape]
    total = int(np.prod(dims))
    require_square(m, total, "partial_trace operand")
    keep = sorted(set(int(k) for k in keep))
    for k in keep:
        if k < 0 or k >= len(dims):
            raise DimensionMismatch(f"keep index {k} out of range for shape {dims}")

    t = np.asarray(m).reshape(dims + dims)
    n = len(dims)
    for idx in sorted(set(range(len(dims))) - set(keep), reverse=True):
        t = np.trace(t, axis1=idx, axis2=idx + n)
        n -= 1
    kept = int(np.prod([dims[k] for k in keep])) if keep else 1
    return as_matrix(t.reshape(kept, kept), "partial trace")


@dataclass(frozen=True, eq=False)
class HermEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)

    def unitarity_residual(self) -> float:
        v = self.eigenvectors
        return frob(dagger(v) @ v - np.eye(v.shape[1]))

    @property
    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every column made real positive
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    phases = np.where(np.abs(pivots) > 0, pivots / np.abs(pivots), 1.0)
    return vecs / phases


def herm_eig(m: np.ndarray, herm_tol: Optional[float] = None) -> HermEig:
    herm_tol = settings.herm_tol if herm_tol is None else herm_tol
    require_square(m, name="herm_eig operand")
    if not is_hermitian(m, herm_tol):
        raise NotHermitian(
            f"matrix is not Hermitian: ‖m − m†‖ = {frob(m - dagger(m)):.3e}"
        )
    w, v = np.linalg.eigh(hermitian_part(np.asarray(m)))
    v = _fix_phases(v)
    w.setflags(write=False)
    v.setflags(write=False)
    return HermEig(eigenvalues=w, eigenvectors=v)


def psd_function(m: np.ndarray, f: Callable[[np.ndarray], np.ndarray],
                 rank_tol: Optional[float] = None) -> ComplexMatrix:
    """
    Apply ``f`` to the eigenvalues of a PSD matrix on its support.

    Eigenvalues at or below rank_tol·λ_max are mapped to 0 regardless of f.
    """
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    eig = herm_eig(m)
    lam_max = max(eig.lambda_max, 0.0)
    if eig.eigenvalues.size and eig.eigenvalues[0] < -rank_tol * max(lam_max, 1e-300):
        raise NotPSD(f"negative eigenvalue {eig.eigenvalues[0]:.3e} (λ_max = {lam_max:.3e})")
    threshold = rank_tol * lam_max
    support = eig.eigenvalues > threshold
    values = np.zeros(eig.eigenvalues.shape, dtype=np.complex128)
    if np.any(support):
        values[support] = f(eig.eigenvalues[support].astype(np.float64))
    v = eig.eigenvectors
    return as_matrix((v * values) @ dagger(v), "psd_function")


def support_projection(m: np.ndarray, rank_tol: Optional[float] = None) -> ComplexMatrix:
    """Orthogonal projection onto the range of a PSD matrix."""
    return psd_function(m, np.ones_like, rank_tol)


def support_pinv(m: np.ndarray, rank_tol: Optional[float] = None) -> ComplexMatrix:
    return psd_function(m, lambda x: 1.0 / x, rank_tol)


def range_projection(m: np.ndarray, rank_tol: Optional[float] = None) -> ComplexMatrix:
    """Projection onto the column space of an arbitrary matrix."""
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    u, s, _ = np.linalg.svd(np.asarray(m))
    if s.size == 0 or s[0] == 0:
        return as_matrix(np.zeros((m.shape[0], m.shape[0])), "range projection")
    cols = u[:, s > rank_tol * s[0]]
    return as_matrix(cols @ dagger(cols), "range projection")


def numerical_rank(m: np.ndarray, rank_tol: Optional[float] = None) -> int:
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    if m.size == 0:
        return 0
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def is_projection(p: np.ndarray, tol: Optional[float] = None) -> bool:
    tol = settings.tol if tol is None else tol
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        return False
    scale = max(1.0, frob(p))
    return frob(p @ p - p) <= tol * scale and frob(p - dagger(p)) <= tol * scale


def heat_kernel(h: np.ndarray, tau: float) -> ComplexMatrix:
    """e^{−τH} for Hermitian H by eigendecomposition."""
    eig = herm_eig(h)
    shifted = eig.eigenvalues - eig.eigenvalues[0]
    v = eig.eigenvectors
    # ground shift keeps the exponentials bounded; RP verdicts are scale invariant
    return as_matrix((v * np.exp(-tau * shifted)) @ dagger(v), "heat kernel")


def permute_factors(shape: Sequence[int], perm: Sequence[int]) -> ComplexMatrix:
    """
    Unitary P with P(v₀⊗…⊗v_{n−1}) = v_{perm[0]}⊗…⊗v_{perm[n−1]}.
    """
    dims = [int(d) for d in shape]
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(dims))):
        raise DimensionMismatch(f"{perm} is not a permutation of {len(dims)} factors")
    total = int(np.prod(dims))
    eye = np.eye(total, dtype=np.complex128).reshape(dims + [total])
    return as_matrix(eye.transpose(perm + [len(dims)]).reshape(total, total), "permutation")


def embed_operator(op: np.ndarray, support: Sequence[int], shape: Sequence[int]) -> ComplexMatrix:
    """
    Place ``op`` (acting on the factors ``support`` in the listed order) into the
    full tensor product described by ``shape``.
    """
    dims = [int(d) for d in shape]
    support = [int(s) for s in support]
    if len(set(support)) != len(support):
        raise DimensionMismatch(f"repeated factor in support {support}")
    sub_dim = int(np.prod([dims[s] for s in support])) if support else 1
    require_square(op, sub_dim, "embedded operator")
    rest = [k for k in range(len(dims)) if k not in support]
    rest_dim = int(np.prod([dims[k] for k in rest])) if rest else 1
    # operator written on (support, rest) ordering, then permuted back
    full = np.kron(np.asarray(op), np.eye(rest_dim))
    order = support + rest
    p = permute_factors([dims[k] for k in order], np.argsort(order).tolist())
    return as_matrix(p @ full @ dagger(p), "embedded operator")


def realign(o: np.ndarray, dm: int, dp: int) -> np.ndarray:
    """R[(a,a'),(b,b')] = O[(a,b),(a',b')] for O on C^dm ⊗ C^dp."""
    require_square(o, dm * dp, "realigned operator")
    return np.asarray(o).reshape(dm, dp, dm, dp).transpose(0, 2, 1, 3).reshape(dm * dm, dp * dp)


def operator_schmidt(o: np.ndarray, dm: int, dp: int,
                     rank_tol: Optional[float] = None) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
    """
    O = Σ_k s_k A_k ⊗ B_k with orthonormal {A_k}, {B_k}.

    Returns (s, A list, B list), truncated at rank_tol·s_max.
    """
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    r = realign(o, dm, dp)
    u, s, vh = np.linalg.svd(r, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(0), [], []
    keep = s > rank_tol * s[0]
    lefts = [u[:, k].reshape(dm, dm) for k in np.flatnonzero(keep)]
    rights = [vh[k].reshape(dp, dp) for k in np.flatnonzero(keep)]
    return s[keep], lefts, rights


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> ComplexMatrix:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return as_matrix(scale * 0.5 * (a + dagger(a)), "random Hermitian")


def random_unitary(rng: np.random.Generator, d: int) -> ComplexMatrix:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(a)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return as_matrix(q, "random unitary")


def random_projection(rng: np.random.Generator, d: int, rank: int) -> ComplexMatrix:
    u = random_unitary(rng, d)[:, :rank]
    return as_matrix(u @ dagger(u), "random projection")


class MatrixFile(BaseModel):
    """On-disk matrix: row-major [re, im] pairs"""

    rows: int = Field(..., gt=0, description="Number of rows")
    cols: int = Field(..., gt=0, description="Number of columns")
    entries: List[Tuple[float, float]] = Field(..., description="Row-major [re, im] pairs")

    @model_validator(mode="after")
    def check_length(self) -> "MatrixFile":
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(
                f"expected {self.rows * self.cols} entries, found {len(self.entries)}"
            )
        return self

    def to_matrix(self) -> ComplexMatrix:
        arr = np.array(self.entries, dtype=np.float64).reshape(self.rows, self.cols, 2)
        return as_matrix(arr[..., 0] + 1j * arr[..., 1])

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "MatrixFile":
        m = np.asarray(m, dtype=np.complex128)
        if m.ndim == 1:
            m = m.reshape(-1, 1)
        flat = m.reshape(-1)
        return cls(rows=m.shape[0], cols=m.shape[1],
                   entries=[(float(z.real), float(z.imag)) for z in flat])


def matrix_to_json(m: np.ndarray) -> dict:
    return MatrixFile.from_matrix(m).model_dump()


def matrix_from_json(payload: dict, source: str = "<memory>") -> ComplexMatrix:
    try:
        return MatrixFile.model_validate(payload).to_matrix()
    except ValidationError as e:
        raise ParseError(source, str(e)) from e


def save_matrix(path: Union[str, Path], m: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # json writes floats with repr, which round-trips doubles exactly
    path.write_text(json.dumps(matrix_to_json(m)))
    logger.debug(f"Saved {np.shape(m)} matrix to {path}")
    return path


def load_matrix(path: Union[str, Path]) -> ComplexMatrix:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ParseError(str(path), "file not found") from e
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.msg, offset=e.pos) from e
    return matrix_from_json(payload, str(path))
