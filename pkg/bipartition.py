"""
The split ℋ = ℋ₋ ⊗ ℋ₊ with its reflection antiunitary θ̂.

θ̂ is stored as a single unitary U: θ̂(v) = U·conj(v). It is compiled once from
the site map (a factor permutation) and optional per-site conjugation twists.
Θ(X) = θ̂ X θ̂⁻¹ = U conj(X) U†.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from errors import DimensionMismatch, ParseError
from tensorlab import (
    ComplexMatrix,
    FactorShape,
    MatrixFile,
    as_matrix,
    as_vector,
    dagger,
    frob,
    kron,
    permute_factors,
    require_square,
)


@dataclass(frozen=True, eq=False)
class Bipartition:
    """ℋ₋ ⊗ ℋ₊ with θ̂(v) = theta_unitary · conj(v)"""

    plus_shape: FactorShape
    minus_shape: FactorShape
    theta_unitary: ComplexMatrix
    plus_sites: Tuple[str, ...] = ()
    minus_sites: Tuple[str, ...] = ()
    site_map: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        u = as_matrix(self.theta_unitary, "theta_unitary")
        object.__setattr__(self, "theta_unitary", u)
        if self.dim_minus != self.dim_plus:
            raise DimensionMismatch(
                f"θ̂ needs dim ℋ₋ = dim ℋ₊, got {self.dim_minus} and {self.dim_plus}"
            )
        require_square(u, self.dim_plus, "theta_unitary")
        eye = np.eye(self.dim_plus)
        if frob(dagger(u) @ u - eye) > 1e-10 * max(1.0, frob(eye)):
            raise DimensionMismatch("theta_unitary is not unitary")
        # θ̂² is taken after identifying each minus site with its plus partner
        v = dagger(self._identification()) @ u
        if frob(v @ np.conj(v) - eye) > 1e-10 * max(1.0, frob(eye)):
            raise DimensionMismatch("θ̂² ≠ 1: every site twist τ must satisfy τ·conj(τ) = I")

    @property
    def dim_plus(self) -> int:
        return int(np.prod(self.plus_shape)) if self.plus_shape else 1

    @property
    def dim_minus(self) -> int:
        return int(np.prod(self.minus_shape)) if self.minus_shape else 1

    @property
    def dim(self) -> int:
        return self.dim_minus * self.dim_plus

    @property
    def shape(self) -> FactorShape:
        """Factor shape of the ambient space, minus factors first."""
        return tuple(self.minus_shape) + tuple(self.plus_shape)

    def _identification(self) -> ComplexMatrix:
        """Permutation carrying ℋ₊ onto ℋ₋ by the site map (identity without site data)."""
        if not (self.site_map and self.minus_sites):
            return np.eye(self.dim_plus, dtype=np.complex128)
        mirror_of = {m: p for p, m in self.site_map}
        perm = [list(self.plus_sites).index(mirror_of[m]) for m in self.minus_sites]
        return permute_factors(self.plus_shape, perm)

    @classmethod
    def plain(cls, plus_shape: Sequence[int]) -> "Bipartition":
        """Mirror-ordered split with θ₀ = entrywise conjugation (U = I)."""
        plus_shape = tuple(int(d) for d in plus_shape)
        d = int(np.prod(plus_shape)) if plus_shape else 1
        return cls(plus_shape=plus_shape, minus_shape=plus_shape,
                   theta_unitary=np.eye(d, dtype=np.complex128))

    @classmethod
    def from_sites(
        cls,
        plus_sites: Sequence[Tuple[str, int]],
        minus_sites: Optional[Sequence[str]] = None,
        site_map: Optional[Mapping[str, str]] = None,
        twists: Optional[Mapping[str, np.ndarray]] = None,
    ) -> "Bipartition":
        """
        Compile θ̂ from site data.

        :param plus_sites: (name, dim) for each factor of ℋ₊ in order
        :param minus_sites: factor order of ℋ₋; defaults to the mirrors of plus_sites
        :param site_map: plus site -> minus site; defaults to "-" + name
        :param twists: per minus site unitary τ with θ₀ = τ∘conj on that site
        """
        names = [name for name, _ in plus_sites]
        dims = {name: int(dim) for name, dim in plus_sites}
        site_map = dict(site_map) if site_map else {name: f"-{name}" for name in names}
        if sorted(site_map) != sorted(names):
            raise DimensionMismatch("site_map must cover every plus site exactly once")
        mirror_of = {m: p for p, m in site_map.items()}
        if len(mirror_of) != len(site_map):
            raise DimensionMismatch("site_map is not a bijection")
        minus_sites = list(minus_sites) if minus_sites else [site_map[n] for n in names]
        if sorted(minus_sites) != sorted(mirror_of):
            raise DimensionMismatch("minus sites do not match the site_map image")

        plus_shape = tuple(dims[n] for n in names)
        minus_shape = tuple(dims[mirror_of[m]] for m in minus_sites)
        perm = [names.index(mirror_of[m]) for m in minus_sites]
        p = permute_factors(plus_shape, perm)

        twists = dict(twists or {})
        factors = []
        for m in minus_sites:
            d = dims[mirror_of[m]]
            t = twists.pop(m, None)
            factors.append(np.eye(d) if t is None else as_matrix(t, f"twist on {m}"))
        if twists:
            raise DimensionMismatch(f"twists given for unknown sites {sorted(twists)}")
        u = kron(*factors) @ p if factors else np.eye(1)

        return cls(
            plus_shape=plus_shape,
            minus_shape=minus_shape,
            theta_unitary=u,
            plus_sites=tuple(names),
            minus_sites=tuple(minus_sites),
            site_map=tuple(sorted(site_map.items())),
        )

    def _check_plus_vector(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        if v.size != self.dim_plus:
            raise DimensionMismatch(f"expected a vector of length {self.dim_plus}, got {v.size}")
        return v

    def _check_plus_operator(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        require_square(x, self.dim_plus, "operator on ℋ₊")
        return x

    def theta_hat(self, v: np.ndarray) -> np.ndarray:
        return as_vector(self.theta_unitary @ np.conj(self._check_plus_vector(v)))

    def theta_hat_inv(self, w: np.ndarray) -> np.ndarray:
        return as_vector(np.conj(dagger(self.theta_unitary) @ self._check_plus_vector(w)))

    def Theta(self, x: np.ndarray) -> ComplexMatrix:
        u = self.theta_unitary
        return as_matrix(u @ np.conj(self._check_plus_operator(x)) @ dagger(u), "Θ(x)")

    def Theta_inv(self, y: np.ndarray) -> ComplexMatrix:
        u = self.theta_unitary
        return as_matrix(np.conj(dagger(u) @ self._check_plus_operator(y) @ u), "Θ⁻¹(y)")

    def max_entangled(self) -> np.ndarray:
        """Σ_i θ̂|i⟩⊗|i⟩; component (a, i) is theta_unitary[a, i]."""
        return as_vector(self.theta_unitary.reshape(-1))

    def lift(self, extra: int) -> "Bipartition":
        """θ̂ ⊗ conj on (ℋ₋⊗ℂᵏ) ⊗ (ℋ₊⊗ℂᵏ)."""
        sites = {}
        if self.site_map and self.minus_sites:
            sites = dict(plus_sites=self.plus_sites + ("aux",), minus_sites=self.minus_sites + ("-aux",),
                         site_map=tuple(sorted(self.site_map + (("aux", "-aux"),))))
        return Bipartition(
            plus_shape=tuple(self.plus_shape) + (extra,),
            minus_shape=tuple(self.minus_shape) + (extra,),
            theta_unitary=np.kron(self.theta_unitary, np.eye(extra)),
            **sites,
        )

    def to_descriptor(self) -> dict:
        sites = self.plus_sites or tuple(f"p{k}" for k in range(len(self.plus_shape)))
        payload = {
            "plus_sites": [{"name": n, "dim": d} for n, d in zip(sites, self.plus_shape)],
            "minus_sites": list(self.minus_sites) or None,
            "site_map": [list(pair) for pair in self.site_map] or None,
            "theta_unitary": MatrixFile.from_matrix(self.theta_unitary).model_dump(),
        }
        return payload


class SiteEntry(BaseModel):
    name: str = Field(..., description="Site identifier")
    dim: int = Field(..., gt=0, description="Local Hilbert space dimension")


class BipartitionFile(BaseModel):
    """Bipartition descriptor file"""

    plus_sites: List[SiteEntry] = Field(..., description="Factors of ℋ₊ in order")
    minus_sites: Optional[List[str]] = Field(None, description="Factor order of ℋ₋")
    site_map: Optional[List[Tuple[str, str]]] = Field(None, description="(plus, minus) pairs")
    twists: Optional[Dict[str, MatrixFile]] = Field(None, description="θ₀ twist per minus site")
    theta_unitary: Optional[MatrixFile] = Field(None, description="Precompiled θ̂ unitary")

    def build(self) -> Bipartition:
        plus = [(s.name, s.dim) for s in self.plus_sites]
        if self.theta_unitary is not None and not self.twists:
            compiled = Bipartition.from_sites(plus, self.minus_sites, dict(self.site_map or []))
            return Bipartition(
                plus_shape=compiled.plus_shape,
                minus_shape=compiled.minus_shape,
                theta_unitary=self.theta_unitary.to_matrix(),
                plus_sites=compiled.plus_sites,
                minus_sites=compiled.minus_sites,
                site_map=compiled.site_map,
            )
        twists = {k: v.to_matrix() for k, v in (self.twists or {}).items()}
        return Bipartition.from_sites(plus, self.minus_sites, dict(self.site_map or []), twists)


def load_bipartition(path: Union[str, Path]) -> Bipartition:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
        b = BipartitionFile.model_validate(payload).build()
    except FileNotFoundError as e:
        raise ParseError(str(path), "file not found") from e
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.msg, offset=e.pos) from e
    except ValidationError as e:
        raise ParseError(str(path), str(e)) from e
    logger.debug(f"Loaded bipartition {b.plus_shape} from {path}")
    return b


def save_bipartition(path: Union[str, Path], b: Bipartition) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(b.to_descriptor(), indent=2))
    return path


@dataclass(frozen=True)
class Region:
    """A finite set of sites split by the reflection hyperplane"""

    plus: FrozenSet[str]
    minus: FrozenSet[str]
    label: str = ""

    @classmethod
    def symmetric(cls, plus: Iterable[str], mirror: Mapping[str, str], label: str = "") -> "Region":
        plus = frozenset(plus)
        return cls(plus=plus, minus=frozenset(mirror[s] for s in plus), label=label)

    @property
    def sites(self) -> FrozenSet[str]:
        return self.plus | self.minus

    def is_symmetric(self, mirror: Mapping[str, str]) -> bool:
        return frozenset(mirror[s] for s in self.plus if s in mirror) == self.minus and \
            all(s in mirror for s in self.plus)

    def issubset(self, other: "Region") -> bool:
        return self.plus <= other.plus and self.minus <= other.minus

    def isdisjoint(self, other: "Region") -> bool:
        return self.sites.isdisjoint(other.sites)

    def key(self) -> Tuple[str, ...]:
        return tuple(sorted(self.plus))
