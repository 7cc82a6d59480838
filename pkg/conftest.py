"""
Shared fixtures and random instance generators for the rpkit test suite.

Every generator takes an explicit numpy Generator so that failures reproduce
from the seed alone.
"""

from typing import List, Tuple

import numpy as np
import pytest
from loguru import logger

from bipartition import Bipartition
from errors import FrustrationDetected
from groundstate import dilate
from localnet import InteractionSpec, RegionFamily, SiteInfo, Term
from pfengine import SymmetricCPMap
from tensorlab import dagger, kron, random_hermitian, random_projection, random_unitary

SEED = 20240601


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)


@pytest.fixture(autouse=True)
def quiet_logs():
    """Keep loguru output out of the pytest capture unless a test asks for it."""
    logger.disable("")
    yield
    logger.enable("")


def random_rp_parts(rng: np.random.Generator, d: int, n_cross: int = 2,
                    h_scale: float = 1.0) -> Tuple[np.ndarray, List[np.ndarray]]:
    """h₊ and Hermitian cross terms; −ΣΘ(O)⊗O is then Hermitian for any Θ."""
    h_plus = random_hermitian(rng, d, h_scale)
    cross = [random_hermitian(rng, d) for _ in range(n_cross)]
    return h_plus, cross


def rp_combination(rng: np.random.Generator, b: Bipartition, signs: List[float]) -> np.ndarray:
    """Σ c_j Θ(A_j)⊗A_j with Hermitian A_j; reflection positive iff every c_j ≥ 0."""
    d = b.dim_plus
    t = np.zeros((b.dim, b.dim), dtype=np.complex128)
    for c in signs:
        a = random_hermitian(rng, d)
        t = t + c * np.kron(b.Theta(a), a)
    return t


def random_symmetric_cp(rng: np.random.Generator, d: int, support: int, n_kraus: int = 3,
                        leak: float = 0.1) -> Tuple[SymmetricCPMap, np.ndarray]:
    """
    Hermitian Kraus family K = pAp + leak·qCq.

    The p block dominates the spectral radius, so the PF support is p.
    """
    p = random_projection(rng, d, support)
    q = np.eye(d) - p
    kraus = []
    for _ in range(n_kraus):
        k = p @ random_hermitian(rng, d) @ p
        if support < d:
            k = k + leak * (q @ random_hermitian(rng, d) @ q)
        kraus.append(k)
    return SymmetricCPMap.from_kraus(kraus), p


def random_ltqo_instance(rng: np.random.Generator, dp: int = 4, rank: int = 2, n_cross: int = 2,
                         attempts: int = 20) -> Tuple[np.ndarray, List[np.ndarray], Bipartition]:
    """
    Frustration-free H with H₊ = −P and O_j = PA_jP + 0.1·(I−P)C_j(I−P).

    Instances whose dilation reports frustration are redrawn.
    """
    b = Bipartition.plain([dp])
    for _ in range(attempts):
        p = random_projection(rng, dp, rank)
        q = np.eye(dp) - p
        cross = [p @ random_hermitian(rng, dp) @ p + 0.1 * (q @ random_hermitian(rng, dp) @ q)
                 for _ in range(n_cross)]
        try:
            dilate(None, -p, cross, b)
        except FrustrationDetected:
            continue
        return -p, cross, b
    raise RuntimeError("no frustration-free instance drawn")


def random_reflection(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    u = random_unitary(rng, d)
    signs = np.ones(d)
    signs[d // 2:] = -1
    return u @ np.diag(signs) @ dagger(u)


def random_net_family(rng: np.random.Generator) -> RegionFamily:
    """
    Three qubit pairs: a reflection bond across the hyperplane on p0 and
    rank-one fields on p1 and p2.
    """
    sites = [SiteInfo("m0", 2, -1.0), SiteInfo("m1", 2, -2.0), SiteInfo("m2", 2, -2.0),
             SiteInfo("p0", 2, 1.0), SiteInfo("p1", 2, 2.0), SiteInfo("p2", 2, 2.0)]
    mirror = {"p0": "m0", "p1": "m1", "p2": "m2"}
    o = random_reflection(rng)
    p1 = random_projection(rng, 2, 1)
    p2 = random_projection(rng, 2, 1)
    terms = [
        Term(("m0", "p0"), -kron(np.conj(o), o), "bond"),
        Term(("p1",), -p1, "field1"), Term(("m1",), -np.conj(p1), "field1-"),
        Term(("p2",), -p2, "field2"), Term(("m2",), -np.conj(p2), "field2-"),
    ]
    spec = InteractionSpec(sites, mirror, terms, name="random net")
    regions = [spec.region(["p0"], "A"), spec.region(["p1"], "B"), spec.region(["p2"], "C"),
               spec.region(["p0", "p1"], "AB"), spec.region(["p0", "p1", "p2"], "ABC")]
    return RegionFamily(spec, regions)


def corner_pair_family() -> RegionFamily:
    """Y pins |00⟩ on both sides of the cut while X carries no terms at all."""
    sites = [SiteInfo("m0", 2, -1.0), SiteInfo("m1", 2, -2.0), SiteInfo("p0", 2, 1.0), SiteInfo("p1", 2, 2.0)]
    mirror = {"p0": "m0", "p1": "m1"}
    corner = np.zeros((4, 4), dtype=np.complex128)
    corner[0, 0] = 1.0
    terms = [Term(("m0", "m1", "p0", "p1"), -np.kron(corner, corner), "corner")]
    spec = InteractionSpec(sites, mirror, terms, name="corner")
    return RegionFamily(spec, [spec.region(["p0"], "X"), spec.region(["p0", "p1"], "Y")])
