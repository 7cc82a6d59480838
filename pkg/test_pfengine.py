import numpy as np
import pytest

from conftest import random_symmetric_cp
from errors import NotProjection, NotSymmetric
from pfengine import (
    SymmetricCPMap,
    bim,
    bimodule_residual,
    canonical_pf,
    equilibrium_fixed_points_match,
    equilibrium_map,
    fixed_points,
    pf_eigenspace,
    spectral_radius,
    truncate,
    verify_eigenspace_structure,
    verify_fixed_points,
    verify_lemma_support,
)
from tensorlab import kron, random_hermitian

CASES = [(d, support) for d in range(2, 7) for support in (d, max(1, d // 2))]


@pytest.mark.parametrize("d, support", CASES)
def test_pf_vector_and_support(rng, d, support):
    for _ in range(25 // len(CASES) + 3):
        psi, p = random_symmetric_cp(rng, d, support)
        pf = canonical_pf(psi)
        assert pf.rho == pytest.approx(spectral_radius(psi))
        assert np.linalg.norm(psi.apply(pf.xi) - pf.rho * pf.xi) <= 1e-8 * pf.rho * np.linalg.norm(pf.xi)
        assert np.linalg.eigvalsh(pf.xi)[0] >= -1e-10 * np.linalg.norm(pf.xi, 2)
        assert np.linalg.norm(pf.p_max - p) < 1e-6
        assert pf.p_max_rank == support
        assert pf.maximal


@pytest.mark.parametrize("d, support", CASES)
def test_eigenspace_is_dressed_bimodule(rng, d, support):
    psi, _ = random_symmetric_cp(rng, d, support)
    report = verify_eigenspace_structure(psi)
    assert report.passed
    assert report.eigenspace_dimension == report.bim_pmax_dimension


@pytest.mark.parametrize("d, support", CASES)
def test_support_lemma_residuals(rng, d, support):
    psi, _ = random_symmetric_cp(rng, d, support)
    residuals = verify_lemma_support(psi, rng)
    assert max(residuals.values()) < 1e-8


def test_degenerate_eigenspace_from_tensor_factor(rng):
    kraus = [kron(random_hermitian(rng, 2), np.eye(2)) for _ in range(3)]
    psi = SymmetricCPMap.from_kraus(kraus)
    assert bim(psi).dimension == 4
    assert pf_eigenspace(psi).shape[0] == 4
    report = verify_eigenspace_structure(psi)
    assert report.passed and report.eigenspace_dimension == 4
    assert bimodule_residual(psi, bim(psi), rng) < 1e-10
    assert equilibrium_fixed_points_match(psi)


@pytest.mark.parametrize("d, support", [(3, 3), (4, 2), (5, 2)])
def test_equilibrium_map_is_unital_with_invariant_state(rng, d, support):
    psi, _ = random_symmetric_cp(rng, d, support)
    eq = equilibrium_map(psi)
    assert eq.isometry.shape == (d, support)
    report = verify_fixed_points(eq.ucp, eq.state)
    assert report.passed
    assert report.fixed_dimension == fixed_points(eq.ucp).shape[0]
    assert np.trace(eq.state).real == pytest.approx(1.0)
    assert equilibrium_fixed_points_match(psi)


def test_truncation_to_the_pf_support_keeps_the_pf_data(rng):
    psi, p = random_symmetric_cp(rng, 4, 2)
    pf = canonical_pf(psi)
    pf0 = canonical_pf(truncate(psi, pf.p_max))
    assert pf0.rho == pytest.approx(pf.rho)
    assert np.linalg.norm(pf0.p_max - p) < 1e-6
    with pytest.raises(NotProjection):
        truncate(psi, np.diag([1.0, 0.5, 0.0, 0.0]))


def test_rejects_non_symmetric_family(rng):
    k = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    with pytest.raises(NotSymmetric):
        SymmetricCPMap((k,))


def test_dependent_kraus_family_is_canonicalised(rng):
    a = random_hermitian(rng, 3)
    psi = SymmetricCPMap.from_kraus([a, 2 * a, np.zeros((3, 3))])
    assert len(psi.kraus) == 1
    x = rng.normal(size=(3, 3))
    assert np.allclose(psi.apply(x), 5 * a @ x @ a)


def test_pf_vector_of_a_bipartite_map_with_spectrum_at_minus_rho():
    # Ψ(diag v) = diag(Av) for the path 0 - 1 - 2, so Ψⁿ(I)/ρⁿ alternates
    units = np.eye(3)
    kraus = [np.outer(units[i], units[j]) for i, j in ((0, 1), (1, 0), (1, 2), (2, 1))]
    psi = SymmetricCPMap.from_kraus(kraus)
    y1 = psi.apply(np.eye(3)) / np.sqrt(2)
    assert not np.allclose(psi.apply(y1) / np.sqrt(2), y1)
    pf = canonical_pf(psi)
    assert pf.rho == pytest.approx(np.sqrt(2))
    expected = np.diag([1.0, np.sqrt(2), 1.0])
    scale = pf.xi[0, 0].real
    assert np.allclose(pf.xi / scale, expected)
    assert pf.p_max_rank == 3
