import numpy as np
import pytest

from bipartition import Bipartition
from conftest import random_ltqo_instance, random_rp_parts
from errors import NotGroundState, ZeroPF
from groundstate import (
    cut_by,
    dilate,
    g_matrix_witness,
    ground_projection,
    ground_state,
    ground_state_to_w,
    local_commutant,
    ltqo_check,
    maximal_support_check,
)
from models import build_toric_slab, sphere_toric_instance
from rpcore import assemble_rp_hamiltonian, is_rp_state
from tensorlab import kron, random_hermitian


def engineered_hamiltonian(rng):
    """RP Hamiltonian acting trivially on a spectator qubit on each side."""
    b = Bipartition.plain([2, 2])
    h_plus = kron(random_hermitian(rng, 2), np.eye(2))
    cross = [kron(random_hermitian(rng, 2), np.eye(2)) for _ in range(2)]
    return assemble_rp_hamiltonian(h_plus, cross, b), b


def random_ground_vector(rng, g):
    c = rng.normal(size=g.degeneracy) + 1j * rng.normal(size=g.degeneracy)
    v = g.ground_basis @ c
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("dp", [2, 3, 4])
def test_pf_ground_state_is_rp_with_support_range(rng, dp):
    b = Bipartition.plain([dp])
    for _ in range(5):
        h_plus, cross = random_rp_parts(rng, dp)
        g = ground_state(assemble_rp_hamiltonian(h_plus, cross, b), b)
        assert is_rp_state(g.phi_pf, b).positive
        assert g.range_residual < 1e-8
        assert np.allclose(g.projection_pi @ g.phi_pf, g.phi_pf)


def test_toric_slab_ground_space():
    slab = build_toric_slab(4, 1)
    g = ground_state(slab.hamiltonian.assembled, slab.bipartition)
    assert slab.n_qubits == 8
    assert g.degeneracy == 32 == slab.expected_degeneracy()
    assert np.allclose(g.pi_hat, np.eye(16))
    assert np.allclose(g.xi, np.eye(16))


def test_w_map_on_engineered_commutant(rng):
    h, b = engineered_hamiltonian(rng)
    g = ground_state(h, b)
    assert g.degeneracy == 4
    comm = local_commutant(h, b)
    assert comm.dimension >= 4
    cut = cut_by(comm, g.pi_hat)
    for _ in range(5):
        w = ground_state_to_w(random_ground_vector(rng, g), g, b, commutant_cut=cut)
        assert w.max_residual < 1e-8


def test_w_map_on_toric_slab(rng):
    slab = build_toric_slab(2, 1)
    h = slab.hamiltonian.assembled
    g = ground_state(h, slab.bipartition)
    w = ground_state_to_w(random_ground_vector(rng, g), g, slab.bipartition, hamiltonian=h)
    assert w.max_residual < 1e-8


def test_w_map_rejects_excited_vector(rng):
    h, b = engineered_hamiltonian(rng)
    g = ground_state(h, b)
    excited = np.linalg.eigh(h)[1][:, -1]
    with pytest.raises(NotGroundState):
        ground_state_to_w(excited, g, b)


@pytest.mark.parametrize("source", ["random", "engineered"])
def test_maximal_support_residuals(rng, source):
    if source == "random":
        b = Bipartition.plain([3])
        h = assemble_rp_hamiltonian(*random_rp_parts(rng, 3), b)
    else:
        h, b = engineered_hamiltonian(rng)
    g = ground_state(h, b)
    residuals = maximal_support_check(h, g, b)
    assert max(abs(v) for v in residuals.values()) < 1e-8


def test_zero_pf_when_ground_space_misses_max_entangled():
    b = Bipartition.plain([2])
    omega = b.max_entangled()
    with pytest.raises(ZeroPF):
        ground_state(np.outer(omega, omega.conj()), b)


def test_ground_projection_clusters_near_degenerate_levels():
    h = np.diag([-1.0, -1.0 + 1e-12, 0.5, 2.0])
    g = ground_projection(h)
    assert g.degeneracy == 2
    assert g.gap == pytest.approx(1.5)


def test_dilation_blocks_share_ground_energy(rng):
    h_plus, cross, b = random_ltqo_instance(rng)
    dilated = dilate(None, h_plus, cross, b)
    energies = list(dilated.block_energies.values())
    assert max(energies) - min(energies) < 1e-7
    assert dilated.block_pair_residual < 1e-8
    assert dilated.extraction_residual < 1e-6
    assert dilated.is_rp


def test_ltqo_agrees_with_uniqueness_on_random_instances(rng):
    for _ in range(10):
        h_plus, cross, b = random_ltqo_instance(rng)
        report = ltqo_check(None, h_plus, cross, b)
        assert report.agree


def test_ltqo_negative_case_without_interaction():
    b = Bipartition.plain([2, 2])
    report = ltqo_check(None, np.zeros((4, 4)), [], b)
    assert report.degeneracy == 16
    assert not report.nondegenerate
    assert not report.ltqo
    assert report.witness is not None
    assert report.agree


def test_ltqo_on_the_sphere_instance():
    sphere = sphere_toric_instance()
    assert sphere.expected_degeneracy == 1
    report = ltqo_check(None, sphere.h_plus, sphere.cross_terms, sphere.bipartition)
    assert report.nondegenerate and report.ltqo
    assert report.degeneracy == 1


def test_g_matrix_witness_flags_distinguishable_states():
    b = Bipartition.plain([2])
    states = np.eye(4)[:, [0, 3]]
    witness, defect = g_matrix_witness(states, b)
    assert witness == (1, 1)
    assert defect > 0


def test_w_map_derives_the_commutant_when_none_is_given(rng):
    h, b = engineered_hamiltonian(rng)
    g = ground_state(h, b)
    for _ in range(3):
        w = ground_state_to_w(random_ground_vector(rng, g), g, b)
        assert w.commutant_residual < 1e-8
        assert w.max_residual < 1e-8


def test_w_map_flags_a_wrong_commutant(rng):
    h, b = engineered_hamiltonian(rng)
    g = ground_state(h, b)
    phi = random_ground_vector(rng, g)
    scalars = (g.pi_hat / np.linalg.norm(g.pi_hat))[None]
    w = ground_state_to_w(phi, g, b, commutant_cut=scalars)
    assert w.plus_residual < 1e-8
    assert w.commutant_residual > 1e-3
    unrelated = ground_state_to_w(phi, g, b, hamiltonian=random_hermitian(rng, b.dim))
    assert unrelated.commutant_residual > 1e-3


def test_ltqo_reports_a_checked_dilation(rng):
    h_plus, cross, b = random_ltqo_instance(rng)
    report = ltqo_check(None, h_plus, cross, b)
    assert report.rp_verified
    dilated = dilate(None, h_plus, cross, b)
    assert dilated.verified
    assert dilated.hamiltonian.semigroup
