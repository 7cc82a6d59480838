import numpy as np
import pytest

from bipartition import Bipartition
from config import settings
from conftest import random_rp_parts, rp_combination
from errors import DimensionMismatch, LinearDependence, NotHermitian, NotReflectionPositive, ZeroVector
from rpcore import (
    SuperOperator,
    assemble_rp_hamiltonian,
    build_rp_hamiltonian,
    conjugate_superop,
    decompose_rp_hamiltonian,
    is_completely_positive,
    is_rp_operator,
    is_rp_state,
    kraus_from_choi,
    o_inv,
    o_map,
    reduced_density,
    rp_form_verdict,
    rp_functional,
    semigroup_verdicts,
)
from tensorlab import heat_kernel, random_hermitian

TAUS = [0.1, 0.5, 1.0, 2.0]
HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


@pytest.mark.parametrize("dp", [2, 3])
def test_o_map_inverts_and_gives_reduced_density(rng, dp):
    b = Bipartition.plain([dp])
    v = rng.normal(size=dp * dp) + 1j * rng.normal(size=dp * dp)
    assert np.allclose(o_inv(o_map(v, b), b), v)
    rho = reduced_density(v, b)
    full = np.outer(v, v.conj()).reshape(dp, dp, dp, dp)
    assert np.allclose(rho, np.einsum("aiaj->ij", full))


def test_o_map_of_max_entangled_is_identity():
    b = Bipartition.from_sites([("q", 2)], twists={"-q": HADAMARD})
    assert np.allclose(o_map(b.max_entangled(), b), np.eye(2))


def test_o_map_dimension_check():
    with pytest.raises(DimensionMismatch):
        o_map(np.ones(5), Bipartition.plain([2]))


@pytest.mark.parametrize("dp", [2, 3])
def test_rp_iff_conjugated_map_is_cp(rng, dp):
    b = Bipartition.plain([dp])
    positives = 0
    for trial in range(100):
        kind = trial % 3
        if kind == 0:
            t = random_hermitian(rng, dp * dp)
        elif kind == 1:
            t = rp_combination(rng, b, list(rng.uniform(0.1, 1.0, size=3)))
        else:
            t = rp_combination(rng, b, [1.0, 1.0, -2.0])
        via_choi = is_rp_operator(t, b)
        via_form = rp_form_verdict(t, b)
        assert via_choi.positive == via_form.positive
        if kind == 1:
            assert via_choi.positive
            positives += 1
        if kind == 2:
            assert not via_choi.positive
    assert positives > 0


def test_rp_functional_is_nonnegative_for_rp_operator(rng):
    b = Bipartition.plain([2])
    t = rp_combination(rng, b, [0.5, 1.0])
    for _ in range(10):
        x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        z = rp_functional(t, x, b)
        assert z.real >= -1e-12 and abs(z.imag) < 1e-10


def test_conjugated_identity_is_identity_map():
    b = Bipartition.plain([3])
    s = conjugate_superop(np.eye(9), b)
    x = np.arange(9.0).reshape(3, 3)
    assert np.allclose(s.apply(x), x)
    assert is_completely_positive(s).positive


def test_superoperator_kraus_and_transfer_agree(rng):
    kraus = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(2)]
    s = SuperOperator.from_kraus(kraus)
    x = rng.normal(size=(3, 3))
    assert np.allclose(s.apply(x), sum(k @ x @ k.conj().T for k in kraus))
    assert np.allclose(SuperOperator.from_transfer(s.transfer()).choi, s.choi)
    rebuilt = SuperOperator.from_kraus(kraus_from_choi(s.choi))
    assert np.allclose(rebuilt.choi, s.choi)


def test_rp_state_needs_psd_o_map(rng):
    b = Bipartition.plain([2])
    assert is_rp_state(b.max_entangled(), b).positive
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    assert not is_rp_state(singlet, b).positive
    with pytest.raises(ZeroVector):
        is_rp_state(np.zeros(4), b)


@pytest.mark.parametrize("dp", [2, 3])
def test_structure_theorem_semigroup(rng, dp):
    b = Bipartition.plain([dp])
    for _ in range(50):
        h_plus, cross = random_rp_parts(rng, dp, n_cross=2)
        rp = build_rp_hamiltonian(h_plus, cross, b, taus=TAUS)
        assert rp.is_rp
        eye = np.eye(dp)
        assert np.allclose(rp.assembled, np.kron(rp.h_minus, eye) + np.kron(eye, rp.h_plus) + rp.h_zero)


@pytest.mark.parametrize("dp", [2, 3])
def test_flipped_cross_sign_breaks_positivity(rng, dp):
    b = Bipartition.plain([dp])
    for _ in range(50):
        o = random_hermitian(rng, dp)
        flipped = np.kron(b.Theta(o), o)
        verdicts = semigroup_verdicts(flipped, b, TAUS)
        assert any(not v.positive for _, v in verdicts)


def test_decomposition_rejects_flipped_sign(rng):
    b = Bipartition.plain([2])
    o = random_hermitian(rng, 2)
    h = np.kron(b.Theta(o), o)
    with pytest.raises(NotReflectionPositive):
        decompose_rp_hamiltonian(h, b)


def test_build_rejects_dependent_cross_terms(rng):
    b = Bipartition.plain([2])
    o = random_hermitian(rng, 2)
    with pytest.raises(LinearDependence):
        build_rp_hamiltonian(np.zeros((2, 2)), [o, 2 * o], b)


def test_build_rejects_non_hermitian_h_plus():
    b = Bipartition.plain([2])
    with pytest.raises(NotHermitian):
        build_rp_hamiltonian(np.array([[0, 1], [0, 0]]), [], b)


@pytest.mark.parametrize("twisted", [False, True])
def test_decomposition_recovers_the_hamiltonian(rng, twisted):
    b = Bipartition.from_sites([("a", 2), ("b", 2)], twists={"-a": HADAMARD} if twisted else None)
    h_plus, cross = random_rp_parts(rng, 4, n_cross=3)
    h = assemble_rp_hamiltonian(h_plus, cross, b)
    rp = decompose_rp_hamiltonian(h, b)
    assert np.allclose(rp.assembled, h)
    assert np.allclose(assemble_rp_hamiltonian(rp.h_plus, rp.cross_terms, b), h)
    assert len(rp.cross_terms) <= 3


def test_semigroup_of_decomposed_hamiltonian_is_rp(rng):
    b = Bipartition.plain([3])
    h_plus, cross = random_rp_parts(rng, 3)
    h = assemble_rp_hamiltonian(h_plus, cross, b)
    for tau in TAUS:
        assert is_rp_operator(heat_kernel(h, tau), b).positive


def test_build_records_the_semigroup_verdicts(rng):
    b = Bipartition.plain([3])
    rp = build_rp_hamiltonian(*random_rp_parts(rng, 3), b, taus=TAUS)
    assert rp.verified
    assert [tau for tau, _ in rp.semigroup] == TAUS


def test_skipped_choi_check_is_not_rp(rng, monkeypatch):
    b = Bipartition.plain([3])
    monkeypatch.setattr(settings, "choi_dim_limit", 4)
    rp = build_rp_hamiltonian(*random_rp_parts(rng, 3), b, taus=TAUS)
    assert not rp.verified
    assert rp.semigroup == ()
    assert not rp.is_rp
    assert not build_rp_hamiltonian(*random_rp_parts(rng, 3), b, verify=False).is_rp
