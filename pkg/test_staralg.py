import json

import numpy as np
import pytest

from bipartition import Bipartition
from errors import DimensionMismatch
from staralg import (
    MatrixStarAlgebra,
    algebra_equal,
    center_and_blocks,
    commutant,
    commutant_of_set,
    generated_algebra,
    interaction_algebra,
    iso_signature_equal,
    orthonormal_span,
    save_algebra,
    span_residual,
)
from tensorlab import kron, random_hermitian

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def test_orthonormal_span_and_residual(rng):
    a = random_hermitian(rng, 3)
    basis = orthonormal_span([a, 2 * a, np.eye(3)])
    assert basis.shape == (2, 3, 3)
    flat = basis.reshape(2, -1)
    assert np.allclose(np.conj(flat) @ flat.T, np.eye(2))
    assert span_residual(a + 3 * np.eye(3), basis) < 1e-12
    assert span_residual(random_hermitian(rng, 3), basis) > 1e-3


@pytest.mark.parametrize("generators, dimension, signature", [
    ([X], 2, (1, 1)),
    ([X, Z], 4, (2,)),
    ([kron(X, I2), kron(Z, I2)], 4, (2,)),
    ([kron(Z, I2), kron(I2, Z)], 4, (1, 1, 1, 1)),
])
def test_generated_algebra_structure(generators, dimension, signature):
    a = generated_algebra(generators)
    assert a.dimension == dimension
    assert sorted(a.block_signature) == sorted(signature)
    assert a.unit_residual() < 1e-10


def test_block_diagonal_generators(rng):
    def block(h2, c):
        m = np.zeros((3, 3), dtype=complex)
        m[:2, :2] = h2
        m[2, 2] = c
        return m

    gens = [block(random_hermitian(rng, 2), 0.3), block(random_hermitian(rng, 2), -1.2)]
    a = generated_algebra(gens)
    assert a.dimension == 5
    assert a.block_signature == (2, 1)
    assert a.closure_residual(rng) < 1e-10
    assert len(a.structure.minimal_central_projections) == 2


def test_commutant_of_matrix_factor():
    c = commutant_of_set([kron(X, I2), kron(Z, I2)], np.eye(4))
    assert c.dimension == 4
    assert algebra_equal(c, generated_algebra([kron(I2, X), kron(I2, Z)]))
    double = commutant(c)
    assert algebra_equal(double, generated_algebra([kron(X, I2), kron(Z, I2)]))


def test_commutant_under_a_unit(rng):
    p = np.diag([1.0, 1.0, 0.0]).astype(complex)
    h = np.zeros((3, 3), dtype=complex)
    h[:2, :2] = Z
    c = commutant_of_set([h], p)
    assert c.dimension == 2
    assert all(np.allclose(p @ b @ p, b) for b in c.basis)


def test_project_onto_algebra(rng):
    a = generated_algebra([Z])
    m = rng.normal(size=(2, 2)) + 0j
    assert np.allclose(a.project(m), np.diag(np.diag(m)))
    assert a.contains(Z) and not a.contains(X)


def test_interaction_algebra_of_a_reflection_bond(rng):
    b = Bipartition.plain([2])
    o = random_hermitian(rng, 2)
    a = interaction_algebra(-np.kron(b.Theta(o), o), b)
    assert a.dimension == 2
    assert a.contains(o)


def test_interaction_algebra_of_max_entangled_projection():
    b = Bipartition.plain([3])
    omega = b.max_entangled() / np.sqrt(3)
    a = interaction_algebra(np.outer(omega, omega.conj()), b)
    assert a.dimension == 9
    assert a.block_signature == (3,)


def test_algebra_equal_needs_same_ambient():
    with pytest.raises(DimensionMismatch):
        algebra_equal(generated_algebra([X]), generated_algebra([kron(X, I2)]))


def test_iso_signature_equal_accepts_tuples():
    assert iso_signature_equal(generated_algebra([X]), (1, 1))
    assert not iso_signature_equal((2,), (1, 1))


def test_save_algebra(tmp_path):
    index = save_algebra(tmp_path, "pauli", generated_algebra([X, Z]))
    payload = json.loads(index.read_text())
    assert payload["block_signature"] == [2]
    assert len(payload["basis_files"]) == 4
    assert (tmp_path / payload["unit_file"]).exists()


def test_empty_generator_list_needs_ambient_dimension():
    with pytest.raises(DimensionMismatch):
        generated_algebra([])
    a = generated_algebra([], ambient_dim=3)
    assert a.dimension == 1
    assert isinstance(a, MatrixStarAlgebra)


def test_center_and_blocks_of_a_direct_sum():
    a = generated_algebra([kron(Z, I2), kron(I2, X), kron(I2, Z)])
    structure = center_and_blocks(a)
    assert structure.center.dimension == 2
    assert sorted(structure.block_signature) == [2, 2]
    projections = structure.minimal_central_projections
    assert np.allclose(sum(projections), np.eye(4))
    for p in projections:
        assert np.allclose(p @ p, p)
        assert all(np.allclose(p @ b, b @ p) for b in a.basis)
