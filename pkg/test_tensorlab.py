import json

import numpy as np
import pytest

from errors import DimensionMismatch, NotPSD, ParseError
from tensorlab import (
    MatrixFile,
    embed_operator,
    kron,
    load_matrix,
    numerical_rank,
    operator_schmidt,
    partial_trace,
    permute_factors,
    psd_function,
    random_hermitian,
    random_projection,
    range_projection,
    save_matrix,
    support_projection,
)


def test_partial_trace_of_product(rng):
    a = random_hermitian(rng, 2)
    b = random_hermitian(rng, 3)
    c = random_hermitian(rng, 2)
    m = kron(a, b, c)
    assert np.allclose(partial_trace(m, [2, 3, 2], keep=[1]), np.trace(a) * np.trace(c) * b)
    assert np.allclose(partial_trace(m, [2, 3, 2], keep=[2, 0]), np.trace(b) * np.kron(a, c))
    assert np.allclose(partial_trace(m, [2, 3, 2], keep=[]), [[np.trace(m)]])


def test_partial_trace_rejects_bad_index():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(4), [2, 2], keep=[2])


def test_embed_operator_matches_permuted_kron(rng):
    op = random_hermitian(rng, 4)
    full = embed_operator(op, [2, 0], [2, 3, 2])
    # factors (2, 0, 1) -> (0, 1, 2)
    p = permute_factors([2, 2, 3], [1, 2, 0])
    expected = p @ np.kron(op, np.eye(3)) @ p.conj().T
    assert np.allclose(full, expected)


def test_permute_factors_swaps_tensor_legs(rng):
    u = rng.normal(size=2) + 1j * rng.normal(size=2)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    p = permute_factors([2, 3], [1, 0])
    assert np.allclose(p @ np.kron(u, v), np.kron(v, u))


def test_operator_schmidt_reconstructs(rng):
    o = random_hermitian(rng, 6)
    s, lefts, rights = operator_schmidt(o, 2, 3)
    rebuilt = sum(sk * np.kron(a, b) for sk, a, b in zip(s, lefts, rights))
    assert np.allclose(rebuilt, o)
    assert len(s) <= 4


def test_psd_function_on_support(rng):
    p = random_projection(rng, 4, 2)
    m = 3.0 * p
    assert np.allclose(psd_function(m, np.sqrt), np.sqrt(3.0) * p)
    assert np.allclose(support_projection(m), p)
    with pytest.raises(NotPSD):
        psd_function(-m, np.sqrt)


def test_range_projection_of_rectangular_product(rng):
    a = rng.normal(size=(5, 2)) + 1j * rng.normal(size=(5, 2))
    m = a @ (rng.normal(size=(2, 5)) + 0j)
    p = range_projection(m)
    assert numerical_rank(p) == 2
    assert np.allclose(p @ a, a)


def test_matrix_file_round_trip(tmp_path, rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    path = save_matrix(tmp_path / "m.json", m)
    assert np.array_equal(load_matrix(path), m)
    assert MatrixFile.from_matrix(m).rows == 3


def test_as_matrix_arrays_are_read_only(rng):
    m = kron(np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        m[0, 0] = 2.0


@pytest.mark.parametrize("payload", [
    "{not json",
    json.dumps({"rows": 2, "cols": 2, "entries": [[1, 0]]}),
    json.dumps({"rows": 0, "cols": 1, "entries": []}),
])
def test_load_matrix_rejects_malformed_files(tmp_path, payload):
    path = tmp_path / "bad.json"
    path.write_text(payload)
    with pytest.raises(ParseError):
        load_matrix(path)


def test_load_matrix_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_matrix(tmp_path / "absent.json")
