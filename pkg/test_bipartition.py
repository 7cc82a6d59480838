import json

import numpy as np
import pytest

from bipartition import Bipartition, Region, load_bipartition, save_bipartition
from errors import DimensionMismatch, ParseError
from tensorlab import random_hermitian

HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


@pytest.fixture
def twisted():
    return Bipartition.from_sites([("a", 2), ("b", 3)], minus_sites=["-b", "-a"], twists={"-a": HADAMARD})


def test_theta_is_an_antilinear_involution(twisted, rng):
    x = random_hermitian(rng, 6) + 1j * random_hermitian(rng, 6)
    y = random_hermitian(rng, 6)
    assert np.allclose(twisted.Theta(twisted.Theta(x)), x)
    assert np.allclose(twisted.Theta(x @ y), twisted.Theta(x) @ twisted.Theta(y))
    assert np.allclose(twisted.Theta(2j * x), -2j * twisted.Theta(x))
    assert np.allclose(twisted.Theta_inv(twisted.Theta(x)), x)


def test_minus_factor_order_follows_site_list(twisted):
    assert twisted.plus_shape == (2, 3)
    assert twisted.minus_shape == (3, 2)
    assert twisted.shape == (3, 2, 2, 3)


def test_plain_max_entangled_is_vec_identity():
    b = Bipartition.plain([2, 2])
    assert np.allclose(b.max_entangled(), np.eye(4).reshape(-1))


def test_rejects_twist_squaring_to_minus_one():
    with pytest.raises(DimensionMismatch):
        Bipartition.from_sites([("a", 2)], twists={"-a": np.array([[0, 1], [-1, 0]])})


def test_rejects_incomplete_site_map():
    with pytest.raises(DimensionMismatch):
        Bipartition.from_sites([("a", 2), ("b", 2)], site_map={"a": "-a"})


def test_descriptor_round_trip(tmp_path, twisted):
    path = save_bipartition(tmp_path / "b.json", twisted)
    loaded = load_bipartition(path)
    assert loaded.plus_shape == twisted.plus_shape
    assert loaded.minus_shape == twisted.minus_shape
    assert np.allclose(loaded.theta_unitary, twisted.theta_unitary)


def test_descriptor_with_twists(tmp_path):
    path = tmp_path / "b.json"
    path.write_text(json.dumps({
        "plus_sites": [{"name": "q", "dim": 2}],
        "twists": {"-q": {"rows": 2, "cols": 2, "entries": [[0, 0], [1, 0], [1, 0], [0, 0]]}},
    }))
    b = load_bipartition(path)
    assert np.allclose(b.theta_unitary, [[0, 1], [1, 0]])


def test_descriptor_validation_error(tmp_path):
    path = tmp_path / "b.json"
    path.write_text(json.dumps({"plus_sites": [{"name": "q", "dim": 0}]}))
    with pytest.raises(ParseError):
        load_bipartition(path)


def test_region_relations():
    mirror = {"p0": "m0", "p1": "m1"}
    small = Region.symmetric(["p0"], mirror)
    big = Region.symmetric(["p0", "p1"], mirror)
    other = Region.symmetric(["p1"], mirror)
    assert small.issubset(big) and not big.issubset(small)
    assert small.isdisjoint(other)
    assert big.is_symmetric(mirror)
    assert not Region(frozenset({"p0"}), frozenset(), "half").is_symmetric(mirror)
    assert big.key() == ("p0", "p1")
