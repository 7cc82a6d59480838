import json

import numpy as np
import pytest

from conftest import corner_pair_family, random_net_family
from errors import DimensionMismatch, NotReflectionPositive, ParseError
from localnet import (
    InteractionSpec,
    RegionFamily,
    SiteInfo,
    Term,
    boundary_reduction_check,
    extendability_check,
    extendability_defect,
    inclusion,
    load_interaction,
    load_regions,
    modular_consistency_check,
    nested_idempotents_check,
    net_axioms_check,
    pullback_state,
)
from models import toric_family, toric_interaction, toric_window
from tensorlab import MatrixFile, kron

Z = np.diag([1.0, -1.0]).astype(complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)


def region(family, label):
    return next(r for r in family.regions if r.label == label)


@pytest.fixture
def net(rng):
    return random_net_family(rng)


def test_net_axioms_hold_on_random_families(rng):
    for _ in range(10):
        family = random_net_family(rng)
        report = net_axioms_check(family)
        assert report.passed
        assert report.chains >= 2
        assert report.disjoint_pairs >= 3
        assert report.composition_residual < 1e-10
        assert modular_consistency_check(family, times=[0.3, 1.0, 2.7]).passed


def test_nested_toric_family():
    family = toric_family(4, 1)
    report = net_axioms_check(family)
    assert report.passed
    assert report.chains >= 1 and report.disjoint_pairs >= 1
    modular = modular_consistency_check(family, times=[0.3, 1.0, 2.7])
    assert modular.passed
    assert max(modular.residuals.values()) < 1e-8


def test_region_algebras(net):
    assert net.data(region(net, "A")).algebra.dimension == 2
    assert net.data(region(net, "B")).algebra.dimension == 1
    assert net.data(region(net, "AB")).algebra.dimension == 2


@pytest.mark.parametrize("x, y, surjective", [("A", "AB", True), ("B", "AB", False), ("AB", "ABC", True)])
def test_inclusions_are_injective_homomorphisms(net, x, y, surjective):
    inc = inclusion(region(net, x), region(net, y), net)
    assert inc.injective
    assert inc.surjective == surjective
    assert inc.multiplicativity_residual < 1e-10
    assert inc.commutation_residual < 1e-10
    assert inc.target_residual < 1e-8


def test_inclusion_needs_nested_regions(net):
    with pytest.raises(DimensionMismatch):
        inclusion(region(net, "AB"), region(net, "A"), net)


@pytest.mark.parametrize("x, y", [("A", "AB"), ("B", "AB"), ("A", "ABC")])
def test_frustration_free_pairs_are_extendable(net, x, y):
    assert extendability_check(region(net, x), region(net, y), net)


@pytest.mark.parametrize("x, y", [("A", "AB"), ("B", "ABC")])
def test_pullback_state_is_faithful(rng, net, x, y):
    pullback = pullback_state(region(net, x), region(net, y), net, rng)
    assert pullback.faithful
    assert pullback.identity_residual < 1e-10
    assert np.trace(pullback.density).real == pytest.approx(1.0)


def test_nested_idempotents(net):
    residuals = nested_idempotents_check(region(net, "A"), region(net, "AB"), net)
    assert max(residuals.values()) < 1e-10


def test_modular_flows_intertwine_inclusions(net):
    report = modular_consistency_check(net, times=[-1.0, 0.5, 2.0])
    assert report.passed
    assert set(report.residuals) == {-1.0, 0.5, 2.0}


def test_corner_pair_is_injective_and_faithful_but_not_extendable(rng):
    family = corner_pair_family()
    x, y = region(family, "X"), region(family, "Y")
    assert inclusion(x, y, family).injective
    assert pullback_state(x, y, family, rng).faithful
    assert not extendability_check(x, y, family)
    assert extendability_defect(x, y, family) > 0.5


def test_widening_into_the_bulk_preserves_the_boundary_algebra():
    family = toric_family(2, 2)
    report = boundary_reduction_check(family)
    assert report.interaction_range == pytest.approx(1.0)
    qualifying = [p for p in report.pairs if p.qualifying]
    assert qualifying
    assert all(p.dim_x == p.dim_y == 2 for p in qualifying)
    assert report.passed


def test_lengthening_along_the_cut_does_not_qualify():
    spec = toric_interaction(5, 1)
    x = toric_window(spec, 1, 3, 1, "short")
    y = toric_window(spec, 1, 5, 1, "long")
    report = boundary_reduction_check(RegionFamily(spec, [x, y]))
    (pair,) = report.pairs
    assert not pair.qualifying
    assert (pair.dim_x, pair.dim_y) == (4, 16)
    assert pair.signature_x == (2,) and pair.signature_y == (4,)
    assert not pair.iso
    assert report.passed


def qubit_pair_sites():
    return [SiteInfo("m0", 2, -1.0), SiteInfo("p0", 2, 1.0)]


def test_interaction_rejects_unmirrored_heights():
    sites = [SiteInfo("m0", 2, -0.5), SiteInfo("p0", 2, 1.0)]
    with pytest.raises(DimensionMismatch):
        InteractionSpec(sites, {"p0": "m0"}, [])


def test_interaction_rejects_non_hermitian_term():
    term = Term(("p0",), np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(NotReflectionPositive):
        InteractionSpec(qubit_pair_sites(), {"p0": "m0"}, [term])


def test_interaction_rejects_term_without_mirror():
    with pytest.raises(NotReflectionPositive):
        InteractionSpec(qubit_pair_sites(), {"p0": "m0"}, [Term(("p0",), Z)])


def test_interaction_rejects_wrong_cross_sign():
    with pytest.raises(NotReflectionPositive):
        InteractionSpec(qubit_pair_sites(), {"p0": "m0"}, [Term(("m0", "p0"), kron(X, X))])


def write_interaction(path, matrix):
    payload = {
        "name": "bond",
        "sites": [{"name": "m0", "dim": 2, "height": -1.0}, {"name": "p0", "dim": 2, "height": 1.0}],
        "mirror": [["p0", "m0"]],
        "terms": [{"support": ["m0", "p0"], "matrix": MatrixFile.from_matrix(matrix).model_dump()}],
    }
    path.write_text(json.dumps(payload))
    return path


def test_load_interaction_and_regions(tmp_path):
    spec = load_interaction(write_interaction(tmp_path / "bond.json", -kron(Z, Z)))
    assert spec.name == "bond"
    assert spec.plus_sites == ["p0"]
    regions_path = tmp_path / "regions.json"
    regions_path.write_text(json.dumps({"regions": [{"label": "A", "plus": ["p0"]}]}))
    (r,) = load_regions(regions_path, spec)
    assert r.label == "A"
    assert r.sites == {"p0", "m0"}


def test_load_regions_rejects_unknown_sites(tmp_path):
    spec = load_interaction(write_interaction(tmp_path / "bond.json", -kron(Z, Z)))
    regions_path = tmp_path / "regions.json"
    regions_path.write_text(json.dumps({"regions": [{"plus": ["p7"]}]}))
    with pytest.raises(ParseError):
        load_regions(regions_path, spec)


@pytest.mark.parametrize("text", ["{", '{"sites": []}', '{"sites": [{"name": "p0", "dim": 0, "height": 1}], '
                                                           '"mirror": [], "terms": []}'])
def test_load_interaction_parse_errors(tmp_path, text):
    path = tmp_path / "broken.json"
    path.write_text(text)
    with pytest.raises(ParseError):
        load_interaction(path)


def test_load_interaction_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_interaction(tmp_path / "absent.json")
