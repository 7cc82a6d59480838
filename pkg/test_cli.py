import json

import numpy as np
import pytest

from bipartition import Bipartition, save_bipartition
from cli import main
from config import settings
from reports import CheckResult, encode_matrices, json_safe, to_entry
from rpcore import assemble_rp_hamiltonian
from tensorlab import random_hermitian, save_matrix

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def read_report(path):
    return json.loads(path.read_text())


def entries(report):
    return {c["name"]: c for c in report["checks"]}


def test_fusion_hom_and_spectrum(tmp_path):
    labels = tmp_path / "labels.json"
    labels.write_text(json.dumps({"plaquettes": [["τ", "1", "τ", "τ"]]}))
    out = tmp_path / "fusion.json"
    code = main(["--out", str(out), "fusion", "--category", "fibonacci", "--hom", "2", "2",
                 "--modular-spectrum", str(labels)])
    assert code == 0
    report = read_report(out)
    checks = entries(report)
    assert [c["name"] for c in report["checks"]] == ["hom", "modular_spectrum", "quantum_dimensions"]
    assert checks["hom"]["values"]["dimension"] == 13
    assert checks["hom"]["passed"] is True
    assert max(checks["hom"]["values"]["identities"].values()) < 1e-9
    assert checks["modular_spectrum"]["values"]["exponent"] == pytest.approx(np.log((1 + np.sqrt(5)) / 2))


def test_toric_run_passes(tmp_path):
    out = tmp_path / "toric.json"
    assert main(["--out", str(out), "toric", "--L", "2", "--full-pipeline"]) == 0
    report = read_report(out)
    checks = entries(report)
    assert checks["degeneracy"]["values"]["degeneracy"] == 8
    assert checks["boundary_algebra"]["values"]["signature"] == [1, 1]
    assert checks["full_pipeline"]["values"]["matches_boundary_algebra"] is True
    assert checks["full_pipeline"]["values"]["rp_verified"] is True
    assert checks["reflection_positivity"]["passed"] is True
    assert checks["reflection_positivity"]["values"]["verified"] is True
    assert report["config"]["geometry"] == "rectangular windows"


def test_reports_are_deterministic(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["--seed", "7", "--out", str(first), "toric", "--L", "3"]) == 0
    assert main(["--seed", "7", "--out", str(second), "toric", "--L", "3"]) == 0
    bodies = []
    for path in (first, second):
        report = read_report(path)
        assert all(c["wall_clock"] >= 0 for c in report["checks"])
        for c in report["checks"]:
            del c["wall_clock"]
        bodies.append(report)
    assert bodies[0] == bodies[1]
    assert bodies[0]["config"]["seed"] == 7


def test_unverified_reflection_positivity_fails_the_run(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "choi_dim_limit", 1)
    out = tmp_path / "toric.json"
    assert main(["--out", str(out), "toric", "--L", "2"]) == 1
    check = entries(read_report(out))["reflection_positivity"]
    assert check["passed"] is False
    assert check["values"]["verified"] is False
    assert "choi_dim_limit" in check["values"]["reason"]


def test_empty_check_selection_runs_nothing(tmp_path):
    out = tmp_path / "empty.json"
    assert main(["--checks", "", "--out", str(out), "fusion", "--category", "ising"]) == 0
    assert read_report(out)["checks"] == []


def test_check_selection(tmp_path):
    out = tmp_path / "some.json"
    assert main(["--checks", "degeneracy,unknown", "--out", str(out), "toric", "--L", "2"]) == 0
    assert [c["name"] for c in read_report(out)["checks"]] == ["degeneracy"]


def test_missing_input_file_exits_with_two(tmp_path):
    code = main(["rp-check", "--hamiltonian", str(tmp_path / "h.json"),
                 "--bipartition", str(tmp_path / "b.json")])
    assert code == 2


def qubit_bipartition(tmp_path):
    b = Bipartition.from_sites([("q", 2)])
    return b, save_bipartition(tmp_path / "b.json", b)


def test_rp_check_verdicts(tmp_path):
    b, b_path = qubit_bipartition(tmp_path)
    good = save_matrix(tmp_path / "good.json", assemble_rp_hamiltonian(Z, [X], b))
    bad = save_matrix(tmp_path / "bad.json", np.kron(X, X))
    out = tmp_path / "rp.json"
    assert main(["--out", str(out), "rp-check", "--hamiltonian", str(good), "--bipartition", str(b_path)]) == 0
    assert entries(read_report(out))["rp_structure"]["values"]["cross_terms"] == 1
    assert main(["--out", str(out), "rp-check", "--hamiltonian", str(bad), "--bipartition", str(b_path)]) == 1
    checks = entries(read_report(out))
    assert checks["rp_semigroup"]["passed"] is False
    assert checks["rp_structure"]["error"].startswith("NotReflectionPositive")


def test_pf_run(tmp_path, rng):
    paths = [str(save_matrix(tmp_path / f"k{i}.json", random_hermitian(rng, 3))) for i in range(2)]
    out = tmp_path / "pf.json"
    assert main(["--out", str(out), "pf", "--kraus", ",".join(paths)]) == 0
    checks = entries(read_report(out))
    assert checks["pf_vector"]["values"]["p_max_rank"] == 3
    assert checks["pf_vector"]["values"]["xi"]["rows"] == 3


def test_ltqo_on_the_sphere(capsys):
    assert main(["--json", "ltqo", "--model", "sphere"]) == 0
    report = json.loads(capsys.readouterr().out)
    values = report["checks"][0]["values"]
    assert values["nondegenerate"] is True and values["ltqo"] is True


def test_json_safe():
    payload = json_safe({"a": np.float64("nan"), "b": 1 + 2j, "c": np.int64(3), 4: (np.bool_(True),)})
    assert payload == {"a": None, "b": [1.0, 2.0], "c": 3, "4": [True]}


def test_large_matrices_go_to_side_files(tmp_path):
    big = np.eye(65)
    encoded = encode_matrices("check", {"big": big, "small": np.eye(2)}, tmp_path)
    assert encoded["big_file"] == "check_big.json"
    assert (tmp_path / "check_big.json").exists()
    assert encoded["small"]["rows"] == 2
    entry = to_entry("check", CheckResult(passed=True, values={"x": 1.5}, matrices={"m": np.eye(2)}), None)
    assert entry.values["x"] == 1.5 and entry.values["m"]["cols"] == 2
