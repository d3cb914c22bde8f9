import json

import numpy as np
import pytest

from qjd.cli import main
from qjd.matrix import haar_unitary, matrix_to_json, random_density

from conftest import KET0, SX, SZ


@pytest.fixture
def files(tmp_path):
    def write(name, m):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(matrix_to_json(m)))
        return str(path)

    u = haar_unitary(3, 2).matrix
    return {
        "sz": write("sz", SZ),
        "sx": write("sx", SX),
        "ket0": write("ket0", KET0),
        "a": write("a", u @ np.diag([1, 2, 2]) @ u.conj().T),
        "b": write("b", u @ np.diag([0, 5, 6]) @ u.conj().T),
        "c": write("c", haar_unitary(3, 8).matrix @ np.diag([-1, 0.5, 2]) @ haar_unitary(3, 8).matrix.conj().T),
        "rho3": write("rho3", random_density(3, 4).matrix),
        "bad": write("bad", np.array([[0, 1], [0, 0]])),
        "dir": tmp_path,
    }


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_joint_sigma_z(files, capsys):
    code, out, _ = run(capsys, "joint", "--obs", files["sz"], "--state", files["ket0"])
    assert code == 0
    doc = json.loads(out)
    assert doc["axes"] == [[-1.0, 1.0]] and doc["weights"] == [0.0, 1.0] and doc["kind"] == "probability"


def test_joint_table_and_csv(files, capsys):
    code, out, _ = run(capsys, "joint", "--obs", files["sx"], "--obs", files["sz"], "--state", files["ket0"],
                       "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "sx,sz,weight" and len(lines) == 5
    code, out, _ = run(capsys, "joint", "--obs", files["sx"], "--state", files["ket0"], "--format", "table")
    assert code == 0 and "0.5" in out


def test_decompose(files, capsys):
    code, out, _ = run(capsys, "decompose", "--obs", files["a"])
    assert code == 0
    doc = json.loads(out)
    np.testing.assert_allclose(doc["eigenvalues"], [1, 2], atol=1e-12)
    assert len(doc["projectors"]) == 2


def test_baselines_commuting_pair_agree(files, capsys):
    code, out, _ = run(capsys, "baselines", "--obs", files["a"], "--obs", files["b"], "--state", files["rho3"],
                       "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert all(doc[k] is not None for k in ("qjd", "standard", "sequential", "margenau_hill"))
    assert max(doc["max_deviation"]) <= 1e-8
    code, out, _ = run(capsys, "baselines", "--obs", files["a"], "--obs", files["b"], "--state", files["rho3"])
    assert "max_deviation" in out.splitlines()[0]


def test_baselines_non_commuting_notes_standard(files, capsys):
    code, out, _ = run(capsys, "baselines", "--obs", files["sx"], "--obs", files["sz"], "--state", files["ket0"],
                       "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["standard"] is None and "do not commute" in doc["notes"]["standard"]


def test_verify_is_byte_identical(files, capsys, tmp_path):
    outs = []
    for name in ("r1.json", "r2.json"):
        path = tmp_path / name
        code, _, _ = run(capsys, "verify", "--seed", "1", "--trials", "20", "--sweeps", "2", "--out", str(path))
        assert code == 0
        doc = json.loads(path.read_text())
        for r in doc["reports"]:
            r.pop("wall_time")
        outs.append(json.dumps(doc, sort_keys=True))
    assert outs[0] == outs[1]


def test_verify_requires_seed(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 2


def test_sweep_csv(files, capsys):
    code, out, _ = run(capsys, "sweep", "--seed", "5")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,w1_distance" and len(lines) == 8
    code, out, _ = run(capsys, "sweep", "--seed", "5", "--obs", files["b"], "--obs", files["c"],
                       "--state", files["rho3"])
    assert code == 0 and out.startswith("t,w1_distance")


def test_sweep_of_degenerate_observable_fails(files, capsys):
    # a has a doubly degenerate eigenvalue; splitting it moves qjd by a finite amount
    code, out, _ = run(capsys, "sweep", "--seed", "5", "--obs", files["a"], "--obs", files["c"],
                       "--state", files["rho3"])
    assert code == 1
    last = float(out.strip().splitlines()[-1].split(",")[1])
    assert last > 1e-2


def test_property_failure_exit_code(capsys):
    # an absurdly tight cap makes every continuity sweep fail
    code, out, _ = run(capsys, "sweep", "--seed", "5", "--tol", "continuity_cap=1e-9")
    assert code == 1


@pytest.mark.parametrize("argv", [
    ["joint", "--obs", "missing.json", "--state", "missing.json"],
    ["verify", "--seed", "1", "--tol", "commute_tol=0.5"],
    ["verify", "--seed", "1", "--tol", "bogus=1e-3"],
    ["verify", "--seed", "1", "--dims", "6..2"],
])
def test_invalid_input_exit_code(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_not_hermitian_input(files, capsys):
    code, _, err = run(capsys, "joint", "--obs", files["bad"], "--state", files["ket0"], "--json-errors")
    assert code == 2
    assert json.loads(err)["error"] == "NotHermitian"


def test_dimension_mismatch_input(files, capsys):
    code, _, err = run(capsys, "joint", "--obs", files["a"], "--state", files["ket0"])
    assert code == 2 and "DimensionMismatch" in err
