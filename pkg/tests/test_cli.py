import json
import math
import subprocess
import sys

import numpy as np
import pytest

from enlargekit.enlargement import enl_member
from enlargekit.operators import LinearMapOp


def write_spec(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def specs(tmp_path):
    mk = lambda name, doc: write_spec(tmp_path, name, doc)
    return {
        "rot90": mk("rot90.json", {
            "space_dim": 2,
            "operator": {"kind": "linear_map", "matrix": [[0, -1], [1, 0]]}}),
        "rot60": mk("rot60.json", {
            "space_dim": 2,
            "operator": {"kind": "linear_map",
                         "matrix": [[0.5, -math.sqrt(3) / 2],
                                    [math.sqrt(3) / 2, 0.5]]}}),
        "id1": mk("id1.json", {
            "space_dim": 1,
            "operator": {"kind": "linear_map", "matrix": [[1]]}}),
        "neg": mk("neg.json", {
            "space_dim": 1,
            "operator": {"kind": "linear_map", "matrix": [[-1]]}}),
        "norm1": mk("norm1.json", {
            "space_dim": 2,
            "operator": {"kind": "norm_subdiff", "p": 1}}),
        "boxcone": mk("boxcone.json", {
            "space_dim": 2,
            "operator": {"kind": "normal_cone",
                         "set": {"kind": "box", "lo": [-1, -1], "hi": [1, 1]}}}),
        "vertical": mk("vertical.json", {
            "space_dim": 1,
            "operator": {"kind": "linear_relation", "graph_basis": [[0, 1]]}}),
        "skew2": mk("skew2.json", {
            "space_dim": 2,
            "operator": {"kind": "linear_map", "matrix": [[0, -2], [2, 0]]}}),
    }


def run_cli(*argv):
    proc = subprocess.run([sys.executable, "-m", "enlargekit", *argv],
                          capture_output=True)
    return proc


def run_json(*argv, expect=0):
    proc = run_cli(*argv)
    assert proc.returncode == expect, proc.stderr.decode()
    doc = json.loads(proc.stdout.decode())
    assert doc["schema"] == "v1"
    return doc


def test_classify_rot90(specs):
    doc = run_json("classify", specs["rot90"])
    res = doc["results"]
    assert res["skew"] is True
    assert res["non_enlargeable"] is True
    assert res["monotone"] and res["maximal"]


def test_classify_identity_ships_witness(specs):
    doc = run_json("classify", specs["id1"])
    res = doc["results"]
    assert res["non_enlargeable"] is False
    assert "witness" in res
    x, xs = np.asarray(res["witness"]["x"]), np.asarray(res["witness"]["xs"])
    assert enl_member(LinearMapOp(np.eye(1)), x, xs, 1.0).member


def test_classify_nonmonotone_exit_2(specs):
    proc = run_cli("classify", specs["neg"])
    assert proc.returncode == 2
    doc = json.loads(proc.stdout.decode())
    assert doc["results"]["monotone"] is False


def test_classify_norm_subdiff(specs):
    doc = run_json("classify", specs["norm1"])
    res = doc["results"]
    assert res["non_enlargeable"] is False
    assert res["symmetric"] is None


def test_fitz_identity_quarter(specs):
    doc = run_json("fitz", specs["id1"], "--point", "1,0",
                   "--bruteforce", "2000", "6.0")
    res = doc["results"]
    assert res["closed_form"] == pytest.approx(0.25)
    assert res["bruteforce"] <= 0.25 + 1e-9
    assert res["gap"] <= 1e-3
    assert not res["divergence_suspected"]


def test_fitz_outside_box_is_inf(specs):
    doc = run_json("fitz", specs["boxcone"], "--point", "2,0,1,0",
                   "--bruteforce", "500", "4.0", expect=3)
    assert doc["results"]["closed_form"] == "+inf"
    assert doc["results"]["divergence_suspected"] is True


def test_fitz_skew_off_graph(specs):
    doc = run_json("fitz", specs["skew2"], "--point", "1,0,0.5,2.5",
                   "--bruteforce", "2000", "4.0", expect=3)
    res = doc["results"]
    assert res["closed_form"] == "+inf"
    assert res["divergence_suspected"] is True


def test_fitz_bad_point_exit_1(specs):
    proc = run_cli("fitz", specs["id1"], "--point", "1,0,0")
    assert proc.returncode == 1


def test_enlarge_rotation_slice_radius(specs):
    doc = run_json("enlarge", specs["rot60"], "--eps", "1",
                   "--slice-at", "0.2,0.4")
    res = doc["results"]
    assert res["ball_radius"] == pytest.approx(math.sqrt(2.0), abs=1e-9)


def test_enlarge_norm_subdiff_boundary_point(specs):
    doc = run_json("enlarge", specs["norm1"], "--eps", "1",
                   "--point", "1,0,0,1")
    res = doc["results"]
    assert res["member"] is True
    assert res["slack"] == pytest.approx(0.0, abs=1e-12)


def test_enlarge_negative_eps_exit_1(specs):
    proc = run_cli("enlarge", specs["id1"], "--eps", "-0.5", "--point", "0,0")
    assert proc.returncode == 1


def test_enlarge_csv_boundary_reverifies(specs, tmp_path):
    out = tmp_path / "slice.csv"
    eps = 1.0
    run_json("enlarge", specs["rot60"], "--eps", "1", "--slice-at", "0.1,0.0",
             "--csv", str(out))
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x1,x2,xs1,xs2"
    a = LinearMapOp(np.array([[0.5, -math.sqrt(3) / 2],
                              [math.sqrt(3) / 2, 0.5]]))
    for line in lines[1:]:
        vals = [float(t) for t in line.split(",")]
        x, xs = np.asarray(vals[:2]), np.asarray(vals[2:])
        assert enl_member(a, x, xs, eps + 1e-6).member
        assert not enl_member(a, x, xs, eps - 1e-3).member


def test_sumcheck_identity_pair(specs):
    doc = run_json("sumcheck", specs["id1"], specs["id1"], "--points", "40")
    res = doc["results"]
    assert res["max_gap"] <= 1e-8
    assert res["maximal"] is True
    assert res["hypothesis_ok"] is True
    assert res["non_enlargeable"] is False


def test_sumcheck_skew_plus_skew_non_enlargeable(specs):
    doc = run_json("sumcheck", specs["rot90"], specs["skew2"], "--points", "30")
    assert doc["results"]["non_enlargeable"] is True
    assert doc["results"]["max_gap"] <= 1e-6


def test_sumcheck_identity_plus_cone(specs, tmp_path):
    id2 = write_spec(tmp_path, "id2.json", {
        "space_dim": 2,
        "operator": {"kind": "linear_map", "matrix": [[1, 0], [0, 1]]}})
    doc = run_json("sumcheck", id2, specs["boxcone"], "--points", "20")
    res = doc["results"]
    assert res["max_gap"] <= 1e-6
    assert res["hypothesis_ok"] is True
    assert res["advisory"] is False


def test_cli_determinism_byte_identical(specs, tmp_path):
    out_csv = tmp_path / "b.csv"
    invocations = [
        ("classify", specs["rot90"]),
        ("fitz", specs["id1"], "--point", "1,0", "--bruteforce", "500", "4.0",
         "--seed", "7"),
        ("enlarge", specs["rot60"], "--eps", "1", "--slice-at", "0.2,0.4",
         "--seed", "3"),
        ("sumcheck", specs["id1"], specs["id1"], "--points", "20", "--seed", "5"),
    ]
    for argv in invocations:
        first = run_cli(*argv)
        second = run_cli(*argv)
        assert first.returncode == second.returncode
        assert first.stdout == second.stdout


def test_seed_env_override(specs):
    import os
    env = dict(**__import__("os").environ, ENLARGEKIT_SEED="42")
    proc = subprocess.run(
        [sys.executable, "-m", "enlargekit", "classify", specs["rot90"]],
        capture_output=True, env=env)
    doc = json.loads(proc.stdout.decode())
    assert doc["seed"] == 42
    # explicit flag wins over the environment
    proc2 = subprocess.run(
        [sys.executable, "-m", "enlargekit", "classify", specs["rot90"],
         "--seed", "9"],
        capture_output=True, env=env)
    assert json.loads(proc2.stdout.decode())["seed"] == 9


def test_malformed_spec_exit_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    proc = run_cli("classify", str(bad))
    assert proc.returncode == 1
    missing = run_cli("classify", str(tmp_path / "nope.json"))
    assert missing.returncode == 1
