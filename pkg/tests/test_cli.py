import json
import re
import subprocess
import sys

import pytest

from saper_forge.blowup import ResolutionTree
from saper_forge.cli import dumps, main
from saper_forge.singlestep import SingleStepIdeal


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cusp_files(tmp_path, capsys):
    tree, ideal = tmp_path / "t.json", tmp_path / "i.json"
    assert run(capsys, "resolve", "--curve", "y^2 - x^3", "--out", tree)[0] == 0
    assert run(capsys, "single-ideal", "--tree", tree, "--out", ideal)[0] == 0
    return tree, ideal


@pytest.mark.parametrize("curve, steps", [("y^2 - x^3", 3), ("y - x", 0), ("y^2 - x^4", 2)])
def test_resolve(tmp_path, capsys, curve, steps):
    out = tmp_path / "t.json"
    code, text, _ = run(capsys, "resolve", "--curve", curve, "--out", out)
    assert code == 0 and f"blow-ups: {steps}" in text
    data = json.loads(out.read_text())
    assert data["config"]["curve"] == curve
    assert len(data["tree"]["steps"]) == steps


def test_resolve_reads_curve_file(tmp_path, capsys):
    src = tmp_path / "curve.txt"
    src.write_text("y^3 - x^4\n")
    code, text, _ = run(capsys, "resolve", "--curve", src, "--out", tmp_path / "t.json")
    assert code == 0 and "blow-ups: 4" in text


def test_resolve_irrational_center(tmp_path, capsys):
    code, _, err = run(capsys, "resolve", "--curve", "(y^2 - 2*x^2)^2 - x^5", "--out", tmp_path / "t.json")
    assert code == 2 and "IrrationalCenter" in err and "y^4 - 4*y^2 + 4" in err


def test_parse_error_exit(tmp_path, capsys):
    code, _, err = run(capsys, "resolve", "--curve", "y^^2", "--out", tmp_path / "t.json")
    assert code == 1 and "FAIL" in err


def test_single_ideal_text(cusp_files, capsys):
    tree, ideal = cusp_files
    code, text, _ = run(capsys, "single-ideal", "--tree", tree, "--out", ideal.with_name("j.json"))
    assert code == 0
    assert "factors: (x, y) (x^2, y) (x^3, x^2*y, y^2)" in text
    assert text.count("PASS") == 4


def test_tacnode_two_factors(tmp_path, capsys):
    tree, ideal = tmp_path / "t.json", tmp_path / "i.json"
    run(capsys, "resolve", "--curve", "y^2 - x^4", "--out", tree)
    code, _, _ = run(capsys, "single-ideal", "--tree", tree, "--out", ideal)
    assert code == 0
    assert len(json.loads(ideal.read_text())["ideal"]["factors"]) == 2


def test_files_round_trip(cusp_files):
    tree, ideal = cusp_files
    tdata = json.loads(tree.read_text())["tree"]
    assert ResolutionTree.from_json(tdata).to_json() == tdata
    idata = json.loads(ideal.read_text())["ideal"]
    assert SingleStepIdeal.from_json(idata).to_json() == idata


def test_verify_detects_mutated_ideal(cusp_files, capsys):
    tree, ideal = cusp_files
    assert run(capsys, "verify", "--tree", tree, "--ideal", ideal)[0] == 0
    data = json.loads(ideal.read_text())
    data["ideal"]["factors"][1]["gens"] = ["x^2", "x*y", "y^2"]
    bad = ideal.with_name("bad.json")
    bad.write_text(json.dumps(data))
    code, _, err = run(capsys, "verify", "--tree", tree, "--ideal", bad)
    assert code == 1 and "clause (d)" in err


def test_single_ideal_on_mutated_tree(cusp_files, capsys):
    tree, _ = cusp_files
    data = json.loads(tree.read_text())
    data["tree"]["curve"] = "y - x^3"
    bad = tree.with_name("bad_tree.json")
    bad.write_text(json.dumps(data))
    code, _, err = run(capsys, "single-ideal", "--tree", bad, "--out", tree.with_name("k.json"))
    assert code == 1 and "clause (c)" in err


def test_metric_scan_is_deterministic(cusp_files, capsys):
    _, ideal = cusp_files
    out = ideal.with_name("s.csv")
    args = ("metric-scan", "--ideal", ideal, "--l", 1, "--grid", 100, "--seed", "0x5A9E12", "--out", out)
    assert run(capsys, *args)[0] == 0
    first = out.read_bytes()
    assert run(capsys, *args)[0] == 0
    assert out.read_bytes() == first
    lines = first.decode().splitlines()
    assert lines[0].startswith("# config: ") and '"seed": 5938706' in lines[0]
    assert lines[2].split(",")[0] == "re_x"
    assert len(lines) == 3 + 100


def test_saper_length_report(cusp_files, capsys):
    _, ideal = cusp_files
    out = ideal.with_name("l.json")
    code, _, _ = run(capsys, "saper-length", "--ideal", ideal, "--ray", "1,1", "--stops", "1e-2,1e-4,1e-8,1e-16", "--out", out)
    assert code == 0
    text = out.read_text()
    data = json.loads(text)
    assert data["gates"] == {"saper-diverging": True, "tilde-bounded": True}
    inc = data["saper"]["increments"]
    assert all(b > a * 0.5 for a, b in zip(inc, inc[1:]))
    assert re.search(r"\d\.\d{16}", text)


def test_example_v6(capsys):
    code, text, _ = run(capsys, "example-v6", "--d", "0..4")
    assert code == 0
    rows = [line.split() for line in text.splitlines()[1:6]]
    assert [(int(r[0]), int(r[2])) for r in rows] == [(0, 2), (1, 2), (2, 2), (3, 3), (4, 4)]
    assert all(r[3:] == ["=", "=", "="] for r in rows)
    assert "(2, 2, 2)" in text and "(3, 3, 3)" in text


def test_paths_must_differ(cusp_files, capsys):
    tree, _ = cusp_files
    code, _, err = run(capsys, "single-ideal", "--tree", tree, "--out", tree)
    assert code == 1 and "differ" in err


def test_dumps_precision():
    assert dumps({"b": [0.1], "a": 1}) == '{\n  "a": 1,\n  "b": [\n    0.10000000000000001\n  ]\n}'


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "saper_forge", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "single-ideal" in res.stdout


def test_thread_cap_does_not_change_output(cusp_files, capsys, monkeypatch):
    _, ideal = cusp_files
    out = ideal.with_name("s.csv")
    args = ("metric-scan", "--ideal", ideal, "--grid", 60, "--out", out)
    run(capsys, *args)
    serial = out.read_bytes()
    monkeypatch.setenv("SAPER_FORGE_THREADS", "4")
    assert run(capsys, *args)[0] == 0
    assert out.read_bytes() == serial
