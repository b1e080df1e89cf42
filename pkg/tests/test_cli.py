import json
import subprocess
import sys

import numpy as np
import pytest

from foliagraph.cli import build_parser, main
from foliagraph.form_field import read_grid_csv


def fixture(fixtures_dir, name):
    return str(fixtures_dir / f"{name}.json")


def test_check_branch2_exit_0(fixtures_dir, tmp_path, capsys):
    cert = tmp_path / "cert.json"
    dot = tmp_path / "g.dot"
    code = main(["check", fixture(fixtures_dir, "branch2"), "--certificate", str(cert), "--dot", str(dot)])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "globally-eulerian"
    doc = json.loads(cert.read_text())
    assert doc["verdict"] == "globally-eulerian"
    assert set(doc["orientation"]) == {"L0", "L1", "L2"}
    assert dot.read_text().startswith(("digraph", "graph"))


def test_check_triangle_exit_2(fixtures_dir, capsys):
    assert main(["check", fixture(fixtures_dir, "triangle")]) == 2
    out = capsys.readouterr().out
    assert "not-locally-eulerian" in out and "OddMicroCycle" in out
    doc = json.loads(out[out.index("{"):])
    assert doc["kind"] == "OddMicroCycle" and len(doc["cycle"]) == 3


def test_check_hexagon_and_monochrome(fixtures_dir, capsys):
    assert main(["check", fixture(fixtures_dir, "hexagon")]) == 0
    assert main(["check", fixture(fixtures_dir, "monochrome")]) == 2
    assert "locally-eulerian-only" in capsys.readouterr().out


def test_check_endpoint_exit_2(fixtures_dir, capsys):
    assert main(["check", fixture(fixtures_dir, "endpoint")]) == 2
    assert "EndpointPresent" in capsys.readouterr().out


@pytest.mark.parametrize("name", ["malformed", "bad_schema"])
def test_check_bad_input_exit_1(fixtures_dir, name, capsys):
    assert main(["check", fixture(fixtures_dir, name)]) == 1
    assert capsys.readouterr().err.strip()


def test_check_missing_file_exit_1(tmp_path, capsys):
    assert main(["check", str(tmp_path / "none.json")]) == 1


def test_schema_error_has_pointer(fixtures_dir, capsys):
    main(["check", fixture(fixtures_dir, "bad_schema")])
    assert "schema error at /" in capsys.readouterr().err


def test_synthesize(fixtures_dir, tmp_path, capsys):
    out, svg = tmp_path / "c.json", tmp_path / "c.svg"
    assert main(["synthesize", fixture(fixtures_dir, "branch2"), "--out", str(out), "--svg", str(svg)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["strips"]) == 3
    assert svg.read_text().startswith("<svg")
    assert main(["synthesize", fixture(fixtures_dir, "triangle"), "--out", str(out)]) == 0
    assert "flipped: 1" in capsys.readouterr().out
    assert main(["synthesize", fixture(fixtures_dir, "endpoint"), "--out", str(out)]) == 2


def _analyze(out, *flags):
    return main(["analyze", "--out", str(out), *flags])


def test_analyze_branch2(tmp_path, capsys):
    out = tmp_path / "b2"
    assert _analyze(out, "--builtin", "branch2", "--n", "65,33") == 0
    files = {p.name for p in out.iterdir()}
    assert files == {"config.json", "charts.json", "leaves.svg", "result.json", "f.csv",
                     "lambda.csv", "report.json", "manifest.json"}
    report = json.loads((out / "report.json").read_text())
    assert report["passed"]
    lam = read_grid_csv((out / "lambda.csv").read_text(), (65, 33))
    finite = lam[np.isfinite(lam)]
    assert np.all(finite * np.sign(finite[0]) > 0)
    assert "globally-eulerian" in capsys.readouterr().out


def test_analyze_branch3_exit_2(tmp_path, capsys):
    out = tmp_path / "b3"
    assert _analyze(out, "--builtin", "branch3", "--n", "65,65") == 2
    assert not (out / "f.csv").exists()
    assert json.loads((out / "result.json").read_text())["kind"] == "OddMicroCycle"


def test_analyze_expression_fastpath(tmp_path, capsys):
    assert _analyze(tmp_path / "r", "--gx", "1", "--gy", "0", "--n", "17,17") == 0
    assert "fast path" in capsys.readouterr().out


def test_analyze_reproducible(tmp_path):
    out = tmp_path / "rep"
    flags = ("--builtin", "branch2", "--n", "65,33")
    assert _analyze(out, *flags) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert _analyze(out, *flags) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_analyze_rejects_bad_flags(tmp_path, capsys):
    assert _analyze(tmp_path / "x", "--builtin", "dx", "--gx", "1") == 1
    assert _analyze(tmp_path / "x", "--gx", "1 +", "--gy", "0") == 1
    assert _analyze(tmp_path / "x", "--gx", "x", "--gy", "y", "--n", "5,5") == 1
    assert _analyze(tmp_path / "x", "--builtin", "contact") == 1


def test_forms_wedge(capsys):
    assert main(["forms", "wedge", "--builtin", "contact"]) == 0
    out = capsys.readouterr().out
    assert float(out.split("=")[1].split()[0]) == pytest.approx(1.0, abs=1e-9)


def test_forms_close(tmp_path, capsys):
    out = tmp_path / "lam.csv"
    assert main(["forms", "close", "--builtin", "exact-ey", "--n", "33,33", "--out", str(out)]) == 0
    assert "feasible" in capsys.readouterr().out
    lam = read_grid_csv(out.read_text(), (33, 33))
    y = np.linspace(-1, 1, 33)
    dev = lam + y[None, :]
    assert np.ptp(dev) < 2e-2
    # an infeasible form still computes and exits 0
    assert main(["forms", "close", "--builtin", "contact", "--n", "5,5,5", "--out", str(out)]) == 0
    assert "infeasible" in capsys.readouterr().out


def test_help_lists_every_flag():
    parser = build_parser()
    text = parser.format_help()
    for cmd in ("check", "synthesize", "analyze", "forms"):
        assert cmd in text
    sub = subprocess.run([sys.executable, "-m", "foliagraph", "analyze", "--help"],
                         capture_output=True, text=True, check=True)
    for flag in ("--builtin", "--gx", "--gy", "--box", "--n", "--slit", "--hole", "--out",
                 "--spacing", "--tube", "--angle", "--ratio", "--beta", "--threshold",
                 "--no-fastpath", "--refine"):
        assert flag in sub.stdout


def test_negative_values_after_flags(tmp_path, capsys):
    code = _analyze(tmp_path / "neg", "--gx", "-x", "--gy", "1", "--box", "-1,1,-1,1", "--n", "17,17")
    assert code == 0
    config = json.loads((tmp_path / "neg" / "config.json").read_text())
    assert len(config["edges"]) == 1


def test_usage_errors_exit_1(capsys):
    assert main(["analyze", "--bogus"]) == 1
    assert main(["check"]) == 1
    assert main([]) == 1
    assert main(["--help"]) == 0
