import csv
import io
import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from femeta.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_example_ding_prints_table(capsys, monkeypatch):
    monkeypatch.setenv("NO_COLOR", "1")
    code, out, _ = run(capsys, "example", "ding2018")
    assert code == 0
    assert out.encode("utf-8") == (GOLDEN / "ding2018.txt").read_bytes()


def test_analyze_missing_file_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", "--input", str(tmp_path / "missing.csv"))
    assert code == 2
    assert "missing.csv" in err


def test_analyze_malformed_file_is_data_error(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("study,effect,se,var\nA,1,1,1\n", encoding="utf-8")
    code, _, err = run(capsys, "analyze", "--input", str(p))
    assert code == 2
    assert "line 2" in err


def test_simulate_zero_replicates_is_usage_error(capsys):
    code, out, err = run(capsys, "simulate", "--grid", "k2-d", "--replicates", "0")
    assert code == 1
    assert out == ""
    assert "replicates" in err


@pytest.mark.parametrize("argv", [
    ["example", "nope"],
    ["analyze"],
    ["simulate", "--grid", "k9-z"],
    ["example", "ding2018", "--models", "bayes"],
    ["example", "ding2018", "--level", "1.5"],
    [],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_analyze_json_csv_svg(capsys, tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("study,effect,ci_low,ci_high\nA,0.29,0.19,0.43\nB,0.93,0.78,1.12\n", encoding="utf-8")
    code, out, _ = run(capsys, "analyze", "--input", str(p), "--scale", "log", "--format", "json",
                       "--models", "common,fixed-optimal", "--tau2", "pm")
    assert code == 0
    doc = json.loads(out)
    assert [r["model"] for r in doc["pooled"]] == ["common", "fixed-optimal"]
    assert doc["tau2_method"] == "paule_mandel"

    code, out, _ = run(capsys, "analyze", "--input", str(p), "--scale", "log", "--format", "csv")
    assert code == 0 and out.startswith("kind,label,model")

    dest = tmp_path / "f.svg"
    code, out, _ = run(capsys, "analyze", "--input", str(p), "--scale", "log", "--format", "svg",
                       "--out", str(dest))
    assert code == 0 and out == ""
    ET.parse(dest)


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--grid", "k3-r", "--replicates", "1000", "--seed", "9",
                       "--step", "3")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 4 * 2 * 2
    assert rows[0]["axis_value"] == "1.0"
    code, again, _ = run(capsys, "simulate", "--grid", "k3-r", "--replicates", "1000", "--seed", "9",
                         "--step", "3")
    assert again == out


def test_simulate_svg(capsys, tmp_path):
    dest = tmp_path / "g.svg"
    code, _, _ = run(capsys, "simulate", "--grid", "k2-r", "--method", "analytic", "--format", "svg",
                     "--out", str(dest))
    assert code == 0
    root = ET.parse(dest).getroot()
    assert root.tag.endswith("svg")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "femeta", "example", "armitage2019"],
                          capture_output=True, env={"NO_COLOR": "1", "PATH": ""})
    assert proc.returncode == 0
    assert proc.stdout == (GOLDEN / "armitage2019.txt").read_bytes()
