"""Command-line driver: exit codes, report artifacts and overrides."""

import json
import subprocess
import sys

from dmcverify.cli import (
    EXIT_BUDGET,
    EXIT_COMPILE_ERROR,
    EXIT_FALSIFIED,
    EXIT_OK,
    main,
)

from conftest import protocol_path


def run_cli(*args):
    out = subprocess.run(
        [sys.executable, "-m", "dmcverify.cli", *args],
        capture_output=True, text=True,
    )
    return out


def test_check_exit_codes():
    assert run_cli("check", protocol_path("sdc")).returncode == EXIT_OK
    assert run_cli("check", protocol_path("qkd")).returncode == EXIT_OK
    # teleportation's negated-knowledge formula is false by design
    assert run_cli("check", protocol_path("qtp")).returncode == EXIT_FALSIFIED


def test_missing_file_is_compile_error(tmp_path):
    out = run_cli("check", str(tmp_path / "nope.dmc"))
    assert out.returncode == EXIT_COMPILE_ERROR
    assert "error" in out.stderr


def test_invalid_network_is_compile_error(tmp_path):
    bad = tmp_path / "bad.dmc"
    bad.write_text("""
network bad {
  qubits { q1 = [1, 1]; }
  agent A owns q1 { s1 = M(q1, 0); }
  formulae { }
}
""")
    out = run_cli("check", str(bad))
    assert out.returncode == EXIT_COMPILE_ERROR
    assert "norm" in out.stderr


def test_budget_exit_code():
    out = run_cli("check", protocol_path("qkd"), "--max-states", "4")
    assert out.returncode == EXIT_BUDGET


def test_json_report_schema():
    out = run_cli("check", "--json", protocol_path("qtp"))
    rep = json.loads(out.stdout)
    assert rep["schema"] == 1
    assert rep["network"] == "qtp"
    assert rep["reachable_states"] == 20
    assert rep["transitions"] == 23
    assert rep["initial_states"] == 1
    assert rep["quantum_registry_size"] == 10
    assert rep["quantum_registry"] == [f"qs{i}" for i in range(1, 11)]
    assert len(rep["input_digest"]) == 64
    assert [f["verdict"] for f in rep["formulas"]] == [True, True, True, False]
    assert rep["formulas"][3]["witness"] is not None
    assert rep["crosscheck"]["ok"] is True
    assert set(rep["timings"]) == {
        "explore_s", "assemble_s", "crosscheck_s", "check_s"
    }


def test_human_readable_output():
    out = run_cli("check", protocol_path("qtp"))
    assert "network qtp: 20 states" in out.stdout
    assert "crosscheck: ok" in out.stdout
    assert out.stdout.count("[T]") == 3
    assert out.stdout.count("[F]") == 1
    assert "witness" in out.stdout


def test_no_crosscheck_flag():
    out = run_cli("check", "--json", "--no-crosscheck", protocol_path("sdc"))
    rep = json.loads(out.stdout)
    assert rep["crosscheck"] is None
    assert out.returncode == EXIT_OK


def test_report_dir_artifacts(tmp_path):
    report_dir = tmp_path / "out"
    code = main([
        "check", protocol_path("qtp"), "--report-dir", str(report_dir),
    ])
    assert code == EXIT_FALSIFIED
    report = json.loads((report_dir / "report.json").read_text())
    assert report["network"] == "qtp"
    csv = (report_dir / "registry.csv").read_text()
    assert csv.splitlines()[0] == "name,qubits,amplitudes"
    assert len(csv.strip().splitlines()) == 11  # header + 10 states
    dot = (report_dir / "graph.dot").read_text()
    assert dot.startswith("digraph")
    png = (report_dir / "graph.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_dump_is(tmp_path):
    path = tmp_path / "is.json"
    code = main([
        "check", protocol_path("sdc"), "--dump-is", str(path), "--json",
    ])
    assert code == EXIT_OK
    doc = json.loads(path.read_text())
    assert set(doc["agents"]) == {"A", "B"}


def test_emit_writes_ispl(tmp_path):
    path = tmp_path / "model.ispl"
    assert main(["emit", protocol_path("qtp"), "-o", str(path)]) == EXIT_OK
    text = path.read_text()
    assert text.startswith("Agent Environment")
    assert "end Agent" in text


def test_dump_enum_and_graph(tmp_path, capsys):
    assert main(["dump-enum", protocol_path("qtp")]) == EXIT_OK
    enum_out = capsys.readouterr().out
    assert enum_out.splitlines()[0] == "name,qubits,amplitudes"

    fig = tmp_path / "g.png"
    dot = tmp_path / "g.dot"
    assert main([
        "graph", protocol_path("qtp"), "-o", str(dot), "--fig", str(fig),
    ]) == EXIT_OK
    assert dot.read_text().startswith("digraph")
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_dump_states_marks_initials(capsys):
    assert main(["dump-states", protocol_path("qtp")]) == EXIT_OK
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert len(lines) == 20
    assert lines[0].startswith("*C1:")


def test_input_qubit_override_changes_registry():
    out = run_cli(
        "check", "--json", protocol_path("qtp"),
        "--input-qubit", "q1=0.8,0.6",
    )
    rep = json.loads(out.stdout)
    assert rep["reachable_states"] == 20
    assert [f["verdict"] for f in rep["formulas"]] == [True, True, True, False]


def test_input_qubit_rejects_unknown_qubit():
    out = run_cli(
        "check", protocol_path("qtp"), "--input-qubit", "q9=1,0",
    )
    assert out.returncode == EXIT_COMPILE_ERROR


def test_version_flag():
    out = run_cli("--version")
    assert out.returncode == 0
    assert out.stdout.strip()
