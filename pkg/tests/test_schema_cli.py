import io
import json
import subprocess
import sys

import pytest

from macsk.cli import EXIT_CODES, run
from macsk.schema import SchemaError, compile_fn, load_law, parse_partition, protocol_from_json


def _run(argv):
    buf = io.StringIO()
    code = run(argv, out=buf)
    return code, buf.getvalue()


def _report(argv):
    code, text = _run(argv)
    return code, json.loads(text)


def test_compile_fn_ops():
    assert compile_fn({"const": 3}, "f")(1, 2) == 3
    assert compile_fn({"arg": -1}, "f")((1, 2), (3,)) == 3
    assert compile_fn({"xor": [0, 1]}, "f")(1, 3) == 2
    assert compile_fn({"sum": [0, 1], "mod": 3}, "f")(2, 2) == 1
    assert compile_fn({"table": {"1,0": 5}, "default": 7}, "f")(1, 0) == 5
    assert compile_fn({"table": {"1,0": 5}, "default": 7}, "f")(0, 0) == 7
    h = compile_fn({"hash": 4, "alphabet": 3}, "f")
    assert h(1, 2) == h(1, 2) and 0 <= h(1, 2) < 3
    for bad in ({}, {"const": 1, "arg": 0}, {"xor": []}, {"arg": "x"}, 5):
        with pytest.raises(SchemaError):
            compile_fn(bad, "f")


def test_protocol_schema_errors():
    with pytest.raises(SchemaError):
        protocol_from_json({"kind": "nope"})
    with pytest.raises(SchemaError):
        protocol_from_json({"kind": "genie", "alphabets": [2, 2]})
    with pytest.raises(SchemaError):
        protocol_from_json({"kind": "ct", "n": 1, "u_sizes": [2, 2, 1], "rounds": [],
                            "inputs": [{"arg": 1}], "key_size": 2, "key_maps": []})


def test_parse_partition():
    assert parse_partition("lp", 3) is None
    assert parse_partition("0,1|2", 3).m == 3
    assert parse_partition("0,1=0.5;1,2=0.5;0,2=0.5", 3).m == 3
    with pytest.raises(SchemaError):
        parse_partition("0|1", 3)


def test_load_law_errors(tmp_path):
    p = tmp_path / "law.json"
    p.write_text('{"probs": [[0.5, 0.6]]}')
    with pytest.raises(SchemaError):
        load_law(p)
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_law(p)


@pytest.mark.parametrize("name,value", [("adder", 0.75), ("xor", 0.5)])
def test_rstar_bundled(name, value):
    code, rep = _report(["rstar", "--channel", name])
    assert code == 0 and rep["status"] == "ok" and rep["report_version"] == 1
    assert abs(rep["results"]["rate"] - value) < 1e-3


def test_exit_codes(tmp_path, monkeypatch):
    assert _run(["rstar", "--channel", str(tmp_path / "missing.json")])[0] == EXIT_CODES["file-not-found"]
    bad = tmp_path / "bad.json"
    bad.write_text('{"inputs": 2}')
    assert _run(["rstar", "--channel", str(bad)])[0] == EXIT_CODES["schema"]
    assert _run(["rstar", "--bogus"])[0] == EXIT_CODES["usage"]
    assert _run([])[0] == EXIT_CODES["usage"]
    assert _run(["fbcode-rate", "--k", "0"])[0] == EXIT_CODES["invalid-argument"]
    code, rep = _report(["verify-suite", "quick", "--inject-xor"])
    assert code == EXIT_CODES["verification-failed"] and rep["error"]["kind"] == "verification-failed"
    monkeypatch.setenv("MACSK_MEMORY_BUDGET", "1000")
    code, rep = _report(["sk-feedback", "--channel", "adder", "--k", "1", "--slack", "0",
                         "--blocks", "6", "--dsw", "0.1", "--dpa", "0.4", "--exact", "--seed", "0"])
    assert code == EXIT_CODES["budget-exceeded"] and rep["status"] == "error"


def test_bound_and_check_interactive(tmp_path):
    # Y1, Y2 uniform bits, K = Y1 ^ Y2, F constant
    probs = [[[[0.25 * (k == a ^ b) * (f == 0) for f in range(2)] for k in range(2)]
              for b in range(2)] for a in range(2)]
    law = tmp_path / "law.json"
    law.write_text(json.dumps({"probs": probs}))
    code, rep = _report(["bound", "--law", str(law), "--eps", "0.1"])
    assert code == 0 and rep["results"]["holds"]
    assert rep["results"]["key_bits"] <= rep["results"]["bound_bits"]
    code, rep = _report(["check-interactive", "--proto", "relay_interactive", "--law", "uniform_bits"])
    assert code == 0 and rep["results"]["holds"]
    # the genie is not a protocol: the violation is reported, not an error
    code, rep = _report(["check-interactive", "--proto", "xor_genie", "--law", "uniform_bits"])
    assert code == 0 and not rep["results"]["holds"] and not rep["results"]["interactive"]
    assert rep["results"]["factorization_gap"] == pytest.approx(1.0)


def test_sk_run_bundled_protocol():
    code, rep = _report(["sk-run", "--proto", "timeshare_se", "--channel", "xor", "--exact"])
    assert code == 0
    r = rep["results"]
    assert r["agreement"] == 1.0 and r["s_in"] == 0.0 and r["key_rate"] == 0.5


def test_reports_deterministic_and_output_file(tmp_path):
    argv = ["sk-se", "--channel", "adder", "--n", "4", "--trials", "200", "--seed", "3"]
    assert _run(argv) == _run(argv)
    out = tmp_path / "r.json"
    code, text = _run(argv + ["--output", str(out)])
    assert code == 0 and not text.lstrip().startswith("{")
    assert json.loads(out.read_text())["provenance"]["timestamp"] is None


def test_config_run(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "simulate-code", "seed": 1,
                               "params": {"channel": "adder", "k": 50, "trials": 100}}))
    code, rep = _report(["run", str(cfg)])
    assert code == 0 and rep["command"] == "simulate-code" and rep["provenance"]["seed"] == 1
    cfg.write_text(json.dumps({"command": "simulate-code", "params": {"k": 50}}))
    assert _run(["run", str(cfg)])[0] == EXIT_CODES["schema"]


def test_console_script_verify_quick_deterministic():
    cmd = [sys.executable, "-m", "macsk.cli", "verify-suite", "quick", "--seed", "5"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and json.loads(a)["results"]["passed"]
