import io
import json
import math
import subprocess
import sys

import pytest

from maxgrent.cli import main
from maxgrent.tables import fixture_path

TP = fixture_path("transport.json")
TPD = fixture_path("transport_density.json")
EX21 = fixture_path("example21.json")


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run("--json", "--no-timestamp", *argv)
    return code, (json.loads(out) if out else None), err


def test_solve_transport():
    code, rep, _ = run_json("solve", TP)
    assert code == 0
    assert rep["solution"]["G_star"] == pytest.approx(2079.4, abs=0.5)
    code, out, _ = run("solve", TP)
    assert "G*  = 2079.4" in out


def test_solve_density_override():
    code, rep, _ = run_json("solve", "--prior-kind", "density", TPD)
    assert code == 0
    assert rep["solution"]["G_star"] == pytest.approx(-23.4, abs=0.1)


def test_solve_unbounded(tmp_path):
    p = tmp_path / "open.json"
    p.write_text(json.dumps({"variables": ["a", "b"], "prior": {"values": [1, 2], "kind": "count"}, "inequalities": [{"coeffs": {"a": 1, "b": -1}, "rhs": 1}]}))
    code, out, err = run("solve", str(p))
    assert code == 1
    assert "unbounded" in err


@pytest.mark.parametrize("text", ["{", "[]", '{"variables": ["a", "b"], "prior": {"values": [0, 1]}}'])
def test_malformed_input_exit_1(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    code, out, err = run("solve", str(p))
    assert code == 1 and err.startswith("error:")


def test_missing_file_and_bad_args():
    assert run("solve", "/nonexistent/spec.json")[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("certify", "--mode", "value", TP)[0] == 1  # --eta missing
    assert run("reproduce", "9.9")[0] == 1


def test_certify_value():
    code, rep, _ = run_json("certify", "--mode", "value", "--eta", "0.05", "--delta", "0.01", TP)
    lb = rep["concentration"]["log10_ratio_bound"]
    assert lb == pytest.approx(math.log10(5.8e8), abs=0.5)
    code, out, _ = run("--no-timestamp", "certify", "--mode", "value", "--eta", "0.05", "--delta", "0.01", TP)
    assert "ratio bound = 5.8e+8" in out


def test_certify_distance():
    code, rep, _ = run_json("certify", "--mode", "distance", "--theta", "0.1", "--delta", "1e-5", "--epsilon", "1e-3", "--rho-norm", "max-abs", TP)
    assert rep["concentration"]["c_hat"] == pytest.approx(410, rel=0.05)
    for key in ("c1", "c2", "c3", "preconditions"):
        assert key in rep["concentration"]


def test_certify_no_concentration():
    code, rep, _ = run_json("certify", "--mode", "distance", "--theta", "0.1", "--delta", "0.01", TP)
    assert code == 2
    assert any("no concentration" in w for w in rep["warnings"])


def test_certify_scaled_density():
    code, rep, _ = run_json("certify", "--mode", "value", "--eta", "1", "--scale", "10", TPD)
    assert rep["concentration"]["scaled_log10_bound"] == pytest.approx(47.6, abs=1)
    assert rep["concentration"]["scaled_bound_kind"] == "probability ratio"


def test_certify_failed_flags_become_warnings():
    # delta below 1/(2 rho_inf) fails a precondition and gives exit 2
    code, rep, _ = run_json("certify", "--mode", "value", "--eta", "0.05", "--delta", "0.001", TP)
    assert code == 2
    assert any("delta_ge_half_inv_rho" in w for w in rep["warnings"])


def test_enumerate_example21():
    code, rep, _ = run_json("enumerate", EX21)
    assert code == 0
    rows = rep["enumeration"]["rows"]
    assert len(rows) == 25
    counts = {tuple(r["nu"]): r["count"] for r in rows}
    assert counts[(3, 1, 5)] == 504
    assert rep["enumeration"]["argmax"] == [[3, 1, 5]]


def test_enumerate_ties_and_csv():
    code, rep, _ = run_json("enumerate", "--prior", "1,3,1", "--prior-kind", "count", EX21)
    assert rep["enumeration"]["argmax"] == [[1, 3, 3], [2, 2, 4]]
    assert rep["ties"] == 2
    code, out, _ = run("enumerate", "--csv", "--classify", "distance:0.5", EX21)
    lines = out.strip().splitlines()
    assert lines[0] == "v1,v2,v3,n,count,class,argmax"
    assert any(line.startswith("#") for line in lines)
    assert sum(1 for line in lines if line and not line.startswith("#")) == 26


def test_enumerate_cap():
    code, rep, _ = run_json("enumerate", "--classify", "value:0.2", "--cap", "1000", TP)
    assert code == 2
    assert "certify" in rep["warnings"][0]


def test_compare_transport():
    code, rep, _ = run_json("compare", TP)
    cmp = rep["compare"]
    assert cmp["G_u_star"] == pytest.approx(485.6, abs=0.5)
    assert cmp["transfer_residual_maxgrent_to_minidiv"] <= 1e-5
    assert cmp["transfer_residual_minidiv_to_maxgrent"] <= 1e-5
    assert cmp["linf_v_hat_x_star"] == pytest.approx(79.93, abs=0.6)


def test_compare_unconstrained(tmp_path):
    p = tmp_path / "free.json"
    p.write_text(json.dumps({"variables": ["a", "b"], "prior": {"values": [1, 2], "kind": "count"}}))
    code, rep, _ = run_json("compare", str(p))
    assert rep["compare"]["u_star"] == [1.0, 2.0]
    assert code == 2


@pytest.mark.parametrize("table", ["2.1", "8.3", "8.7"])
def test_reproduce(table):
    code, rep, _ = run_json("reproduce", table)
    assert code == 0
    assert rep["table"]["ok"]


def test_reproduce_notes_skipped_row():
    code, rep, _ = run_json("reproduce", "8.3")
    assert rep["notes"]


def test_output_deterministic():
    a = run("--json", "--no-timestamp", "solve", TP)[1]
    b = run("--no-timestamp", "--json", "solve", TP)[1]
    assert a == b
    with_ts = json.loads(run("--json", "solve", TP)[1])
    assert with_ts["timestamp"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "maxgrent", "reproduce", "2.1"], capture_output=True, text=True, timeout=120)
    assert out.returncode == 0
    assert "OK" in out.stdout
