import csv
import io
import json

import pytest

from varexp.cli import main, to_json


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_knp_table(capsys):
    code, out, _ = run(capsys, "knp-table", "--n", "1,2,3", "--p", "1.5,2,3")
    assert code == 0
    rep = json.loads(out)
    assert rep["schema_version"] == 1 and rep["check_passed"] is True
    table = {(r["n"], r["p"]): r["k_gamma"] for r in rep["results"]["table"]}
    assert table[(1, 2.0)] == 1.0
    assert table[(2, 2.0)] == pytest.approx(1.5707963, abs=1e-7)
    assert len(table) == 9


def test_bbm_sweep_linear_csv(capsys):
    code, out, _ = run(capsys, "bbm-sweep", "--field", "linear", "--exponent", "const:2",
                       "--domain", "interval:0:1", "--s", "0.5,0.9,0.99", "--format", "csv")
    assert code == 0
    assert "\r\n" in out
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["s", "modular", "error_estimate", "local_limit", "rel_error"]
    mods = [float(r[1]) for r in rows[1:]]
    assert mods == pytest.approx([0.25, 0.75, 0.99 / 1.02], rel=1e-6)


def test_output_files_and_round_trip(capsys, tmp_path):
    prefix = tmp_path / "mod"
    code, out, _ = run(capsys, "modular", "--field", "bump:1:1", "--exponent", "smooth:sine",
                       "--domain", "interval:-2:2", "--s", "0.7", "--output", str(prefix))
    assert code == 0
    report = (tmp_path / "mod.json").read_text(encoding="utf-8")
    assert report == out
    assert (tmp_path / "mod.csv").read_bytes().startswith(b"s,modular,error_estimate\r\n")
    code2, out2, _ = run(capsys, "modular", "--config", str(tmp_path / "mod.json"))
    assert code2 == 0
    assert json.loads(out2)["results"] == json.loads(out)["results"]
    assert out2 == out


def test_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"field": "linear", "domain": "interval:0:1", "s": "0.3"}))
    code, out, _ = run(capsys, "modular", "--config", str(cfg), "--s", "0.5")
    assert code == 0
    res = json.loads(out)["results"]
    assert res["s"] == 0.5 and res["modular"] == pytest.approx(0.25, rel=1e-6)


def test_floats_have_17_digits(capsys):
    _, out, _ = run(capsys, "knp-table", "--n", "2", "--p", "2")
    assert "1.5707963267948966" in out


def test_empty_s_list_is_input_error(capsys):
    code, _, err = run(capsys, "modular", "--field", "linear", "--domain", "interval:0:1",
                       "--s", "")
    assert code == 1 and "empty" in err


def test_s_out_of_range(capsys):
    code, _, err = run(capsys, "modular", "--field", "linear", "--domain", "interval:0:1",
                       "--s", "1.0")
    assert code == 1


def test_unknown_exponent_lists_known(capsys):
    code, _, err = run(capsys, "modular", "--exponent", "nope", "--s", "0.5")
    assert code == 1
    assert "smooth:sine" in err and "const:<p>" in err


def test_unknown_field_lists_known(capsys):
    code, _, err = run(capsys, "modular", "--field", "wobble", "--s", "0.5")
    assert code == 1 and "bump" in err


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"frobnicate": 1}')
    code, _, err = run(capsys, "knp-table", "--config", str(cfg))
    assert code == 1 and "frobnicate" in err


def test_failed_check_exits_two(capsys):
    code, out, err = run(capsys, "majorant", "--field", "bump:1:1", "--exponent", "const:2",
                         "--domain", "interval:-2:2", "--points", "0.3,0.7")
    assert code == 2
    assert json.loads(out)["check_passed"] is False
    assert "check failed" in err


def test_log_holder_report(capsys):
    code, out, _ = run(capsys, "log-holder", "--exponent", "smooth:sine", "--domain",
                       "interval:-2:2")
    assert code == 0
    assert json.loads(out)["results"]["verdict"] == "bounded-by-L"


def test_pointwise_command(capsys):
    code, out, _ = run(capsys, "pointwise", "--field", "bump:1:1", "--exponent", "const:2",
                       "--points", "0.5", "--s", "0.9,0.99", "--format", "csv")
    assert code == 0
    header = out.split("\r\n")[0]
    assert header == "x,s,F_s,error_estimate,target,abs_error"


def test_norm_command_sandwich(capsys):
    code, out, _ = run(capsys, "norm", "--field", "bump:1:1", "--exponent", "smooth:sine",
                       "--s", "0.5")
    assert code == 0
    res = json.loads(out)["results"]
    assert res["sandwich_holds"] is True
    assert res["norm"] == pytest.approx(res["lebesgue_norm"] + res["seminorm"], rel=1e-15)


def test_to_json_special_values():
    assert to_json({"a": float("inf"), "b": [1, 2.5], "c": None}) == (
        '{\n  "a": "inf",\n  "b": [1, 2.5],\n  "c": null\n}')
