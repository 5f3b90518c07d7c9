import json

import pytest

from diracgap.cli import ConfigError, main, parse_config

TORUS_N8 = """
[model]
kind = flat_torus
n = 1
sides = 1.0,1.0
resolution = 8
a = 1.0
"""


def _write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults_from_empty_config():
    cfg = parse_config("")
    assert cfg["model"]["kind"] == "flat_torus"
    assert cfg["model"]["resolution"] == 16
    assert cfg["sweep"] == {"k_min": 1, "k_max": 3, "suite": ("gap",)}
    assert cfg["bundle"]["rank_e"] == 1
    assert cfg["bundle"]["chern_e"] == ((0,),)
    assert cfg["covering"]["scales"] == (1, 2)


def test_parse_comments_and_sections():
    cfg = parse_config(
        "# header comment\n"
        "[sweep]\n"
        "k_min = 2   # inline comment\n"
        "k_max = 4\n"
        "suite = gap,decay\n"
        "[bundle]\n"
        "rank_e = 2\n"
        "chern_e = 0;1\n"
    )
    assert cfg["sweep"]["k_min"] == 2
    assert cfg["sweep"]["suite"] == ("gap", "decay")
    assert cfg["bundle"]["chern_e"] == ((0,), (1,))


@pytest.mark.parametrize("text,frag", [
    ("[nosuch]\n", "unknown section"),
    ("[model]\nbogus = 1\n", "unknown key"),
    ("[model]\nn = 1\nn = 2\n", "duplicate"),
    ("[model]\nn = abc\n", "bad value"),
    ("n = 1\n", "outside any"),
    ("[model]\njust words\n", "key=value"),
    ("[sweep]\nsuite = warp\n", "unknown suite"),
    ("[sweep]\nk_min = 3\nk_max = 1\n", "k-range"),
    ("[bundle]\nrank_e = 2\nchern_e = 0\n", "one row per"),
    ("[model]\nresolution = 8\n[sweep]\nk_max = 8\n", "fineness"),
])
def test_config_errors(text, frag):
    with pytest.raises(ConfigError, match=frag):
        parse_config(text)


def test_error_messages_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("[model]\nn = 1\nbogus = 1\n")


def test_main_exit_2_on_bad_input(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "missing.cfg")]) == 2
    bad = _write(tmp_path, "[sweep]\nk_max = abc\n")
    assert main(["--config", bad]) == 2
    ok_file = _write(tmp_path, TORUS_N8)
    assert main(["--config", ok_file, "--suite", "warp"]) == 2
    assert "config error" in capsys.readouterr().err


def test_lichnerowicz_suite_end_to_end(tmp_path):
    cfg = _write(tmp_path, "[model]\nresolution = 12\n"
                           "[sweep]\nk_max = 2\nsuite = lichnerowicz\n")
    out = tmp_path / "out"
    rc = main(["--config", cfg, "--out", str(out), "--strict-float"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    v = report["verdicts"]["lichnerowicz"]
    assert v["ok"] and v["max_residual"] <= 1e-10
    assert report["config"]["output"]["strict_float"] is True
    assert report["config"]["sweep"]["k_max"] == 2


def test_schrodinger_suite_end_to_end(tmp_path):
    cfg = _write(tmp_path, TORUS_N8 + "[sweep]\nk_max = 2\nsuite = schrodinger\n")
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    v = report["verdicts"]["schrodinger"]
    assert v["ok"]
    assert v["counts"] == {"1": 1, "2": 2}
    assert report["d_k_predicted"] == {"1": 1, "2": 2}


def test_gap_suite_writes_spectra(tmp_path):
    cfg = _write(tmp_path, "[model]\nresolution = 16\n"
                           "[sweep]\nk_min = 1\nk_max = 1\nsuite = gap\n")
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    gap = report["verdicts"]["gap"]
    assert gap["ok"]
    assert gap["per_k"][0]["kernel_dim"] == 1
    csv = (out / "spectrum_k1.csv").read_text().splitlines()
    assert csv[0] == "k,index,eigenvalue,parity,degree"
    assert csv[1].startswith("1,0,")
    assert report["d_k_observed"] == {"1": 1}


def test_sphere_backend_end_to_end(tmp_path):
    cfg = _write(tmp_path, "[model]\nkind = round_sphere\nradius = 1.0\n"
                           "flux = 1\n[sweep]\nk_max = 4\nsuite = all\n")
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    per_k = report["verdicts"]["sphere"]["per_k"]
    assert [r["d_k_observed"] for r in per_k] == [2, 3, 4, 5]
    assert (out / "spectrum_k4.csv").exists()


def test_exit_3_on_numerical_indeterminacy(tmp_path):
    # a covering scale above the operator size cap cannot be computed
    cfg = _write(tmp_path, "[model]\nresolution = 16\n"
                           "[sweep]\nk_max = 1\nsuite = covering\n"
                           "[covering]\nscales = 1,40\n")
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 3
    report = json.loads((out / "report.json").read_text())
    assert "indeterminate" in report["verdicts"]
    assert "cap" in report["verdicts"]["indeterminate"]["error"]


def test_reports_are_deterministic(tmp_path):
    cfg = _write(tmp_path, TORUS_N8 + "[sweep]\nk_max = 1\nsuite = lichnerowicz\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--out", str(out1)]) == 0
    assert main(["--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
