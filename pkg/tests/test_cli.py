import json

import pytest

from hydrogeo.cli import main

CURV = ("[scenario]\nkind = curvature\nmodel = kmp\n[grid]\nn = 32\n[field.rho0]\n"
        "[field.phi1]\nmode = 1, 0, 1\n[field.phi2]\nmode = 1, 1, 0\n")


def _last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_run_success(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(CURV)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    msg = _last_json(capsys)
    assert msg["status"] == "ok" and "report.json" in msg["files"]
    assert (out / "manifest.json").exists()


def test_missing_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    msg = _last_json(capsys)
    assert msg["status"] == "error" and msg["error"] == "ConfigError" and msg["exit_code"] == 2


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(CURV.replace("n = 32", "n = 7"))
    assert main(["run", str(cfg)]) == 2
    assert "parity rule" in _last_json(capsys)["message"]


def test_subcommand_kind_mismatch(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(CURV)
    assert main(["suite", str(cfg)]) == 2
    assert main(["oracle", str(cfg)]) == 2


def test_suite_command_and_seed(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("[scenario]\nkind = identity_suite\n[grid]\nn = 32\n[run]\nsamples = 1\n"
                   "models = kmp\n")
    assert main(["suite", str(cfg), "--out", str(tmp_path / "o"), "--seed", "9"]) == 0
    assert "seed = 9" in (tmp_path / "o" / "config.txt").read_text()


def test_numeric_exit(tmp_path, capsys):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("[scenario]\nkind = geodesic\nmodel = sep\n[grid]\nn = 32\n[field.rho0]\n"
                   "[field.phi1]\nmode = 1, 0, 3\n[run]\ndt = 1e-3\nt_end = 1.0\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert _last_json(capsys)["status"] == "admissibility_exit"


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
