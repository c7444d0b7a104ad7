import io
import json
import subprocess
import sys

import numpy as np
import pytest

from comlab import cli
from comlab.cli import (EXIT_FAIL, EXIT_NUMERIC, EXIT_PASS, EXIT_USAGE, RunConfig, UsageError,
                        decode_matrix, main, parse_config, read_matrix_csv, run)
from comlab.errors import ImmersionError, SpecError

EXAMPLE = ("expect --variety veronese:n=1,m=2,basis=balanced --ensemble ginibre-polar:N=3 "
           "--seed 42 --outer 2000 --inner 1000")


def run_json(argv):
    out = io.StringIO()
    code = run(parse_config(argv), stdout=out)
    return code, json.loads(out.getvalue())


def test_parse_example():
    cfg = parse_config(EXAMPLE)
    assert cfg.command == "expect"
    assert cfg.variety == "veronese:n=1,m=2,basis=balanced"
    assert cfg.ensemble == "ginibre-polar:N=3"
    assert (cfg.seed, cfg.outer, cfg.inner) == (42, 2000, 1000)


def test_missing_m_names_token():
    with pytest.raises(SpecError, match="'m'"):
        parse_config("com --variety veronese:n=1")


def test_unknown_flag_names_token():
    with pytest.raises(UsageError, match="--frobnicate"):
        parse_config("com --variety segre11 --frobnicate 3")


@pytest.mark.parametrize("argv", [
    EXAMPLE,
    "expect-unitary --variety veronese:n=1,m=2 --quad-levels 32,16 --z-max 3.5",
    "verify --seed 7 --symmetrize --tol-exact 0.0 --tol-quad 0.0 --format json",
    "coarea-check --points 10 --tol-coarea 1e-06",
    "sample --ensemble eig-lognormal:N=3,s=0.25 --points 3 --output out.json",
])
def test_round_trip(argv):
    cfg = parse_config(argv)
    assert parse_config(str(cfg)) == cfg
    assert str(parse_config(str(cfg))) == str(cfg)


def test_config_file_and_flag_override(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# example\nvariety = segre11\nseed = 3\nouter = 150\nz-max = 3\n", encoding="utf-8")
    cfg = parse_config(["expect-unitary", "--config", str(f), "--seed", "9"])
    assert cfg.variety == "segre11" and cfg.outer == 150 and cfg.z_max == 3.0
    assert cfg.seed == 9


def test_config_file_unknown_key(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("variety = segre11\ncolour = blue\n", encoding="utf-8")
    with pytest.raises(UsageError, match="colour"):
        parse_config(["com", "--config", str(f)])


def test_missing_required_field():
    with pytest.raises(UsageError, match="--ensemble"):
        parse_config("expect --variety segre11")


def test_csv_for_verify_is_usage_error():
    with pytest.raises(UsageError):
        parse_config("verify --format csv")


def test_main_exit_codes(capsys):
    assert main(["com", "--variety", "veronese:n=1"]) == EXIT_USAGE
    assert "m" in capsys.readouterr().err
    assert main(["bogus"]) == EXIT_USAGE


def test_com_identity_balanced():
    code, env = run_json("com --variety veronese:n=1,m=2,basis=balanced")
    assert code == EXIT_PASS
    mu = decode_matrix(env["payload"]["mu_bar"])
    assert np.max(np.abs(mu - 2 / 3 * np.eye(3))) <= 1e-8
    assert env["basis"] == ["1", "w1", "w1^2"]
    assert env["tool"] == "comlab" and "timestamp" in env and "wall_seconds" in env


def test_expect_outer_one_fails_budget():
    code, env = run_json("expect --variety veronese:n=1,m=2 --ensemble ginibre-polar:N=3 "
                         "--outer 1 --inner 100 --stderr-budget 0.02")
    assert code == EXIT_FAIL
    assert env["payload"]["passed"] is False


def test_expect_small_passes():
    code, env = run_json("expect --variety segre11 --ensemble eig-lognormal:N=4 --outer 200 --inner 200")
    assert code == EXIT_PASS
    assert env["payload"]["type"] == "expectation-report"


def test_csv_and_json_agree(tmp_path):
    base = "com --variety veronese:n=1,m=2 --ensemble ginibre-polar:N=3 --inner 500"
    out_j = tmp_path / "a.json"
    out_c = tmp_path / "a.csv"
    assert run(parse_config(f"{base} --output {out_j}")) == EXIT_PASS
    assert run(parse_config(f"{base} --output {out_c} --format csv")) == EXIT_PASS
    env = json.loads(out_j.read_text(encoding="utf-8"))
    m_json = decode_matrix(env["payload"]["mu_bar"])
    m_csv, se_csv = read_matrix_csv(out_c.read_text(encoding="utf-8"))
    assert np.array_equal(m_json, m_csv)
    assert np.array_equal(np.array(env["payload"]["stderr"]), se_csv)


def test_json_round_trips_full_precision():
    m = np.array([[1 / 3 + 1e-17j, np.pi], [np.e, -2 ** -52 + 0.1j]])
    enc = json.loads(json.dumps(cli.encode_matrix(m)))
    assert np.array_equal(decode_matrix(enc), m)


def test_numeric_error_exit_code(monkeypatch):
    def boom(handle, g, *a, **k):
        raise ImmersionError("hessian is not positive definite", w=np.array([0.5 + 0.25j]))

    monkeypatch.setattr(cli, "center_of_mass_quad", boom)
    code, env = run_json("com --variety veronese:n=1,m=2 --ensemble ginibre-polar:N=3")
    assert code == EXIT_NUMERIC
    p = env["payload"]
    assert p["type"] == "numeric-error"
    assert p["variety"] == "veronese:n=1,m=2,basis=unit-monomial"
    assert p["w"] == [[0.5, 0.25]]
    assert np.asarray(p["g"]).shape == (3, 3, 2)


def test_sample_command():
    code, env = run_json("sample --ensemble ginibre-polar:N=3 --variety veronese:n=1,m=2 --points 4")
    assert code == EXIT_PASS
    g = [decode_matrix(x) for x in env["payload"]["g"]]
    assert len(g) == 4 and all(abs(np.linalg.det(x) - 1) <= 1e-10 for x in g)
    assert len(env["payload"]["w"]) == 4


def test_coarea_check_command():
    # the stated determinant does not equal the density ratio for non-unitary g
    code, env = run_json("coarea-check")
    p = env["payload"]
    assert p["points"] == 100
    assert p["max_pullback_rel_err"] <= 1e-8
    assert code == EXIT_PASS, f"max rel_err {p['max_rel_err']:.3e} exceeds {p['tolerance']:.0e}"


def test_verify_defaults_exit_zero():
    code, env = run_json("verify --seed 42")
    failed = [c["name"] for c in env["payload"]["checks"] if not c["passed"]]
    assert code == EXIT_PASS, f"failed checks: {failed}"


def test_verify_tolerance_zero():
    # statistical tolerance 0: every MC check fails, exact and quadrature statuses are unchanged
    _, default = run_json("verify --seed 42")
    _, strict = run_json("verify --seed 42 --z-max 0 --stderr-budget 0")
    d = {c["name"]: c for c in default["payload"]["checks"]}
    s = {c["name"]: c for c in strict["payload"]["checks"]}
    mc = [n for n, c in s.items() if c["kind"] == "mc"]
    assert len(mc) >= 5 and all(not s[n]["passed"] for n in mc)
    for n, c in s.items():
        if c["kind"] != "mc":
            assert c["passed"] == d[n]["passed"], n


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "comlab.cli", "bogus"], capture_output=True, text=True)
    assert out.returncode == EXIT_USAGE
