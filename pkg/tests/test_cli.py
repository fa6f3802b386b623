import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from esgen import scenario as scn
from esgen.cli import compare_csv, main, run_sweep, rows_to_csv, verify_scenario
from esgen.errors import ConfigError

SINE_PAIR = """
[scenario]
name = {name}
mode = es

[cost]
builtin = J1

[generator]
f0 = 1
f1 = sin(z)
f2 = cos(z){perturb}

[dither]
k = 1
eps = 0.1

[run]
x0 = 0
t_end = 0.5
"""

TWO_AXES = """
[scenario]
name = plane
mode = es

[cost]
builtin = quadratic_nd
params = 2, 1

[generator]
family = bounded_vanishing

[dither]
k = {k}
eps = 0.1

[run]
x0 = 0, 0.5
t_end = 0.3
sample_stride = 4
"""


def write(tmp_path, name, text):
    p = tmp_path / f"{name}.ini"
    p.write_text(textwrap.dedent(text))
    return str(p)


@pytest.mark.parametrize("name", scn.bundled_names())
def test_bundled_scenarios_verify(name):
    checks = verify_scenario(scn.load(name))
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]


def test_bundled_set():
    assert scn.bundled_names() == ["de_classic", "ex_vib", "j2_quartic", "kr_bounded",
                                   "ra_vanishing", "v2_bounded_vanishing"]


def test_verify_exit_zero(capsys):
    assert main(["verify", "--scenario", "kr_bounded"]) == 0
    out = capsys.readouterr().out
    assert "PASS  pfaffian[1:bounded]" in out


def test_verify_perturbed_pair_fails(tmp_path, capsys):
    good = write(tmp_path, "good", SINE_PAIR.format(name="good", perturb=""))
    bad = write(tmp_path, "bad", SINE_PAIR.format(name="bad", perturb=" + 0.1"))
    assert main(["verify", "--scenario", good]) == 0
    capsys.readouterr()
    assert main(["verify", "--scenario", bad]) == 1
    line = [ln for ln in capsys.readouterr().out.splitlines() if "pfaffian" in ln][0]
    assert line.startswith("FAIL")
    # residual of (cos + 0.1, sin) is 0.1 cos z, largest at z = 0
    assert "max residual 0.1 " in line and "at z = 0" in line


def test_duplicate_frequencies_config_error(tmp_path, capsys):
    path = write(tmp_path, "dup", TWO_AXES.format(k="1, 1"))
    assert main(["verify", "--scenario", path]) == 2
    assert "pairwise distinct" in capsys.readouterr().err


def test_unknown_scenario_config_error(capsys):
    assert main(["verify", "--scenario", "no_such_scenario"]) == 2


def test_parse_error_reports_line(tmp_path, capsys):
    path = write(tmp_path, "broken", "[scenario]\nname = x\nthis line is broken\n")
    assert main(["verify", "--scenario", path]) == 2
    assert "line 3" in capsys.readouterr().err


def test_simulate_two_axes(tmp_path, capsys):
    path = write(tmp_path, "plane", TWO_AXES.format(k="1, 2"))
    out = tmp_path / "plane.csv"
    assert main(["simulate", "--scenario", path, "--out", str(out)]) == 0
    head = out.read_text().splitlines()[0]
    assert head == "t,x1,x2,J,u1,u2"
    assert "final_dist" in capsys.readouterr().out


def test_simulate_check_failure(tmp_path):
    # a short horizon cannot meet the final tolerance of ra_vanishing
    out = tmp_path / "ra.csv"
    assert main(["simulate", "--scenario", "ra_vanishing", "--t-end", "0.5", "--out", str(out)]) == 1


def test_simulate_divergence_exit_code(tmp_path, capsys):
    text = """
    [scenario]
    name = blowup
    mode = vib
    [cost]
    builtin = quadratic_nd
    params = 1, 0
    [generator]
    family = classic
    [dither]
    kind = sqrt_omega
    k = 1
    eps = 0.1
    [vib]
    drift = 5*x
    input = 0
    [run]
    x0 = 1
    t_end = 1
    """
    path = write(tmp_path, "blowup", text)
    assert main(["simulate", "--scenario", path, "--out", str(tmp_path / "b.csv")]) == 3
    assert "domain box" in capsys.readouterr().err


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        main(["simulate", "--scenario", "de_classic", "--t-end", "0.5", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()
    assert main(["compare", str(a), str(b)]) == 0
    assert compare_csv(str(a), str(b)) == 0.0


def test_compare_detects_difference(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    common = ["--scenario", "de_classic", "--t-end", "0.5", "--h", "2.5e-4"]
    main(["simulate", *common, "--out", str(a)])
    main(["simulate", *common, "--eps", "0.05", "--out", str(b)])
    capsys.readouterr()
    assert main(["compare", str(a), str(b), "--tolerance", "1e-3"]) == 1
    assert "differ" in capsys.readouterr().out
    assert main(["compare", str(a), str(b), "--tolerance", "100"]) == 0


def test_compare_missing_file(tmp_path):
    assert main(["compare", str(tmp_path / "x.csv"), str(tmp_path / "y.csv")]) == 2


def test_sweep_empty_list(tmp_path, capsys):
    assert main(["sweep", "--scenario", "de_classic", "--param", "eps", "--values"]) == 0
    assert capsys.readouterr().out.strip() == "eps"


def test_sweep_rejects_param(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--scenario", "de_classic", "--param", "gamma", "--values", "1"])


def test_sweep_mu_on_vib_scenario():
    sc = scn.load("ex_vib").override("t_end", 3.0)
    rows = run_sweep(sc, "mu", [1.0, -1.0])
    assert [r["value"] for r in rows] == [1.0, -1.0]
    assert all(r["final_dist"] < 0.1 for r in rows)


def test_sweep_parallel_matches_serial(tmp_path):
    sc = scn.load("de_classic").override("t_end", 0.3)
    serial = rows_to_csv(run_sweep(sc, "eps", [0.1, 0.05]), "eps")
    parallel = rows_to_csv(run_sweep(sc, "eps", [0.1, 0.05], str(tmp_path), workers=2), "eps")
    assert serial == parallel
    assert sorted(os.listdir(tmp_path)) == ["de_classic_eps_0.csv", "de_classic_eps_1.csv"]
    assert "sup_deviation" in serial.splitlines()[0]


def test_sweep_lambda_reports_descent():
    sc = scn.load("ra_vanishing").override("t_end", 1.0).override("eps", 0.05)
    rows = run_sweep(sc, "lambda", [9.0])
    assert rows[0]["descent_pass"] is False


def test_override_validation():
    sc = scn.load("de_classic")
    with pytest.raises(ConfigError):
        sc.override("mu", 2.0)
    with pytest.raises(ConfigError):
        sc.override("eps", -1.0)
    with pytest.raises(ConfigError):
        sc.override("x0", (0.0, 1.0))
    assert sc.override("lambda", 3.0).checks["descent_lambda"] == 3.0


def test_case_sensitive_keys():
    sc = scn.load("ra_vanishing")
    assert sc.certificate["Delta"] == 2.0 and sc.certificate["delta"] == 1.05


def test_certify_no_sim(tmp_path, capsys):
    out = tmp_path / "cert.txt"
    assert main(["certify", "--scenario", "ra_vanishing", "--no-sim", "--out", str(out)]) == 0
    kv = dict(line.split("=", 1) for line in out.read_text().splitlines())
    assert kv["case"] == "II"
    assert float(kv["eps_bar"]) > 0
    assert float(kv["eps1"]) == pytest.approx(1 / (8 * np.pi))


def test_certify_delta_too_large(tmp_path, capsys):
    text = open(scn.resolve("ra_vanishing")).read().replace("delta = 1.05", "delta = 2.5")
    path = write(tmp_path, "wide", text)
    assert main(["certify", "--scenario", path, "--no-sim"]) == 2
    assert "delta <" in capsys.readouterr().err


def test_certify_unbounded_domain(tmp_path, capsys):
    text = open(scn.resolve("ra_vanishing")).read().replace("Delta = 2", "Delta = inf\nfit_radius = 2")
    path = write(tmp_path, "unbounded", text)
    assert main(["certify", "--scenario", path, "--no-sim"]) == 0
    out = capsys.readouterr().out
    assert "eps0           unbounded" in out


def test_certify_requires_es_mode(capsys):
    assert main(["certify", "--scenario", "ex_vib", "--no-sim"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "esgen", "verify", "--scenario", "de_classic"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "PASS  A2" in res.stdout
