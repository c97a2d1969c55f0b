import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from heatwave import cli, config
from heatwave.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FAST_KERNELS = ["--set", "kernels.n_bounds=300", "--set", "kernels.n_dual=40", "--set", "kernels.n_identity=8"]


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_config_rejects_unknown_keys_and_sections():
    with pytest.raises(ConfigurationError):
        config.load("small-l-check", text="[small_l]\nt = 0.5\nLL = 1\n")
    with pytest.raises(ConfigurationError):
        config.load("small-l-check", text="[smallL]\nt = 0.5\n")
    with pytest.raises(ConfigurationError):
        config.load("small-l-check", text="", overrides=["small_l.t"])
    cfg = config.load("sweep", text="[sweep]\nbc = d\nL_values = 1, 3/2\nt_values = 1/4\nbase_seed = 3\n"
                      "[output]\ncsv = a.csv\njson = a.json\n")
    assert cfg["sweep"]["L_values"] == [1.0, 1.5] and cfg["sweep"]["t_values"] == [0.25]
    again = config.load("sweep", text=config.dump(cfg))
    assert again == cfg


def test_kernels_default_passes(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["kernels-verify", str(CONFIGS / "kernels.ini"), *FAST_KERNELS]) == 0
    report = (tmp_path / "kernels_report.txt").read_text()
    assert "resolved configuration" in report and "SUMMARY" in report
    assert "FAIL" not in capsys.readouterr().out


def test_kernels_bad_point_is_config_error(tmp_path, capsys):
    cfgp = write(tmp_path, "k.ini", "[kernels]\nextra_points = 0.5 1.5 0 1\n")
    assert cli.main(["kernels-verify", cfgp]) == 1
    assert "|x| <= L" in capsys.readouterr().err


def test_kernels_uncertifiable_tolerance_fails(tmp_path, capsys):
    cfgp = write(tmp_path, "k.ini", "[kernels]\nseries_tol = 1e-14\n")
    assert cli.main(["kernels-verify", cfgp, *FAST_KERNELS]) == 2
    out = capsys.readouterr().out
    assert "FAIL certifiable_tolerance" in out


def test_gronwall_exit_codes(tmp_path):
    zero = write(tmp_path, "g0.ini", "[gronwall]\nC_values = 0\n")
    assert cli.main(["gronwall-verify", zero]) == 0
    det = write(tmp_path, "g1.ini", "[gronwall]\nvariants = deterministic\nC_values = 1\n")
    assert cli.main(["gronwall-verify", det]) == 0
    coarse = write(tmp_path, "g2.ini", "[gronwall]\nvariants = stochastic\nC_values = 1\ndt = 0.05\n")
    assert cli.main(["gronwall-verify", coarse]) == 3
    bad = write(tmp_path, "g3.ini", "[gronwall]\nvariants = quantum\n")
    assert cli.main(["gronwall-verify", bad]) == 1


SIM = """[simulate]
bc = {bc}
L = 1
dx = 1/16
T = 1/4
seed = 3
coeffs = {coeffs}
u0 = {u0}
snapshot_times = 1/8, 1/4
oracle = {oracle}
[output]
csv = {csv}
"""


def test_simulate_heat_flow_oracle(tmp_path):
    out = tmp_path / "heat.csv"
    cfgp = write(tmp_path, "s.ini", SIM.format(bc="dirichlet", coeffs="zero", u0="gaussian", oracle="true", csv=out))
    assert cli.main(["simulate", cfgp]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 33
    gap = max(abs(float(r["value"]) - float(r["oracle"])) for r in rows)
    assert gap < 5e-3
    assert (tmp_path / "heat.csv.config.ini").exists()


def test_simulate_constant_neumann(tmp_path):
    out = tmp_path / "c.csv"
    cfgp = write(tmp_path, "s.ini", SIM.format(bc="neumann", coeffs="zero", u0="constant", oracle="false", csv=out))
    assert cli.main(["simulate", cfgp]) == 0
    assert all(float(r["value"]) == 1.0 for r in csv.DictReader(out.open()))


def test_simulate_missing_seed(tmp_path, capsys):
    text = SIM.format(bc="dirichlet", coeffs="linear", u0="zero", oracle="false", csv=tmp_path / "x.csv")
    cfgp = write(tmp_path, "s.ini", text.replace("seed = 3\n", ""))
    assert cli.main(["simulate", cfgp]) == 1
    assert "seed" in capsys.readouterr().err


def test_simulate_is_reproducible(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"n{k}.csv"
        cfgp = write(tmp_path, f"s{k}.ini", SIM.format(bc="mixed", coeffs="sine_tanh", u0="gaussian",
                                                        oracle="false", csv=out))
        assert cli.main(["simulate", cfgp]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


SWEEP = """[sweep]
bc = dirichlet
L_values = {L}
t_values = 0.5
x_values = 0
n_reps = {n}
dx = 1/16
coeffs = {coeffs}
u0 = {u0}
base_seed = 11
method = {method}
[output]
csv = {out}.csv
json = {out}.json
"""


def test_sweep_linear_quadrature(tmp_path):
    out = tmp_path / "lin"
    L = ", ".join(f"{2.1 + 0.3 * k:.1f}" for k in range(8))
    cfgp = write(tmp_path, "w.ini", SWEEP.format(L=L, n=1000, coeffs="linear", u0="zero", method="auto", out=out))
    assert cli.main(["sweep", cfgp]) == 0
    fits = json.loads(Path(f"{out}.json").read_text())["fits"]
    rate = next(f for f in fits if "slope" in f)
    assert abs(rate["slope"] / rate["theoretical_slope"] - 1) <= 0.15


def test_sweep_nonlinear_mc(tmp_path):
    out = tmp_path / "nl"
    cfgp = write(tmp_path, "w.ini", SWEEP.format(L="1, 2, 3", n=200, coeffs="sine_tanh", u0="gaussian",
                                                  method="mc", out=out))
    assert cli.main(["sweep", cfgp, "--threads", "2"]) == 0
    payload = json.loads(Path(f"{out}.json").read_text())
    env = next(f for f in payload["fits"] if "fitted_c" in f)
    assert np.isfinite(env["fitted_c"])
    assert payload["config"]["coeffs"] == "sine_tanh"


def test_sweep_margin_violation(tmp_path):
    out = tmp_path / "m"
    cfgp = write(tmp_path, "w.ini", SWEEP.format(L="1, 2", n=100, coeffs="sine_tanh", u0="gaussian",
                                                  method="mc", out=out))
    assert cli.main(["sweep", cfgp, "--set", "sweep.L_master=3"]) == 1


def test_small_l_check(tmp_path):
    cfgp = write(tmp_path, "l.ini", "[small_l]\nt = 0.5\nL_values = 0.2, 0.1, 0.05\n")
    assert cli.main(["small-l-check", cfgp]) == 0


def test_threads_resolution(monkeypatch):
    cfg = {"run": {"threads": None}}
    monkeypatch.setenv("HEATWAVE_THREADS", "4")
    assert cli.resolve_threads(None, cfg) == 4
    assert cli.resolve_threads(2, cfg) == 2
    assert cli.resolve_threads(None, {"run": {"threads": 3}}) == 3
    monkeypatch.setenv("HEATWAVE_THREADS", "0")
    with pytest.raises(ConfigurationError):
        cli.resolve_threads(None, cfg)


def test_missing_config_file(tmp_path):
    assert cli.main(["small-l-check", str(tmp_path / "nope.ini")]) == 1


def test_console_script_runs(tmp_path):
    cfgp = write(tmp_path, "l.ini", "[small_l]\nL_values = 0.2\n")
    proc = subprocess.run([sys.executable, "-m", "heatwave.cli", "small-l-check", cfgp],
                          capture_output=True, text=True, env=dict(os.environ))
    assert proc.returncode == 0 and "PASS" in proc.stdout
