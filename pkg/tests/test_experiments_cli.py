import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from westervelt_lab.cli import EXIT_BREAKDOWN, EXIT_CONFIG, EXIT_OK, EXIT_RESOLUTION, main
from westervelt_lab.config import HEADER, dump_config, parse_config
from westervelt_lab.errors import ConfigError
from westervelt_lab.experiments import (
    Medium, beta_sweep, breakdown_probe, c_sweep, dn_difference, is_monotone, ladder,
)
from westervelt_lab.fields import Grid3D
from westervelt_lab.fits import loglog_fit
from westervelt_lab.media import Nonlinearity, SoundSpeed
from westervelt_lab.solvers import exp_inv_sq_profile
from westervelt_lab.stability import ode_lipschitz_constant, ode_solution

COARSE = Grid3D.from_dx(0.25, 0.06, 1.8)


def _medium(c, b):
    return Medium(SoundSpeed.constant(c), Nonlinearity.constant(b))


# ---- fits

def test_loglog_fit_exact_power():
    x = np.geomspace(1e-3, 1e-1, 6)
    fit = loglog_fit(x, 3.0 * x**0.7)
    assert abs(fit.slope - 0.7) < 1e-12 and abs(fit.intercept - np.log(3)) < 1e-12
    assert fit.r2 == 1.0 and fit.n == 6


def test_loglog_fit_noisy():
    rng = np.random.default_rng(7)
    x = np.geomspace(1, 100, 40)
    fit = loglog_fit(x, x**1.5 * np.exp(0.05 * rng.standard_normal(40)))
    assert abs(fit.slope - 1.5) < 0.05 and 0.97 < fit.r2 < 1


def test_loglog_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        loglog_fit([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        loglog_fit([1, 2, 3, 4], [1, 0, 3, 4])


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_loglog_fit_recovers_slope(p, a):
    x = np.geomspace(0.01, 1, 5)
    assert abs(loglog_fit(x, a * x**p).slope - p) < 1e-9


# ---- dn differences and sweeps

def test_dn_difference_identical_media_is_zero():
    m = _medium(1.0, 0.3)
    assert dn_difference(m, m, exp_inv_sq_profile(0.1), COARSE) == 0.0


def test_dn_difference_symmetric():
    a, b = _medium(1.0, 0.1), _medium(1.0, 0.4)
    f = exp_inv_sq_profile(0.5)
    assert dn_difference(a, b, f, COARSE) == dn_difference(b, a, f, COARSE) > 0


def test_beta_ladder_monotone():
    res = beta_sweep(COARSE, 0.5, ladder(1e-3, 1e-1, 6), C=0.1)
    assert not res.breakdown
    assert is_monotone([r[3] for r in res.rows])
    assert res.fit is not None and res.fit.r2 > 0.97


def test_c_sweep_equal_speeds():
    res = c_sweep(COARSE, 1.2, [0.0], C=0.1, fit_range=None)
    assert res.rows[0][3] == 0.0


def test_breakdown_probe_reports_typed_errors():
    out = breakdown_probe(Grid3D.from_dx(0.125, 0.03, 3.48), 1.0, [0.01, 0.2])
    assert out[0] == (0.01, "")
    assert out[1] == (0.2, "NonlinearDegeneracy")


def test_sweep_result_writes_breakdown_rows(tmp_path):
    grid = Grid3D.from_dx(0.125, 0.03, 3.48)
    res = beta_sweep(grid, 1e-4, [0.05, 0.2], C=1.0, fit_range=None)
    assert len(res.rows) == 1 and len(res.breakdown) == 1
    res.write(tmp_path)
    lines = (tmp_path / "breakdown.csv").read_text().splitlines()
    assert lines[0].startswith("param1,") and "NonlinearDegeneracy" in lines[1]


# ---- ODE perturbation bound

@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1))
def test_ode_perturbation_bound(x1, x2, a1, a2):
    # Gronwall with Lipschitz constant 1 on [0, 1]
    K = np.e
    diff = np.max(np.abs(ode_solution(x1, a1) - ode_solution(x2, a2)))
    assert diff <= K * (abs(x1 - x2) + abs(a1 - a2)) + 1e-12


def test_ode_constant_refinement_stable():
    rng = np.random.default_rng(0)
    pairs = [(rng.uniform(-2, 2, 2), rng.uniform(-1, 1, 2)) for _ in range(20)]
    K = [ode_lipschitz_constant(pairs, 1.0, h) for h in (0.1, 0.05, 0.025)]
    assert max(K) / min(K) < 1.05
    assert max(K) <= np.e


# ---- config

def test_config_roundtrip():
    vals = {"study": "beta_sweep", "grid.dx": 0.25, "sweep.eps": (0.1, 0.05)}
    cfg = parse_config(dump_config(vals))
    assert cfg["grid.dx"] == 0.25 and cfg["sweep.eps"] == (0.1, 0.05)
    assert cfg["profile.C"] == 0.1


@pytest.mark.parametrize("text", [
    "study = beta_sweep\n",
    HEADER + "\nnot a pair\n",
    HEADER + "\nfoo.bar = 1\n",
    HEADER + "\ngrid.dx = abc\n",
    HEADER + "\ngrid.dt = -1\n",
    HEADER + "\nsweep.eps = 0.1,x\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_media_kinds(tmp_path):
    cfg = parse_config(HEADER + "\nc.kind = herglotz\nc.alpha = 1.2\n")
    assert cfg.sound_speed().kind == "herglotz"
    with pytest.raises(ConfigError):
        parse_config(HEADER + "\nc.kind = wobbly\n").sound_speed()
    with pytest.raises(ConfigError):
        parse_config(HEADER + "\nbeta.kind = tabulated\n").nonlinearity()


# ---- CLI

def _write(tmp_path, **kv):
    p = tmp_path / "run.cfg"
    p.write_text(dump_config(kv))
    return p


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.dx = 1\n")
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["geodesic", "--entry", "1,2", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["transform", "--tau-sweep", "10:5:2", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_cli_breakdown_exit(tmp_path):
    cfg = _write(tmp_path, **{"grid.dx": 0.125, "beta.value": 0.2, "profile.C": 1.0})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_BREAKDOWN


def test_cli_resolution_exit(tmp_path):
    argv = ["transform", "--tau-sweep", "40:40:2", "--h", "0.01", "--out", str(tmp_path)]
    assert main(argv) == EXIT_RESOLUTION


def test_cli_simulate_outputs(tmp_path):
    cfg = _write(tmp_path, **{"grid.dx": 0.25, "grid.dt": 0.06, "grid.T": 1.8, "beta.value": 0.3})
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["dn_l2_sigma"] > 0 and rep["min_factor"] > 0.5
    assert (out / "u.bin").stat().st_size > 0
    assert (out / "dn_trace.csv").read_text().count("\n") > 1


def test_cli_sweep_outputs(tmp_path):
    cfg = _write(tmp_path, **{"grid.dx": 0.25, "grid.dt": 0.06, "grid.T": 1.8,
                              "sweep.anchor": 0.5, "sweep.count": 4, "profile.C": 0.1})
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    fit = json.loads((out / "fit.json").read_text())
    assert fit["points"] == 4 and fit["fit"]["r2"] > 0.97
    assert (out / "breakdown.csv").read_text().strip() == "param1,param2,delta,error,message"


def test_cli_geodesic_flat(tmp_path):
    assert main(["geodesic", "--out", str(tmp_path)]) == EXIT_OK
    sc = json.loads((tmp_path / "scattering.json").read_text())
    assert np.allclose(sc["exit"], [1, 0, 0], atol=1e-9) and abs(sc["length"] - 2) < 1e-9


def test_cli_check(capsys):
    assert main(["check"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 8
