import json
from pathlib import Path

import numpy as np
import pytest

from sgstrip.cli import (EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, RunConfig,
                         config_from_ini, config_to_ini, load_config, main)
from sgstrip.core import ProblemParams
from sgstrip.errors import ConfigError
from sgstrip.volterra import BoundarySideData, Side, write_boundary_csv

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "small-d.cfg"

FAST = """
[params]
d = {d}
L = 1.0
[contour]
n_per_ray = 60
[grid]
x_min = 0.3
x_max = 0.9
nx = 3
y_margin = 0.25
ny = 3
{extra}
"""


def write_cfg(tmp_path, d=0.01, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(FAST.format(d=d, extra=extra))
    return str(path)


def strip_comments(path):
    return [line for line in Path(path).read_text().splitlines() if not line.startswith("#")]


def test_bundled_config_loads():
    cfg = load_config(str(CONFIG))
    assert cfg.params == ProblemParams(0.01, 1.0)
    assert cfg.contour.n_per_ray == 200 and cfg.grid.nx == 10 and cfg.grid.ny == 9


def test_config_round_trip():
    cfg = RunConfig(params=ProblemParams(0.3, 2.5)).validate()
    assert config_from_ini(config_to_ini(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "[params]\nd = 0.1\n",
    "[params]\nd = 0.1\nL = 1\nD = 2\n",
    "[params]\nd = 0.1\nL = 1\n[solvr]\ntol = 1\n",
    "[params]\nd = 0.1\nL = 1\n[solver]\ntol = abc\n",
    "[params]\nd = 0.1\nL = 1\n[contour]\ngrading = uniform\n",
    "[params]\nd = 0.1\nL = 1\n[output]\nformats = csv,xml\n",
    "not an ini file",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        config_from_ini(text)


def test_oracle_command(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle", "--config", write_cfg(tmp_path), "--out", str(out)]) == EXIT_OK
    rows = strip_comments(out / "oracle.csv")
    assert rows[0] == "x,y,q" and len(rows) == 10


def test_solve_and_verify(tmp_path):
    out = tmp_path / "s"
    cfg = write_cfg(tmp_path)
    code = main(["solve", "--config", cfg, "--out", str(out), "--threads", "1"])
    report = json.loads((out / "verification.json").read_text())
    # the 3 x 3 grid stays away from the edges, so boundary extrapolation is unavailable
    assert code == EXIT_VERIFY and not report["checks"]["bc_recovery"]["pass"]
    assert report["checks"]["oracle_distance"]["pass"]
    doc = json.loads((out / "field.json").read_text())
    assert doc["metadata"]["contour"]["n_per_ray"] == 60
    assert main(["verify", "--config", cfg, "--out", str(out), "--field", str(out / "field.csv")]) == EXIT_VERIFY


def test_solve_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    for name in ("a", "b"):
        main(["solve", "--config", cfg, "--out", str(tmp_path / name), "--threads", "2"])
    assert strip_comments(tmp_path / "a" / "field.csv") == strip_comments(tmp_path / "b" / "field.csv")


def test_reference_run_passes(tmp_path):
    out = tmp_path / "ref"
    assert main(["solve", "--config", str(CONFIG), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "verification.json").read_text())["all_pass"]


def test_invalid_d_is_config_error(tmp_path):
    assert main(["oracle", "--config", write_cfg(tmp_path, d=3.14159), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["oracle", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_command():
    assert main(["explode"]) == EXIT_CONFIG


def test_env_overrides(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path)
    monkeypatch.setenv("SGSTRIP_CONFIG", cfg)
    monkeypatch.setenv("SGSTRIP_OUT", str(tmp_path / "env"))
    assert main(["oracle"]) == EXIT_OK
    assert (tmp_path / "env" / "oracle.csv").exists()
    # a flag beats the environment
    assert main(["oracle", "--out", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "oracle.csv").exists()
    monkeypatch.setenv("SGSTRIP_BACKEND", "magic")
    assert main(["oracle"]) == EXIT_CONFIG


def test_solver_failure_exit(tmp_path):
    cfg = write_cfg(tmp_path, d=0.5, extra="[solver]\nmax_iter = 1\ntol = 1e-15\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "f"), "--threads", "1"]) == EXIT_SOLVER


def test_spectral_command(tmp_path):
    x = np.linspace(0, 30, 61)
    sides = [BoundarySideData(Side.SIDE3, x, np.zeros_like(x), 0.01 * np.exp(-x)),
             BoundarySideData.zero(Side.SIDE2, np.linspace(0, 1, 11), value=0.01)]
    inp = tmp_path / "b.csv"
    write_boundary_csv(inp, sides)
    out = tmp_path / "sp"
    args = ["spectral", "--config", write_cfg(tmp_path), "--input", str(inp), "--out", str(out),
            "--lambdas", "0.5+0.5j,1.5j"]
    assert main(args) == EXIT_OK
    assert len(strip_comments(out / "spectral.csv")) == 5


def test_spectral_lower_half_plane_is_domain_error(tmp_path):
    x = np.linspace(0, 30, 61)
    inp = tmp_path / "b.csv"
    write_boundary_csv(inp, [BoundarySideData(Side.SIDE1, x, np.zeros_like(x), 0.01 * np.exp(-x))])
    args = ["spectral", "--config", write_cfg(tmp_path), "--input", str(inp), "--out", str(tmp_path),
            "--lambdas", "0.5-0.5j"]
    assert main(args) == EXIT_DOMAIN


def test_malformed_boundary_csv(tmp_path):
    inp = tmp_path / "b.csv"
    inp.write_text("side,node\n3,0\n")
    assert main(["spectral", "--config", write_cfg(tmp_path), "--input", str(inp), "--out", str(tmp_path)]) == EXIT_CONFIG
