"""Config parsing, validation, and the command-line entry point."""

import filecmp
import importlib.resources as resources
import os

import numpy as np
import pytest

from swarmcov import ConfigError
from swarmcov.cli import main
from swarmcov.config import build_init, load_config
from swarmcov.estimation import load_estimate_csv, load_observations_csv
from swarmcov.fields import load_field_csv
from swarmcov.graphs import load_trajectory_csv
from swarmcov.sde import GaussianInit, PointInit, UniformInit, load_histogram_series_csv

CONFIG_DIR = resources.files("swarmcov") / "configs"

MINIMAL_COVERAGE = """
[field]
kind = sine

[law]
family = diffusion
c1 = 0.1

[simulation]
agents = 50
dt = 0.01
t_end = 0.05
seed = 3

[output]
dir = {out}
bins = 10
"""

MINIMAL_PDE = """
[law]
family = constant
d0 = 1.0

[solver]
cells = 50
t_end = 0.05
snapshots = 0.01, 0.02, 0.03, 0.04, 0.05

[initial]
kind = cosine
amplitude = 0.5

[output]
dir = {out}
"""

MINIMAL_GRAPH = """
[graph]
kind = path
n = 3

[rates]
c = 1.0
values = 1.0, 2.0, 1.5

[propagate]
times = 0.5, 1.0

[sample]
seed = 7
max_jumps = 500

[output]
dir = {out}
"""


def _write(tmp_path, text, name="run.cfg", **fmt):
    path = tmp_path / name
    path.write_text(text.format(**fmt) if fmt else text)
    return str(path)


# ---------------------------------------------------------------------------
# load_config validation


def test_unknown_section_rejected(tmp_path):
    path = _write(tmp_path, MINIMAL_PDE + "\n[mystery]\nx = 1\n", out=".")
    with pytest.raises(ConfigError, match=r"unknown section \[mystery\]"):
        load_config(path, "pde")


def test_unknown_key_rejected(tmp_path):
    path = _write(tmp_path, MINIMAL_PDE.replace("cells = 50", "cells = 50\nspeed = 9"), out=".")
    with pytest.raises(ConfigError, match=r"unknown key 'speed' in \[solver\]"):
        load_config(path, "pde")


def test_missing_required_section_rejected(tmp_path):
    path = _write(tmp_path, "[solver]\ncells = 50\nt_end = 1.0\n")
    with pytest.raises(ConfigError, match=r"missing required section \[law\]"):
        load_config(path, "pde")


def test_missing_required_key_rejected(tmp_path):
    path = _write(tmp_path, MINIMAL_PDE.replace("t_end = 0.05\n", ""), out=".")
    with pytest.raises(ConfigError, match=r"missing required key 't_end' in \[solver\]"):
        load_config(path, "pde")


def test_bad_value_rejected(tmp_path):
    path = _write(tmp_path, MINIMAL_PDE.replace("cells = 50", "cells = plenty"), out=".")
    with pytest.raises(ConfigError, match=r"bad value for 'cells' in \[solver\]"):
        load_config(path, "pde")


def test_malformed_file_rejected(tmp_path):
    path = _write(tmp_path, "this is not an ini file\n")
    with pytest.raises(ConfigError, match="malformed config file"):
        load_config(path, "pde")


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config file"):
        load_config(str(tmp_path / "nope.cfg"), "pde")


def test_defaults_are_filled_in(tmp_path):
    path = _write(tmp_path, MINIMAL_COVERAGE, out=str(tmp_path))
    cfg = load_config(path, "coverage")
    assert cfg["field"]["background"] == pytest.approx(0.01)
    assert cfg["field"]["dim"] == 1
    assert cfg["law"]["c2"] == 0.0
    assert cfg["law"]["k"] == 1.0
    assert cfg["simulation"]["workers"] == 1
    assert cfg["simulation"]["init"] == "uniform"
    assert cfg["simulation"]["snapshots"] == ()
    assert cfg["output"]["bins"] == 10


def test_file_paths_resolve_relative_to_config(tmp_path):
    sub = tmp_path / "nested"
    sub.mkdir()
    (sub / "values.csv").write_text("vertex,value\n0,1.0\n1,2.0\n")
    text = MINIMAL_GRAPH.replace("n = 3", "n = 2").replace(
        "values = 1.0, 2.0, 1.5", "path = values.csv"
    )
    path = _write(sub, text, out=str(tmp_path))
    cfg = load_config(path, "graph")
    assert os.path.isabs(cfg["rates"]["path"]) or os.path.dirname(cfg["rates"]["path"])
    assert os.path.exists(cfg["rates"]["path"])


def test_bundled_configs_load():
    for name, sub in [
        ("case1.cfg", "coverage"),
        ("case2.cfg", "coverage"),
        ("pde_decay.cfg", "pde"),
        ("pde_longrun.cfg", "pde"),
        ("graph.cfg", "graph"),
        ("est_sin.cfg", "estimate"),
        ("est_quad.cfg", "estimate"),
    ]:
        load_config(str(CONFIG_DIR / name), sub)


# ---------------------------------------------------------------------------
# initial-condition specs


def test_build_init_specs():
    assert isinstance(build_init("uniform", 1), UniformInit)
    p = build_init("point:0.3", 1)
    assert isinstance(p, PointInit) and np.array_equal(p.position, (0.3,))
    p2 = build_init("point:0.2,0.8", 2)
    assert np.array_equal(p2.position, (0.2, 0.8))
    g = build_init("gaussian:0.4,0.1", 1)
    assert isinstance(g, GaussianInit) and np.array_equal(g.center, (0.4,))
    assert g.sigma == 0.1
    g2 = build_init("gaussian:0.5,0.5,0.2", 2)
    assert np.array_equal(g2.center, (0.5, 0.5)) and g2.sigma == 0.2
    with pytest.raises(ConfigError):
        build_init("point:0.5", 2)  # needs two coordinates
    with pytest.raises(ConfigError):
        build_init("blob", 1)


# ---------------------------------------------------------------------------
# CLI exit codes


def test_cli_exit_zero_and_artifacts(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, MINIMAL_PDE, out=str(out))
    assert main(["pde", "--config", path]) == 0
    for artifact in ("snapshots.csv", "decay_norms.csv", "report.csv"):
        assert (out / artifact).exists()


def test_cli_exit_two_on_config_error(tmp_path, capsys):
    path = _write(tmp_path, MINIMAL_PDE + "\n[mystery]\nx = 1\n", out=str(tmp_path))
    assert main(["pde", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_exit_two_on_missing_config(tmp_path, capsys):
    assert main(["graph", "--config", str(tmp_path / "absent.cfg")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_usage_error_without_config():
    with pytest.raises(SystemExit):
        main(["coverage"])


def test_cli_exit_three_on_degenerate_estimate(tmp_path, capsys):
    # all-zero observations drive the fit to zero mass: a numeric failure
    obs = tmp_path / "obs.csv"
    lines = ["t,cell_lo,cell_hi,fraction"]
    for t in (1.2, 1.4, 1.6, 1.8, 2.0):
        for k in range(3):
            lines.append(f"{t},{0.7 + 0.1 * k},{0.7 + 0.1 * (k + 1)},0.0")
    obs.write_text("\n".join(lines) + "\n")
    cfg = _write(
        tmp_path,
        f"""
[observations]
path = obs.csv
d = 0.05
t1 = 1.0
t2 = 2.0

[inverse]
cells = 50
basis = 6

[output]
dir = {tmp_path / "out"}
""",
        name="est.cfg",
    )
    assert main(["estimate", "--config", cfg]) == 3
    assert "numeric error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# artifact determinism and round-trips


def _run_twice(tmp_path, subcommand, text, **fmt):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        path = _write(tmp_path, text, name=f"{tag}.cfg", out=str(out), **fmt)
        assert main([subcommand, "--config", path, "--gnuplot"]) == 0
        outs.append(out)
    return outs


def _assert_identical_trees(a, b):
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_coverage_artifacts_reproducible(tmp_path):
    a, b = _run_twice(tmp_path, "coverage", MINIMAL_COVERAGE)
    _assert_identical_trees(a, b)
    assert (a / "coverage.gp").exists()
    series = load_histogram_series_csv(str(a / "histograms.csv"))
    assert len(series) == 1  # snapshots default to t_end


def test_pde_artifacts_reproducible(tmp_path):
    a, b = _run_twice(tmp_path, "pde", MINIMAL_PDE)
    _assert_identical_trees(a, b)
    assert (a / "pde.gp").exists()
    series = load_histogram_series_csv(str(a / "snapshots.csv"))
    assert len(series) == 5


def test_graph_artifacts_reproducible(tmp_path):
    a, b = _run_twice(tmp_path, "graph", MINIMAL_GRAPH)
    _assert_identical_trees(a, b)
    assert (a / "graph.gp").exists()
    traj = load_trajectory_csv(str(a / "trajectory.csv"))
    assert traj.n_jumps <= 500
    inv = np.genfromtxt(a / "invariant.csv", delimiter=",", names=True)
    assert np.abs(inv["residual"]).max() <= 1e-12


def test_estimate_artifacts_reproducible_and_loadable(tmp_path):
    text = """
[field]
kind = sine

[protocol]
c1 = 0.5
d = 0.05
t1 = 0.1
t2 = 1.1
agents = 400
dt_coverage = 1e-3
n_obs = 5
seed = 9

[window]
lo = 0.7
hi = 1.0
divisor = 10

[inverse]
cells = 60
basis = 6
max_iters = 200

[output]
dir = {out}
"""
    a, b = _run_twice(tmp_path, "estimate", text)
    _assert_identical_trees(a, b)
    assert (a / "estimate.gp").exists()
    obs = load_observations_csv(str(a / "observations.csv"))
    assert obs.fractions.shape == (5, 3)
    u_hat, scaled = load_estimate_csv(str(a / "estimate.csv"))
    assert scaled is not None  # field known, so the rescaled column is present
    assert u_hat.grid.shape == (60,)
    truth = load_field_csv(str(a / "truth.csv"))
    assert truth.eval([0.5]) > 0
    summary = np.genfromtxt(
        a / "summary.csv", delimiter=",", names=True, dtype=None, encoding="utf-8"
    )
    keys = list(summary["key"])
    assert "rel_l2_error" in keys and "scale" in keys


def test_cli_seed_override_changes_output(tmp_path):
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    path = _write(tmp_path, MINIMAL_COVERAGE, out=str(out1))
    assert main(["coverage", "--config", path]) == 0
    assert main(["coverage", "--config", path, "--out", str(out2), "--seed", "99"]) == 0
    assert (out1 / "histograms.csv").read_bytes() != (out2 / "histograms.csv").read_bytes()
