import filecmp
import json

import pytest

from fieldroad import cli, runners
from fieldroad.config import (ExperimentConfig, initial_profiles, load_config,
                              parse_config)


def test_parse_config_roundtrip():
    text = """
    # experiment
    kind = oracle
    d = 2.0
    N = 3, 4
    obs_times = 0.01, 0.02
    preset = cos-mode
    workers = 2
    """
    cfg = parse_config(text)
    assert cfg.kind == "oracle"
    assert cfg.d == 2.0
    assert cfg.N == [3, 4]
    assert cfg.obs_times == [0.01, 0.02]
    assert cfg.preset == "cos-mode"
    assert cfg.workers == 2
    assert cfg.raw_text == text


def test_parse_config_errors():
    with pytest.raises(ValueError, match="unknown key"):
        parse_config("bogus = 1")
    with pytest.raises(ValueError, match="line 1"):
        parse_config("no equals sign here")
    with pytest.raises(ValueError, match="M"):
        parse_config("M = 0")
    with pytest.raises(ValueError, match="ascending"):
        parse_config("N = 8, 4")
    with pytest.raises(ValueError):
        parse_config("kind = frobnicate")
    with pytest.raises(ValueError):
        parse_config("preset = table")  # table needs field_table


def test_preset_profiles():
    cfg = ExperimentConfig(preset="flat", mean=0.3)
    v0, u0 = initial_profiles(cfg)
    assert v0([0.2, 0.7]) == 0.3 and u0([0.2]) == 0.3
    cfg = ExperimentConfig(preset="cos-mode", mean=0.5, field_amplitude=0.2)
    v0, u0 = initial_profiles(cfg)
    assert v0([0.0, 0.0]) == pytest.approx(0.7)
    assert u0([0.5]) == pytest.approx(0.5)
    cfg = ExperimentConfig(preset="step", mean=0.5, field_amplitude=0.25)
    v0, _ = initial_profiles(cfg)
    assert v0([0.1, 0.5]) == 0.75 and v0([0.9, 0.5]) == 0.25


_TINY = """
N = 3
M = 30
t_end = 0.02
obs_times = 0.01, 0.02
seed = 7
bins = 3
"""


def _run(kind, tmp_path, name, workers=1):
    cfg = parse_config(_TINY)
    cfg.kind = kind
    cfg.out = str(tmp_path / name)
    cfg.workers = workers
    return cfg, runners.RUNNERS[kind](cfg)


def test_simulation_outputs_deterministic(tmp_path):
    _, rep1 = _run("simulate", tmp_path, "a")
    _, rep2 = _run("simulate", tmp_path, "b")
    assert rep1["passed"] is None
    same = filecmp.cmp(tmp_path / "a" / "density_field_t0.csv",
                       tmp_path / "b" / "density_field_t0.csv", shallow=False)
    assert same


def test_worker_count_does_not_change_output(tmp_path):
    _run("simulate", tmp_path, "w1", workers=1)
    _run("simulate", tmp_path, "w2", workers=2)
    for name in ("density_field_t0.csv", "density_road_t1.csv"):
        assert filecmp.cmp(tmp_path / "w1" / name, tmp_path / "w2" / name,
                           shallow=False)


def test_oracle_runner_report(tmp_path):
    _, rep = _run("oracle", tmp_path, "oracle")
    assert rep["passed"] in (True, False)
    data = json.loads((tmp_path / "oracle" / "oracle.json").read_text())
    assert "tv" in data and "_meta" in data


def test_pde_runner_outputs(tmp_path):
    cfg = parse_config(_TINY + "grid_M = 8\n")
    cfg.kind = "pde"
    cfg.out = str(tmp_path / "pde")
    rep = runners.RUNNERS["pde"](cfg)
    assert rep["passed"] is None
    data = json.loads((tmp_path / "pde" / "pde.json").read_text())
    assert data["mass_drift"] < 1e-12


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(_TINY + "M = 200\n")
    # pass
    rc = cli.main(["oracle", "--config", str(cfg_path),
                   "--out", str(tmp_path / "ok")])
    assert rc == 0
    # error: missing config file
    rc = cli.main(["oracle", "--config", str(tmp_path / "missing.cfg")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
    # threshold failure: runner reports passed = False
    monkeypatch.setitem(runners.RUNNERS, "oracle",
                        lambda cfg: {"passed": False})
    monkeypatch.setattr(cli, "RUNNERS", runners.RUNNERS)
    rc = cli.main(["oracle", "--config", str(cfg_path)])
    assert rc == 2
    assert "FAILED" in capsys.readouterr().err


def test_cli_overrides(tmp_path, monkeypatch):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(_TINY)
    seen = {}

    def fake_runner(cfg):
        seen.update(seed=cfg.seed, out=cfg.out, workers=cfg.workers)
        return {"passed": None}

    monkeypatch.setitem(runners.RUNNERS, "simulate", fake_runner)
    monkeypatch.setattr(cli, "RUNNERS", runners.RUNNERS)
    rc = cli.main(["simulate", "--config", str(cfg_path), "--seed", "99",
                   "--out", str(tmp_path / "o"), "--workers", "3"])
    assert rc == 0
    assert seen == {"seed": 99, "out": str(tmp_path / "o"), "workers": 3}
