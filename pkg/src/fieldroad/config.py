"""Experiment configuration: flat key=value files and initial profiles.

Schema (all keys optional unless noted; lists are comma-separated):

    kind            simulate | pde | converge | oracle | dirichlet-check |
                    diagnostics   (required unless given as CLI subcommand)
    d, D, alpha     positive rates (default 1.0)
    b               upper reservoir density in [0, 1] (default 0.5)
    p               dimension >= 2 (default 2)
    N               lattice size list, ascending (default 16,32)
    M               trajectory count >= 1 (default 200)
    t_end           time horizon (default 0.1)
    obs_times       observation times (default 0.05,0.1)
    eps             box half-widths for replacement diagnostics
    seed            master seed (default 0)
    out             output directory (default fieldroad-out)
    workers         worker processes (default 1)
    preset          flat | cos-mode | step (default flat)
    mean            preset mean level (default 0.5)
    field_amplitude, road_amplitude   cos-mode / step amplitudes
    field_table, road_table           CSV paths for tabulated profiles
    grid_M          PDE cells per axis (default 32)
    cfl_safety      explicit-step safety factor (default 0.4)
    gamma           reference Bernoulli parameters for dirichlet-check
    trials          random densities per dirichlet-check (default 100)
    bins            coarse-density cells per axis (default 8)
"""

import os
from dataclasses import dataclass, field

import numpy as np

KINDS = ("simulate", "pde", "converge", "oracle", "dirichlet-check",
         "diagnostics")

_LIST_FLOAT = ("obs_times", "eps", "gamma")
_LIST_INT = ("N",)
_FLOAT = ("d", "D", "alpha", "b", "t_end", "mean", "field_amplitude",
          "road_amplitude", "cfl_safety")
_INT = ("p", "M", "seed", "workers", "grid_M", "trials", "bins")
_STR = ("kind", "out", "preset", "field_table", "road_table")


@dataclass
class ExperimentConfig:
    kind: str = ""
    d: float = 1.0
    D: float = 1.0
    alpha: float = 1.0
    b: float = 0.5
    p: int = 2
    N: list = field(default_factory=lambda: [16, 32])
    M: int = 200
    t_end: float = 0.1
    obs_times: list = field(default_factory=lambda: [0.05, 0.1])
    eps: list = field(default_factory=lambda: [0.2, 0.1])
    seed: int = 0
    out: str = "fieldroad-out"
    workers: int = 1
    preset: str = "flat"
    mean: float = 0.5
    field_amplitude: float = 0.3
    road_amplitude: float = 0.0
    field_table: str = ""
    road_table: str = ""
    grid_M: int = 32
    cfl_safety: float = 0.4
    gamma: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    trials: int = 100
    bins: int = 8
    raw_text: str = ""

    def validate(self) -> None:
        if self.kind and self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.M < 1:
            raise ValueError("trajectory count M must be >= 1")
        if list(self.N) != sorted(self.N):
            raise ValueError("N list must be ascending")
        if self.preset not in ("flat", "cos-mode", "step", "table"):
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.preset == "table" and not self.field_table:
            raise ValueError("preset 'table' needs field_table")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig(raw_text=text)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got "
                             f"{raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            if key in _LIST_FLOAT:
                parsed = [float(x) for x in val.split(",") if x.strip()]
            elif key in _LIST_INT:
                parsed = [int(x) for x in val.split(",") if x.strip()]
            elif key in _FLOAT:
                parsed = float(val)
            elif key in _INT:
                parsed = int(val)
            elif key in _STR:
                parsed = val
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        setattr(cfg, key, parsed)
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _load_table(path: str, ncols: int):
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] != ncols + 1:
        raise ValueError(f"profile table {path} needs {ncols + 1} columns "
                         "(coordinates then value)")
    pts, vals = data[:, :ncols], data[:, ncols]

    def lookup(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(vals[np.argmin(np.sum((pts - x) ** 2, axis=1))])

    return lookup


def initial_profiles(cfg: ExperimentConfig):
    """(v0, u0) callables over macroscopic points for the configured preset."""
    m = cfg.mean
    af, ar = cfg.field_amplitude, cfg.road_amplitude
    if cfg.preset == "flat":
        return (lambda x: m), (lambda x: m)
    if cfg.preset == "cos-mode":
        def v0(pt):
            return m + af * np.cos(2 * np.pi * pt[0]) * np.cos(np.pi * pt[-1])

        def u0(pt):
            return m + ar * np.cos(2 * np.pi * pt[0])

        return v0, u0
    if cfg.preset == "step":
        def v0(pt):
            return m + (af if pt[0] < 0.5 else -af)

        def u0(pt):
            return m + (ar if pt[0] < 0.5 else -ar)

        return v0, u0
    # tabulated
    v0 = _load_table(cfg.field_table, cfg.p)
    if cfg.road_table:
        u0 = _load_table(cfg.road_table, cfg.p - 1)
    else:
        u0 = lambda x: m  # noqa: E731
    return v0, u0


def ensure_outdir(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out
