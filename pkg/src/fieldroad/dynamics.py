"""Continuous-time simulation of the coupled exclusion process.

The process carries a bit per bulk site (eta) and per road site (xi) and
evolves by five independent mechanisms: speeded swaps along field edges
(rate N^2 d per edge), speeded swaps along road edges (N^2 D), flips of
eta at the j=1 layer (N alpha, only across an eta/xi mismatch), matching
flips of xi (alpha), and birth/death at the upper layer (b and 1-b).

Simulation is exact via uniformization: attempts fire at the constant
total bound rate and each is accepted with probability actual/bound, so
swap attempts between equal occupancies and mismatch flips on agreement
are null events.  The law of the resulting jump chain is that of the
generator exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import LatticeGeom, bulk_macro_positions, road_macro_positions

EVENT_FIELD_MOVE = 0
EVENT_ROAD_MOVE = 1
EVENT_ROBIN_FLIP = 2
EVENT_REACTION_FLIP = 3
EVENT_RESERVOIR_FLIP = 4


@dataclass
class Configuration:
    """Occupation bits for one instant: eta over the bulk, xi over the road."""

    eta: np.ndarray
    xi: np.ndarray

    def copy(self) -> "Configuration":
        return Configuration(self.eta.copy(), self.xi.copy())

    def validate(self, geom: LatticeGeom) -> None:
        if self.eta.shape != (geom.n_bulk,) or self.xi.shape != (geom.n_road,):
            raise ValueError("configuration size does not match geometry")
        if not (np.isin(self.eta, (0, 1)).all() and np.isin(self.xi, (0, 1)).all()):
            raise ValueError("configuration entries must be 0 or 1")


@dataclass
class SimParams:
    d: float
    D: float
    alpha: float
    b: float
    geometry: LatticeGeom
    t_end: float
    seed: int
    event_cap: int = 10**8

    def __post_init__(self):
        if self.d <= 0 or self.D <= 0 or self.alpha <= 0:
            raise ValueError("diffusivities d, D and exchange rate alpha must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("upper birth parameter b must lie in [0, 1]")
        if self.t_end < 0:
            raise ValueError("time horizon must be nonnegative")


@dataclass
class RateTable:
    """Per-category uniformization bounds and the grand total."""

    field_edge: float      # N^2 d per unordered edge
    road_edge: float       # N^2 D
    robin_site: float      # N alpha per road site
    reaction_site: float   # alpha per road site
    reservoir_site: float  # max(b, 1-b) per upper site
    n_field_edges: int
    n_road_edges: int
    n_road_sites: int
    n_upper_sites: int
    total: float = field(init=False)

    def __post_init__(self):
        self.total = (
            self.field_edge * self.n_field_edges
            + self.road_edge * self.n_road_edges
            + self.robin_site * self.n_road_sites
            + self.reaction_site * self.n_road_sites
            + self.reservoir_site * self.n_upper_sites
        )


@dataclass
class TrajectoryRecord:
    """Piecewise-constant path: initial state plus the effective event log."""

    geometry: LatticeGeom
    initial: Configuration
    times: np.ndarray   # float64, strictly increasing
    codes: np.ndarray   # uint8 event codes
    site_a: np.ndarray  # int32: source site (moves) or flipped site
    site_b: np.ndarray  # int32: destination site (moves) or +/-1 new value
    final_time: float

    @property
    def n_events(self) -> int:
        return int(self.times.shape[0])

    def replay(self, t: float | None = None) -> Configuration:
        """Configuration at time t (default: final_time) by exact replay."""
        if t is None:
            t = self.final_time
        if t < 0 or t > self.final_time:
            raise ValueError("replay time outside the trajectory horizon")
        cfg = self.initial.copy()
        upto = int(np.searchsorted(self.times, t, side="right"))
        for k in range(upto):
            _apply_event(cfg, self.codes[k], self.site_a[k], self.site_b[k])
        return cfg

    def validate(self) -> None:
        """Check monotone times and that every event is legal when replayed."""
        if self.n_events and not np.all(np.diff(self.times) > 0):
            raise ValueError("event times are not strictly increasing")
        if self.n_events and self.times[-1] > self.final_time:
            raise ValueError("event beyond final_time")
        cfg = self.initial.copy()
        for k in range(self.n_events):
            _apply_event(cfg, self.codes[k], self.site_a[k], self.site_b[k],
                         strict=True)
        cfg.validate(self.geometry)


def _apply_event(cfg: Configuration, code: int, a: int, b: int,
                 strict: bool = False) -> None:
    if code == EVENT_FIELD_MOVE:
        if strict and not (cfg.eta[a] == 1 and cfg.eta[b] == 0):
            raise ValueError(f"illegal field move {a}->{b}")
        cfg.eta[a], cfg.eta[b] = 0, 1
    elif code == EVENT_ROAD_MOVE:
        if strict and not (cfg.xi[a] == 1 and cfg.xi[b] == 0):
            raise ValueError(f"illegal road move {a}->{b}")
        cfg.xi[a], cfg.xi[b] = 0, 1
    elif code == EVENT_ROBIN_FLIP:
        new = 1 if b == 1 else 0
        if strict and cfg.eta[a] == new:
            raise ValueError(f"no-op Robin flip at {a}")
        cfg.eta[a] = new
    elif code == EVENT_REACTION_FLIP:
        new = 1 if b == 1 else 0
        if strict and cfg.xi[a] == new:
            raise ValueError(f"no-op reaction flip at {a}")
        cfg.xi[a] = new
    elif code == EVENT_RESERVOIR_FLIP:
        new = 1 if b == 1 else 0
        if strict and cfg.eta[a] == new:
            raise ValueError(f"no-op reservoir flip at {a}")
        cfg.eta[a] = new
    else:
        raise ValueError(f"unknown event code {code}")


def uniformized_rates(params: SimParams) -> RateTable:
    g = params.geometry
    N = g.N
    return RateTable(
        field_edge=N * N * params.d,
        road_edge=N * N * params.D,
        robin_site=N * params.alpha,
        reaction_site=params.alpha,
        reservoir_site=max(params.b, 1.0 - params.b),
        n_field_edges=int(g.field_edges.shape[0]),
        n_road_edges=int(g.road_edges.shape[0]),
        n_road_sites=g.n_road,
        n_upper_sites=int(g.upper_sites.shape[0]),
    )


def child_seed(master_seed: int, k: int) -> int:
    """Deterministic per-trajectory seed from the master seed."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(k,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def step(config: Configuration, clock: float, params: SimParams,
         rng: np.random.Generator):
    """One uniformization step in pure Python (reference path, tiny systems).

    Returns (new config, new clock, event) where event is a
    (code, a, b) tuple or None for a null attempt.
    """
    g = params.geometry
    config.validate(g)
    rt = uniformized_rates(params)
    wait = rng.exponential(1.0 / rt.total)
    t = clock + wait
    cfg = config.copy()

    lam1 = rt.field_edge * rt.n_field_edges
    lam2 = lam1 + rt.road_edge * rt.n_road_edges
    lam3 = lam2 + rt.robin_site * rt.n_road_sites
    lam4 = lam3 + rt.reaction_site * rt.n_road_sites
    u = rng.random() * rt.total

    if u < lam1:
        a, b = g.field_edges[rng.integers(rt.n_field_edges)]
        if cfg.eta[a] == cfg.eta[b]:
            return cfg, t, None
        if cfg.eta[b] == 1:
            a, b = b, a
        cfg.eta[a], cfg.eta[b] = 0, 1
        return cfg, t, (EVENT_FIELD_MOVE, int(a), int(b))
    if u < lam2:
        a, b = g.road_edges[rng.integers(rt.n_road_edges)]
        if cfg.xi[a] == cfg.xi[b]:
            return cfg, t, None
        if cfg.xi[b] == 1:
            a, b = b, a
        cfg.xi[a], cfg.xi[b] = 0, 1
        return cfg, t, (EVENT_ROAD_MOVE, int(a), int(b))
    if u < lam3:
        i = int(rng.integers(g.n_road))
        if cfg.eta[i] == cfg.xi[i]:
            return cfg, t, None
        cfg.eta[i] = 1 - cfg.eta[i]
        return cfg, t, (EVENT_ROBIN_FLIP, i, 1 if cfg.eta[i] == 1 else -1)
    if u < lam4:
        i = int(rng.integers(g.n_road))
        if cfg.eta[i] == cfg.xi[i]:
            return cfg, t, None
        cfg.xi[i] = 1 - cfg.xi[i]
        return cfg, t, (EVENT_REACTION_FLIP, i, 1 if cfg.xi[i] == 1 else -1)
    s = int(g.upper_sites[rng.integers(g.upper_sites.shape[0])])
    rate = params.b if cfg.eta[s] == 0 else 1.0 - params.b
    if rng.random() * rt.reservoir_site >= rate:
        return cfg, t, None
    cfg.eta[s] = 1 - cfg.eta[s]
    return cfg, t, (EVENT_RESERVOIR_FLIP, s, 1 if cfg.eta[s] == 1 else -1)


def simulate(params: SimParams, init: Configuration,
             observation_times, record_events: bool = True):
    """Run one trajectory; returns (TrajectoryRecord, snapshots).

    snapshots is a list of Configuration, one per observation time.
    Bitwise reproducible for fixed (seed, params, init).
    """
    g = params.geometry
    init.validate(g)
    obs = np.asarray(observation_times, dtype=float)
    if obs.size and (np.any(np.diff(obs) < 0) or obs[0] < 0
                     or obs[-1] > params.t_end):
        raise ValueError("observation times must be sorted within [0, t_end]")

    if params.t_end == 0.0:
        snaps = [init.copy() for _ in range(obs.size)]
        rec = TrajectoryRecord(
            geometry=g, initial=init.copy(),
            times=np.empty(0), codes=np.empty(0, dtype=np.uint8),
            site_a=np.empty(0, dtype=np.int32),
            site_b=np.empty(0, dtype=np.int32), final_time=0.0)
        return rec, snaps

    rt = uniformized_rates(params)
    expected = rt.total * params.t_end
    cap = int(min(params.event_cap,
                  expected + 10.0 * np.sqrt(expected + 1.0) + 1000.0))

    eta = init.eta.astype(np.uint8).copy()
    xi = init.xi.astype(np.uint8).copy()
    snap_eta = np.empty((obs.size, g.n_bulk), dtype=np.uint8)
    snap_xi = np.empty((obs.size, g.n_road), dtype=np.uint8)
    ev_t = np.empty(cap if record_events else 1, dtype=np.float64)
    ev_c = np.empty(cap if record_events else 1, dtype=np.uint8)
    ev_a = np.empty(cap if record_events else 1, dtype=np.int32)
    ev_b = np.empty(cap if record_events else 1, dtype=np.int32)

    nev, _attempts, status = kernels.sim_kernel(
        eta, xi,
        g.field_edges[:, 0], g.field_edges[:, 1],
        g.road_edges[:, 0], g.road_edges[:, 1],
        g.n_road, int(g.upper_sites[0]), int(g.upper_sites.shape[0]),
        rt.field_edge, rt.road_edge, rt.robin_site, rt.reaction_site,
        rt.reservoir_site, params.b, max(rt.reservoir_site, 1e-300),
        params.t_end, obs, snap_eta, snap_xi,
        record_events, ev_t, ev_c, ev_a, ev_b,
        params.seed & 0x7FFFFFFF,
    )
    if status == 1:
        raise RuntimeError(
            "trajectory too long; raise event_cap or shrink t_end/N")

    snaps = [Configuration(snap_eta[k].copy(), snap_xi[k].copy())
             for k in range(obs.size)]
    if not record_events:
        nev = 0
    rec = TrajectoryRecord(
        geometry=g, initial=init.copy(),
        times=ev_t[:nev].copy(), codes=ev_c[:nev].copy(),
        site_a=ev_a[:nev].copy(), site_b=ev_b[:nev].copy(),
        final_time=params.t_end)
    return rec, snaps


def sample_initial(v0, u0, geom: LatticeGeom,
                   rng: np.random.Generator) -> Configuration:
    """Independent Bernoulli occupations with site probabilities v0, u0.

    v0 maps a macroscopic bulk point (length-p array) to [0, 1]; u0 maps a
    road point (length p-1).  Values outside [0, 1] are rejected: the
    exclusion rule caps densities at one particle per site.
    """
    pb = np.array([v0(x) for x in bulk_macro_positions(geom)], dtype=float)
    pr = np.array([u0(x) for x in road_macro_positions(geom)], dtype=float)
    if np.any(pb < 0) or np.any(pb > 1) or np.any(pr < 0) or np.any(pr > 1):
        raise ValueError(
            "initial profiles must take values in [0, 1]: occupation "
            "probabilities above 1 are unreachable under exclusion")
    eta = (rng.random(geom.n_bulk) < pb).astype(np.uint8)
    xi = (rng.random(geom.n_road) < pr).astype(np.uint8)
    return Configuration(eta, xi)


def total_particles(config: Configuration) -> tuple[int, int]:
    return int(config.eta.sum()), int(config.xi.sum())
