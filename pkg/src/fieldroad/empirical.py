"""Empirical measures and exact trajectory functionals.

Pairings of configurations with test functions, mesoscopic box averages,
discrete difference operators, and the evaluation of the compensated
martingale and its quadratic variation along recorded trajectories.

Evaluation is exact up to roundoff: configurations are piecewise constant
between events, every lattice sum that is linear in the occupations is
tracked through per-event deltas, and time integrals over holding
intervals use the closed-form antiderivatives that the separable test
functions carry.  Only the quadratic (carre-du-champ) sums require a
sequential replay, done in a compiled kernel.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import Configuration, SimParams, TrajectoryRecord
from .lattice import LatticeGeom, bulk_macro_positions, road_macro_positions
from .testfuncs import CylinderFunction, RoadFunction, TestFunctionPair


# ---------------------------------------------------------------------------
# pairings and box averages

def pair_field(config: Configuration, G, t: float,
               geom: LatticeGeom) -> float:
    """<pi^field, G(t)> = N^-p sum over occupied bulk sites of G(t, site)."""
    pos = bulk_macro_positions(geom)
    vals = np.asarray(G.value(t, pos[:, :-1], pos[:, -1]), dtype=float)
    return float(vals @ config.eta) / geom.N**geom.p


def pair_road(config: Configuration, H, t: float,
              geom: LatticeGeom) -> float:
    """<pi^road, H(t)> = N^-(p-1) sum over occupied road sites of H(t, site)."""
    vals = np.asarray(H.value(t, road_macro_positions(geom)), dtype=float)
    return float(vals @ config.xi) / geom.N ** (geom.p - 1)


def box_radius(geom: LatticeGeom, eps: float) -> int:
    """floor(eps N), validated so the stated box count is exact."""
    if not 0.0 < eps <= 0.5:
        raise ValueError("box half-width eps must lie in (0, 1/2]")
    r = int(np.floor(eps * geom.N))
    if 2 * r + 1 > geom.N:
        raise ValueError("box wraps around the torus; shrink eps")
    return r

def box_sites(geom: LatticeGeom, site: int, eps: float) -> np.ndarray:
    """Bulk indices of the box around a boundary-layer site.

    The box is the intersection of site + [-eps N, eps N]^p with the bulk:
    full width 2 floor(eps N)+1 in each torus direction, clipped to
    floor(eps N)+1 vertical layers at the boundary.
    """
    N, p = geom.N, geom.p
    j = int(geom.bulk_coords[site, p - 1])
    if j not in (1, N - 1):
        raise ValueError("box averages are defined at boundary-layer sites")
    r = box_radius(geom, eps)
    x0 = geom.bulk_coords[site, : p - 1]

    offs = np.arange(-r, r + 1)
    grids = np.meshgrid(*[offs] * (p - 1), indexing="ij")
    xs = (x0 + np.stack([g.ravel() for g in grids], axis=1)) % N
    base = np.zeros(xs.shape[0], dtype=np.int64)
    for q in range(p - 1):
        base = base * N + xs[:, q]
    layers = np.arange(1, 2 + r) if j == 1 else np.arange(N - 1 - r, N)
    return ((layers[:, None] - 1) * geom.n_base + base[None, :]).ravel()


def box_average(config: Configuration, geom: LatticeGeom, site: int,
                eps: float) -> float:
    """Particle fraction in the box around a boundary-layer site."""
    members = box_sites(geom, site, eps)
    r = box_radius(geom, eps)
    count = (2 * r + 1) ** (geom.p - 1) * (r + 1)
    assert members.size == count
    return float(config.eta[members].sum()) / count


# ---------------------------------------------------------------------------
# discrete difference operators (per-site, on analytic test functions)

def _bulk_point(geom: LatticeGeom, site: int):
    c = geom.bulk_coords[site]
    return c[:-1] / geom.N, c[-1] / geom.N


def discrete_laplacian_x(G, t: float, site: int, geom: LatticeGeom,
                         road: bool = False) -> float:
    """N^2 sum over torus directions of the centered second difference."""
    N = geom.N
    if road:
        x = geom.road_coords[site] / N
        val = float(G.value(t, x))
        acc = 0.0
        for q in range(geom.p - 1):
            e = np.zeros(geom.p - 1)
            e[q] = 1.0 / N
            acc += float(G.value(t, x + e)) - 2.0 * val + float(G.value(t, x - e))
        return N * N * acc
    x, y = _bulk_point(geom, site)
    val = float(G.value(t, x, y))
    acc = 0.0
    for q in range(geom.p - 1):
        e = np.zeros(geom.p - 1)
        e[q] = 1.0 / N
        acc += float(G.value(t, x + e, y)) - 2.0 * val + float(G.value(t, x - e, y))
    return N * N * acc


def discrete_dyy(G, t: float, site: int, geom: LatticeGeom) -> float:
    """Vertical second difference; only defined away from both boundary layers."""
    N = geom.N
    j = int(geom.bulk_coords[site, -1])
    if j in (1, N - 1):
        raise ValueError("vertical second difference is undefined at the "
                         "boundary layers")
    x, y = _bulk_point(geom, site)
    return N * N * (float(G.value(t, x, y + 1.0 / N)) - 2.0 * float(G.value(t, x, y))
                    + float(G.value(t, x, y - 1.0 / N)))


def discrete_dy(G, t: float, site: int, geom: LatticeGeom) -> float:
    """One-sided vertical difference at the boundary layers (inward at the
    bottom, backward at the top)."""
    N = geom.N
    j = int(geom.bulk_coords[site, -1])
    x, y = _bulk_point(geom, site)
    if j == 1:
        return N * (float(G.value(t, x, y + 1.0 / N)) - float(G.value(t, x, y)))
    if j == N - 1:
        return N * (float(G.value(t, x, y)) - float(G.value(t, x, y - 1.0 / N)))
    raise ValueError("one-sided vertical difference only applies to the "
                     "boundary layers")


# ---------------------------------------------------------------------------
# vectorized stencils of a spatial factor over the whole lattice

def _bulk_space_values(geom: LatticeGeom, G: CylinderFunction) -> np.ndarray:
    pos = bulk_macro_positions(geom)
    return np.asarray(G.space(pos[:, :-1], pos[:, -1]), dtype=float)


def _road_space_values(geom: LatticeGeom, H: RoadFunction) -> np.ndarray:
    return np.asarray(H.space(road_macro_positions(geom)), dtype=float)


def _grid(geom: LatticeGeom, bulk_vals: np.ndarray) -> np.ndarray:
    N, p = geom.N, geom.p
    return bulk_vals.reshape((N - 1,) + (N,) * (p - 1))


def _lap_x_grid(geom: LatticeGeom, arr: np.ndarray) -> np.ndarray:
    N = geom.N
    out = np.zeros_like(arr)
    for ax in range(1, arr.ndim):
        out += np.roll(arr, 1, axis=ax) + np.roll(arr, -1, axis=ax) - 2.0 * arr
    return N * N * out


def _lap_x_road(geom: LatticeGeom, road_vals: np.ndarray) -> np.ndarray:
    N, p = geom.N, geom.p
    arr = road_vals.reshape((N,) * (p - 1))
    out = np.zeros_like(arr)
    for ax in range(arr.ndim):
        out += np.roll(arr, 1, axis=ax) + np.roll(arr, -1, axis=ax) - 2.0 * arr
    return (N * N * out).ravel()


# ---------------------------------------------------------------------------
# martingale evaluation

@dataclass
class MartingaleSeries:
    """Compensated-pairing martingales and their integrated variance along
    one trajectory; all series vanish at t=0 by construction."""

    times: np.ndarray
    m_field: np.ndarray
    m_road: np.ndarray
    qv_field: np.ndarray | None = None
    qv_road: np.ndarray | None = None


def _event_deltas(record: TrajectoryRecord, w_bulk, w_road) -> np.ndarray:
    n = record.n_events
    if n == 0:
        return np.zeros(0)
    codes = record.codes
    a = record.site_a
    b = record.site_b
    delta = np.zeros(n)
    if w_bulk is not None:
        m = codes == 0
        delta[m] = w_bulk[b[m]] - w_bulk[a[m]]
        m = (codes == 2) | (codes == 4)
        delta[m] = b[m] * w_bulk[a[m]]
    if w_road is not None:
        m = codes == 1
        delta[m] = w_road[b[m]] - w_road[a[m]]
        m = codes == 3
        delta[m] = b[m] * w_road[a[m]]
    return delta


def _linear_series(record: TrajectoryRecord, w_bulk, w_road) -> np.ndarray:
    """Values of a linear functional of (eta, xi) on each holding interval."""
    base = 0.0
    if w_bulk is not None:
        base += float(w_bulk @ record.initial.eta)
    if w_road is not None:
        base += float(w_road @ record.initial.xi)
    delta = _event_deltas(record, w_bulk, w_road)
    return base + np.concatenate([[0.0], np.cumsum(delta)])


def _integrate_series(record: TrajectoryRecord, vals: np.ndarray,
                      antideriv, times: np.ndarray) -> np.ndarray:
    """Integral of vals(s) dF(s)/ds over [0, t] for each t, F given in
    closed form; vals is piecewise constant on the holding intervals."""
    bnd = np.concatenate([[0.0], record.times])
    ends = np.concatenate([record.times, [record.final_time]])
    contrib = vals * (antideriv(ends) - antideriv(bnd))
    cum = np.concatenate([[0.0], np.cumsum(contrib)])
    k = np.searchsorted(bnd, times, side="right") - 1
    return cum[k] + vals[k] * (antideriv(times) - antideriv(bnd[k]))


def _series_at(record: TrajectoryRecord, vals: np.ndarray,
               times: np.ndarray) -> np.ndarray:
    return vals[np.searchsorted(record.times, times, side="right")]


def _check_times(record: TrajectoryRecord, times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.size and (t.min() < 0 or t.max() > record.final_time):
        raise ValueError("evaluation times outside the trajectory horizon")
    return t


def field_drift_weights(geom: LatticeGeom, G: CylinderFunction,
                        params: SimParams):
    """Site weights of the field compensator integrand.

    The integrand at time s is phi'(s) S0(eta) + phi(s) (A.eta + B.xi + C):
    returns (s0 weights, A over the bulk, B over the road, constant C).
    """
    N, p = geom.N, geom.p
    g = _bulk_space_values(geom, G)
    arr = _grid(geom, g)
    np_p, np_p1 = float(N) ** p, float(N) ** (p - 1)

    A = (params.d / np_p) * _lap_x_grid(geom, arr)
    if N >= 4:
        # vertical second difference away from both boundary layers
        A[1:-1] += (params.d / np_p) * (N * N) * (
            arr[2:] + arr[:-2] - 2.0 * arr[1:-1])
    dy_low = N * (arr[1] - arr[0])
    dy_up = N * (arr[-1] - arr[-2])
    A[0] += (params.d / np_p1) * dy_low
    A[-1] -= (params.d / np_p1) * dy_up
    g_low = arr[0]
    g_up = arr[-1]
    A[0] -= (params.alpha / np_p1) * g_low
    A[-1] -= (1.0 / np_p) * g_up

    B = (params.alpha / np_p1) * g_low.ravel()
    C = (params.b / np_p) * float(g_up.sum())
    return g / np_p, A.reshape(-1), B, C


def road_drift_weights(geom: LatticeGeom, H: RoadFunction,
                       params: SimParams):
    """Same decomposition for the road compensator: (s0, A over the road,
    B over the bulk)."""
    N, p = geom.N, geom.p
    h = _road_space_values(geom, H)
    np_p1 = float(N) ** (p - 1)
    A = (params.D / np_p1) * _lap_x_road(geom, h) - (params.alpha / np_p1) * h
    B = np.zeros(geom.n_bulk)
    B[: geom.n_road] = (params.alpha / np_p1) * h
    return h / np_p1, A, B


def martingale_eval(record: TrajectoryRecord, pair: TestFunctionPair,
                    times, params: SimParams) -> MartingaleSeries:
    """Both compensated martingales at the requested times, exactly.

    The pairing minus its initial value minus the time integral of
    (d/ds + generator) applied to the pairing; the integral is a sum over
    holding intervals with the separable time factor integrated in closed
    form.
    """
    t = _check_times(record, times)
    geom = record.geometry
    G, H = pair.G, pair.H

    s0w, A, B, C = field_drift_weights(geom, G, params)
    s0 = _linear_series(record, s0w, None)
    lin = _linear_series(record, A, B)
    phi = G.time
    m_field = (phi.value(t) * _series_at(record, s0, t)
               - phi.value(0.0) * s0[0]
               - _integrate_series(record, s0, phi.value, t)
               - _integrate_series(record, lin + C, phi.antiderivative, t))

    s0rw, Ar, Br = road_drift_weights(geom, H, params)
    s0r = _linear_series(record, None, s0rw)
    linr = _linear_series(record, Br, Ar)
    psi = H.time
    m_road = (psi.value(t) * _series_at(record, s0r, t)
              - psi.value(0.0) * s0r[0]
              - _integrate_series(record, s0r, psi.value, t)
              - _integrate_series(record, linr, psi.antiderivative, t))

    return MartingaleSeries(times=t, m_field=m_field, m_road=m_road)


def _csr_with_weights(n_sites: int, edges: np.ndarray, vals: np.ndarray,
                      N: int):
    """CSR adjacency plus squared scaled differences [N (v_a - v_b)]^2."""
    deg = np.zeros(n_sites, dtype=np.int64)
    np.add.at(deg, edges[:, 0], 1)
    np.add.at(deg, edges[:, 1], 1)
    indptr = np.zeros(n_sites + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    nbr = np.empty(indptr[-1], dtype=np.int64)
    wts = np.empty(indptr[-1])
    fill = indptr[:-1].copy()
    for a, b in edges:
        w = (N * (vals[a] - vals[b])) ** 2
        nbr[fill[a]] = b
        wts[fill[a]] = w
        fill[a] += 1
        nbr[fill[b]] = a
        wts[fill[b]] = w
        fill[b] += 1
    return indptr, nbr, wts


def quadratic_variation_eval(record: TrajectoryRecord,
                             pair: TestFunctionPair, times,
                             params: SimParams):
    """Integrated quadratic variation (field part, road part) at the
    requested times, by exact replay of the carre-du-champ lattice sums."""
    t = _check_times(record, times)
    geom = record.geometry
    N, p = geom.N, geom.p
    g = _bulk_space_values(geom, pair.G)
    h = _road_space_values(geom, pair.H)
    arr = _grid(geom, g)

    f_indptr, f_nbr, f_wts = _csr_with_weights(
        geom.n_bulk, geom.field_edges, g, N)
    r_indptr, r_nbr, r_wts = _csr_with_weights(
        geom.n_road, geom.road_edges, h, N)

    eta = record.initial.eta.astype(np.uint8).copy()
    xi = record.initial.xi.astype(np.uint8).copy()
    out = np.empty((record.n_events + 1, 5))
    kernels.qv_series(
        eta, xi, record.codes, record.site_a, record.site_b,
        f_indptr, f_nbr, f_wts, r_indptr, r_nbr, r_wts,
        arr[0].ravel() ** 2, h**2, arr[-1].ravel() ** 2,
        int(geom.upper_sites[0]), params.b, out)

    np_2p = float(N) ** (2 * p)
    np_2p1 = float(N) ** (2 * p - 1)
    np_2q = float(N) ** (2 * (p - 1))
    vals_field = (params.d / np_2p * out[:, 0]
                  + params.alpha / np_2p1 * out[:, 2]
                  + out[:, 4] / np_2p)
    vals_road = (params.D / np_2q * out[:, 1]
                 + params.alpha / np_2q * out[:, 3])

    qv_field = _integrate_series(record, vals_field,
                                 pair.G.time.sq_antiderivative, t)
    qv_road = _integrate_series(record, vals_road,
                                pair.H.time.sq_antiderivative, t)
    return qv_field, qv_road


def full_series(record: TrajectoryRecord, pair: TestFunctionPair, times,
                params: SimParams) -> MartingaleSeries:
    """Martingales and integrated quadratic variation in one object."""
    ms = martingale_eval(record, pair, times, params)
    ms.qv_field, ms.qv_road = quadratic_variation_eval(
        record, pair, times, params)
    return ms


# ---------------------------------------------------------------------------
# replacement diagnostic and coarse densities

def replacement_weights(geom: LatticeGeom, G: CylinderFunction, eps: float,
                        boundary: str) -> np.ndarray:
    """Bulk-site weights w with w.eta = N^-(p-1) sum over the chosen
    boundary layer of G (box average - site value)."""
    if boundary not in ("upper", "lower"):
        raise ValueError("boundary must be 'upper' or 'lower'")
    layer = geom.upper_sites if boundary == "upper" else geom.lower_sites
    g = _bulk_space_values(geom, G)
    r = box_radius(geom, eps)
    count = (2 * r + 1) ** (geom.p - 1) * (r + 1)
    w = np.zeros(geom.n_bulk)
    for s in layer:
        w[box_sites(geom, int(s), eps)] += g[s] / count
        w[s] -= g[s]
    return w / geom.N ** (geom.p - 1)


def replacement_diagnostic(trajectories, G: CylinderFunction, eps: float,
                           boundary: str, t: float):
    """Monte Carlo estimate (with standard error) of the mean absolute
    time-integrated gap between boundary occupations and their box
    averages, weighted by G."""
    if len(trajectories) < 2:
        raise ValueError("need at least two trajectories for a standard error")
    geom = trajectories[0].geometry
    w = replacement_weights(geom, G, eps, boundary)
    tq = np.array([t])
    samples = np.empty(len(trajectories))
    for k, rec in enumerate(trajectories):
        _check_times(rec, tq)
        vals = _linear_series(rec, w, None)
        samples[k] = abs(
            _integrate_series(rec, vals, G.time.antiderivative, tq)[0])
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(samples.size))
    return est, se


def coarse_density(config: Configuration, geom: LatticeGeom, bins: int):
    """Average occupancy per macroscopic cell, field and road.

    Cell boundaries sit at multiples of 1/bins; the field grid has shape
    (bins,)*(p-1) + (bins,) with the vertical axis last, the road grid
    (bins,)*(p-1).  Cells containing no site (possible only at bins = N,
    bottom vertical slab) come back as nan.
    """
    return coarse_site_average(geom, config.eta.astype(float),
                               config.xi.astype(float), bins)


def coarse_site_average(geom: LatticeGeom, bulk_vals: np.ndarray,
                        road_vals: np.ndarray, bins: int):
    """Cell averages of arbitrary per-site values (same binning as
    coarse_density); used to project reference fields onto the lattice."""
    if not 1 <= bins <= geom.N:
        raise ValueError(f"bins must lie in [1, N]; got {bins} with "
                         f"N={geom.N}")
    p, N = geom.p, geom.N
    cells = np.minimum((geom.bulk_coords * bins) // N, bins - 1)
    flat = np.zeros(p, dtype=np.int64)
    mult = 1
    for q in range(p - 1, -1, -1):
        flat[q] = mult
        mult *= bins
    idx = cells @ flat
    sums = np.bincount(idx, weights=np.asarray(bulk_vals, dtype=float),
                       minlength=bins**p)
    cnts = np.bincount(idx, minlength=bins**p)
    with np.errstate(invalid="ignore"):
        field = np.where(cnts > 0, sums / np.maximum(cnts, 1), np.nan)
    field = field.reshape((bins,) * p)

    rcells = np.minimum((geom.road_coords * bins) // N, bins - 1)
    rflat = np.array([bins**q for q in range(p - 2, -1, -1)], dtype=np.int64)
    ridx = rcells @ rflat
    rsums = np.bincount(ridx, weights=np.asarray(road_vals, dtype=float),
                        minlength=bins ** (p - 1))
    rcnts = np.bincount(ridx, minlength=bins ** (p - 1))
    road = (rsums / rcnts).reshape((bins,) * (p - 1))
    return field, road
