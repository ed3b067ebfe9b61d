"""Geometry of the discrete cylinder with its attached road torus.

The bulk is T_N^{p-1} x {1..N-1} (a p-dimensional cylinder of height N-1
over a discrete torus base), the road is a copy of T_N^{p-1} glued to the
j=1 layer.  Sites are indexed row-major with the vertical layer as the
slowest axis, so the j=1 layer occupies bulk indices 0..N^{p-1}-1 and a
road site i shares its index with the bulk site (i, 1) directly above it.
That alignment is relied on throughout the simulator.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LatticeGeom:
    """Immutable index sets and edge lists for one (p, N) cylinder."""

    p: int
    N: int
    n_bulk: int
    n_road: int
    bulk_coords: np.ndarray    # (n_bulk, p) ints, columns x_1..x_{p-1}, j
    road_coords: np.ndarray    # (n_road, p-1)
    lower_sites: np.ndarray    # bulk indices of the j=1 layer
    upper_sites: np.ndarray    # bulk indices of the j=N-1 layer
    field_edges: np.ndarray    # (E_f, 2) unordered nearest-neighbour bulk pairs
    road_edges: np.ndarray     # (E_r, 2) unordered road pairs
    _nbr_indptr: np.ndarray    # CSR neighbour lists over bulk sites
    _nbr_sites: np.ndarray

    @property
    def n_base(self) -> int:
        """Number of sites in one horizontal layer, N^(p-1)."""
        return self.N ** (self.p - 1)


def _base_index(xs: np.ndarray, N: int) -> np.ndarray:
    """Row-major index of torus coordinates, last axis fastest."""
    idx = np.zeros(xs.shape[0], dtype=np.int64)
    for q in range(xs.shape[1]):
        idx = idx * N + xs[:, q]
    return idx


def bulk_index(geom: LatticeGeom, x, j: int) -> int:
    """Index of the bulk site with torus coordinates x and height j."""
    x = np.atleast_1d(np.asarray(x, dtype=np.int64)) % geom.N
    base = 0
    for q in range(geom.p - 1):
        base = base * geom.N + x[q]
    return int((j - 1) * geom.n_base + base)


def road_index(geom: LatticeGeom, x) -> int:
    x = np.atleast_1d(np.asarray(x, dtype=np.int64)) % geom.N
    base = 0
    for q in range(geom.p - 1):
        base = base * geom.N + x[q]
    return int(base)


def build_geometry(p: int, N: int) -> LatticeGeom:
    """Build index sets, neighbour structure and edge lists for (p, N).

    Rejects p < 2 and N < 3 (at N = 2 the lower and upper boundary layers
    coincide and the exchange and reservoir dynamics would collide).
    """
    if p < 2:
        raise ValueError(f"dimension p must be >= 2, got {p}")
    if N < 3:
        raise ValueError(
            f"degenerate cylinder: N must be >= 3 (got {N}); the j=1 and "
            "j=N-1 layers coincide otherwise"
        )
    n_base = N ** (p - 1)
    n_bulk = n_base * (N - 1)

    # torus coordinates of one layer, row-major, last axis fastest
    grids = np.meshgrid(*[np.arange(N)] * (p - 1), indexing="ij")
    base_coords = np.stack([g.ravel() for g in grids], axis=1)  # (n_base, p-1)

    bulk_coords = np.empty((n_bulk, p), dtype=np.int64)
    for j in range(1, N):
        rows = slice((j - 1) * n_base, j * n_base)
        bulk_coords[rows, : p - 1] = base_coords
        bulk_coords[rows, p - 1] = j

    lower = np.arange(n_base, dtype=np.int64)
    upper = np.arange((N - 2) * n_base, (N - 1) * n_base, dtype=np.int64)

    # horizontal edges: one +e_q step per torus direction per site
    edges = []
    for q in range(p - 1):
        shifted = base_coords.copy()
        shifted[:, q] = (shifted[:, q] + 1) % N
        tgt = _base_index(shifted, N)
        src = np.arange(n_base, dtype=np.int64)
        for j in range(1, N):
            off = (j - 1) * n_base
            edges.append(np.stack([src + off, tgt + off], axis=1))
    # vertical edges: +e_y where it stays in {1..N-1}
    for j in range(1, N - 1):
        off = (j - 1) * n_base
        src = np.arange(n_base, dtype=np.int64) + off
        edges.append(np.stack([src, src + n_base], axis=1))
    field_edges = np.concatenate(edges, axis=0)
    field_edges = np.sort(field_edges, axis=1)
    field_edges = np.unique(field_edges, axis=0)

    redges = []
    for q in range(p - 1):
        shifted = base_coords.copy()
        shifted[:, q] = (shifted[:, q] + 1) % N
        tgt = _base_index(shifted, N)
        src = np.arange(n_base, dtype=np.int64)
        redges.append(np.stack([src, tgt], axis=1))
    road_edges = np.concatenate(redges, axis=0)
    road_edges = np.sort(road_edges, axis=1)
    road_edges = np.unique(road_edges, axis=0)

    # CSR neighbour lists from the (symmetric) edge set
    deg = np.zeros(n_bulk, dtype=np.int64)
    np.add.at(deg, field_edges[:, 0], 1)
    np.add.at(deg, field_edges[:, 1], 1)
    indptr = np.zeros(n_bulk + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    nbrs = np.empty(indptr[-1], dtype=np.int64)
    fill = indptr[:-1].copy()
    for a, b in field_edges:
        nbrs[fill[a]] = b
        fill[a] += 1
        nbrs[fill[b]] = a
        fill[b] += 1
    # deterministic ordering of each neighbour list
    for s in range(n_bulk):
        nbrs[indptr[s]:indptr[s + 1]].sort()

    return LatticeGeom(
        p=p,
        N=N,
        n_bulk=n_bulk,
        n_road=n_base,
        bulk_coords=bulk_coords,
        road_coords=base_coords,
        lower_sites=lower,
        upper_sites=upper,
        field_edges=field_edges,
        road_edges=road_edges,
        _nbr_indptr=indptr,
        _nbr_sites=nbrs,
    )


def neighbors(geom: LatticeGeom, site: int) -> list[int]:
    """Bulk sites reachable from `site` by one unit step (torus wrap in x)."""
    if not 0 <= site < geom.n_bulk:
        raise IndexError(f"bulk site {site} out of range [0, {geom.n_bulk})")
    lo, hi = geom._nbr_indptr[site], geom._nbr_indptr[site + 1]
    return [int(s) for s in geom._nbr_sites[lo:hi]]


def site_to_macro(geom: LatticeGeom, site: int, road: bool = False) -> np.ndarray:
    """Macroscopic position of a site: its integer coordinates over N."""
    if road:
        if not 0 <= site < geom.n_road:
            raise IndexError(f"road site {site} out of range [0, {geom.n_road})")
        return geom.road_coords[site].astype(float) / geom.N
    if not 0 <= site < geom.n_bulk:
        raise IndexError(f"bulk site {site} out of range [0, {geom.n_bulk})")
    return geom.bulk_coords[site].astype(float) / geom.N


def bulk_macro_positions(geom: LatticeGeom) -> np.ndarray:
    """(n_bulk, p) array of macroscopic positions of all bulk sites."""
    return geom.bulk_coords.astype(float) / geom.N


def road_macro_positions(geom: LatticeGeom) -> np.ndarray:
    return geom.road_coords.astype(float) / geom.N
