import numpy as np
import pytest

from fieldroad.lattice import (build_geometry, bulk_index, neighbors,
                               road_index, site_to_macro)


def test_site_counts_p2():
    g = build_geometry(2, 4)
    assert g.n_bulk == 12
    assert g.n_road == 4
    assert g.n_base == 4
    # total bit count is N^p
    assert g.n_bulk + g.n_road == 4**2


def test_site_counts_p3():
    g = build_geometry(3, 3)
    assert g.n_bulk == 9 * 2
    assert g.n_road == 9
    assert g.n_bulk + g.n_road == 3**3


def test_edge_counts_p2():
    g = build_geometry(2, 4)
    # 4 horizontal edges per layer x 3 layers + 4 columns x 2 vertical
    assert g.field_edges.shape == (20, 2)
    assert g.road_edges.shape == (4, 2)
    # no duplicates, endpoints ordered
    assert np.all(g.field_edges[:, 0] < g.field_edges[:, 1])
    assert len(np.unique(g.field_edges, axis=0)) == 20


def test_road_alignment_with_lower_layer():
    g = build_geometry(2, 5)
    for i in range(g.n_road):
        assert bulk_index(g, [i], 1) == i == road_index(g, [i])
        assert np.allclose(site_to_macro(g, i)[:-1],
                           site_to_macro(g, i, road=True))
    np.testing.assert_array_equal(g.lower_sites, np.arange(g.n_road))


def test_neighbors_symmetric_and_degree():
    g = build_geometry(2, 5)
    for s in range(g.n_bulk):
        for nb in neighbors(g, s):
            assert s in neighbors(g, nb)
    # interior site: 2 horizontal + 2 vertical
    mid = bulk_index(g, [2], 2)
    assert len(neighbors(g, mid)) == 4
    # boundary-layer site: one vertical neighbour only
    low = bulk_index(g, [2], 1)
    assert len(neighbors(g, low)) == 3


def test_macro_positions():
    g = build_geometry(2, 4)
    pos = site_to_macro(g, bulk_index(g, [3], 2))
    assert pos == pytest.approx([0.75, 0.5])


def test_degenerate_geometries_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        build_geometry(2, 2)
    with pytest.raises(ValueError):
        build_geometry(1, 8)


def test_out_of_range_site():
    g = build_geometry(2, 4)
    with pytest.raises(IndexError):
        neighbors(g, g.n_bulk)
    with pytest.raises(IndexError):
        site_to_macro(g, g.n_road, road=True)
