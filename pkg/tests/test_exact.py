import numpy as np
import pytest

from fieldroad import exact
from fieldroad.dynamics import SimParams
from fieldroad.lattice import build_geometry


def _params(**kw):
    g = build_geometry(2, 3)
    base = dict(d=1.0, D=1.0, alpha=1.0, b=0.5, geometry=g, t_end=0.1,
                seed=0)
    base.update(kw)
    return SimParams(**base)


def test_state_space_size_and_roundtrip():
    g = build_geometry(2, 3)
    space = exact.enumerate_states(g)
    assert space.n_states == 2**9 == 512
    rng = np.random.default_rng(0)
    for _ in range(20):
        eta = rng.integers(0, 2, g.n_bulk).astype(np.uint8)
        xi = rng.integers(0, 2, g.n_road).astype(np.uint8)
        s = exact.pack_configuration(space, eta, xi)
        e2, x2 = exact.unpack_state(space, s)
        np.testing.assert_array_equal(eta, e2)
        np.testing.assert_array_equal(xi, x2)


def test_state_cap_enforced():
    g = build_geometry(2, 6)
    with pytest.raises(ValueError, match="cap"):
        exact.enumerate_states(g, cap=2**20)


def test_generator_is_a_generator():
    gm = exact.build_generator_matrix(_params())
    Q = gm.Q
    assert np.abs(Q.sum(axis=1)).max() < 1e-9
    off = Q - np.diag(np.diag(Q))
    assert off.min() >= 0
    for part in gm.parts.values():
        assert np.abs(part.sum(axis=1)).max() < 1e-9


def test_generator_scales():
    gm = exact.build_generator_matrix(_params())
    assert gm.scales["field"] == 9
    assert gm.scales["rob"] == 3
    assert gm.scales["reac"] == 1.0


def test_forward_solve_methods_agree():
    gm = exact.build_generator_matrix(_params())
    mu0 = np.zeros(512)
    mu0[17] = 1.0
    a = exact.forward_solve(gm.Q, mu0, 0.08)
    b = exact.forward_solve(gm.Q, mu0, 0.08, method="ode")
    assert np.abs(a - b).max() < 1e-8
    assert a.sum() == pytest.approx(1.0)
    assert a.min() >= 0
    np.testing.assert_array_equal(exact.forward_solve(gm.Q, mu0, 0.0), mu0)
    with pytest.raises(ValueError):
        exact.forward_solve(gm.Q, mu0, -1.0)


def test_bernoulli_measure():
    space = exact.enumerate_states(build_geometry(2, 3))
    for gamma in (0.25, 0.5):
        nu = exact.bernoulli_measure(space, gamma)
        assert nu.sum() == pytest.approx(1.0)
        # full configuration has probability gamma^n
        assert nu[-1] == pytest.approx(gamma**9)
    with pytest.raises(ValueError):
        exact.bernoulli_measure(space, 0.0)


def test_relative_entropy_basics():
    space = exact.enumerate_states(build_geometry(2, 3))
    nu = exact.bernoulli_measure(space, 0.5)
    assert exact.relative_entropy(nu, nu) == pytest.approx(0.0)
    dirac = np.zeros(512)
    dirac[0] = 1.0
    # H(dirac | nu) = -log nu(state) = 9 log 2 = C0 N^p at gamma = 1/2
    assert exact.relative_entropy(dirac, nu) == pytest.approx(
        exact.entropy_cap(0.5, 2, 3))
    with pytest.raises(ValueError):
        exact.relative_entropy(nu, np.zeros(512))


def test_dirichlet_identities_report():
    rng = np.random.default_rng(5)
    rep = exact.check_dirichlet_identities(_params(), gamma=0.5, trials=5,
                                           rng=rng)
    assert rep["passed"]
    assert rep["max_rel_dev"]["D1"] < 1e-10
    assert rep["max_rel_dev"]["D2"] < 1e-10
    assert rep["max_rel_dev"]["D5"] < 1e-10
    assert rep["fitted_c"] >= 0
    # remainder bound |eps| <= c alpha N^(p-1) holds by the fit
    assert all(abs(e) <= rep["fitted_c"] * 3 * (1 + 1e-12)
               for e in rep["eps_rob"] + rep["eps_reac"])


def test_dirichlet_skips_d5_when_gamma_differs_from_b():
    rng = np.random.default_rng(5)
    rep = exact.check_dirichlet_identities(_params(), gamma=0.25, trials=2,
                                           rng=rng)
    assert not rep["d5_checked"]
    assert rep["max_rel_dev"]["D5"] is None
