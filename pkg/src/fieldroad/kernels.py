"""Numba kernels for the event loop and the quadratic-variation replay.

Event codes used in trajectory logs (shared with dynamics.TrajectoryRecord):

    0  field move, a = source bulk site, b = destination bulk site
    1  road move,  a = source road site, b = destination road site
    2  Robin flip of eta at the j=1 layer, a = site index, b = +1/-1 (new value)
    3  reaction flip of xi, a = road site, b = +1/-1
    4  reservoir flip at the upper layer, a = bulk site, b = +1/-1

Only effective events are logged; null uniformization attempts advance the
clock without an entry.  The j=1 bulk layer and the road share indices
0..N^(p-1)-1 (see lattice.py), which the kernels exploit directly.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def sim_kernel(
    eta,
    xi,
    fe_a,
    fe_b,
    re_a,
    re_b,
    n_road,
    upper_offset,
    n_upper,
    lam_field,
    lam_road,
    lam_rob,
    lam_reac,
    lam_up,
    b,
    rbar,
    t_end,
    obs,
    snap_eta,
    snap_xi,
    record,
    ev_t,
    ev_c,
    ev_a,
    ev_b,
    seed,
):
    """Exact uniformized CTMC run on [0, t_end]; mutates eta/xi in place.

    Returns (n_events, n_attempts, status); status 1 means the event log
    capacity was exhausted.
    """
    np.random.seed(seed)
    n_fe = fe_a.shape[0]
    n_re = re_a.shape[0]
    lam1 = lam_field * n_fe
    lam2 = lam_road * n_re
    lam3 = lam_rob * n_road
    lam4 = lam_reac * n_road
    lam5 = rbar * n_upper
    lam = lam1 + lam2 + lam3 + lam4 + lam5
    c1 = lam1
    c2 = c1 + lam2
    c3 = c2 + lam3
    c4 = c3 + lam4

    cap = ev_t.shape[0]
    n_obs = obs.shape[0]
    t = 0.0
    comp = 0.0  # Kahan compensation for the clock
    nev = 0
    iobs = 0
    attempts = 0

    while True:
        w = np.random.exponential(1.0 / lam)
        y = w - comp
        tnew = t + y
        comp = (tnew - t) - y
        t = tnew
        while iobs < n_obs and obs[iobs] < t:
            for s in range(eta.shape[0]):
                snap_eta[iobs, s] = eta[s]
            for s in range(xi.shape[0]):
                snap_xi[iobs, s] = xi[s]
            iobs += 1
        if t > t_end:
            break
        attempts += 1

        u = np.random.random() * lam
        code = -1
        a = -1
        bb = 0
        if u < c1:
            e = int(np.random.random() * n_fe)
            if e >= n_fe:
                e = n_fe - 1
            sa = fe_a[e]
            sb = fe_b[e]
            if eta[sa] != eta[sb]:
                if eta[sa] == 1:
                    a = sa
                    bb = sb
                else:
                    a = sb
                    bb = sa
                eta[a] = 0
                eta[bb] = 1
                code = 0
        elif u < c2:
            e = int(np.random.random() * n_re)
            if e >= n_re:
                e = n_re - 1
            sa = re_a[e]
            sb = re_b[e]
            if xi[sa] != xi[sb]:
                if xi[sa] == 1:
                    a = sa
                    bb = sb
                else:
                    a = sb
                    bb = sa
                xi[a] = 0
                xi[bb] = 1
                code = 1
        elif u < c3:
            i = int(np.random.random() * n_road)
            if i >= n_road:
                i = n_road - 1
            if eta[i] != xi[i]:
                if eta[i] == 0:
                    eta[i] = 1
                    bb = 1
                else:
                    eta[i] = 0
                    bb = -1
                a = i
                code = 2
        elif u < c4:
            i = int(np.random.random() * n_road)
            if i >= n_road:
                i = n_road - 1
            if eta[i] != xi[i]:
                if xi[i] == 0:
                    xi[i] = 1
                    bb = 1
                else:
                    xi[i] = 0
                    bb = -1
                a = i
                code = 3
        else:
            k = int(np.random.random() * n_upper)
            if k >= n_upper:
                k = n_upper - 1
            s = upper_offset + k
            if eta[s] == 0:
                rate = b
            else:
                rate = 1.0 - b
            if np.random.random() * rbar < rate:
                if eta[s] == 0:
                    eta[s] = 1
                    bb = 1
                else:
                    eta[s] = 0
                    bb = -1
                a = s
                code = 4

        if code >= 0 and record:
            if nev >= cap:
                return nev, attempts, 1
            ev_t[nev] = t
            ev_c[nev] = code
            ev_a[nev] = a
            ev_b[nev] = bb
            nev += 1

    return nev, attempts, 0


@njit(cache=True)
def _edge_contrib(s, occ, indptr, nbr, wts):
    acc = 0.0
    for k in range(indptr[s], indptr[s + 1]):
        d = occ[s] - occ[nbr[k]]
        acc += wts[k] * d * d
    return acc


@njit(cache=True)
def _edge_weight(a, b, indptr, nbr, wts):
    for k in range(indptr[a], indptr[a + 1]):
        if nbr[k] == b:
            return wts[k]
    return 0.0


@njit(cache=True)
def qv_series(
    eta,
    xi,
    ev_c,
    ev_a,
    ev_b,
    f_indptr,
    f_nbr,
    f_wts,
    r_indptr,
    r_nbr,
    r_wts,
    glow2,
    h2,
    gup2,
    upper_offset,
    b,
    out,
):
    """Replay a trajectory and record the five carre-du-champ lattice sums.

    out has shape (n_events + 1, 5); row k holds the sums after k events:
      0: sum over field edges of (eta_i - eta_k)^2 [N (G_i - G_k)]^2
      1: same over road edges with H
      2: sum over road sites of (eta - xi)^2 G(.,1/N)^2
      3: sum over road sites of (eta - xi)^2 H^2
      4: sum over upper sites of [b(1-eta) + (1-b) eta] G^2
    eta/xi are mutated in place (pass copies of the initial state).
    """
    n_road = glow2.shape[0]
    n_up = gup2.shape[0]

    eta_f = eta.astype(np.float64)
    xi_f = xi.astype(np.float64)

    s1 = 0.0
    for s in range(eta.shape[0]):
        s1 += _edge_contrib(s, eta_f, f_indptr, f_nbr, f_wts)
    s1 *= 0.5  # each edge visited from both endpoints
    s2 = 0.0
    for s in range(xi.shape[0]):
        s2 += _edge_contrib(s, xi_f, r_indptr, r_nbr, r_wts)
    s2 *= 0.5
    s3 = 0.0
    s4 = 0.0
    for i in range(n_road):
        m = (eta_f[i] - xi_f[i]) ** 2
        s3 += m * glow2[i]
        s4 += m * h2[i]
    s5 = 0.0
    for k in range(n_up):
        e = eta_f[upper_offset + k]
        s5 += (b * (1.0 - e) + (1.0 - b) * e) * gup2[k]

    out[0, 0] = s1
    out[0, 1] = s2
    out[0, 2] = s3
    out[0, 3] = s4
    out[0, 4] = s5

    for k in range(ev_c.shape[0]):
        code = ev_c[k]
        a = ev_a[k]
        bb = ev_b[k]
        if code == 0:
            wab = _edge_weight(a, bb, f_indptr, f_nbr, f_wts)
            dab = eta_f[a] - eta_f[bb]
            before = (
                _edge_contrib(a, eta_f, f_indptr, f_nbr, f_wts)
                + _edge_contrib(bb, eta_f, f_indptr, f_nbr, f_wts)
                - wab * dab * dab
            )
            eta_f[a], eta_f[bb] = eta_f[bb], eta_f[a]
            dab = eta_f[a] - eta_f[bb]
            after = (
                _edge_contrib(a, eta_f, f_indptr, f_nbr, f_wts)
                + _edge_contrib(bb, eta_f, f_indptr, f_nbr, f_wts)
                - wab * dab * dab
            )
            s1 += after - before
            for s in (a, bb):
                if s < n_road:
                    mo = (1.0 - eta_f[s] - xi_f[s]) ** 2  # pre-flip mismatch
                    mn = (eta_f[s] - xi_f[s]) ** 2
                    s3 += (mn - mo) * glow2[s]
                    s4 += (mn - mo) * h2[s]
                if s >= upper_offset:
                    eo = 1.0 - eta_f[s]
                    en = eta_f[s]
                    drate = (b * (1.0 - en) + (1.0 - b) * en) - (
                        b * (1.0 - eo) + (1.0 - b) * eo
                    )
                    s5 += drate * gup2[s - upper_offset]
        elif code == 1:
            wab = _edge_weight(a, bb, r_indptr, r_nbr, r_wts)
            dab = xi_f[a] - xi_f[bb]
            before = (
                _edge_contrib(a, xi_f, r_indptr, r_nbr, r_wts)
                + _edge_contrib(bb, xi_f, r_indptr, r_nbr, r_wts)
                - wab * dab * dab
            )
            xi_f[a], xi_f[bb] = xi_f[bb], xi_f[a]
            dab = xi_f[a] - xi_f[bb]
            after = (
                _edge_contrib(a, xi_f, r_indptr, r_nbr, r_wts)
                + _edge_contrib(bb, xi_f, r_indptr, r_nbr, r_wts)
                - wab * dab * dab
            )
            s2 += after - before
            for s in (a, bb):
                mo = (eta_f[s] - (1.0 - xi_f[s])) ** 2
                mn = (eta_f[s] - xi_f[s]) ** 2
                s3 += (mn - mo) * glow2[s]
                s4 += (mn - mo) * h2[s]
        elif code == 2:
            before = _edge_contrib(a, eta_f, f_indptr, f_nbr, f_wts)
            mo = (eta_f[a] - xi_f[a]) ** 2
            eta_f[a] = 1.0 if bb == 1 else 0.0
            s1 += _edge_contrib(a, eta_f, f_indptr, f_nbr, f_wts) - before
            mn = (eta_f[a] - xi_f[a]) ** 2
            s3 += (mn - mo) * glow2[a]
            s4 += (mn - mo) * h2[a]
        elif code == 3:
            before = _edge_contrib(a, xi_f, r_indptr, r_nbr, r_wts)
            mo = (eta_f[a] - xi_f[a]) ** 2
            xi_f[a] = 1.0 if bb == 1 else 0.0
            s2 += _edge_contrib(a, xi_f, r_indptr, r_nbr, r_wts) - before
            mn = (eta_f[a] - xi_f[a]) ** 2
            s3 += (mn - mo) * glow2[a]
            s4 += (mn - mo) * h2[a]
        else:  # code == 4
            before = _edge_contrib(a, eta_f, f_indptr, f_nbr, f_wts)
            eo = eta_f[a]
            eta_f[a] = 1.0 if bb == 1 else 0.0
            s1 += _edge_contrib(a, eta_f, f_indptr, f_nbr, f_wts) - before
            en = eta_f[a]
            drate = (b * (1.0 - en) + (1.0 - b) * en) - (
                b * (1.0 - eo) + (1.0 - b) * eo
            )
            s5 += drate * gup2[a - upper_offset]

        out[k + 1, 0] = s1
        out[k + 1, 1] = s2
        out[k + 1, 2] = s3
        out[k + 1, 3] = s4
        out[k + 1, 4] = s5

    for s in range(eta.shape[0]):
        eta[s] = np.uint8(eta_f[s])
    for s in range(xi.shape[0]):
        xi[s] = np.uint8(xi_f[s])
