"""Macroscopic field-road diffusion system.

Explicit-Euler, cell-centered finite volumes on T^(p-1) x (0,1) coupled to
a road copy of T^(p-1).  The bottom-cell boundary flux alpha (u - v_bottom)
enters the field and road updates with opposite signs, so the discrete
total mass h^p sum(v) + h^(p-1) sum(u) is conserved to roundoff, and the
scheme satisfies a discrete maximum principle under the CFL condition.

Also provides the weak-formulation residuals, the duality (uniqueness)
identity via the reversed-time sourced system, and a lower-bound estimator
of the directional energy functional.
"""

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class PdeParams:
    d: float
    D: float
    alpha: float
    p: int
    M: int

    def __post_init__(self):
        if self.d <= 0 or self.D <= 0 or self.alpha <= 0:
            raise ValueError("d, D and alpha must be positive")
        if self.p < 2:
            raise ValueError("dimension p must be >= 2")
        if self.M < 4:
            raise ValueError("need at least 4 cells per axis")

    @property
    def h(self) -> float:
        return 1.0 / self.M


@dataclass
class PdeState:
    """Cell-centered grids: v on (M,)*(p-1) + (M,) with the vertical axis
    last, u on (M,)*(p-1)."""

    v: np.ndarray
    u: np.ndarray
    time: float
    dt: float
    params: PdeParams

    def copy(self) -> "PdeState":
        return replace(self, v=self.v.copy(), u=self.u.copy())


def stable_dt(params: PdeParams, safety: float = 1.0) -> float:
    """safety * h^2 / (2 (max(p d, (p-1) D) + alpha h))."""
    h = params.h
    fastest = max(params.p * params.d, (params.p - 1) * params.D)
    return safety * h * h / (2.0 * (fastest + params.alpha * h))


def field_cell_centers(params: PdeParams) -> np.ndarray:
    """(M^p, p) array of cell-center coordinates, vertical coordinate last."""
    M, p = params.M, params.p
    axes = [(np.arange(M) + 0.5) / M] * p
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def road_cell_centers(params: PdeParams) -> np.ndarray:
    M, p = params.M, params.p
    axes = [(np.arange(M) + 0.5) / M] * (p - 1)
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def init_pde(v0, u0, M: int, d: float, D: float, alpha: float, p: int = 2,
             cfl_safety: float = 0.4) -> PdeState:
    """Sample initial profiles at cell centers and fix the step size.

    v0 takes a length-p point, u0 a length-(p-1) point; both must map into
    [0, 1] -- densities above one site occupancy are unreachable.
    """
    if not 0.0 < cfl_safety <= 1.0:
        raise ValueError("cfl_safety must lie in (0, 1]")
    params = PdeParams(d=d, D=D, alpha=alpha, p=p, M=M)
    v = np.array([v0(x) for x in field_cell_centers(params)], dtype=float)
    u = np.array([u0(x) for x in road_cell_centers(params)], dtype=float)
    if v.min() < 0 or v.max() > 1 or u.min() < 0 or u.max() > 1:
        raise ValueError("initial data must take values in [0, 1]; larger "
                         "densities are unreachable for the particle system")
    return PdeState(
        v=v.reshape((M,) * p),
        u=u.reshape((M,) * (p - 1)),
        time=0.0,
        dt=stable_dt(params, cfl_safety),
        params=params,
    )


def zero_state(M: int, d: float, D: float, alpha: float, p: int = 2,
               cfl_safety: float = 0.4) -> PdeState:
    params = PdeParams(d=d, D=D, alpha=alpha, p=p, M=M)
    return PdeState(v=np.zeros((M,) * p), u=np.zeros((M,) * (p - 1)),
                    time=0.0, dt=stable_dt(params, cfl_safety), params=params)


def _lap_x(arr: np.ndarray, axes, h: float) -> np.ndarray:
    out = np.zeros_like(arr)
    for ax in axes:
        out += np.roll(arr, 1, axis=ax) + np.roll(arr, -1, axis=ax) - 2.0 * arr
    return out / (h * h)


def pde_step(state: PdeState, dt: float | None = None,
             source_v: np.ndarray | None = None,
             source_u: np.ndarray | None = None) -> PdeState:
    """One conservative explicit step; optional volumetric sources."""
    pr = state.params
    h = pr.h
    step = state.dt if dt is None else dt
    if step > stable_dt(pr, 1.0) * (1.0 + 1e-12):
        raise RuntimeError(
            f"CFL violation: dt={step:.3e} exceeds the stability bound "
            f"{stable_dt(pr, 1.0):.3e}")
    v, u = state.v, state.u
    M, p = pr.M, pr.p

    rhs_v = pr.d * _lap_x(v, range(p - 1), h)
    # vertical flux divergence: interior diffusive fluxes, zero-flux top,
    # Robin exchange with the road through the bottom face.  The exchange
    # uses the trace reconstructed from the bottom-cell value and the
    # Robin relation itself (v_trace = v0 - (h/2)(alpha/d)(v_trace - u)),
    # which keeps the scheme second order in h; the identical term enters
    # the road update with the opposite sign, so mass is conserved exactly.
    exch = pr.alpha * (v[..., 0] - u) / (1.0 + pr.alpha * h / (2.0 * pr.d))
    flux = np.zeros(v.shape[:-1] + (M + 1,))
    flux[..., 1:M] = pr.d * np.diff(v, axis=-1) / h
    flux[..., 0] = exch
    rhs_v += np.diff(flux, axis=-1) / h

    rhs_u = pr.D * _lap_x(u, range(p - 1), h) + exch

    v_new = v + step * rhs_v
    u_new = u + step * rhs_u
    if source_v is not None:
        v_new = v_new + step * source_v
    if source_u is not None:
        u_new = u_new + step * source_u
    return PdeState(v=v_new, u=u_new, time=state.time + step, dt=state.dt,
                    params=pr)


def total_mass(state: PdeState) -> float:
    h = state.params.h
    p = state.params.p
    return float(h**p * state.v.sum() + h ** (p - 1) * state.u.sum())


def solve(state: PdeState, t_end: float, snapshot_times) -> list[PdeState]:
    """Step to t_end, landing exactly on each requested snapshot time."""
    snaps_t = np.asarray(snapshot_times, dtype=float)
    if snaps_t.size and np.any(np.diff(snaps_t) < 0):
        raise ValueError("snapshot times must be sorted ascending")
    if snaps_t.size and (snaps_t[0] < state.time or snaps_t[-1] > t_end):
        raise ValueError("snapshot times must lie in [start, t_end]")
    out = []
    cur = state.copy()
    idx = 0
    while idx < snaps_t.size or cur.time < t_end - 1e-14:
        target = snaps_t[idx] if idx < snaps_t.size else t_end
        while cur.time < target - 1e-14:
            step = min(cur.dt, target - cur.time)
            cur = pde_step(cur, dt=step)
        if idx < snaps_t.size:
            snap = cur.copy()
            snap.time = float(target)
            out.append(snap)
            idx += 1
        else:
            break
    if snaps_t.size == 0:
        return [cur]
    return out


# ---------------------------------------------------------------------------
# weak-formulation residuals

def _field_inner(params: PdeParams, v: np.ndarray, w: np.ndarray) -> float:
    return float(params.h ** params.p * np.sum(v * w))


def _road_inner(params: PdeParams, u: np.ndarray, w: np.ndarray) -> float:
    return float(params.h ** (params.p - 1) * np.sum(u * w))


def weak_residual(snapshots: list[PdeState], pair, t: float):
    """Signed defects of the two weak identities at time t.

    Uses trapezoidal quadrature in time over the snapshot grid, cell sums
    in space, and the same reconstructed bottom trace as the scheme (the
    top trace is the top-cell value, consistent with the zero-flux face).
    """
    pr = snapshots[0].params
    times = np.array([s.time for s in snapshots])
    if abs(times[0]) > 1e-12 or abs(times[-1] - t) > 1e-9:
        raise ValueError("snapshots must span [0, t]")
    G, H = pair.G, pair.H
    M, p = pr.M, pr.p
    fc = field_cell_centers(pr)
    rc = road_cell_centers(pr)
    fx, fy = fc[:, :-1], fc[:, -1]
    shape_f = (M,) * p
    shape_r = (M,) * (p - 1)

    def g_grid(fun, s):
        return np.asarray(fun(s, fx, fy), dtype=float).reshape(shape_f)

    def h_grid(fun, s):
        return np.asarray(fun(s, rc), dtype=float).reshape(shape_r)

    f_int = np.empty(times.size)
    r_int = np.empty(times.size)
    for k, snap in enumerate(snapshots):
        s = snap.time
        v, u = snap.v, snap.u
        v_top = v[..., -1]
        # bottom trace reconstructed from the Robin relation, matching the
        # exchange flux of the scheme (second order in h)
        lam = pr.alpha * pr.h / (2.0 * pr.d)
        v_bot = (v[..., 0] + lam * u) / (1.0 + lam)
        g_bot = np.asarray(G.value(s, rc, 0.0), dtype=float).reshape(shape_r)
        dyg_bot = np.asarray(G.dy(s, rc, 0.0), dtype=float).reshape(shape_r)
        dyg_top = np.asarray(G.dy(s, rc, 1.0), dtype=float).reshape(shape_r)
        f_int[k] = (_field_inner(pr, v, g_grid(G.dt, s))
                    + pr.d * _field_inner(pr, v, g_grid(G.lap, s))
                    - pr.d * _road_inner(pr, v_top, dyg_top)
                    + pr.d * _road_inner(pr, v_bot, dyg_bot)
                    + pr.alpha * _road_inner(pr, u - v_bot, g_bot))
        h_vals = h_grid(H.value, s)
        r_int[k] = (_road_inner(pr, u, h_grid(H.dt, s))
                    + pr.D * _road_inner(pr, u, h_grid(H.lap_x, s))
                    + pr.alpha * _road_inner(pr, v_bot - u, h_vals))

    first, last = snapshots[0], snapshots[-1]
    lhs_f = (_field_inner(pr, last.v, g_grid(G.value, t))
             - _field_inner(pr, first.v, g_grid(G.value, 0.0)))
    lhs_r = (_road_inner(pr, last.u, h_grid(H.value, t))
             - _road_inner(pr, first.u, h_grid(H.value, 0.0)))
    r_field = lhs_f - float(np.trapezoid(f_int, times))
    r_road = lhs_r - float(np.trapezoid(r_int, times))
    return r_field, r_road


# ---------------------------------------------------------------------------
# duality identity

def duality_check(v0, u0, phi, psi, T: float, M: int, d: float, D: float,
                  alpha: float, p: int = 2, cfl_safety: float = 0.4) -> float:
    """Defect of the uniqueness identity.

    Solves the reversed-time sourced system forward from zero data with
    the time-reflected sources, recovers the dual pair at the initial
    time, runs the primal system, and returns
    int_0^T (<v, phi> + <u, psi>) dt - <v0, G(0)> - <u0, H(0)>,
    which vanishes for exact solutions.
    """
    primal = init_pde(v0, u0, M, d, D, alpha, p, cfl_safety)
    dual = zero_state(M, d, D, alpha, p, cfl_safety)
    pr = primal.params
    dt = min(primal.dt, dual.dt)
    n = max(1, math.ceil(T / dt))
    dt = T / n

    fc = field_cell_centers(pr)
    rc = road_cell_centers(pr)
    fx, fy = fc[:, :-1], fc[:, -1]
    shape_f = (M,) * p
    shape_r = (M,) * (p - 1)

    def phi_grid(s):
        return np.asarray(phi.value(s, fx, fy), dtype=float).reshape(shape_f)

    def psi_grid(s):
        return np.asarray(psi.value(s, rc), dtype=float).reshape(shape_r)

    for k in range(n):
        s = k * dt
        dual = pde_step(dual, dt=dt, source_v=phi_grid(T - s),
                        source_u=psi_grid(T - s))
    g0, h0 = dual.v, dual.u  # dual pair evaluated at the primal initial time

    acc = 0.0
    f_prev = (_field_inner(pr, primal.v, phi_grid(0.0))
              + _road_inner(pr, primal.u, psi_grid(0.0)))
    cur = primal
    for k in range(n):
        cur = pde_step(cur, dt=dt)
        s = (k + 1) * dt
        f = (_field_inner(pr, cur.v, phi_grid(s))
             + _road_inner(pr, cur.u, psi_grid(s)))
        acc += 0.5 * (f_prev + f) * dt
        f_prev = f

    return acc - _field_inner(pr, primal.v, g0) - _road_inner(pr, primal.u, h0)


# ---------------------------------------------------------------------------
# energy functional

def energy_functional(v_snaps, times, q: int, family, params: PdeParams):
    """Certified lower bound of the directional energy of a field path.

    For each test function the bracket a<v, dG> - a^2/2 ||G||^2 is
    maximized in the scale a in closed form, giving (1/2) num^2 / den;
    the running maximum over the family is returned.  Empty family ->
    -inf (no bound).
    """
    if not 1 <= q <= params.p:
        raise ValueError(f"direction index q must lie in [1, {params.p}]")
    times = np.asarray(times, dtype=float)
    if len(v_snaps) != times.size:
        raise ValueError("one snapshot per time required")
    fc = field_cell_centers(params)
    fx, fy = fc[:, :-1], fc[:, -1]
    shape_f = (params.M,) * params.p

    best = float("-inf")
    for G in family:
        num_t = np.empty(times.size)
        den_t = np.empty(times.size)
        for k, s in enumerate(times):
            dq = np.asarray(G.grad(s, fx, fy))[..., q - 1].reshape(shape_f)
            gv = np.asarray(G.value(s, fx, fy), dtype=float).reshape(shape_f)
            num_t[k] = _field_inner(params, np.asarray(v_snaps[k]), dq)
            den_t[k] = _field_inner(params, gv, gv)
        num = float(np.trapezoid(num_t, times))
        den = float(np.trapezoid(den_t, times))
        if den > 0:
            best = max(best, 0.5 * num * num / den)
    return best


def bump_family(K: int, q: int, T: float, p: int = 2):
    """K compactly supported test functions for the direction-q energy
    bound: plateau-in-time waves with a vertical bump profile."""
    from .testfuncs import BumpY, CylinderFunction, PlateauBump, SineY, TorusWave

    family = []
    n_phase = 8
    k_mode = 0
    while len(family) < K:
        k_mode += 1
        for j in range(n_phase):
            if len(family) >= K:
                break
            phase = 2.0 * np.pi * j / n_phase
            if q <= p - 1:
                kvec = [0] * (p - 1)
                kvec[q - 1] = k_mode
                prof = BumpY()
            else:
                kvec = [(k_mode - 1) % 3] + [0] * (p - 2)
                prof = SineY(1 + (k_mode - 1) // 3)
            family.append(CylinderFunction(
                PlateauBump(T), TorusWave(kvec, phase=phase), prof))
    return family
