"""Analytic test-function pairs (G on the cylinder, H on the road).

All functions are separable in time and space, G(t, x, y) = phi(t) g(x, y),
which lets trajectory integrals use exact antiderivatives of phi and phi^2
over each holding interval.  Spatial factors come with closed-form
gradients, Laplacians and boundary traces; a finite-difference self-test
lives in the test suite.
"""

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# time profiles

class ConstantTime:
    def __init__(self, c: float = 1.0):
        self.c = c

    def value(self, t):
        return self.c * np.ones_like(np.asarray(t, dtype=float))

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def antiderivative(self, t):
        return self.c * np.asarray(t, dtype=float)

    def sq_antiderivative(self, t):
        return self.c**2 * np.asarray(t, dtype=float)


class ExpDecay:
    def __init__(self, lam: float):
        if lam <= 0:
            raise ValueError("decay rate must be positive")
        self.lam = lam

    def value(self, t):
        return np.exp(-self.lam * np.asarray(t, dtype=float))

    def derivative(self, t):
        return -self.lam * self.value(t)

    def antiderivative(self, t):
        return -self.value(t) / self.lam

    def sq_antiderivative(self, t):
        return -np.exp(-2.0 * self.lam * np.asarray(t, dtype=float)) / (
            2.0 * self.lam)


def _smoothstep(u):
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_int(u):
    return u**3 - 0.5 * u**4


def _smoothstep_sq_int(u):
    return 1.8 * u**5 - 2.0 * u**6 + (4.0 / 7.0) * u**7


class PlateauBump:
    """C^1 bump on [0, T]: smoothstep up on [0, delta], 1, smoothstep down."""

    def __init__(self, T: float, delta: float | None = None):
        self.T = T
        self.delta = delta if delta is not None else 0.1 * T
        if not 0 < self.delta <= T / 2:
            raise ValueError("ramp width must lie in (0, T/2]")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        up = np.clip(t / self.delta, 0.0, 1.0)
        down = np.clip((self.T - t) / self.delta, 0.0, 1.0)
        out = _smoothstep(up) * _smoothstep(down)
        return np.where((t < 0) | (t > self.T), 0.0, out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        d = self.delta
        out = np.zeros_like(t)
        ramp_up = (t >= 0) & (t < d)
        u = t / d
        out = np.where(ramp_up, 6.0 * u * (1.0 - u) / d, out)
        ramp_dn = (t > self.T - d) & (t <= self.T)
        u = (self.T - t) / d
        out = np.where(ramp_dn, -6.0 * u * (1.0 - u) / d, out)
        return out

    def _piecewise_int(self, t, ramp_int, plateau_per_ramp):
        t = np.asarray(t, dtype=float)
        d, T = self.delta, self.T
        tc = np.clip(t, 0.0, T)
        a = ramp_int(np.clip(tc / d, 0.0, 1.0)) * d
        b = np.clip(tc - d, 0.0, T - 2.0 * d)
        tail = np.clip(tc - (T - d), 0.0, d)
        c = (plateau_per_ramp - ramp_int(np.clip((d - tail) / d, 0.0, 1.0))) * d
        return a + b + c

    def antiderivative(self, t):
        return self._piecewise_int(t, _smoothstep_int, _smoothstep_int(1.0))

    def sq_antiderivative(self, t):
        return self._piecewise_int(t, _smoothstep_sq_int,
                                   _smoothstep_sq_int(1.0))


# ---------------------------------------------------------------------------
# spatial factors

class TorusWave:
    """cos(2 pi k.x + phase) on T^(p-1), with k an integer vector."""

    def __init__(self, k, phase: float = 0.0, amplitude: float = 1.0):
        self.k = np.atleast_1d(np.asarray(k, dtype=float))
        self.phase = phase
        self.amplitude = amplitude

    def _arg(self, x):
        return TWO_PI * (np.asarray(x) @ self.k) + self.phase

    def value(self, x):
        return self.amplitude * np.cos(self._arg(x))

    def grad(self, x):
        s = -self.amplitude * np.sin(self._arg(x))
        return TWO_PI * s[..., None] * self.k

    def lap(self, x):
        return -(TWO_PI**2) * float(self.k @ self.k) * self.value(x)


class CosineY:
    """cos(m pi y); Neumann-compatible at y in {0, 1}."""

    def __init__(self, m: int):
        self.m = m

    def value(self, y):
        return np.cos(self.m * np.pi * np.asarray(y, dtype=float))

    def d1(self, y):
        return -self.m * np.pi * np.sin(self.m * np.pi * np.asarray(y, dtype=float))

    def d2(self, y):
        return -((self.m * np.pi) ** 2) * self.value(y)


class BumpY:
    """y^2 (1-y)^2: vanishes with its first derivative at both ends."""

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return y * y * (1.0 - y) ** 2

    def d1(self, y):
        y = np.asarray(y, dtype=float)
        return 2.0 * y - 6.0 * y**2 + 4.0 * y**3

    def d2(self, y):
        y = np.asarray(y, dtype=float)
        return 2.0 - 12.0 * y + 12.0 * y**2


class SineY:
    """sin(m pi y); vanishes at both ends (not Neumann-compatible)."""

    def __init__(self, m: int):
        self.m = m

    def value(self, y):
        return np.sin(self.m * np.pi * np.asarray(y, dtype=float))

    def d1(self, y):
        return self.m * np.pi * np.cos(self.m * np.pi * np.asarray(y, dtype=float))

    def d2(self, y):
        return -((self.m * np.pi) ** 2) * self.value(y)


# ---------------------------------------------------------------------------
# space-time functions

@dataclass
class CylinderFunction:
    """Separable G(t, x, y) = phi(t) * wave(x) * prof(y)."""

    time: object
    wave: TorusWave
    prof: object

    def space(self, x, y):
        return self.wave.value(x) * self.prof.value(y)

    def value(self, t, x, y):
        return self.time.value(t) * self.space(x, y)

    def dt(self, t, x, y):
        return self.time.derivative(t) * self.space(x, y)

    def lap_x(self, t, x, y):
        return self.time.value(t) * self.wave.lap(x) * self.prof.value(y)

    def dyy(self, t, x, y):
        return self.time.value(t) * self.wave.value(x) * self.prof.d2(y)

    def dy(self, t, x, y):
        return self.time.value(t) * self.wave.value(x) * self.prof.d1(y)

    def lap(self, t, x, y):
        return self.lap_x(t, x, y) + self.dyy(t, x, y)

    def grad(self, t, x, y):
        phi = self.time.value(t)
        gx = phi * self.wave.grad(x) * self.prof.value(y)[..., None]
        gy = phi * self.wave.value(x) * self.prof.d1(y)
        return np.concatenate([gx, gy[..., None]], axis=-1)


@dataclass
class RoadFunction:
    """Separable H(t, x) = phi(t) * wave(x)."""

    time: object
    wave: TorusWave

    def space(self, x):
        return self.wave.value(x)

    def value(self, t, x):
        return self.time.value(t) * self.wave.value(x)

    def dt(self, t, x):
        return self.time.derivative(t) * self.wave.value(x)

    def lap_x(self, t, x):
        return self.time.value(t) * self.wave.lap(x)

    def grad_x(self, t, x):
        return self.time.value(t) * self.wave.grad(x)


@dataclass
class TestFunctionPair:
    G: CylinderFunction
    H: RoadFunction


def fourier_pair(p: int, lam: float = 1.0, k=None, m: int = 1,
                 k_road=None, lam_road: float | None = None,
                 amplitude: float = 1.0) -> TestFunctionPair:
    """Separable cosine modes: exp(-lam t) cos(2 pi k.x) cos(m pi y)."""
    if k is None:
        k = [1] + [0] * (p - 2)
    if k_road is None:
        k_road = k
    tG = ExpDecay(lam) if lam > 0 else ConstantTime()
    lr = lam if lam_road is None else lam_road
    tH = ExpDecay(lr) if lr > 0 else ConstantTime()
    return TestFunctionPair(
        G=CylinderFunction(tG, TorusWave(k, amplitude=amplitude), CosineY(m)),
        H=RoadFunction(tH, TorusWave(k_road, amplitude=amplitude)),
    )


def bump_pair(p: int, T: float, k=None, phase: float = 0.0,
              amplitude: float = 1.0) -> TestFunctionPair:
    """Compact bump in time and y: plateau(t) cos(2 pi k.x) y^2 (1-y)^2."""
    if k is None:
        k = [1] + [0] * (p - 2)
    return TestFunctionPair(
        G=CylinderFunction(PlateauBump(T), TorusWave(k, phase=phase,
                                                    amplitude=amplitude),
                           BumpY()),
        H=RoadFunction(PlateauBump(T), TorusWave(k, phase=phase,
                                                 amplitude=amplitude)),
    )


def constant_pair(p: int, cG: float = 1.0, cH: float = 0.0) -> TestFunctionPair:
    """Spatially and temporally constant pair (hand-integration checks)."""
    zero_k = [0] * (p - 1)
    return TestFunctionPair(
        G=CylinderFunction(ConstantTime(), TorusWave(zero_k, amplitude=cG),
                           CosineY(0)),
        H=RoadFunction(ConstantTime(), TorusWave(zero_k, amplitude=cH)),
    )


def default_pairs(p: int) -> list[TestFunctionPair]:
    """Three pairs used by the diagnostics suite."""
    return [
        fourier_pair(p, lam=1.0, k=[1] + [0] * (p - 2), m=1),
        fourier_pair(p, lam=0.5, k=[2] + [0] * (p - 2), m=2),
        fourier_pair(p, lam=0.0, k=[1] + [0] * (p - 2), m=0),
    ]
