"""Benchmark dynamical systems and a fixed-step RK4 trajectory generator.

Each system carries its default parameters, sampling step and delay-window
length. Parameters are plain named reals and can be overridden per call::

    sys = make_system("Lorenz63", rho=50.0)
    traj = integrate(sys, TrajectoryConfig(dt=0.01, n_steps=5000, burn_in=1000))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import IntegrationError
from .series import TimeSeries

SYSTEM_NAMES = (
    "Lorenz63",
    "Lorenz96",
    "Rossler",
    "DuffingNESS",
    "DuffingNE",
    "Chua",
    "Halvorsen",
    "Torus",
)


@dataclass(frozen=True)
class SystemInfo:
    dim: int
    params: Mapping[str, float]
    dt: float
    window: int
    standard_window: bool = True


_DUFFING = {"alpha": 0.2, "beta": 0.2, "gamma": 5.7, "delta": 0.0, "omega": 2.0}

# Halvorsen and Torus have no standard window length; 100 is our default.
REFERENCE = MappingProxyType({
    "Lorenz63": SystemInfo(3, {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}, 0.01, 75),
    "Lorenz96": SystemInfo(5, {"K": 5.0, "F": 8.0}, 0.01, 40),
    "Rossler": SystemInfo(3, {"a": 0.2, "b": 0.2, "c": 5.7}, 0.01, 1200),
    "DuffingNESS": SystemInfo(4, dict(_DUFFING), 0.01, 628),
    "DuffingNE": SystemInfo(2, dict(_DUFFING), 0.01, 628),
    "Chua": SystemInfo(3, {"alpha": 15.6, "beta": 28.0, "m0": -1.15, "m1": -0.70}, 0.005, 175),
    "Halvorsen": SystemInfo(3, {"a": 1.4}, 0.005, 100, standard_window=False),
    "Torus": SystemInfo(3, {"R": 2.0, "r": 0.7, "omega1": 1.0, "omega2": math.sqrt(2.0)}, 0.01, 100,
                        standard_window=False),
})

REGIME_A = MappingProxyType({"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0})
REGIME_B = MappingProxyType({"sigma": 16.0, "rho": 50.0, "beta": 3.0})


@dataclass(frozen=True)
class OdeSystem:
    name: str
    params: Mapping[str, float]
    dim: int

    def __post_init__(self):
        if self.name not in REFERENCE:
            raise ValueError(f"unknown system {self.name!r}; choose from {SYSTEM_NAMES}")
        expected = set(REFERENCE[self.name].params)
        if set(self.params) != expected:
            raise ValueError(f"{self.name} expects parameters {sorted(expected)}, got {sorted(self.params)}")
        for k, v in self.params.items():
            if not math.isfinite(v):
                raise ValueError(f"parameter {k} must be finite")
        if self.dim != _expected_dim(self.name, self.params):
            raise ValueError(f"{self.name} has dimension {_expected_dim(self.name, self.params)}, not {self.dim}")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def with_params(self, **params: float) -> "OdeSystem":
        return make_system(self.name, **{**self.params, **params})


def _expected_dim(name: str, params: Mapping[str, float]) -> int:
    if name == "Lorenz96":
        return int(params["K"])
    return REFERENCE[name].dim


def make_system(name: str, **params: float) -> OdeSystem:
    """Build a system with the reference parameters, optionally overridden."""
    if name not in REFERENCE:
        raise ValueError(f"unknown system {name!r}; choose from {SYSTEM_NAMES}")
    unknown = set(params) - set(REFERENCE[name].params)
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    merged = {k: float(v) for k, v in {**REFERENCE[name].params, **params}.items()}
    return OdeSystem(name, merged, _expected_dim(name, merged))


@dataclass(frozen=True)
class TrajectoryConfig:
    """``n_steps`` counts every stored sample including the discarded burn-in.

    When ``initial_state`` is None, the start is ``(1, ..., 1)`` plus uniform
    jitter in ``[-0.5, 0.5]`` drawn from ``seed``.
    """

    dt: float
    n_steps: int
    burn_in: int = 0
    initial_state: Sequence[float] | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("need n_steps > burn_in >= 0")


@dataclass(frozen=True)
class RegimeSwitchSpec:
    regime_a_params: Mapping[str, float] = field(default_factory=lambda: dict(REGIME_A))
    regime_b_params: Mapping[str, float] = field(default_factory=lambda: dict(REGIME_B))
    split_step: int = 0


# --- vector fields ---------------------------------------------------------

def _lorenz63(p, s, t):
    x, y, z = s
    return np.array([p["sigma"] * (y - x), x * (p["rho"] - z) - y, x * y - p["beta"] * z])


def _lorenz96(p, s, t):
    return (np.roll(s, -1) - np.roll(s, 2)) * np.roll(s, 1) - s + p["F"]


def _rossler(p, s, t):
    x, y, z = s
    return np.array([-y - z, x + p["a"] * y, p["b"] + z * (x - p["c"])])


def _duffing_accel(p, x, v, forcing):
    return -p["delta"] * v - p["alpha"] * x - p["beta"] * x**3 + p["gamma"] * forcing


def _duffing_ness(p, s, t):
    # (x, v, cos wt, sin wt): the forcing phase is carried in the state
    x, v, c, sn = s
    w = p["omega"]
    return np.array([v, _duffing_accel(p, x, v, c), -w * sn, w * c])


def _duffing_ne(p, s, t):
    x, v = s
    return np.array([v, _duffing_accel(p, x, v, math.cos(p["omega"] * t))])


def _chua(p, s, t):
    # standard double-scroll sign: x' = alpha (y - x - f(x)), f(x) = m1 x + h(x)
    x, y, z = s
    m0, m1 = p["m0"], p["m1"]
    h = 0.5 * (m0 - m1) * (abs(x + 1.0) - abs(x - 1.0))
    return np.array([p["alpha"] * (y - x - m1 * x - h), x - y + z, -p["beta"] * y])


def _halvorsen(p, s, t):
    x, y, z = s
    a = p["a"]
    return np.array([
        -a * x - 4 * y - 4 * z - y * y,
        -a * y - 4 * z - 4 * x - z * z,
        -a * z - 4 * x - 4 * y - x * x,
    ])


def _torus(p, s, t):
    R, r, w1, w2 = p["R"], p["r"], p["omega1"], p["omega2"]
    th1, th2 = w1 * t, w2 * t
    c1, s1, c2, s2 = math.cos(th1), math.sin(th1), math.cos(th2), math.sin(th2)
    rad = R + r * c2
    return np.array([
        -r * w2 * s2 * c1 - rad * w1 * s1,
        -r * w2 * s2 * s1 + rad * w1 * c1,
        r * w2 * c2,
    ])


def torus_point(params: Mapping[str, float], t: float) -> np.ndarray:
    R, r = params["R"], params["r"]
    th1, th2 = params["omega1"] * t, params["omega2"] * t
    return np.array([(R + r * math.cos(th2)) * math.cos(th1),
                     (R + r * math.cos(th2)) * math.sin(th1),
                     r * math.sin(th2)])


_FIELDS: dict[str, Callable] = {
    "Lorenz63": _lorenz63,
    "Lorenz96": _lorenz96,
    "Rossler": _rossler,
    "DuffingNESS": _duffing_ness,
    "DuffingNE": _duffing_ne,
    "Chua": _chua,
    "Halvorsen": _halvorsen,
    "Torus": _torus,
}


def vector_field(system: OdeSystem, state, t: float = 0.0) -> np.ndarray:
    """Time derivative of ``state`` under ``system`` at time ``t``."""
    s = np.asarray(state, dtype=float)
    if s.shape != (system.dim,):
        raise ValueError(f"{system.name} state must have length {system.dim}, got shape {s.shape}")
    return _FIELDS[system.name](system.params, s, t)


# --- integration -----------------------------------------------------------

def rk4(f: Callable[[float, np.ndarray], np.ndarray], y0, dt: float, n_steps: int,
        t0: float = 0.0) -> np.ndarray:
    """Classical fixed-step RK4.

    Returns an ``(n_steps, dim)`` array whose first row is ``y0``. Raises
    :class:`IntegrationError` at the first non-finite state.
    """
    y = np.array(y0, dtype=float)
    out = np.empty((n_steps, y.size))
    out[0] = y
    h = dt / 2.0
    for i in range(1, n_steps):
        t = t0 + (i - 1) * dt
        k1 = f(t, y)
        k2 = f(t + h, y + h * k1)
        k3 = f(t + h, y + h * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(y).all():
            raise IntegrationError("non-finite state during integration", i)
        out[i] = y
    return out


def initial_state(system: OdeSystem, cfg: TrajectoryConfig, t_start: float) -> np.ndarray:
    if system.name == "Torus":
        return torus_point(system.params, t_start)
    if cfg.initial_state is not None:
        y0 = np.asarray(cfg.initial_state, dtype=float)
        if y0.shape != (system.dim,):
            raise ValueError(f"initial_state must have length {system.dim}")
        return y0.copy()
    rng = np.random.default_rng(cfg.seed)
    y0 = 1.0 + rng.uniform(-0.5, 0.5, size=system.dim)
    if system.name == "DuffingNESS":
        w = system.params["omega"]
        y0[2:] = math.cos(w * t_start), math.sin(w * t_start)
    return y0


def integrate(system: OdeSystem, cfg: TrajectoryConfig) -> TimeSeries:
    """Integrate with RK4 and drop the burn-in.

    Time is shifted so that the first retained sample sits at ``t = 0``; the
    Duffing forcing phase is therefore zero there.
    """
    t_start = -cfg.burn_in * cfg.dt
    y0 = initial_state(system, cfg, t_start)
    rhs = _FIELDS[system.name]
    p = system.params
    traj = rk4(lambda t, y: rhs(p, y, t), y0, cfg.dt, cfg.n_steps, t0=t_start)
    return TimeSeries(traj[cfg.burn_in:], dt=cfg.dt, t0=0.0,
                      names=tuple(f"x{i}" for i in range(system.dim)))


def integrate_regime_switch(system: OdeSystem, spec: RegimeSwitchSpec,
                            cfg: TrajectoryConfig) -> tuple[TimeSeries, TimeSeries]:
    """Integrate under regime A, then continue the same state under regime B.

    ``spec.split_step`` indexes the retained (post burn-in) samples: samples
    ``[0, split_step)`` form the training segment, the rest the test segment.
    The step from the last training sample to the first test sample already
    uses regime B.
    """
    if system.name != "Lorenz63":
        raise ValueError("regime switching is defined for Lorenz63 only")
    n_keep = cfg.n_steps - cfg.burn_in
    if not 0 < spec.split_step < n_keep:
        raise ValueError(f"split_step must lie in (0, {n_keep}), got {spec.split_step}")
    sys_a = system.with_params(**spec.regime_a_params)
    sys_b = system.with_params(**spec.regime_b_params)

    n_a = cfg.burn_in + spec.split_step
    t_start = -cfg.burn_in * cfg.dt
    y0 = initial_state(sys_a, cfg, t_start)
    fa = _FIELDS["Lorenz63"]
    pa, pb = sys_a.params, sys_b.params
    part_a = rk4(lambda t, y: fa(pa, y, t), y0, cfg.dt, n_a, t0=t_start)
    try:
        part_b = rk4(lambda t, y: fa(pb, y, t), part_a[-1], cfg.dt, n_keep - spec.split_step + 1,
                     t0=(spec.split_step - 1) * cfg.dt)
    except IntegrationError as exc:
        raise IntegrationError("non-finite state during integration", exc.step + n_a - 1) from None
    names = tuple(f"x{i}" for i in range(system.dim))
    train = TimeSeries(part_a[cfg.burn_in:], dt=cfg.dt, t0=0.0, names=names)
    test = TimeSeries(part_b[1:], dt=cfg.dt, t0=spec.split_step * cfg.dt, names=names)
    return train, test
