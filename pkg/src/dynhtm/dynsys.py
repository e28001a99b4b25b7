"""Ground-truth Lorenz dynamics with piecewise-constant parameter schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .embedding import TimeSeries
from .errors import DivergenceError, InvalidInputError, InvalidParameterError


class SystemParams(NamedTuple):
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0


CLASSICAL = SystemParams()


class State3(NamedTuple):
    x: float
    y: float
    z: float


def _check_finite(values, what):
    if not all(math.isfinite(v) for v in values):
        raise InvalidInputError(f"{what} must be finite, got {tuple(values)}")


@dataclass(frozen=True)
class ParameterSchedule:
    """Ordered ``(start_step, params)`` segments; segment ``i`` applies from its start step until the next."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((int(s), SystemParams(*p)) for s, p in self.segments)
        if not segs:
            raise InvalidParameterError("schedule needs at least one segment")
        if segs[0][0] != 0:
            raise InvalidParameterError("first segment must start at step 0")
        for (a, _), (b, _) in zip(segs, segs[1:]):
            if b <= a:
                raise InvalidParameterError("segment start steps must be strictly increasing")
        for _, p in segs:
            _check_finite(p, "system parameters")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, params: SystemParams = CLASSICAL) -> "ParameterSchedule":
        return cls(((0, params),))

    @classmethod
    def switch(cls, before: SystemParams, after: SystemParams, at_step: int) -> "ParameterSchedule":
        return cls(((0, before), (at_step, after)))

    def segment_index(self, step: int) -> int:
        idx = 0
        for i, (start, _) in enumerate(self.segments):
            if start <= step:
                idx = i
        return idx

    def params_at(self, step: int) -> SystemParams:
        return self.segments[self.segment_index(step)][1]

    def labels(self, n: int) -> np.ndarray:
        """Active segment index for steps ``0..n-1``."""
        out = np.zeros(n, dtype=np.int64)
        for i, (start, _) in enumerate(self.segments):
            out[start:] = i
        return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    dt: float
    states: np.ndarray
    schedule: ParameterSchedule = field(default_factory=ParameterSchedule.constant)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float).reshape(-1, 3)
        if states.shape[0] < 1:
            raise InvalidInputError("trajectory must contain at least one state")
        if not np.all(np.isfinite(states)):
            raise InvalidInputError("trajectory contains non-finite states")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt

    def regime_labels(self) -> np.ndarray:
        return self.schedule.labels(len(self))


@dataclass(frozen=True)
class ObservationConfig:
    weights: tuple = (1.0, 0.0, 0.0)
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != 3:
            raise InvalidParameterError("observation weights must have three entries")
        _check_finite(w, "observation weights")
        if all(v == 0.0 for v in w):
            raise InvalidParameterError("observation weights must not all be zero")
        if not self.noise_std >= 0:
            raise InvalidParameterError("noise_std must be >= 0")
        object.__setattr__(self, "weights", w)


def lorenz_deriv(state: Sequence[float], params: SystemParams = CLASSICAL) -> State3:
    x, y, z = state
    _check_finite((x, y, z), "state")
    _check_finite(params, "system parameters")
    sigma, rho, beta = params
    return State3(sigma * (y - x), x * (rho - z) - y, x * y - beta * z)


def fixed_points(params: SystemParams = CLASSICAL) -> list:
    """Origin plus the two symmetric equilibria when ``rho > 1``."""
    pts = [State3(0.0, 0.0, 0.0)]
    if params.rho > 1:
        c = math.sqrt(params.beta * (params.rho - 1))
        pts += [State3(c, c, params.rho - 1), State3(-c, -c, params.rho - 1)]
    return pts


def _rk4_step(x, y, z, dt, s, r, b):
    k1x, k1y, k1z = s * (y - x), x * (r - z) - y, x * y - b * z
    h = 0.5 * dt
    x2, y2, z2 = x + h * k1x, y + h * k1y, z + h * k1z
    k2x, k2y, k2z = s * (y2 - x2), x2 * (r - z2) - y2, x2 * y2 - b * z2
    x3, y3, z3 = x + h * k2x, y + h * k2y, z + h * k2z
    k3x, k3y, k3z = s * (y3 - x3), x3 * (r - z3) - y3, x3 * y3 - b * z3
    x4, y4, z4 = x + dt * k3x, y + dt * k3y, z + dt * k3z
    k4x, k4y, k4z = s * (y4 - x4), x4 * (r - z4) - y4, x4 * y4 - b * z4
    c = dt / 6.0
    return (
        x + c * (k1x + 2 * k2x + 2 * k3x + k4x),
        y + c * (k1y + 2 * k2y + 2 * k3y + k4y),
        z + c * (k1z + 2 * k2z + 2 * k3z + k4z),
    )


def _euler_step(x, y, z, dt, s, r, b):
    return x + dt * s * (y - x), y + dt * (x * (r - z) - y), z + dt * (x * y - b * z)


_STEPPERS = {"rk4": _rk4_step, "euler": _euler_step}


def integrate(
    schedule: ParameterSchedule,
    x0: Sequence[float],
    dt: float,
    n_steps: int,
    method: str = "rk4",
) -> Trajectory:
    """Fixed-step integration; the step from state ``s`` to ``s+1`` uses the parameters active at ``s``."""
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if n_steps < 0:
        raise InvalidParameterError(f"n_steps must be >= 0, got {n_steps}")
    if method not in _STEPPERS:
        raise InvalidParameterError(f"unknown method {method!r}; expected one of {sorted(_STEPPERS)}")
    x, y, z = (float(v) for v in x0)
    _check_finite((x, y, z), "initial state")
    step = _STEPPERS[method]

    out = np.empty((n_steps + 1, 3))
    out[0] = x, y, z
    starts = [s for s, _ in schedule.segments] + [n_steps + 1]
    for seg, (_, params) in enumerate(schedule.segments):
        s, r, b = params
        lo, hi = max(starts[seg], 0), min(starts[seg + 1], n_steps)
        for i in range(lo, hi):
            x, y, z = step(x, y, z, dt, s, r, b)
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
                raise DivergenceError(i + 1)
            out[i + 1] = x, y, z
    return Trajectory(dt, out, schedule)


def observe(traj: Trajectory, config: ObservationConfig) -> TimeSeries:
    """Linear scalar readout of the state plus seeded Gaussian measurement noise."""
    values = traj.states @ np.asarray(config.weights)
    if config.noise_std > 0:
        rng = np.random.default_rng(config.seed)
        values = values + rng.normal(0.0, config.noise_std, size=values.size)
    return TimeSeries(traj.dt, values)


def coupled_logistic(n: int, x0: float, y0: float, rx: float = 3.8, ry: float = 3.5, coupling: float = 0.1) -> tuple:
    """Unidirectionally coupled logistic maps in which ``x`` drives ``y``."""
    x = np.empty(n)
    y = np.empty(n)
    x[0], y[0] = x0, y0
    for t in range(n - 1):
        x[t + 1] = x[t] * (rx - rx * x[t])
        y[t + 1] = y[t] * (ry - ry * y[t] - coupling * x[t])
    return x, y
