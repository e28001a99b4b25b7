"""Seeded end-to-end experiments shared by the test suite, scripts/ and the CLI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .causality import ccm_skill, l_index
from .dynsys import (
    ObservationConfig,
    ParameterSchedule,
    SystemParams,
    coupled_logistic,
    integrate,
    observe,
)
from .embedding import EmbeddingSpec, TimeSeries, delay_embed
from .forecast import (
    RegimeTrackerState,
    TransitionLibrary,
    build_library,
    correction_vector,
    predict_multi,
    predict_next,
    track_regimes,
)
from .sdr import SDR, ScalarEncoderConfig, TemporalPooler, TMConfig, TransitionMemory, encode_scalar, overlap

LORENZ_DT = 0.01
TRANSIENT = 1000


def random_start(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-10, 10, 3) + np.array([0.0, 0.0, 25.0])


def lorenz_series(seed: int, n: int, params: SystemParams = SystemParams(), transient: int = TRANSIENT) -> TimeSeries:
    """``x`` observable of a seeded Lorenz run, transient discarded."""
    traj = integrate(ParameterSchedule.constant(params), random_start(seed), LORENZ_DT, n + transient - 1)
    return TimeSeries(LORENZ_DT, observe(traj, ObservationConfig()).values[transient:])


# integrator order


def rk4_halving_ratio(x0=(1.0, 1.0, 1.0), horizon: float = 1.0, dt: float = 0.01) -> float:
    """Ratio of max errors over the horizon at ``dt`` and ``dt/2``, against a ``dt/8`` reference."""
    n = int(round(horizon / dt))
    ref = integrate(ParameterSchedule.constant(), x0, dt / 8, 8 * n).states[::8]
    coarse = integrate(ParameterSchedule.constant(), x0, dt, n).states
    fine = integrate(ParameterSchedule.constant(), x0, dt / 2, 2 * n).states[::2]
    e_coarse = np.max(np.linalg.norm(coarse - ref, axis=1))
    e_fine = np.max(np.linalg.norm(fine - ref, axis=1))
    return float(e_coarse / e_fine)


# forecast skill


def forecast_nrmse(
    seed: int,
    horizon: int,
    spec: EmbeddingSpec = EmbeddingSpec(18, 3),
    kn: int = 8,
    n_library: int = 5000,
    n_queries: int = 500,
    gap: int = 100,
) -> float:
    """Held-out RMSE of the first coordinate, divided by the series standard deviation.

    The library holds ``n_library`` transitions from the start of the run; queries
    start ``gap`` samples after the last library sample.
    """
    n = n_library + spec.window + horizon + gap + n_queries + horizon + spec.window
    series = lorenz_series(seed, n)
    cloud = delay_embed(series, spec)
    first_query = n_library + spec.window + horizon + gap
    train = cloud.subset(cloud.source_index < n_library + spec.window - 1 + horizon)
    lib = build_library(train, horizon)
    assert len(lib) == n_library
    test = cloud.subset(cloud.source_index >= first_query)
    err = np.empty(n_queries)
    for i in range(n_queries):
        pred = predict_next(lib, test.points[i], kn)
        err[i] = pred.mean[0] - test.points[i + horizon][0]
    return float(np.sqrt(np.mean(err**2)) / np.std(series.values))


# regime tracking


def _labelled_library(seed: int, rho: float, label: int, spec: EmbeddingSpec, horizon: int, n: int) -> TransitionLibrary:
    series = lorenz_series(seed, n, SystemParams(rho=rho))
    cloud = delay_embed(series, spec)
    return build_library(cloud, horizon, labels=np.full(len(series), label))


def _merge(libs) -> TransitionLibrary:
    return TransitionLibrary(
        libs[0].k,
        libs[0].horizon,
        np.vstack([lib.points for lib in libs]),
        np.vstack([lib.displacements for lib in libs]),
        np.concatenate([lib.source_index for lib in libs]),
        np.concatenate([lib.regime_label for lib in libs]),
    )


@dataclass(frozen=True)
class RegimeTrial:
    before: int | None
    flip_step: int | None
    events: tuple


def regime_trial(
    seed: int,
    rho_before: float = 28.0,
    rho_after: float = 35.0,
    spec: EmbeddingSpec = EmbeddingSpec(10, 3),
    horizon: int = 1,
    kn: int = 8,
    decay: float = 0.05,
    n_library: int = 10000,
    switch: int = 10000,
    window: int = 300,
) -> RegimeTrial:
    """Track which regime's predictions come true around a parameter switch.

    The library pairs a labelled run per regime (label 0 before, 1 after). The
    tested stream switches at ``switch``; ``flip_step`` counts post-switch steps
    until the tracker's argmax first reads 1.
    """
    lib = _merge([
        _labelled_library(1000 + seed, rho_before, 0, spec, horizon, n_library),
        _labelled_library(2000 + seed, rho_after, 1, spec, horizon, n_library),
    ])
    schedule = ParameterSchedule.switch(SystemParams(rho=rho_before), SystemParams(rho=rho_after), switch)
    traj = integrate(schedule, random_start(seed), LORENZ_DT, switch + window + horizon + spec.window)
    cloud = delay_embed(observe(traj, ObservationConfig()), spec)
    row = {int(s): i for i, s in enumerate(cloud.source_index)}
    state = RegimeTrackerState(decay)
    before = flip = None
    events = []
    for t in range(switch - window, switch + window):
        modes = predict_multi(lib, cloud.points[row[t]], kn, by_label=True)
        best, _ = correction_vector(modes, cloud.points[row[t + horizon]])
        state = track_regimes(state, modes[best].label)
        events.append((t, state.current, state.credit(state.current)))
        if t == switch - 1:
            before = state.current
        if t >= switch and flip is None and state.current == 1:
            flip = t - switch
    return RegimeTrial(before, flip, tuple(events))


# causality


def logistic_pair(seed: int, n: int = 1000, transient: int = 100, coupling: float = 0.1) -> tuple:
    """Seeded coupled logistic maps; ``x`` drives ``y``."""
    rng = np.random.default_rng(seed)
    x0, y0 = rng.uniform(0.2, 0.8, 2)
    x, y = coupled_logistic(n + transient, x0, y0, coupling=coupling)
    return TimeSeries(1.0, x[transient:]), TimeSeries(1.0, y[transient:])


def ccm_asymmetry(seed: int, library_sizes=(20, 50, 100, 200, 400, 800, 999), spec=EmbeddingSpec(1, 2)) -> tuple:
    """Skill of recovering the driver from the driven system, and of the reverse."""
    x, y = logistic_pair(seed, n=1000)
    driving = ccm_skill(x, y, spec, library_sizes, seed=seed, direction="x_from_y")
    reverse = ccm_skill(y, x, spec, library_sizes, seed=seed, direction="y_from_x")
    return driving, reverse


def noise_l_index(seed: int, n: int = 1000, k: int = 10, spec: EmbeddingSpec = EmbeddingSpec(1, 3)):
    rng = np.random.default_rng(seed)
    a = TimeSeries(1.0, rng.normal(size=n))
    b = TimeSeries(1.0, rng.normal(size=n))
    return l_index(delay_embed(a, spec), delay_embed(b, spec), k)


# SDR stream


def encode_delay(values, cfg: ScalarEncoderConfig, fields: int) -> SDR:
    """Concatenate one scalar code per value into a single SDR of width ``cfg.n``."""
    sub = ScalarEncoderConfig(cfg.min, cfg.max, cfg.n // fields, cfg.w // fields)
    active = set()
    for i, v in enumerate(values):
        code, _ = encode_scalar(sub, v)
        active.update(i * sub.n + b for b in code.active)
    return SDR(cfg.n, frozenset(active))


@dataclass(frozen=True, eq=False)
class PooledStream:
    anomaly: np.ndarray
    pooled_overlap: np.ndarray
    active: tuple
    switch_index: int


def pooled_stream(
    seed: int = 0,
    n_before: int = 8000,
    n_after: int = 3000,
    rho_before: float = 28.0,
    rho_after: float = 35.0,
    tau: int = 18,
    fields: int = 2,
    stride: int = 1,
    encoder: ScalarEncoderConfig = ScalarEncoderConfig(),
    tm: TMConfig = TMConfig(),
    pool_size: int = 40,
    gain: float = 0.5,
    keep_active: bool = False,
) -> PooledStream:
    """Feed the encoded Lorenz ``x`` stream through transition memory and pooler.

    Each input encodes ``x(t), x(t-tau), ...`` (``fields`` values). Step
    ``switch_index`` is the first input drawn after the parameter switch.
    """
    lag = tau * (fields - 1) * stride
    start = TRANSIENT + lag
    switch = start + n_before * stride
    total = switch + n_after * stride
    schedule = ParameterSchedule.switch(SystemParams(rho=rho_before), SystemParams(rho=rho_after), switch)
    x = observe(integrate(schedule, random_start(seed), LORENZ_DT, total), ObservationConfig()).values
    memory = TransitionMemory(tm)
    pooler = TemporalPooler(encoder.n, pool_size=pool_size, gain=gain)
    anomaly, overlaps, active = [], [], []
    prev = None
    for t in range(start, total, stride):
        sdr = encode_delay([x[t - j * tau * stride] for j in range(fields)], encoder, fields)
        out = memory.step(sdr)
        pooled = pooler.step(out)
        anomaly.append(out.anomaly)
        overlaps.append(overlap(pooled, prev) if prev is not None else 0)
        if keep_active:
            active.append(sdr.sorted())
        prev = pooled
    return PooledStream(np.asarray(anomaly), np.asarray(overlaps, dtype=float), tuple(active), n_before)


def pooled_signal(stream: PooledStream, baseline: int = 1000, smooth: int = 20, dip_window: int = 100, recover: int = 2000) -> dict:
    """Drop and recovery of the smoothed consecutive-step pooled self-overlap around the switch."""
    s = stream.switch_index
    ov = stream.pooled_overlap
    pre = float(np.mean(ov[s - baseline : s]))
    kernel = np.ones(smooth) / smooth
    rolled = np.convolve(ov[s : s + dip_window + smooth], kernel, "valid")[: dip_window + 1]
    dip = float(np.min(rolled))
    late = np.convolve(ov[s : s + recover + smooth], kernel, "valid")
    recovered_at = None
    dip_at = int(np.argmin(rolled))
    for i in range(dip_at, late.size):
        if abs(late[i] - pre) <= 0.1 * pre:
            recovered_at = i
            break
    return {
        "pre_mean": pre,
        "dip": dip,
        "drop": 1.0 - dip / pre if pre > 0 else 0.0,
        "recovered_at": recovered_at,
        "anomaly_pre": float(np.mean(stream.anomaly[s - baseline : s])),
        "anomaly_post": float(np.mean(stream.anomaly[s : s + dip_window])),
    }
