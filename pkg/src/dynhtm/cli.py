"""Command-line front end: seeded, manifest-recorded experiment runs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .causality import ccm_skill, synchrony_test
from .config import ConfigError, ExperimentConfig, config_from_dict, parse_config
from .dynsys import ObservationConfig, ParameterSchedule, SystemParams, coupled_logistic, integrate, observe
from .embedding import EmbeddingSpec, TimeSeries, delay_embed, estimate_k, estimate_tau
from .errors import DynHTMError, InsufficientDataError
from .experiments import encode_delay
from .forecast import (
    RegimeTrackerState,
    TransitionLibrary,
    build_library,
    correction_vector,
    predict_multi,
    track_regimes,
)
from .sdr import ScalarEncoderConfig, TemporalPooler, TMConfig, TransitionMemory, overlap

COMMANDS = ("generate", "embed", "forecast", "regimes", "causality", "htm")


class Run:
    """Output directory bookkeeping for one command invocation."""

    def __init__(self, cfg: ExperimentConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.io.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict = {}
        self.outputs: dict = {}

    def path(self, name: str) -> Path:
        return self.out / name

    def record(self, path: Path):
        self.outputs[path.name] = fio.sha256_file(path)

    def table(self, name, header, rows):
        self.record(fio.write_table(self.path(name), header, rows, self.cfg.io.format))

    def jsonl(self, name, records):
        self.record(fio.write_jsonl(self.path(name), records))

    def json(self, name, obj):
        self.record(fio.write_json(self.path(name), obj))

    def finish(self):
        fio.write_json(self.path("config.json"), self.cfg.to_dict())
        manifest = {
            "command": self.command,
            "seed": self.cfg.seed,
            "version": __version__,
            "config": self.cfg.to_dict(),
            "inputs": self.inputs,
            "outputs": dict(sorted(self.outputs.items())),
        }
        fio.write_json(self.path("manifest.json"), manifest)


# shared stages


def schedule_from(cfg: ExperimentConfig) -> ParameterSchedule:
    s = cfg.system
    current = SystemParams(s.sigma, s.rho, s.beta)
    segments = [(0, current)]
    for seg in cfg.schedule.segments:
        current = SystemParams(
            current.sigma if seg.sigma is None else seg.sigma,
            current.rho if seg.rho is None else seg.rho,
            current.beta if seg.beta is None else seg.beta,
        )
        segments.append((seg.start_step, current))
    return ParameterSchedule(tuple(segments))


def lorenz_run(cfg: ExperimentConfig, schedule: ParameterSchedule | None = None, x0=None):
    s = cfg.system
    schedule = schedule or schedule_from(cfg)
    return integrate(schedule, s.x0 if x0 is None else x0, s.dt, s.n_steps + s.transient, s.method)


def observed(cfg: ExperimentConfig, traj, weights=None, stage="observe") -> TimeSeries:
    obs = ObservationConfig(weights or cfg.observation.weights, cfg.observation.noise_std, cfg.sub_seed(stage))
    values = observe(traj, obs).values[cfg.system.transient :]
    return TimeSeries(traj.dt, values)


def primary_series(cfg: ExperimentConfig, run: Run) -> TimeSeries:
    if cfg.io.input:
        run.inputs[cfg.io.input] = fio.sha256_file(cfg.io.input)
        return fio.read_series(cfg.io.input)
    if cfg.system.kind == "logistic":
        return logistic_series(cfg)[0]
    return observed(cfg, lorenz_run(cfg))


def logistic_series(cfg: ExperimentConfig) -> tuple:
    s = cfg.system
    x0, y0 = np.random.default_rng(cfg.sub_seed("logistic")).uniform(0.2, 0.8, 2)
    x, y = coupled_logistic(s.n_steps + s.transient + 1, x0, y0, coupling=s.coupling)
    return TimeSeries(1.0, x[s.transient :]), TimeSeries(1.0, y[s.transient :])


def resolve_spec(cfg: ExperimentConfig, series: TimeSeries) -> tuple:
    """Embedding parameters from the config, estimating any left null."""
    e = cfg.embedding
    tau = e.tau if e.tau is not None else estimate_tau(series, min(e.max_lag, len(series) // 4))
    info = {"tau": tau, "tau_estimated": e.tau is None}
    if e.k is not None:
        k = e.k
        info.update(k=k, k_estimated=False)
    else:
        est = estimate_k(series, tau, e.k_max)
        k = est.k
        info.update(k=k, k_estimated=True, saturated=est.saturated, false_neighbor_fractions=list(est.fractions))
    return EmbeddingSpec(tau, k), info


# commands


def cmd_generate(cfg: ExperimentConfig, run: Run):
    """Integrate the configured system and write the trajectory and observed series."""
    if cfg.system.kind == "logistic":
        x, y = logistic_series(cfg)
        run.table("series.csv", ["step", "t", "value"], fio.series_rows(x))
        run.table("series_y.csv", ["step", "t", "value"], fio.series_rows(y))
        return
    traj = lorenz_run(cfg)
    t0 = cfg.system.transient
    rows = ((i, i * traj.dt, *traj.states[t0 + i]) for i in range(len(traj) - t0))
    run.table("trajectory.csv", ["step", "t", "x", "y", "z"], rows)
    run.table("series.csv", ["step", "t", "value"], fio.series_rows(observed(cfg, traj)))


def cmd_embed(cfg: ExperimentConfig, run: Run):
    """Delay-embed the observed series, estimating tau and k when unset."""
    series = primary_series(cfg, run)
    spec, info = resolve_spec(cfg, series)
    cloud = delay_embed(series, spec)
    header = ["source_index"] + [f"c{j}" for j in range(cloud.k)]
    run.table("cloud.csv", header, ([int(s), *p] for s, p in zip(cloud.source_index, cloud.points)))
    run.json("embedding.json", info)


def cmd_forecast(cfg: ExperimentConfig, run: Run):
    """Forecast held-out points from a near-neighbour transition library."""
    f = cfg.forecast
    series = primary_series(cfg, run)
    spec, info = resolve_spec(cfg, series)
    cloud = delay_embed(series, spec)
    split = int(len(series) * f.library_fraction)
    train = cloud.subset(cloud.source_index < split)
    test = cloud.subset(cloud.source_index >= split)
    lib = build_library(train, f.horizon)
    row = {int(s): i for i, s in enumerate(test.source_index)}
    queries = [i for i, s in enumerate(test.source_index) if int(s) + f.horizon in row]
    if not queries:
        raise InsufficientDataError(f"no held-out query has a target {f.horizon} steps ahead")
    k = spec.k
    header = ["query_index", "mode", "weight"] + [f"mean_c{j}" for j in range(k)] + [f"spread_c{j}" for j in range(k)]
    rows, err = [], []
    for i in queries:
        src = int(test.source_index[i])
        modes = predict_multi(lib, test.points[i], f.kn, f.gap_factor)
        for m, p in enumerate(modes.modes):
            rows.append([src, m, p.weight, *p.mean, *p.spread])
        err.append(modes[0].mean - test.points[row[src + f.horizon]])
    run.table("predictions.csv", header, rows)
    err = np.asarray(err)
    scale = float(np.std(series.values))
    run.json("forecast.json", {
        **info,
        "horizon": f.horizon,
        "library_size": len(lib),
        "queries": len(queries),
        "nrmse_c0": float(np.sqrt(np.mean(err[:, 0] ** 2)) / scale) if scale > 0 else None,
    })


def cmd_regimes(cfg: ExperimentConfig, run: Run):
    """Track which parameter regime the stream follows."""
    if cfg.io.input or cfg.system.kind != "lorenz":
        raise ConfigError("io.input", "regimes needs a generated Lorenz stream with a schedule")
    f = cfg.forecast
    schedule = schedule_from(cfg)
    traj = lorenz_run(cfg, schedule)
    series = observed(cfg, traj)
    spec, info = resolve_spec(cfg, series)
    labels_full = traj.regime_labels()[cfg.system.transient :]

    # one reference run per segment supplies that regime's transitions
    libs = []
    for label, (_, params) in enumerate(schedule.segments):
        x0 = np.random.default_rng(cfg.sub_seed(f"library{label}")).uniform(-10, 10, 3) + [0, 0, 25]
        ref = lorenz_run(cfg, ParameterSchedule.constant(params), x0)
        ref_series = observed(cfg, ref, stage=f"library{label}")
        libs.append(build_library(delay_embed(ref_series, spec), f.horizon, np.full(len(ref_series), label)))
    lib = TransitionLibrary(
        spec.k, f.horizon,
        np.vstack([m.points for m in libs]), np.vstack([m.displacements for m in libs]),
        np.concatenate([m.source_index for m in libs]), np.concatenate([m.regime_label for m in libs]),
    )
    cloud = delay_embed(series, spec)
    row = {int(s): i for i, s in enumerate(cloud.source_index)}
    state = RegimeTrackerState(f.decay)
    events, agree = [], 0
    for i, src in enumerate(cloud.source_index):
        src = int(src)
        if src + f.horizon not in row:
            break
        modes = predict_multi(lib, cloud.points[i], f.kn, f.gap_factor, by_label=True)
        best, _ = correction_vector(modes, cloud.points[row[src + f.horizon]])
        state = track_regimes(state, modes[best].label)
        events.append({"step": src, "regime": state.current, "credit": state.credit(state.current)})
        agree += state.current == labels_full[src + f.horizon]
    if not events:
        raise InsufficientDataError("stream too short for the embedding and horizon")
    run.jsonl("regimes.jsonl", events)
    run.json("regimes.json", {**info, "steps": len(events), "agreement": agree / len(events)})


def cmd_causality(cfg: ExperimentConfig, run: Run):
    """Rank-index synchrony verdict and cross-map skill curves for two observables."""
    c = cfg.causality
    if cfg.system.kind == "logistic":
        x, y = logistic_series(cfg)
    else:
        traj = lorenz_run(cfg)
        x, y = observed(cfg, traj), observed(cfg, traj, c.y_weights, stage="observe_y")
    n = min(c.n_points, len(x))
    x, y = TimeSeries(x.dt, x.values[:n]), TimeSeries(y.dt, y.values[:n])
    spec, info = resolve_spec(cfg, x)
    cx, cy = delay_embed(x, spec), delay_embed(y, spec)
    result = synchrony_test(cx, cy, c.k, c.theiler_w, c.n_surrogates, cfg.sub_seed("surrogates"), c.min_effect)
    sizes = [s for s in c.library_sizes if s <= len(cx)]
    if len(sizes) != len(c.library_sizes):
        raise InsufficientDataError(f"library sizes exceed the {len(cx)} embedded points")
    # y's reconstruction recovering x is the signature of x driving y
    y_to_x = ccm_skill(x, y, spec, sizes, seed=cfg.sub_seed("ccm"))
    x_to_y = ccm_skill(y, x, spec, sizes, seed=cfg.sub_seed("ccm"))
    run.table(
        "ccm.csv",
        ["library_size", "skill_target_from_source", "skill_source_from_target"],
        zip(y_to_x.library_sizes, y_to_x.skill, x_to_y.skill),
    )
    run.json("verdict.json", {**result.to_dict(), "k": c.k, "embedding": info, "source": "x", "target": "y"})


def cmd_htm(cfg: ExperimentConfig, run: Run):
    """Stream the encoded series through transition memory and the temporal pooler."""
    s = cfg.sdr
    series = primary_series(cfg, run)
    spec, info = resolve_spec(cfg, series)
    enc = ScalarEncoderConfig(s.min, s.max, s.n, s.w)
    tm = TransitionMemory(TMConfig(
        columns=s.n,
        cells_per_column=s.cells_per_column,
        activation_threshold=s.activation_threshold,
        learning_threshold=s.learning_threshold,
        initial_permanence=s.initial_permanence,
        seed=cfg.sub_seed("tm") % (2**31),
    ))
    pooler = TemporalPooler(s.n, pool_size=s.pool_size, gain=s.gain)
    x = series.values
    lag = spec.tau * (s.fields - 1)
    if len(x) <= lag:
        raise InsufficientDataError(f"series of {len(x)} samples is shorter than the encoding lag {lag}")
    records, trace, prev = [], [], None
    for step, t in enumerate(range(lag, len(x))):
        sdr = encode_delay([x[t - j * spec.tau] for j in range(s.fields)], enc, s.fields)
        out = tm.step(sdr)
        pooled = pooler.step(out)
        records.append({"step": t, "active": sdr.sorted()})
        trace.append((t, out.anomaly, overlap(pooled, prev) if prev is not None else 0))
        prev = pooled
    run.jsonl("sdr.jsonl", records)
    run.table("anomaly.csv", ["step", "anomaly", "pooled_overlap"], trace)
    run.json("htm.json", {**info, "fields": s.fields, "steps": len(trace)})


HANDLERS = {
    "generate": cmd_generate,
    "embed": cmd_embed,
    "forecast": cmd_forecast,
    "regimes": cmd_regimes,
    "causality": cmd_causality,
    "htm": cmd_htm,
}


def run(command: str, cfg: ExperimentConfig) -> Run:
    r = Run(cfg, command)
    HANDLERS[command](cfg, r)
    r.finish()
    return r


def replay(manifest_path: Path, out: str | None) -> tuple:
    """Re-run a recorded invocation and compare output digests."""
    manifest = json.loads(Path(manifest_path).read_text())
    cfg = config_from_dict(manifest["config"])
    target = out or str(Path(manifest_path).parent / "replay")
    cfg = cfg.replace(io=type(cfg.io)(cfg.io.input, target, cfg.io.format))
    r = run(manifest["command"], cfg)
    mismatched = sorted(k for k in set(manifest["outputs"]) | set(r.outputs) if manifest["outputs"].get(k) != r.outputs.get(k))
    return r, mismatched


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynhtm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__doc__)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="global seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides io.out)")
        p.add_argument("--format", choices=("csv", "jsonl"), help="tabular output format")
    p = sub.add_parser("replay", help="re-run a manifest and verify byte-identical outputs")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", help="output directory for the re-run (default: <manifest dir>/replay)")
    return parser


def load_config(args) -> ExperimentConfig:
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
    cfg = parse_config(text)
    io = cfg.io
    cfg = cfg.replace(
        seed=cfg.seed if args.seed is None else args.seed,
        io=type(io)(io.input, args.out or io.out, args.format or io.format),
    )
    return config_from_dict(cfg.to_dict())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            r, mismatched = replay(args.manifest, args.out)
            if mismatched:
                print(f"replay differs in: {', '.join(mismatched)}", file=sys.stderr)
                return 1
            print(f"replay identical: {len(r.outputs)} outputs in {r.out}")
            return 0
        run(args.command, load_config(args))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DynHTMError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
