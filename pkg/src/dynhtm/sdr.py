"""Sparse distributed representations, a transition memory and a temporal pooler.

The transition memory is a two-phase cell/column sequence learner: columns whose
cells were depolarised by a learned distal segment activate only those cells,
every other active column bursts. Bursting columns are the correction signal
reported as the anomaly score and fed to the pooler.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from itertools import chain

import numpy as np

from .errors import InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class SDR:
    width: int
    active: frozenset

    def __post_init__(self):
        active = frozenset(int(i) for i in self.active)
        if active and (min(active) < 0 or max(active) >= self.width):
            raise InvalidInputError(f"active bits must lie in [0, {self.width})")
        object.__setattr__(self, "active", active)

    def __len__(self):
        return len(self.active)

    def sorted(self) -> list:
        return sorted(self.active)

    @property
    def sparsity(self) -> float:
        return len(self.active) / self.width


def overlap(a: SDR, b: SDR) -> int:
    if a.width != b.width:
        raise InvalidInputError(f"width mismatch: {a.width} vs {b.width}")
    return len(a.active & b.active)


def kwta(scores, k: int) -> SDR:
    """The ``k`` highest scores; equal scores prefer the lower index."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    n = scores.size
    if not 1 <= k <= n:
        raise InvalidParameterError(f"k must lie in [1, {n}], got {k}")
    order = np.lexsort((np.arange(n), -scores))
    return SDR(n, frozenset(order[:k].tolist()))


@dataclass(frozen=True)
class ScalarEncoderConfig:
    min: float = -25.0
    max: float = 25.0
    n: int = 2048
    w: int = 40

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or not self.min < self.max:
            raise InvalidParameterError("encoder needs finite min < max")
        if not 1 <= self.w < self.n:
            raise InvalidParameterError("encoder needs 1 <= w < n")


def encode_scalar(cfg: ScalarEncoderConfig, v: float) -> tuple:
    """``w`` contiguous bits whose start moves linearly with ``v``; returns ``(sdr, clamped)``."""
    if not math.isfinite(v):
        raise InvalidInputError(f"cannot encode non-finite value {v}")
    clamped = not cfg.min <= v <= cfg.max
    v = min(cfg.max, max(cfg.min, v))
    start = math.floor((v - cfg.min) / (cfg.max - cfg.min) * (cfg.n - cfg.w))
    start = min(start, cfg.n - cfg.w)
    return SDR(cfg.n, frozenset(range(start, start + cfg.w))), clamped


@dataclass(frozen=True)
class TMConfig:
    columns: int = 2048
    cells_per_column: int = 8
    activation_threshold: int = 13
    learning_threshold: int = 10
    connected_permanence: float = 0.5
    initial_permanence: float = 0.55
    permanence_increment: float = 0.1
    permanence_decrement: float = 0.02
    predicted_segment_decrement: float = 0.0
    max_new_synapses: int = 20
    max_synapses_per_segment: int = 32
    max_segments_per_cell: int = 128
    seed: int = 42

    def __post_init__(self):
        if self.columns < 1 or self.cells_per_column < 1:
            raise InvalidParameterError("columns and cells_per_column must be positive")
        if self.learning_threshold > self.activation_threshold:
            raise InvalidParameterError("learning_threshold must not exceed activation_threshold")
        for name in ("connected_permanence", "initial_permanence"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidParameterError(f"{name} must lie in [0, 1]")
        if self.max_new_synapses > self.max_synapses_per_segment:
            raise InvalidParameterError("max_new_synapses must not exceed max_synapses_per_segment")


@dataclass
class Segment:
    cell: int
    synapses: dict = field(default_factory=dict)
    last_used: int = 0


@dataclass(frozen=True)
class TMStepOutput:
    active_columns: frozenset
    active_cells: frozenset
    winner_cells: frozenset
    predictive_cells: frozenset
    bursting_columns: frozenset
    anomaly: float

    @property
    def predicted_columns(self) -> frozenset:
        return self.active_columns - self.bursting_columns


class TransitionMemory:
    """Learns which input SDR follows which, in the context of the preceding ones."""

    def __init__(self, config: TMConfig | None = None):
        self.config = config or TMConfig()
        self.rng = random.Random(self.config.seed)
        self.segments: dict[int, Segment] = {}
        self.cell_segments: dict[int, list] = {}
        self.presynaptic: dict[int, set] = {}
        # segments on which a presynaptic cell's synapse is currently connected
        self.connected: dict[int, set] = {}
        self._next_segment = 0
        self.iteration = 0
        self.active_cells: frozenset = frozenset()
        self.winner_cells: frozenset = frozenset()
        self.active_segments: list = []
        self.matching_segments: dict = {}

    @property
    def n_cells(self) -> int:
        return self.config.columns * self.config.cells_per_column

    def column_of(self, cell: int) -> int:
        return cell // self.config.cells_per_column

    @property
    def predictive_cells(self) -> frozenset:
        return frozenset(self.segments[s].cell for s in self.active_segments)

    def reset(self):
        """Forget the sequence context; learned segments are kept."""
        self.active_cells = frozenset()
        self.winner_cells = frozenset()
        self.active_segments = []
        self.matching_segments = {}

    def permanences(self):
        for seg in self.segments.values():
            yield from seg.synapses.values()

    def step(self, active_columns, learn: bool = True) -> TMStepOutput:
        cfg = self.config
        if isinstance(active_columns, SDR):
            if active_columns.width != cfg.columns:
                raise InvalidInputError(f"input width {active_columns.width} != {cfg.columns} columns")
            active_columns = active_columns.active
        columns = frozenset(int(c) for c in active_columns)
        if columns and (min(columns) < 0 or max(columns) >= cfg.columns):
            raise InvalidInputError("active column out of range")

        prev_active = self.active_cells
        prev_winners = self.winner_cells
        by_column_active: dict[int, list] = {}
        for s in self.active_segments:
            by_column_active.setdefault(self.column_of(self.segments[s].cell), []).append(s)
        by_column_matching: dict[int, list] = {}
        for s, n in self.matching_segments.items():
            by_column_matching.setdefault(self.column_of(self.segments[s].cell), []).append(s)

        active_cells, winner_cells, bursting = set(), set(), set()
        c = cfg.cells_per_column
        for col in sorted(columns):
            segs = by_column_active.get(col)
            if segs:
                for s in segs:
                    active_cells.add(self.segments[s].cell)
                    winner_cells.add(self.segments[s].cell)
                    if learn:
                        self._adapt(s, prev_active)
                        self._grow(s, prev_winners, cfg.max_new_synapses - self.matching_segments.get(s, 0))
                continue
            bursting.add(col)
            active_cells.update(range(col * c, (col + 1) * c))
            matching = by_column_matching.get(col)
            if matching:
                best = max(matching, key=lambda s: (self.matching_segments[s], -s))
                winner_cells.add(self.segments[best].cell)
                if learn:
                    self._adapt(best, prev_active)
                    self._grow(best, prev_winners, cfg.max_new_synapses - self.matching_segments[best])
            else:
                cell = self._least_used_cell(col)
                winner_cells.add(cell)
                if learn and prev_winners:
                    seg = self._create_segment(cell)
                    self._grow(seg, prev_winners, cfg.max_new_synapses)

        if learn and cfg.predicted_segment_decrement > 0:
            for s, n in list(self.matching_segments.items()):
                if s in self.segments and self.column_of(self.segments[s].cell) not in columns:
                    self._adapt(s, prev_active, inc=-cfg.predicted_segment_decrement, dec=0.0)

        self.active_cells = frozenset(active_cells)
        self.winner_cells = frozenset(winner_cells)
        self._compute_activity()
        self.iteration += 1
        anomaly = len(bursting) / len(columns) if columns else 0.0
        return TMStepOutput(
            columns, self.active_cells, self.winner_cells, self.predictive_cells, frozenset(bursting), anomaly
        )

    def _compute_activity(self):
        cfg = self.config
        cells = self.active_cells
        potential = Counter(chain.from_iterable(self.presynaptic.get(c, ()) for c in cells))
        connected = Counter(chain.from_iterable(self.connected.get(c, ()) for c in cells))
        self.active_segments = sorted(s for s, n in connected.items() if n >= cfg.activation_threshold)
        self.matching_segments = {s: n for s, n in potential.items() if n >= cfg.learning_threshold}
        for s in self.active_segments:
            self.segments[s].last_used = self.iteration

    def _least_used_cell(self, col: int) -> int:
        c = self.config.cells_per_column
        cells = range(col * c, (col + 1) * c)
        fewest = min(len(self.cell_segments.get(x, ())) for x in cells)
        candidates = [x for x in cells if len(self.cell_segments.get(x, ())) == fewest]
        return candidates[self.rng.randrange(len(candidates))]

    def _create_segment(self, cell: int) -> int:
        owned = self.cell_segments.setdefault(cell, [])
        if len(owned) >= self.config.max_segments_per_cell:
            stale = min(owned, key=lambda s: (self.segments[s].last_used, s))
            self._destroy_segment(stale)
        sid = self._next_segment
        self._next_segment += 1
        self.segments[sid] = Segment(cell, {}, self.iteration)
        owned.append(sid)
        return sid

    def _destroy_segment(self, sid: int):
        seg = self.segments.pop(sid)
        for pre in seg.synapses:
            self.presynaptic[pre].discard(sid)
            self.connected.get(pre, set()).discard(sid)
        self.cell_segments[seg.cell].remove(sid)
        self.matching_segments.pop(sid, None)

    def _adapt(self, sid: int, prev_active, inc=None, dec=None):
        cfg = self.config
        inc = cfg.permanence_increment if inc is None else inc
        dec = cfg.permanence_decrement if dec is None else dec
        threshold = cfg.connected_permanence
        seg = self.segments[sid]
        dead = []
        for pre, old in seg.synapses.items():
            perm = old + inc if pre in prev_active else old - dec
            perm = min(1.0, max(0.0, perm))
            seg.synapses[pre] = perm
            if perm <= 0.0:
                dead.append(pre)
            elif (perm >= threshold) != (old >= threshold):
                if perm >= threshold:
                    self.connected.setdefault(pre, set()).add(sid)
                else:
                    self.connected[pre].discard(sid)
        for pre in dead:
            del seg.synapses[pre]
            self.presynaptic[pre].discard(sid)
            self.connected.get(pre, set()).discard(sid)
        seg.last_used = self.iteration

    def _grow(self, sid: int, prev_winners, n: int):
        seg = self.segments[sid]
        n = min(n, self.config.max_synapses_per_segment - len(seg.synapses))
        if n <= 0:
            return
        candidates = sorted(c for c in prev_winners if c not in seg.synapses)
        if len(candidates) > n:
            candidates = sorted(self.rng.sample(candidates, n))
        perm = self.config.initial_permanence
        for pre in candidates:
            seg.synapses[pre] = perm
            self.presynaptic.setdefault(pre, set()).add(sid)
            if perm >= self.config.connected_permanence:
                self.connected.setdefault(pre, set()).add(sid)


def tm_step(state: TransitionMemory, sdr: SDR, learn: bool = True) -> TMStepOutput:
    return state.step(sdr, learn)


class TemporalPooler:
    """Slowly changing SDR over a run of correctly predicted inputs.

    Pooled bits on correctly predicted columns gain persistence. Each step,
    ``ceil(gain * anomaly * |pooled|)`` of the least persistent pooled bits give
    way to the strongest bursting columns, so prediction failures partially
    release the old pool and start pooling the new transitions.
    """

    def __init__(self, width: int, pool_size: int = 40, gain: float = 0.5, persistence_cap: int = 100,
                 candidate_decay: float = 0.9):
        if not 1 <= pool_size <= width:
            raise InvalidParameterError("pool_size must lie in [1, width]")
        if not 0 <= gain <= 1:
            raise InvalidParameterError("gain must lie in [0, 1]")
        self.width = width
        self.pool_size = pool_size
        self.gain = gain
        self.persistence_cap = persistence_cap
        self.candidate_decay = candidate_decay
        self.pooled: set = set()
        self.persistence = np.zeros(width, dtype=np.int64)
        self.candidate_score = np.zeros(width)

    def _top_candidates(self, pool, n):
        pool = [c for c in pool if c not in self.pooled]
        pool.sort(key=lambda c: (-self.candidate_score[c], c))
        return pool[:n]

    def step(self, out: TMStepOutput) -> SDR:
        cols = out.active_columns
        if cols and max(cols) >= self.width:
            raise InvalidInputError(f"column index exceeds pooler width {self.width}")
        for col in self.pooled & out.predicted_columns:
            self.persistence[col] = min(self.persistence_cap, self.persistence[col] + 1)
        self.candidate_score *= self.candidate_decay
        for col in out.bursting_columns:
            self.candidate_score[col] += 1.0

        n_replace = math.ceil(self.gain * out.anomaly * len(self.pooled) - 1e-12)
        incoming = self._top_candidates(list(out.bursting_columns), n_replace)
        if incoming:
            leaving = sorted(self.pooled, key=lambda c: (self.persistence[c], c))[: len(incoming)]
            for col in leaving:
                self.pooled.discard(col)
                self.persistence[col] = 0
            self.pooled.update(incoming)

        if len(self.pooled) < self.pool_size:
            scored = [int(c) for c in np.nonzero(self.candidate_score > 0)[0]]
            pool = list(dict.fromkeys(scored + sorted(cols)))
            self.pooled.update(self._top_candidates(pool, self.pool_size - len(self.pooled)))
        return SDR(self.width, frozenset(self.pooled))


def temporal_pool(state: TemporalPooler, tm_out: TMStepOutput) -> SDR:
    return state.step(tm_out)
