"""Population, uniform random scheduler and the main interaction loop."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

VARIANTS = ("fast", "las_vegas", "epidemic_only", "junta_only", "clock_only", "slow_only")
ELECTION_VARIANTS = ("fast", "las_vegas", "slow_only")

RNG_ALGORITHM = "PCG64 (numpy.random.Generator, XSL-RR 128/64), bounded integers via Lemire"

CSV_COLUMNS = (
    "seed", "n", "m", "k", "variant", "interactions_total", "parallel_time",
    "stabilized", "leader_count_final", "junta_size", "max_level",
    "distinct_states_observed",
)


class ConfigError(ValueError):
    pass


class CapReached(RuntimeError):
    """The stabilization predicate did not fire within ``max_interactions``."""


class Interaction(NamedTuple):
    responder: int
    initiator: int


def log2_ceil(n: int) -> int:
    return max(1, math.ceil(math.log2(n)))


def loglog_ceil(n: int) -> int:
    return max(1, math.ceil(math.log2(max(2.0, math.log2(n)))))


def default_level_cap(n: int) -> int:
    return loglog_ceil(n) + 6


def default_max_interactions(n: int, variant: str) -> int:
    lg = log2_ceil(n)
    if variant in ("epidemic_only", "junta_only"):
        return 50 * n * lg
    if variant == "las_vegas":
        # room for the two-state backstop, which needs about n**2 interactions
        return 200 * n * lg * lg + 10 * n * n
    return 200 * n * lg * lg


@dataclass(frozen=True)
class SimConfig:
    n: int
    variant: str = "las_vegas"
    m: int = 16
    k: int = 2
    level_cap: int | None = None
    seed: int = 0
    max_interactions: int | None = None
    snapshot_every: int | None = None
    # clock_only: stop once every agent has this many passes through 0
    clock_passes: int = 20
    # junta_only: per-participant spoiling probability (0 disables)
    spoil_rate: float = 0.0
    audit: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if not 2 <= self.m <= 255:
            raise ConfigError(f"m must lie in [2, 255], got {self.m}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.max_interactions is not None and self.max_interactions < 1:
            raise ConfigError("max_interactions must be >= 1")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")
        if self.level_cap is not None and self.level_cap < 1:
            raise ConfigError("level_cap must be >= 1")
        if not 0.0 <= self.spoil_rate <= 1.0:
            raise ConfigError("spoil_rate must lie in [0, 1]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def epsilon(self) -> float:
        return 3.0 / (3 * self.k + 1)

    @property
    def cap(self) -> int:
        if self.max_interactions is not None:
            return self.max_interactions
        return default_max_interactions(self.n, self.variant)

    @property
    def cadence(self) -> int:
        return self.snapshot_every if self.snapshot_every is not None else self.n

    @property
    def effective_level_cap(self) -> int | None:
        """Level cap in force: always for Las Vegas, only if set otherwise."""
        if self.level_cap is not None:
            return self.level_cap
        if self.variant == "las_vegas":
            return default_level_cap(self.n)
        return None


@dataclass
class RunReport:
    seed: int
    n: int
    m: int
    k: int
    variant: str
    interactions_total: int
    parallel_time: float
    stabilized: bool
    leader_count_final: int
    junta_size: int
    max_level: int
    epidemic_completion: int | None
    leader_trajectory: list[tuple[int, int]] = field(default_factory=list)
    distinct_states_observed: int = 0
    violations: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list, repr=False, compare=False)

    def to_record(self) -> dict:
        rec = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "snapshots"}
        rec["stats"] = dict(self.stats)
        rec["leader_trajectory"] = [list(p) for p in self.leader_trajectory]
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def csv_row(self) -> list:
        rec = self.to_record()
        return [rec[c] for c in CSV_COLUMNS]

    @classmethod
    def from_record(cls, rec: dict) -> "RunReport":
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in rec.items() if k in names}
        kw["leader_trajectory"] = [tuple(p) for p in kw.get("leader_trajectory", [])]
        return cls(**kw)


def parallel_time(interactions: int, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return interactions / n


def chunk_size(n: int) -> int:
    return int(min(1 << 16, max(1 << 9, 16 * n)))


class Scheduler:
    """Uniform random scheduler over ordered (responder, initiator) pairs.

    Each draw is a single integer uniform on ``[0, n(n-1))``, split into an
    initiator in ``[0, n)`` and a responder slot in ``[0, n-1)`` that skips
    the initiator, so every ordered pair of distinct agents is equally likely. Draws are generated in chunks
    whose size depends only on ``n``, so the stream for a given ``(n, seed)``
    is fixed whether it is consumed one draw or one chunk at a time.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, n: int, seed: int):
        if n < 2:
            raise ConfigError(f"n must be >= 2, got {n}")
        self.n = n
        self.chunk = chunk_size(n)
        self._pairs = n * (n - 1)
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._buf: tuple[np.ndarray, np.ndarray] | None = None
        self._pos = 0

    def next_chunk(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(responders, initiators)`` for the next chunk of draws."""
        if self._buf is not None and self._pos < self.chunk:
            resp, init = self._buf
            out = resp[self._pos:], init[self._pos:]
            self._buf = None
            return out
        self._buf = None
        # one draw per ordered pair: u = initiator * (n - 1) + responder slot
        u = self._rng.integers(0, self._pairs, size=self.chunk, dtype=np.int64)
        init, resp = np.divmod(u, self.n - 1)
        resp += resp >= init
        return resp, init

    def draw(self) -> Interaction:
        if self._buf is None or self._pos >= self.chunk:
            self._buf = self.next_chunk()
            self._pos = 0
        resp, init = self._buf
        out = Interaction(int(resp[self._pos]), int(init[self._pos]))
        self._pos += 1
        return out


def draw_interaction(scheduler: Scheduler) -> Interaction:
    return scheduler.draw()


def trial_seed(base_seed: int, index: int) -> int:
    """Seed of trial ``index`` in a batch: ``(base_seed + index) mod 2**64``.

    Distinct for every index below ``2**64``; each seed is expanded by
    numpy's SeedSequence, so neighbouring seeds give unrelated streams.
    """
    return (base_seed + index) % (1 << 64)


def _run_quiet(args):
    config, monitors = args
    report = run(config, monitors=monitors)
    report.snapshots = []
    return report


def run_trials(configs, *, threads: int | None = None, monitors: bool = True) -> list[RunReport]:
    """Run every config; reports come back in input order.

    ``threads`` caps the worker processes (default ``POPSIM_THREADS`` or 1).
    """
    configs = list(configs)
    if threads is None:
        threads = int(os.environ.get("POPSIM_THREADS", "1") or 1)
    if threads <= 1 or len(configs) <= 1:
        return [_run_quiet((c, monitors)) for c in configs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_quiet, [(c, monitors) for c in configs],
                             chunksize=max(1, len(configs) // (4 * threads))))


def make_driver(config: SimConfig):
    from .epidemic import EpidemicDriver
    from .junta import JuntaDriver
    from .leader_election import LeaderElectionDriver, SlowDriver
    from .phase_clock import ClockDriver

    drivers = {
        "epidemic_only": EpidemicDriver,
        "junta_only": JuntaDriver,
        "clock_only": ClockDriver,
        "slow_only": SlowDriver,
        "fast": LeaderElectionDriver,
        "las_vegas": LeaderElectionDriver,
    }
    return drivers[config.variant](config)


def run(config: SimConfig, *, strict: bool = False, keep_snapshots: bool = False,
        monitors: bool = True) -> RunReport:
    """Simulate ``config`` until its stabilization predicate holds or the cap.

    With ``strict`` a run that hits the interaction cap raises
    :class:`CapReached` instead of returning a report flagged unstabilized.
    ``monitors=False`` skips the periodic snapshots; protocol-derived fields
    of the report are unaffected.
    """
    from .analysis import clock_window, record_snapshot

    driver = make_driver(config)
    sched = Scheduler(config.n, config.seed)
    cap = config.cap
    every = config.cadence
    t = 0
    done = driver.done
    next_snap = every
    snapshots = []
    windows = []
    trajectory = [(0, driver.leader_count())]
    while not done and t < cap:
        resp, init = sched.next_chunk()
        lo = 0
        size = resp.shape[0]
        while lo < size and not done and t < cap:
            hi = min(size, lo + (cap - t))
            if monitors:
                hi = min(hi, lo + (next_snap - t))
            used, done = driver.advance(resp, init, lo, hi, t)
            t += used
            lo += used
            if monitors and t == next_snap:
                phases = driver.phases()
                if phases is not None:
                    windows.append(clock_window(phases[0], config.m))
                    if keep_snapshots:
                        snapshots.append(record_snapshot(driver, t))
                trajectory.append((t, driver.leader_count()))
                driver.check(t)
                next_snap += every
    if trajectory[-1][0] != t:
        trajectory.append((t, driver.leader_count()))
    report = RunReport(
        seed=config.seed, n=config.n, m=config.m, k=config.k, variant=config.variant,
        interactions_total=t, parallel_time=parallel_time(t, config.n),
        stabilized=bool(done), leader_count_final=driver.leader_count(),
        junta_size=0, max_level=0, epidemic_completion=None,
        leader_trajectory=trajectory,
    )
    driver.fill(report)
    report.violations = list(driver.violations) + report.violations
    if monitors and windows:
        report.stats["max_clock_window"] = int(max(windows))
    report.snapshots = snapshots
    if not done:
        msg = f"CapReached: no stabilization within {cap} interactions"
        report.violations.append(msg)
        if strict:
            raise CapReached(msg)
    return report
