"""Monitors and trial statistics.

Snapshots capture the clock phases at a fixed cadence; the clock window is
the narrowest arc of the dial, read forward from some anchor, that holds
every agent's phase. Aggregates collect per-run figures into quantiles.
"""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .phase_clock import max_mod_table


@dataclass
class PhaseSnapshot:
    interaction: int
    ordinary: np.ndarray
    external: np.ndarray | None
    leader_count: int

    def window(self, m: int) -> int:
        return clock_window(self.ordinary, m)


def record_snapshot(population, interaction_index: int) -> PhaseSnapshot | None:
    """Copy the phases of a driver's population; ``None`` if it has no clock."""
    ph = population.phases()
    if ph is None:
        return None
    ordinary, external = ph
    return PhaseSnapshot(
        interaction=interaction_index,
        ordinary=np.array(ordinary, copy=True),
        external=None if external is None else np.array(external, copy=True),
        leader_count=population.leader_count(),
    )


def clock_window(phases, m: int) -> int:
    """Smallest forward arc ``w`` such that, for some anchor ``p``, every phase
    ``q`` has ``p <=_m q`` and ``(q - p) mod m <= w``.

    Returns ``m`` when no anchor qualifies.
    """
    occupied = np.flatnonzero(np.bincount(np.asarray(phases).ravel(), minlength=m))
    table, gaps = _window_tables(m)
    valid = (table[:, occupied] == occupied).all(axis=1)
    if not valid.any():
        return m
    return int(gaps[:, occupied].max(axis=1)[valid].min())


@lru_cache(maxsize=None)
def _window_tables(m: int):
    p = np.arange(m)[:, None]
    q = np.arange(m)[None, :]
    return max_mod_table(m), (q - p) % m


def audit_states(keys: np.ndarray, m: int, fields_subset=None) -> int:
    """Distinct states among the occupied state keys of a run.

    ``fields_subset`` (column indices of the agent record) projects each
    state first; the default counts full states.
    """
    from .leader_election import decode_keys

    keys = np.asarray(keys)
    if fields_subset is None:
        return int(np.unique(keys).shape[0])
    rows = decode_keys(keys, m)[:, list(fields_subset)]
    return int(np.unique(rows, axis=0).shape[0])


def quantiles(values, qs=(0.5, 0.9, 0.99)) -> dict:
    arr = np.sort(np.asarray(values, dtype=np.float64))
    return {q: float(np.quantile(arr, q)) for q in qs}


@dataclass
class TrialAggregate:
    """Per ``(n, variant)`` collections of run statistics."""

    values: dict = field(default_factory=lambda: defaultdict(list))
    violations: dict = field(default_factory=lambda: defaultdict(int))
    trials: dict = field(default_factory=lambda: defaultdict(int))

    QUANTILES = (0.0, 0.5, 0.9, 0.99, 1.0)

    def add(self, report) -> None:
        key = (report.n, report.variant)
        self.trials[key] += 1
        self.violations[key] += len(report.violations)
        v = self.values
        if report.stabilized:
            v[key + ("interactions",)].append(report.interactions_total)
            v[key + ("parallel_time",)].append(report.parallel_time)
        if report.variant in ("junta_only", "fast", "las_vegas"):
            v[key + ("junta_size",)].append(report.junta_size)
            v[key + ("max_level",)].append(report.max_level)
        if report.epidemic_completion is not None:
            v[key + ("epidemic_completion",)].append(report.epidemic_completion)
        ticks = report.stats.get("external_ticks_to_unique")
        if ticks is not None:
            v[key + ("external_ticks_to_unique",)].append(ticks)
        v[key + ("leader_count_final",)].append(report.leader_count_final)

    def rows(self):
        for key in sorted(self.values):
            n, variant, stat = key
            arr = np.sort(np.asarray(self.values[key], dtype=np.float64))
            for q in self.QUANTILES:
                yield n, variant, stat, q, float(np.quantile(arr, q))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "variant", "statistic", "quantile", "value"])
        for row in self.rows():
            w.writerow(row)
        return buf.getvalue()

    def summary(self) -> dict:
        out = {}
        for key in sorted(self.trials):
            n, variant = key
            entry = {"trials": self.trials[key], "violations": self.violations[key]}
            for (kn, kv, stat), vals in self.values.items():
                if (kn, kv) == key:
                    arr = np.asarray(vals, dtype=np.float64)
                    entry[stat] = {"mean": float(arr.mean()),
                                   **{f"q{q:g}": float(np.quantile(arr, q))
                                      for q in self.QUANTILES}}
            out[f"{variant}/n={n}"] = entry
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)
