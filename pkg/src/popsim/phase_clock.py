"""Modular phase arithmetic and the junta-driven phase clock.

Phases live in Z_m. The circular maximum treats two phases more than half a
dial apart as having wrapped around, so the numerically smaller one is
"ahead". Leaders push the clock forward by copying the initiator's phase plus
one; followers copy the maximum.

The scalar helpers are plain Python; ``*_nb`` twins compiled from the same
source are used inside the simulation kernels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

FOLLOWER = 0
LEADER = 1

CIRCULAR = 0
CAPPED = 1


@dataclass(frozen=True)
class ClockState:
    phase: int
    role: int = FOLLOWER


@dataclass
class ClockFlags:
    """Per-agent bookkeeping for the external clock.

    ``meaningful_pending`` is raised when the ordinary clock passes through 0
    and consumed by the owner's next valid interaction as responder; at most
    one tick is ever held. ``alarm`` makes every responder interaction
    meaningful and never clears.
    """

    meaningful_pending: bool = False
    alarm: bool = False


def add_mod(x: int, d: int, m: int) -> int:
    return (x + d) % m


def max_mod(x: int, y: int, m: int) -> int:
    if abs(x - y) * 2 <= m:
        return x if x > y else y
    return x if x < y else y


def leq_mod(x: int, y: int, m: int) -> bool:
    return max_mod(x, y, m) == y


def passed_zero(old_phase: int, new_phase: int) -> bool:
    return new_phase < old_phase


def combine(x: int, role: int, y: int, m: int, mode_max: int) -> int:
    """Phase of an agent at ``x`` after responding to an initiator at ``y``.

    In capped mode the dial does not wrap: the plain maximum is used and a
    leader's increment saturates at ``m - 1``.
    """
    if mode_max == CAPPED:
        target = y + 1 if role == LEADER else y
        if target > m - 1:
            target = m - 1
        return x if x > target else target
    target = (y + 1) % m if role == LEADER else y
    if abs(x - target) * 2 <= m:
        return x if x > target else target
    return x if x < target else target


def clock_update(responder: ClockState, initiator_phase: int, m: int,
                 mode_max: int = CIRCULAR) -> int:
    return combine(responder.phase, responder.role, initiator_phase, m, mode_max)


def forward_distance(x: int, y: int, m: int) -> int:
    """Number of forward steps from ``x`` to ``y`` on the dial."""
    return (y - x) % m


combine_nb = numba.njit(cache=True, inline="always")(combine)
max_mod_nb = numba.njit(cache=True, inline="always")(max_mod)


def max_mod_table(m: int) -> np.ndarray:
    """``m x m`` table of :func:`max_mod`."""
    x = np.arange(m)[:, None]
    y = np.arange(m)[None, :]
    return np.where(np.abs(x - y) * 2 <= m, np.maximum(x, y), np.minimum(x, y))


def seeded_leader_count(n: int, k: int) -> int:
    """Size of a junta of ``n**(1 - eps)`` leaders with ``eps = 3/(3k+1)``."""
    eps = 3.0 / (3 * k + 1)
    return max(1, int(np.ceil(n ** (1.0 - eps))))


@numba.njit(cache=True)
def clock_kernel(phase, lifted, role, passes, last_pass, min_gap, max_gap,
                 occupied, resp, init, lo, hi, t0, m, target_passes, done_count, void):
    """Ordinary-mode clock on the interactions ``lo:hi`` of a chunk.

    ``lifted`` accumulates each agent's forward motion without wrapping.
    ``void`` (empty to disable) marks interactions that are dropped. Stops
    early once every agent has ``target_passes`` passes through 0; returns
    ``(consumed, done_count)``.
    """
    n = phase.shape[0]
    use_void = void.shape[0] > 0
    for j in range(lo, hi):
        if use_void and void[j]:
            continue
        r = resp[j]
        old = phase[r]
        new = combine_nb(old, role[r], phase[init[j]], m, 0)
        if new == old:
            continue
        phase[r] = new
        occupied[new, role[r]] = 1
        lifted[r] += (new - old) % m
        if new < old:
            t = t0 + (j - lo) + 1
            if passes[r] > 0:
                gap = t - last_pass[r]
                if gap < min_gap[r]:
                    min_gap[r] = gap
                if gap > max_gap[r]:
                    max_gap[r] = gap
            passes[r] += 1
            last_pass[r] = t
            if passes[r] == target_passes:
                done_count += 1
                if done_count == n:
                    return j - lo + 1, done_count
    return hi - lo, done_count


@numba.njit(cache=True)
def paired_clock_kernel(phase_a, lifted_a, role_a, phase_b, lifted_b, role_b,
                        resp, init, void_b, m):
    """Advance a reference clock (a) and a perturbed twin (b) on one stream.

    Returns the number of interactions after which some responder in ``b``
    was ahead of its counterpart in ``a`` (lifted phases), or -1 if never.
    """
    for j in range(resp.shape[0]):
        r = resp[j]
        i = init[j]
        old = phase_a[r]
        new = combine_nb(old, role_a[r], phase_a[i], m, 0)
        phase_a[r] = new
        lifted_a[r] += (new - old) % m
        if not void_b[j]:
            old = phase_b[r]
            new = combine_nb(old, role_b[r], phase_b[i], m, 0)
            phase_b[r] = new
            lifted_b[r] += (new - old) % m
        if lifted_b[r] > lifted_a[r]:
            return j + 1
    return -1


def paired_clock_run(n: int, m: int, k: int, seed: int, *, demote_fraction: float = 0.0,
                     void_fraction: float = 0.0, revolutions: int = 20) -> int:
    """Run a seeded clock and a perturbed twin on one interaction stream.

    The twin loses ``demote_fraction`` of the seeded leaders (chosen at
    random) and skips each interaction with probability ``void_fraction``.
    Runs until every agent of the reference clock has advanced
    ``revolutions * m`` phases. Returns the 1-based index of the first
    interaction after which a twin agent was ahead of its reference copy,
    or -1.
    """
    from .engine import Scheduler

    sched = Scheduler(n, seed)
    perturb = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xC10C])))
    leaders = seeded_leader_count(n, k)
    role_a = np.zeros(n, dtype=np.int8)
    role_a[:leaders] = LEADER
    role_b = role_a.copy()
    if demote_fraction > 0.0:
        drop = perturb.choice(leaders, size=int(round(demote_fraction * leaders)), replace=False)
        role_b[drop] = FOLLOWER
    phase_a = np.zeros(n, dtype=np.int16)
    phase_b = np.zeros(n, dtype=np.int16)
    lifted_a = np.zeros(n, dtype=np.int64)
    lifted_b = np.zeros(n, dtype=np.int64)
    t = 0
    target = revolutions * m
    while lifted_a.min() < target:
        resp, init = sched.next_chunk()
        void = (perturb.random(resp.shape[0]) < void_fraction if void_fraction > 0.0
                else np.zeros(resp.shape[0], dtype=np.bool_))
        hit = paired_clock_kernel(phase_a, lifted_a, role_a, phase_b, lifted_b, role_b,
                                  resp, init, void, m)
        if hit >= 0:
            return t + hit
        t += resp.shape[0]
    return -1


class ClockDriver:
    """Ordinary-mode clock with a seeded junta of ``n**(1-eps)`` leaders at phase 0.

    Stabilizes once every agent has completed ``clock_passes`` passes
    through 0.
    """

    def __init__(self, config):
        n = self.n = config.n
        self.m = config.m
        self.target = config.clock_passes
        self.phase = np.zeros(n, dtype=np.int16)
        self.lifted = np.zeros(n, dtype=np.int64)
        self.role = np.zeros(n, dtype=np.int8)
        self.leaders = seeded_leader_count(n, config.k)
        self.role[: self.leaders] = LEADER
        self.passes = np.zeros(n, dtype=np.int64)
        self.last_pass = np.zeros(n, dtype=np.int64)
        self.min_gap = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        self.max_gap = np.zeros(n, dtype=np.int64)
        self.occupied = np.zeros((self.m, 2), dtype=np.uint8)
        self.occupied[0, np.unique(self.role)] = 1
        self.done_count = 0
        self.done = self.target <= 0
        self._void = np.zeros(0, dtype=np.bool_)
        self.violations: list[str] = []

    def advance(self, resp, init, lo, hi, t0):
        used, self.done_count = clock_kernel(
            self.phase, self.lifted, self.role, self.passes, self.last_pass,
            self.min_gap, self.max_gap, self.occupied, resp, init, lo, hi, t0, self.m,
            self.target, self.done_count, self._void)
        self.done = self.done_count == self.n
        return used, self.done

    def leader_count(self) -> int:
        return self.leaders

    def phases(self):
        return self.phase, None

    def check(self, t: int) -> None:
        pass

    def fill(self, report) -> None:
        report.junta_size = self.leaders
        report.distinct_states_observed = int(self.occupied.sum())
        seen = self.passes >= 2
        report.stats.update(
            leaders=self.leaders,
            min_passes=int(self.passes.min()),
            min_pass_gap=int(self.min_gap[seen].min()) if seen.any() else None,
            max_pass_gap=int(self.max_gap[seen].max()) if seen.any() else None,
        )
