"""Forming_junta: shrink n active agents to a small junta at the top level.

Every agent starts at ``(level, active) = (0, 1)``. Two fresh agents meeting
split into a winner at level 1 (the initiator) and a loser frozen at level 0.
Above level 0 an active responder climbs one level when the initiator is at
least as high and freezes otherwise. Frozen agents never move again. The
agents left on the highest level form the junta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


class SpoilAtMaxLevel(ValueError):
    """An agent on the population's maximum level may not be spoiled."""


class NotStabilized(RuntimeError):
    """Some agent is still active."""


@dataclass(frozen=True)
class JuntaState:
    level: int = 0
    active: int = 1

    def __post_init__(self):
        if self.active not in (0, 1):
            raise ValueError(f"active must be 0 or 1, got {self.active}")
        if self.level < 0:
            raise ValueError(f"level must be non-negative, got {self.level}")


def junta_step(responder: JuntaState, initiator: JuntaState,
               level_cap: int | None = None) -> tuple[JuntaState, JuntaState]:
    """One interaction; returns ``(responder', initiator')``.

    A fresh agent ``(0, 1)`` resolves on its first interaction in either
    role. Above level 0 only the responder moves. With ``level_cap`` an agent
    that would climb past the cap freezes there instead.
    """
    fresh = JuntaState(0, 1)
    if responder == fresh and initiator == fresh:
        return JuntaState(0, 0), JuntaState(1, 1)
    new_init = JuntaState(0, 0) if initiator == fresh else initiator
    if responder == fresh:
        new_resp = JuntaState(0, 0)
    elif not responder.active:
        new_resp = responder
    elif responder.level <= initiator.level:
        if level_cap is not None and responder.level >= level_cap:
            new_resp = JuntaState(responder.level, 0)
        else:
            new_resp = JuntaState(responder.level + 1, 1)
    else:
        new_resp = JuntaState(responder.level, 0)
    return new_resp, new_init


def spoil(state: JuntaState, global_max_level: int) -> JuntaState:
    if state.level >= global_max_level and state != JuntaState(0, 0):
        raise SpoilAtMaxLevel(
            f"agent at level {state.level} is on the maximum level {global_max_level}")
    return JuntaState(0, 0)


def junta_members(levels, active) -> tuple[int, int]:
    """``(max_level, member_count)`` of a stabilized population."""
    levels = np.asarray(levels)
    if np.any(np.asarray(active) != 0):
        raise NotStabilized("some agents are still active")
    top = int(levels.max())
    return top, int(np.count_nonzero(levels == top))


@numba.njit(cache=True)
def junta_kernel(level, active, reached, resp, init, lo, hi, n_active, top,
                 cap, spoil_u, spoil_rate):
    """Forming_junta on interactions ``lo:hi``.

    ``reached[l]`` counts agents that ever reached level ``l``. ``cap < 0``
    disables the level cap. ``spoil_u`` holds two uniforms per interaction
    (responder, initiator) used for spoiling when ``spoil_rate > 0``.
    Returns ``(consumed, n_active, top)``.
    """
    for j in range(lo, hi):
        r = resp[j]
        i = init[j]
        lr = level[r]
        ar = active[r]
        li = level[i]
        ai = active[i]
        if ar == 1:
            if lr == 0:
                active[r] = 0
                n_active -= 1
                if ai == 1 and li == 0:
                    level[i] = 1
                    reached[1] += 1
                    if top < 1:
                        top = 1
            elif lr <= li:
                if cap >= 0 and lr >= cap:
                    active[r] = 0
                    n_active -= 1
                else:
                    level[r] = lr + 1
                    reached[lr + 1] += 1
                    if lr + 1 > top:
                        top = lr + 1
            else:
                active[r] = 0
                n_active -= 1
        if ai == 1 and li == 0 and not (ar == 1 and lr == 0):
            active[i] = 0
            n_active -= 1
        if spoil_rate > 0.0:
            for a in (r, i):
                u = spoil_u[2 * j] if a == r else spoil_u[2 * j + 1]
                if active[a] == 1 and level[a] < top and u < spoil_rate:
                    level[a] = 0
                    active[a] = 0
                    n_active -= 1
        if n_active == 0:
            return j - lo + 1, n_active, top
    return hi - lo, n_active, top


class JuntaDriver:
    """Standalone Forming_junta, optionally capped and spoiled."""

    MAX_LEVELS = 64

    def __init__(self, config):
        self.n = config.n
        self.level = np.zeros(self.n, dtype=np.int16)
        self.active = np.ones(self.n, dtype=np.int8)
        self.reached = np.zeros(self.MAX_LEVELS, dtype=np.int64)
        self.reached[0] = self.n
        self.n_active = self.n
        self.top = 0
        cap = config.effective_level_cap
        self.cap = -1 if cap is None else min(cap, self.MAX_LEVELS - 2)
        self.spoil_rate = float(config.spoil_rate)
        seq = np.random.SeedSequence([config.seed, 0x5B011])
        self._spoil_rng = np.random.Generator(np.random.PCG64(seq))
        self._empty = np.zeros(0)
        self.done = False
        self.stabilized_at = None
        self.violations: list[str] = []

    def advance(self, resp, init, lo, hi, t0):
        if self.spoil_rate > 0.0:
            u = self._spoil_rng.random(2 * resp.shape[0])
        else:
            u = self._empty
        used, self.n_active, self.top = junta_kernel(
            self.level, self.active, self.reached, resp, init, lo, hi,
            self.n_active, self.top, self.cap, u, self.spoil_rate)
        self.done = self.n_active == 0
        if self.done:
            self.stabilized_at = t0 + used
        return used, self.done

    def leader_count(self) -> int:
        return int(np.count_nonzero(self.level == self.level.max()))

    def phases(self):
        return None

    def check(self, t: int) -> None:
        b = self.reached[1:self.top + 1]
        if np.any(np.diff(b) > 0):
            self.violations.append(f"t={t}: level watermarks not monotone: {b.tolist()}")

    def level_watermarks(self) -> np.ndarray:
        return self.reached[:self.top + 1].copy()

    def fill(self, report) -> None:
        report.max_level = int(self.level.max())
        report.junta_size = int(np.count_nonzero(self.level == report.max_level))
        if self.done:
            report.max_level, report.junta_size = junta_members(self.level, self.active)
        pairs = set(zip(self.level.tolist(), self.active.tolist()))
        # every level below the top was occupied while active at some point
        report.distinct_states_observed = int(
            len(pairs | {(l, 1) for l in range(self.top + 1)}))
        report.stats["level_watermarks"] = self.level_watermarks().tolist()
