"""Leader election: spoiled Forming_junta, nested phase clocks, coin tossing.

Every agent runs the same script on each interaction, with its own role and
the peer's pre-interaction state; both updates are applied together.

* While ``active`` the agent runs Forming_junta. Followers look like frozen
  level-0 agents to it, which is what spoils the junta.
* After that it runs the clocks of its level. Meeting a higher level resets
  the clocks and makes the agent a follower there.
* The ordinary clock ticks on every valid responder interaction. Each pass
  through 0 flips ``z0`` between ``draw`` and ``spread`` and arms one tick of
  the external clock for the next responder interaction.
* In ``draw`` a leader's first meeting with a follower fixes its coin:
  0 as responder, 1 as initiator. In ``spread`` responders absorb 1s by
  one-way epidemic, and a leader that drew 0 and hears a 1 steps down.
* An agent whose external clock reaches ``m - 1`` has concluded.

The Las Vegas variant caps the external clock instead of wrapping it, caps
the junta levels, raises a population-wide alarm when two agents' ordinary
phases are far apart, and runs an initiator-wins elimination among
``slow_candidate`` agents as a backstop. Terminal fast leaders outrank other
candidates, and a ``leader_seen`` flag spread by epidemic from them lets
the remaining candidates on their level stand down. The result always has
exactly one candidate left.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numba
import numpy as np

from .phase_clock import CAPPED, CIRCULAR, FOLLOWER, LEADER, combine, combine_nb

DRAW = 0
SPREAD = 1
UNSET = -1

# column layout of the population array
LEVEL, ACTIVE, B, X, Y, Z0, Z1, Z2, PEND, ALARM, SLOW, TERM, SEEN = range(13)
NFIELDS = 13
FIELD_NAMES = ("level", "active", "leadership", "ordinary_phase", "external_phase",
               "z0", "z1", "z2", "meaningful_pending", "alarm", "slow_candidate",
               "external_terminal", "leader_seen")

# counters kept by the kernel
(C_ACTIVE, C_TERM, C_LEADER, C_CAND, C_ALARM, C_TOP, C_MAXY, C_FIRST_ALARM,
 C_UNIQUE_T, C_UNIQUE_Y, C_COULD, C_RESURRECT, C_MIN_COULD) = range(13)
NCOUNTERS = 13


@dataclass(frozen=True)
class AgentState:
    level: int = 0
    active: int = 1
    leadership: int = LEADER
    ordinary_phase: int = 0
    external_phase: int = 0
    z0: int = DRAW
    z1: int = UNSET
    z2: int = 0
    meaningful_pending: int = 0
    alarm: int = 0
    slow_candidate: int = 1
    external_terminal: int = 0
    leader_seen: int = 0

    def as_row(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FIELD_NAMES], dtype=np.int16)

    @classmethod
    def from_row(cls, row) -> "AgentState":
        return cls(*(int(v) for v in row))


@dataclass(frozen=True)
class VariantParams:
    mode_max: int = CIRCULAR
    level_cap_enabled: bool = False
    distant_low: float | None = None
    distant_high: float | None = None
    slow_enabled: bool = False
    level_cap: int | None = None

    @classmethod
    def fast(cls) -> "VariantParams":
        return cls()

    @classmethod
    def las_vegas(cls, m: int, level_cap: int) -> "VariantParams":
        return cls(mode_max=CAPPED, level_cap_enabled=True, distant_low=m / 5,
                   distant_high=4 * m / 5, slow_enabled=True, level_cap=level_cap)

    @property
    def cap(self) -> int:
        return self.level_cap if self.level_cap_enabled and self.level_cap is not None else -1


def coin_from_roles(leader_is_responder: bool) -> int:
    return 0 if leader_is_responder else 1


def distant_phases(x: int, x_peer: int, m: int) -> bool:
    """True iff ``x_peer = x +_m a`` with ``m/5 < a < 4m/5``."""
    a = (x_peer - x) % m
    return m < 5 * a < 4 * m


def _tier(s: AgentState) -> int:
    return int(s.slow_candidate == 1 and s.external_terminal == 1
               and s.leadership == LEADER and s.active == 0)


def _participant(me: AgentState, peer: AgentState, is_resp: bool, m: int,
                 params: VariantParams) -> AgentState:
    lv = params.slow_enabled
    if me.active:
        if peer.leadership == LEADER:
            pl, pa = peer.level, peer.active
        else:
            pl, pa = 0, 0
        if me.level == 0:
            if pl == 0 and pa == 1 and not is_resp:
                return replace(me, level=1)
            return replace(me, active=0)
        if not is_resp:
            return me
        if me.level <= pl:
            if params.cap >= 0 and me.level >= params.cap:
                return replace(me, active=0)
            return replace(me, level=me.level + 1)
        return replace(me, active=0)

    if peer.active:
        return me
    s = me
    if lv and peer.alarm:
        s = replace(s, alarm=1)
    same_before = me.level == peer.level
    if me.level < peer.level:
        s = replace(s, level=peer.level, leadership=FOLLOWER, ordinary_phase=0,
                    external_phase=0, z0=DRAW, z1=UNSET, z2=0, meaningful_pending=0,
                    external_terminal=0, leader_seen=0)
    elif me.level > peer.level:
        return s
    # an agent's ordinary phase is compared only once its external clock has
    # ticked on this level, i.e. after its first full revolution here
    if (lv and same_before and me.external_phase > 0 and peer.external_phase > 0
            and distant_phases(me.ordinary_phase, peer.ordinary_phase, m)):
        s = replace(s, alarm=1)
    if is_resp:
        if s.meaningful_pending or s.alarm:
            s = replace(s, meaningful_pending=0)
            if not s.external_terminal:
                old = s.external_phase
                new = combine(old, s.leadership, peer.external_phase, m, params.mode_max)
                if params.mode_max == CIRCULAR and new < old:
                    new = m - 1
                s = replace(s, external_phase=new)
                if new == m - 1:
                    s = replace(s, external_terminal=1)
                    if lv and s.leadership == LEADER:
                        s = replace(s, slow_candidate=1, leader_seen=1)
        old = s.ordinary_phase
        new = combine(old, s.leadership, peer.ordinary_phase, m, CIRCULAR)
        s = replace(s, ordinary_phase=new)
        if new < old:
            s = replace(s, meaningful_pending=1)
            if s.z0 == DRAW:
                s = replace(s, z0=SPREAD, z2=0)
            else:
                s = replace(s, z0=DRAW, z1=UNSET)
    # the coin is tossed after the pass, never in the interaction that makes it
    if (me.z0 == DRAW and s.z0 == DRAW and s.z1 == UNSET and s.leadership == LEADER
            and peer.leadership == FOLLOWER):
        s = replace(s, z1=coin_from_roles(is_resp))
    if s.z0 == SPREAD and is_resp and peer.z0 == SPREAD:
        s = replace(s, z2=max(s.z2, max(peer.z1, 0), peer.z2))
    if (s.z0 == SPREAD and s.leadership == LEADER and s.z1 == 0 and s.z2 == 1
            and not s.external_terminal):
        s = replace(s, leadership=FOLLOWER)
    if lv and peer.leader_seen:
        s = replace(s, leader_seen=1)
    return s


def slow_step(responder: AgentState, initiator: AgentState) -> tuple[AgentState, AgentState]:
    """Backstop elimination among ``slow_candidate`` agents.

    Two candidates meeting: the one on the lower level loses; on one level a
    terminal fast leader beats any other candidate; otherwise the initiator
    wins. A terminal fast leader beaten this way also stops being a leader.
    Candidates that carry ``leader_seen`` and are not terminal fast leaders
    stand down.
    """
    r, i = responder, initiator
    if r.slow_candidate and i.slow_candidate:
        tr, ti = _tier(r), _tier(i)
        if r.level != i.level:
            lose_r = r.level < i.level
        elif tr != ti:
            lose_r = tr < ti
        else:
            lose_r = True
        if lose_r:
            r = replace(r, slow_candidate=0, leadership=FOLLOWER if tr else r.leadership)
        else:
            i = replace(i, slow_candidate=0, leadership=FOLLOWER if ti else i.leadership)
    if r.leader_seen and r.slow_candidate and not _tier(r):
        r = replace(r, slow_candidate=0)
    if i.leader_seen and i.slow_candidate and not _tier(i):
        i = replace(i, slow_candidate=0)
    return r, i


def le_step(responder: AgentState, initiator: AgentState, m: int,
            params: VariantParams) -> tuple[AgentState, AgentState]:
    """One interaction of the composed protocol; returns ``(responder', initiator')``."""
    r = _participant(responder, initiator, True, m, params)
    i = _participant(initiator, responder, False, m, params)
    if params.slow_enabled:
        r, i = slow_step(r, i)
    return r, i


def count_leaders(population, variant: str) -> int:
    """Agents still in the running for the final leadership.

    ``population`` is an ``(n, NFIELDS)`` array or a sequence of
    :class:`AgentState`. Fast: agents with ``leadership == leader``.
    Las Vegas and slow-only: slow candidates.
    """
    pop = _as_array(population)
    if variant in ("las_vegas", "slow_only"):
        return int(np.count_nonzero(pop[:, SLOW] == 1))
    return int(np.count_nonzero(pop[:, B] == LEADER))


def could_lead(population) -> int:
    """Las Vegas: candidates plus non-terminal leaders that may still re-enter."""
    pop = _as_array(population)
    mask = (pop[:, SLOW] == 1) | ((pop[:, B] == LEADER) & (pop[:, TERM] == 0))
    return int(np.count_nonzero(mask))


def _as_array(population) -> np.ndarray:
    if isinstance(population, np.ndarray):
        return population
    return np.array([s.as_row() for s in population], dtype=np.int16).reshape(-1, NFIELDS)


def initial_population(n: int) -> np.ndarray:
    return np.tile(AgentState().as_row(), (n, 1))


# ---------------------------------------------------------------- kernel
#
# The kernel mirrors _participant/slow_step on plain int64 tuples in field
# order, which numba keeps in registers. Agents are stored as packed words.

# bit offsets of the packed int64 agent word; z1 is stored as z1 + 1
_SHIFT = (0, 8, 9, 10, 18, 26, 27, 29, 30, 31, 32, 33, 34)
_WIDTH = (8, 1, 1, 8, 8, 1, 2, 1, 1, 1, 1, 1, 1)
_OFFSET = (0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0)


@numba.njit(cache=True, inline="always")
def _unpack(v):
    return (v & 255, (v >> 8) & 1, (v >> 9) & 1, (v >> 10) & 255, (v >> 18) & 255,
            (v >> 26) & 1, ((v >> 27) & 3) - 1, (v >> 29) & 1, (v >> 30) & 1,
            (v >> 31) & 1, (v >> 32) & 1, (v >> 33) & 1, (v >> 34) & 1)


@numba.njit(cache=True, inline="always")
def _pack(s):
    return (s[0] | (s[1] << 8) | (s[2] << 9) | (s[3] << 10) | (s[4] << 18) | (s[5] << 26)
            | ((s[6] + 1) << 27) | (s[7] << 29) | (s[8] << 30) | (s[9] << 31)
            | (s[10] << 32) | (s[11] << 33) | (s[12] << 34))


def pack_population(rows) -> np.ndarray:
    """``(n, NFIELDS)`` field rows to packed agent words."""
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, NFIELDS)
    out = np.zeros(rows.shape[0], dtype=np.int64)
    for f in range(NFIELDS):
        out |= (rows[:, f] + _OFFSET[f]) << _SHIFT[f]
    return out


def unpack_population(words) -> np.ndarray:
    """Packed agent words to ``(n, NFIELDS)`` field rows."""
    words = np.asarray(words, dtype=np.int64)
    out = np.empty((words.shape[0], NFIELDS), dtype=np.int64)
    for f in range(NFIELDS):
        out[:, f] = ((words >> _SHIFT[f]) & ((1 << _WIDTH[f]) - 1)) - _OFFSET[f]
    return out


@numba.njit(cache=True, inline="always")
def _participant_nb(me, peer, is_resp, m, ext_mode, lv, cap):
    l, a, b, x, y, z0, z1, z2, pend, alarm, slow, term, seen = me
    pl, pa, pb, px, py, pz0, pz1, pz2 = peer[0], peer[1], peer[2], peer[3], peer[4], peer[5], peer[6], peer[7]
    if a == 1:
        jl = pl if pb == LEADER else 0
        ja = pa if pb == LEADER else 0
        if l == 0:
            if jl == 0 and ja == 1 and not is_resp:
                l = 1
            else:
                a = 0
        elif is_resp:
            if l <= jl and not (cap >= 0 and l >= cap):
                l += 1
            else:
                a = 0
        return (l, a, b, x, y, z0, z1, z2, pend, alarm, slow, term, seen)
    if pa == 1:
        return me
    if lv and peer[ALARM] == 1:
        alarm = 1
    if l < pl:
        l = pl
        b = FOLLOWER
        x = 0
        y = 0
        z0 = DRAW
        z1 = UNSET
        z2 = 0
        pend = 0
        term = 0
        seen = 0
    elif l > pl:
        return (l, a, b, x, y, z0, z1, z2, pend, alarm, slow, term, seen)
    elif lv and y > 0 and py > 0:
        d = (px - x) % m
        if m < 5 * d < 4 * m:
            alarm = 1
    if is_resp:
        if pend == 1 or alarm == 1:
            pend = 0
            if term == 0:
                old = y
                new = combine_nb(old, b, py, m, ext_mode)
                if ext_mode == CIRCULAR and new < old:
                    new = m - 1
                y = new
                if new == m - 1:
                    term = 1
                    if lv and b == LEADER:
                        slow = 1
                        seen = 1
        old = x
        x = combine_nb(old, b, px, m, CIRCULAR)
        if x < old:
            pend = 1
            if z0 == DRAW:
                z0 = SPREAD
                z2 = 0
            else:
                z0 = DRAW
                z1 = UNSET
    if me[Z0] == DRAW and z0 == DRAW and z1 == UNSET and b == LEADER and pb == FOLLOWER:
        z1 = 0 if is_resp else 1
    if z0 == SPREAD and is_resp and pz0 == SPREAD:
        v = pz1 if pz1 > 0 else 0
        if pz2 > v:
            v = pz2
        if v > z2:
            z2 = v
    if z0 == SPREAD and b == LEADER and z1 == 0 and z2 == 1 and term == 0:
        b = FOLLOWER
    if lv and peer[SEEN] == 1:
        seen = 1
    return (l, a, b, x, y, z0, z1, z2, pend, alarm, slow, term, seen)


@numba.njit(cache=True, inline="always")
def _is_tier1(s):
    return s[SLOW] == 1 and s[TERM] == 1 and s[B] == LEADER and s[ACTIVE] == 0


@numba.njit(cache=True, inline="always")
def _demote(s, tier1):
    # (slow, b) <- (0, follower if tier1 else b)
    return (s[0], s[1], FOLLOWER if tier1 else s[2], s[3], s[4], s[5], s[6], s[7],
            s[8], s[9], np.int64(0), s[11], s[12])


@numba.njit(cache=True, inline="always")
def _slow_nb(r, i):
    if r[SLOW] == 1 and i[SLOW] == 1:
        tr = _is_tier1(r)
        ti = _is_tier1(i)
        if r[LEVEL] != i[LEVEL]:
            lose_r = r[LEVEL] < i[LEVEL]
        elif tr != ti:
            lose_r = ti
        else:
            lose_r = True
        if lose_r:
            r = _demote(r, tr)
        else:
            i = _demote(i, ti)
    if r[SEEN] == 1 and r[SLOW] == 1 and not _is_tier1(r):
        r = _demote(r, False)
    if i[SEEN] == 1 and i[SLOW] == 1 and not _is_tier1(i):
        i = _demote(i, False)
    return r, i


@numba.njit(cache=True, inline="always")
def state_key(s, m, lmax):
    lvl = s[LEVEL] if s[LEVEL] < lmax else lmax - 1
    k = np.int64(lvl) * 2 + s[ACTIVE]
    k = k * 2 + s[B]
    k = k * m + s[X]
    k = k * m + s[Y]
    k = k * 2 + s[Z0]
    k = k * 3 + (s[Z1] + 1)
    k = k * 2 + s[Z2]
    k = k * 2 + s[PEND]
    k = k * 2 + s[ALARM]
    k = k * 2 + s[SLOW]
    k = k * 2 + s[TERM]
    k = k * 2 + s[SEEN]
    return k


def state_space_size(m: int, lmax: int) -> int:
    return lmax * 2 * 2 * m * m * 2 * 3 * 2 * 2 * 2 * 2 * 2 * 2


def decode_keys(keys: np.ndarray, m: int) -> np.ndarray:
    """Inverse of :func:`state_key` for an array of keys; returns ``(k, NFIELDS)``."""
    keys = np.asarray(keys, dtype=np.int64).copy()
    out = np.zeros((keys.shape[0], NFIELDS), dtype=np.int64)
    for col, base in ((SEEN, 2), (TERM, 2), (SLOW, 2), (ALARM, 2), (PEND, 2), (Z2, 2),
                      (Z1, 3), (Z0, 2), (Y, m), (X, m), (B, 2), (ACTIVE, 2)):
        out[:, col] = keys % base
        keys //= base
    out[:, Z1] -= 1
    out[:, LEVEL] = keys
    return out


@numba.njit(cache=True, inline="always")
def _account(s, sign, cnt, level_count):
    cnt[C_ACTIVE] += sign * s[ACTIVE]
    cnt[C_TERM] += sign * s[TERM]
    cnt[C_LEADER] += sign * s[B]
    cnt[C_CAND] += sign * s[SLOW]
    cnt[C_ALARM] += sign * s[ALARM]
    if s[SLOW] == 1 or (s[B] == LEADER and s[TERM] == 0):
        cnt[C_COULD] += sign
    level_count[s[LEVEL]] += sign


@numba.njit(cache=True, inline="always")
def _commit(pre, post, t, m, cnt, level_count, reached, seen, audit, lmax, ext_record):
    """Book-keeping for one changed agent; True if a population counter moved."""
    moved = (pre[LEVEL] != post[LEVEL] or pre[ACTIVE] != post[ACTIVE] or pre[B] != post[B]
             or pre[SLOW] != post[SLOW] or pre[TERM] != post[TERM]
             or pre[ALARM] != post[ALARM])
    if moved:
        _account(pre, -1, cnt, level_count)
        _account(post, 1, cnt, level_count)
        if post[LEVEL] > pre[LEVEL] and pre[ACTIVE] == 1:
            reached[post[LEVEL]] += 1
        if post[LEVEL] > cnt[C_TOP]:
            cnt[C_TOP] = post[LEVEL]
        if post[ALARM] == 1 and pre[ALARM] == 0 and cnt[C_FIRST_ALARM] < 0:
            cnt[C_FIRST_ALARM] = t
        if post[SLOW] == 1 and pre[SLOW] == 0:
            cnt[C_RESURRECT] += 1
    if post[Y] > cnt[C_MAXY]:
        cnt[C_MAXY] = post[Y]
        ext_record[post[Y], 0] = t
        ext_record[post[Y], 1] = cnt[C_LEADER]
    if audit:
        seen[state_key(post, m, lmax)] = 1
    return moved


@numba.njit(cache=True, inline="always")
def _le_body(state, resp, init, lo, hi, t0, m, ext_mode, lv, cap, cnt, level_count,
             reached, seen, audit, lmax, ext_record):
    """Shared body of the per-variant kernels; see :func:`le_kernel`."""
    n = state.shape[0]
    for j in range(lo, hi):
        r = resp[j]
        i = init[j]
        wr = state[r]
        wi = state[i]
        pr = _unpack(wr)
        pi = _unpack(wi)
        nr = _participant_nb(pr, pi, True, m, ext_mode, lv, cap)
        ni = _participant_nb(pi, pr, False, m, ext_mode, lv, cap)
        if lv:
            nr, ni = _slow_nb(nr, ni)
        vr = _pack(nr)
        vi = _pack(ni)
        moved = False
        t = t0 + (j - lo) + 1
        if vr != wr:
            state[r] = vr
            moved = _commit(pr, nr, t, m, cnt, level_count, reached, seen, audit, lmax,
                            ext_record)
        if vi != wi:
            state[i] = vi
            if _commit(pi, ni, t, m, cnt, level_count, reached, seen, audit, lmax,
                       ext_record):
                moved = True
        if not moved:
            continue
        if cnt[C_COULD] < cnt[C_MIN_COULD]:
            cnt[C_MIN_COULD] = cnt[C_COULD]
        if cnt[C_UNIQUE_T] < 0 and cnt[C_LEADER] == 1 and cnt[C_ACTIVE] == 0:
            cnt[C_UNIQUE_T] = t
            cnt[C_UNIQUE_Y] = cnt[C_MAXY]
        if cnt[C_TERM] == n:
            if not lv:
                return j - lo + 1, True
            if cnt[C_CAND] == 1 and level_count[cnt[C_TOP]] == n:
                return j - lo + 1, True
    return hi - lo, False


# one specialisation per variant so the unused branches compile away
@numba.njit(cache=True, error_model="numpy")
def _le_kernel_fast(state, resp, init, lo, hi, t0, m, cap, cnt, level_count, reached, seen,
                    audit, lmax, ext_record):
    return _le_body(state, resp, init, lo, hi, t0, m, CIRCULAR, False, cap, cnt,
                    level_count, reached, seen, audit, lmax, ext_record)


@numba.njit(cache=True, error_model="numpy")
def _le_kernel_lv(state, resp, init, lo, hi, t0, m, cap, cnt, level_count, reached, seen,
                  audit, lmax, ext_record):
    return _le_body(state, resp, init, lo, hi, t0, m, CAPPED, True, cap, cnt,
                    level_count, reached, seen, audit, lmax, ext_record)


def le_kernel(state, resp, init, lo, hi, t0, m, ext_mode, lv, cap, cnt, level_count,
              reached, seen, audit, lmax, ext_record):
    """Composed protocol on interactions ``lo:hi``; returns ``(consumed, done)``.

    ``state`` holds packed agent words. ``lv`` selects the Las Vegas
    machinery (with ``ext_mode`` capped). ``reached[l]`` counts agents that
    climbed to level ``l`` through Forming_junta (adoption does not count).
    ``seen`` is a flat occupancy array over :func:`state_key` when ``audit``
    is set. ``ext_record[p]`` receives ``(t, leaders)`` when the population's
    external phase first reaches ``p``. ``cnt[C_MIN_COULD]`` tracks the
    fewest possible winners after any interaction.
    """
    if lv != (ext_mode == CAPPED):
        raise ValueError("the Las Vegas machinery runs with the capped external clock")
    kernel = _le_kernel_lv if lv else _le_kernel_fast
    return kernel(state, resp, init, lo, hi, t0, m, cap, cnt, level_count, reached, seen,
                  audit, lmax, ext_record)


class LeaderElectionDriver:
    """Fast or Las Vegas composed protocol from the uniform initial state."""

    AUDIT_LIMIT = 1 << 27

    def __init__(self, config):
        self.n = n = config.n
        self.m = config.m
        self.variant = config.variant
        self.lv = config.variant == "las_vegas"
        cap = config.effective_level_cap
        self.params = (VariantParams.las_vegas(config.m, cap) if self.lv
                       else VariantParams(level_cap_enabled=cap is not None, level_cap=cap))
        self.cap = self.params.cap
        self.lmax = (self.cap + 1) if self.cap >= 0 else 24
        pop = initial_population(n)
        self.state = pack_population(pop)
        self.cnt = np.zeros(NCOUNTERS, dtype=np.int64)
        self.level_count = np.zeros(self.lmax + 64, dtype=np.int64)
        self.reached = np.zeros(self.lmax + 64, dtype=np.int64)
        self.reached[0] = n
        for s in pop:
            _account_py(s, self.cnt, self.level_count)
        self.cnt[C_MIN_COULD] = self.cnt[C_COULD]
        self.cnt[C_FIRST_ALARM] = -1
        self.cnt[C_UNIQUE_T] = -1
        self.cnt[C_UNIQUE_Y] = -1
        self.ext_record = np.full((self.m, 2), -1, dtype=np.int64)
        self.ext_record[0] = (0, n)
        size = state_space_size(self.m, self.lmax)
        self.audit = bool(config.audit) and size <= self.AUDIT_LIMIT
        self.seen = np.zeros(size if self.audit else 1, dtype=np.uint8)
        if self.audit:
            self.seen[state_key_py(pop[0], self.m, self.lmax)] = 1
        self.ext_mode = self.params.mode_max
        self.done = False
        self._flagged = False
        self.violations: list[str] = []

    def advance(self, resp, init, lo, hi, t0):
        used, done = le_kernel(self.state, resp, init, lo, hi, t0, self.m, self.ext_mode,
                               self.lv, self.cap, self.cnt, self.level_count, self.reached, self.seen,
                               self.audit, self.lmax, self.ext_record)
        self.done = bool(done)
        return used, self.done

    def leader_count(self) -> int:
        return int(self.cnt[C_CAND] if self.lv else self.cnt[C_LEADER])

    def population(self) -> np.ndarray:
        return unpack_population(self.state)

    def phases(self):
        return (self.state >> _SHIFT[X]) & 255, (self.state >> _SHIFT[Y]) & 255

    def check(self, t: int) -> None:
        if self.lv and self.cnt[C_MIN_COULD] < 1 and not self._flagged:
            self._flagged = True
            self.violations.append(f"by t={t}: no agent could still become the leader")

    def observed_keys(self) -> np.ndarray:
        return np.flatnonzero(self.seen) if self.audit else np.zeros(0, dtype=np.int64)

    def fill(self, report) -> None:
        self.check(report.interactions_total)
        top = int(self.cnt[C_TOP])
        report.max_level = top
        report.junta_size = int(self.reached[top])
        report.distinct_states_observed = int(np.count_nonzero(self.seen)) if self.audit else -1
        cnt = self.cnt
        report.stats.update(
            b_leaders=int(cnt[C_LEADER]),
            candidates=int(cnt[C_CAND]),
            terminal=int(cnt[C_TERM]),
            alarm_agents=int(cnt[C_ALARM]),
            first_alarm=int(cnt[C_FIRST_ALARM]) if cnt[C_FIRST_ALARM] >= 0 else None,
            unique_leader_at=int(cnt[C_UNIQUE_T]) if cnt[C_UNIQUE_T] >= 0 else None,
            external_ticks_to_unique=int(cnt[C_UNIQUE_Y]) if cnt[C_UNIQUE_Y] >= 0 else None,
            external_record=self.ext_record.tolist(),
            level_cap=self.cap if self.cap >= 0 else None,
            min_could_lead=int(cnt[C_MIN_COULD]),
            level_watermarks=self.reached[:top + 1].tolist(),
        )


def _account_py(s, cnt, level_count):
    cnt[C_ACTIVE] += s[ACTIVE]
    cnt[C_TERM] += s[TERM]
    cnt[C_LEADER] += s[B]
    cnt[C_CAND] += s[SLOW]
    cnt[C_ALARM] += s[ALARM]
    if s[SLOW] == 1 or (s[B] == LEADER and s[TERM] == 0):
        cnt[C_COULD] += 1
    level_count[s[LEVEL]] += 1


state_key_py = state_key.py_func


@numba.njit(cache=True)
def slow_kernel(cand, resp, init, lo, hi, count):
    for j in range(lo, hi):
        r = resp[j]
        if cand[r] == 1 and cand[init[j]] == 1:
            cand[r] = 0
            count -= 1
            if count == 1:
                return j - lo + 1, count
    return hi - lo, count


class SlowDriver:
    """Two-state initiator-wins elimination from an all-candidate start."""

    def __init__(self, config):
        self.n = config.n
        self.cand = np.ones(self.n, dtype=np.int8)
        self.count = self.n
        self.done = self.count == 1
        self.violations: list[str] = []

    def advance(self, resp, init, lo, hi, t0):
        used, self.count = slow_kernel(self.cand, resp, init, lo, hi, self.count)
        self.done = self.count == 1
        return used, self.done

    def leader_count(self) -> int:
        return int(self.count)

    def phases(self):
        return None

    def check(self, t: int) -> None:
        if self.count < 1:
            self.violations.append(f"t={t}: no candidate left")

    def fill(self, report) -> None:
        report.distinct_states_observed = 2 if self.count < self.n else 1
