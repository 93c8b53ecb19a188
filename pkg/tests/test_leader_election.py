import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from popsim import SimConfig, run
from popsim.engine import Scheduler, run_trials
from popsim.leader_election import (B, DRAW, FIELD_NAMES, NFIELDS, SPREAD, UNSET, AgentState,
                                    LeaderElectionDriver, VariantParams, _participant,
                                    _participant_nb, _slow_nb, coin_from_roles,
                                    count_leaders, could_lead, decode_keys, distant_phases,
                                    initial_population, le_step, pack_population, slow_step,
                                    state_key_py, unpack_population)
from popsim.phase_clock import CAPPED, CIRCULAR, FOLLOWER, LEADER

FAST = VariantParams.fast()
M = 16


def settled(**kw):
    """A follower past the junta phase, clocks at 0."""
    base = dict(level=2, active=0, leadership=FOLLOWER, slow_candidate=0)
    base.update(kw)
    return AgentState(**base)


def test_initial_state():
    s = AgentState()
    assert (s.level, s.active, s.leadership, s.ordinary_phase, s.external_phase) == (0, 1, LEADER, 0, 0)
    assert (s.z0, s.z1, s.z2, s.slow_candidate, s.meaningful_pending, s.alarm) == (DRAW, UNSET, 0, 1, 0, 0)
    assert count_leaders(initial_population(9), "fast") == 9


def test_variant_params():
    f = VariantParams.fast()
    assert (f.mode_max, f.level_cap_enabled, f.slow_enabled) == (CIRCULAR, False, False)
    lv = VariantParams.las_vegas(16, 10)
    assert (lv.mode_max, lv.level_cap_enabled, lv.slow_enabled) == (CAPPED, True, True)
    assert (lv.distant_low, lv.distant_high) == (16 / 5, 64 / 5)


def test_coin_from_roles():
    assert coin_from_roles(True) == 0
    assert coin_from_roles(False) == 1


def test_coin_toss_by_role():
    leader = settled(leadership=LEADER, slow_candidate=1)
    follower = settled()
    r, i = le_step(leader, follower, M, FAST)
    assert r.z1 == 0
    r, i = le_step(follower, leader, M, FAST)
    assert i.z1 == 1


def test_spread_carries_drawn_one():
    resp = settled(z0=SPREAD)
    init = settled(z0=SPREAD, leadership=LEADER, z1=1)
    r, _ = le_step(resp, init, M, FAST)
    assert r.z2 == 1


def test_demotion_on_seen_one():
    leader = settled(leadership=LEADER, z0=SPREAD, z1=0, z2=1)
    r, _ = le_step(leader, settled(z0=SPREAD), M, FAST)
    assert r.leadership == FOLLOWER


def test_adoption_reset():
    low = settled(level=1, leadership=LEADER, ordinary_phase=5, external_phase=3, z0=SPREAD, z1=1, z2=1)
    high = settled(level=3)
    r, _ = le_step(low, high, M, FAST)
    assert (r.level, r.leadership, r.ordinary_phase, r.external_phase, r.z0, r.z1, r.z2) == \
        (3, FOLLOWER, 0, 0, DRAW, UNSET, 0)


def test_distant_phases():
    assert distant_phases(0, 5, 16)
    assert not distant_phases(0, 2, 16)
    assert not distant_phases(7, 7, 16)
    for x in range(16):
        for y in range(16):
            a = (y - x) % 16
            assert distant_phases(x, y, 16) == (16 / 5 < a < 4 * 16 / 5)


def test_slow_step():
    a, b = AgentState(active=0), AgentState(active=0)
    r, i = slow_step(a, b)
    assert r.slow_candidate == 0 and i.slow_candidate == 1
    c = replace(a, slow_candidate=0)
    assert slow_step(c, b) == (c, b)
    assert slow_step(b, c) == (b, c)


def test_count_leaders():
    pop = initial_population(5)
    assert count_leaders(pop, "las_vegas") == 5
    pop[:, B] = FOLLOWER
    assert count_leaders(pop, "fast") == 0


field_values = {
    "level": st.integers(0, 6), "active": st.integers(0, 1), "leadership": st.integers(0, 1),
    "ordinary_phase": st.integers(0, M - 1), "external_phase": st.integers(0, M - 1),
    "z0": st.integers(0, 1), "z1": st.integers(-1, 1), "z2": st.integers(0, 1),
    "meaningful_pending": st.integers(0, 1), "alarm": st.integers(0, 1),
    "slow_candidate": st.integers(0, 1), "external_terminal": st.integers(0, 1),
    "leader_seen": st.integers(0, 1),
}
agent_states = st.builds(AgentState, **field_values)


def as_tuple(s):
    return tuple(getattr(s, f) for f in FIELD_NAMES)


@given(agent_states, agent_states, st.booleans(), st.sampled_from(["fast", "lv"]),
       st.sampled_from([-1, 3]))
def test_compiled_participant_matches_reference(me, peer, is_resp, variant, cap):
    lv = variant == "lv"
    params = VariantParams.las_vegas(M, cap if cap >= 0 else 5) if lv else \
        VariantParams(level_cap_enabled=cap >= 0, level_cap=cap if cap >= 0 else None)
    want = as_tuple(_participant(me, peer, is_resp, M, params))
    got = _participant_nb(as_tuple(me), as_tuple(peer), is_resp, M, params.mode_max, lv, params.cap)
    assert tuple(int(v) for v in got) == want


@given(agent_states, agent_states)
def test_compiled_slow_matches_reference(r, i):
    want = tuple(map(as_tuple, slow_step(r, i)))
    got = _slow_nb(as_tuple(r), as_tuple(i))
    assert tuple(tuple(int(v) for v in s) for s in got) == want


@given(st.lists(agent_states, min_size=1, max_size=20))
def test_pack_round_trip(pop):
    rows = np.array([as_tuple(s) for s in pop])
    assert np.array_equal(unpack_population(pack_population(rows)), rows)


@given(st.lists(agent_states, min_size=1, max_size=20))
def test_state_key_round_trip(pop):
    rows = np.array([as_tuple(s) for s in pop])
    keys = np.array([state_key_py(r, M, 8) for r in rows])
    assert np.array_equal(decode_keys(keys, M), rows)


@pytest.mark.parametrize("variant", ["fast", "las_vegas"])
@pytest.mark.parametrize("seed", range(3))
def test_kernel_matches_reference_run(variant, seed):
    n, m = 10, 8
    d = LeaderElectionDriver(SimConfig(n=n, variant=variant, seed=seed, m=m, level_cap=3))
    pop = [AgentState() for _ in range(n)]
    sched = Scheduler(n, seed)
    t = 0
    while t < 60_000 and not d.done:
        resp, init = sched.next_chunk()
        for j in range(resp.shape[0]):
            a, b = int(resp[j]), int(init[j])
            pop[a], pop[b] = le_step(pop[a], pop[b], m, d.params)
            _, done = d.advance(resp, init, j, j + 1, t)
            t += 1
            if t % 97 == 0 or done:
                assert np.array_equal(d.population(), np.array([s.as_row() for s in pop]))
            if done:
                break
    assert np.array_equal(d.population(), np.array([s.as_row() for s in pop]))


def _trace(config):
    """Drive a run by hand, checking per-interaction invariants."""
    d = LeaderElectionDriver(config)
    sched = Scheduler(config.n, config.seed)
    t = 0
    prev = d.population()
    while not d.done and t < config.cap:
        resp, init = sched.next_chunk()
        for lo in range(0, resp.shape[0], 64):
            used, done = d.advance(resp, init, lo, min(resp.shape[0], lo + 64), t)
            t += used
            cur = d.population()
            level, active, b = (FIELD_NAMES.index(f) for f in ("level", "active", "leadership"))
            reset = cur[:, level] > prev[:, level]
            assert np.all(cur[:, active] <= prev[:, active])
            assert np.all((cur[:, level] >= prev[:, level]))
            # leadership only drops after the junta phase, except through a level reset
            post = (prev[:, active] == 0) & ~reset
            assert np.all(cur[post, b] <= prev[post, b])
            if config.variant == "las_vegas":
                assert could_lead(cur) >= 1
                term = cur[:, FIELD_NAMES.index("external_terminal")] == 1
                assert np.all(cur[term, FIELD_NAMES.index("external_phase")] == config.m - 1)
            prev = cur
            if done:
                break
    return d


@pytest.mark.parametrize("variant", ["fast", "las_vegas"])
@pytest.mark.parametrize("seed", range(4))
def test_per_interaction_invariants(variant, seed):
    d = _trace(SimConfig(n=48, variant=variant, seed=seed))
    assert d.done


@pytest.mark.parametrize("n", [64, 300, 1000])
def test_las_vegas_terminates_with_one_leader(n):
    reps = run_trials([SimConfig(n=n, variant="las_vegas", seed=s, audit=False) for s in range(10)],
                      monitors=True)
    for r in reps:
        assert r.stabilized and r.leader_count_final == 1 and not r.violations
        assert r.stats["min_could_lead"] >= 1


def test_reduction_law():
    medians = {}
    for n, trials in ((2**10, 16), (2**12, 8)):
        reps = run_trials([SimConfig(n=n, variant="fast", seed=s, audit=False) for s in range(trials)],
                          monitors=False)
        for r in reps:
            counts = [c for t, c in r.stats["external_record"] if t >= 0]
            assert all(a >= b for a, b in zip(counts, counts[1:]))
        medians[n] = np.median([r.stats["external_ticks_to_unique"] for r in reps]) / math.log2(n)
    # measured c ~ 0.1 - 0.13
    assert max(medians.values()) <= 1


def test_audit_counts():
    assert run(SimConfig(n=50, variant="epidemic_only")).distinct_states_observed == 2
    assert run(SimConfig(n=50, variant="slow_only")).distinct_states_observed == 2
    rep = run(SimConfig(n=1024, variant="fast", seed=1))
    lv = run(SimConfig(n=1024, variant="las_vegas", seed=1))
    bound = 48 * 16**2 * (math.ceil(math.log2(math.log2(1024))) + 6)
    assert 0 < rep.distinct_states_observed <= bound
    assert 0 < lv.distinct_states_observed <= 8 * bound
