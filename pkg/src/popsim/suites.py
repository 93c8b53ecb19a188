"""Acceptance checks, grouped into suites the CLI can run by name.

Each check builds its trials from fixed seeds, runs them through a shared
cache (so overlapping checks reuse runs) and returns a
:class:`CriterionResult`. ``scale`` shrinks every trial count for quick
smoke runs; verdicts at ``scale < 1`` are only indicative.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Scheduler, SimConfig, run_trials, trial_seed

log = logging.getLogger("popsim.suites")

JUNTA_GRID = tuple(2**e for e in range(10, 19))
LV_GRID = (2**10, 2**12, 2**14, 2**16)
AUDIT_GRID = (2**12, 2**16)
C_AUDIT = 6
CLOCK_M = 64


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    measured: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"CRITERION {self.number:>2} {verdict}  {self.name}: {self.detail}"


_cache: dict = {}


def runs(configs, *, monitors: bool = False):
    """Reports for ``configs``, computing only those not yet cached."""
    configs = list(configs)
    todo = [c for c in configs if (c, monitors) not in _cache]
    if todo:
        log.info("running %d trials (%s, n=%s)", len(todo), todo[0].variant,
                 sorted({c.n for c in todo}))
        for c, rep in zip(todo, run_trials(todo, monitors=monitors)):
            _cache[(c, monitors)] = rep
    return [_cache[(c, monitors)] for c in configs]


def clear_cache() -> None:
    _cache.clear()


def _count(trials: int, scale: float) -> int:
    return max(1, int(round(trials * scale)))


def _batch(n, variant, trials, scale, **kw):
    return [SimConfig(n=n, variant=variant, seed=trial_seed(0, i), **kw)
            for i in range(_count(trials, scale))]


def las_vegas_safety(scale: float = 1.0) -> CriterionResult:
    bad = []
    total = 0
    alarmed = 0
    for n, trials in ((512, 1000), (4096, 200)):
        for rep in runs(_batch(n, "las_vegas", trials, scale, audit=False)):
            total += 1
            alarmed += rep.stats["first_alarm"] is not None
            if not rep.stabilized or rep.leader_count_final != 1 or rep.violations:
                bad.append((n, rep.seed))
    return CriterionResult(1, "Las Vegas safety", not bad,
                           f"{total - len(bad)}/{total} runs ended with one leader "
                           f"({alarmed} after a distant-phase alarm)"
                           + (f"; failures {bad[:5]}" if bad else ""),
                           {"failures": bad, "runs": total})


def fast_success(scale: float = 1.0) -> CriterionResult:
    reps = runs(_batch(4096, "fast", 500, scale, audit=False))
    ok = sum(r.stabilized and r.leader_count_final == 1 for r in reps)
    frac = ok / len(reps)
    return CriterionResult(2, "fast-variant success", frac >= 0.99,
                           f"{ok}/{len(reps)} = {frac:.3f} (need >= 0.99)", {"fraction": frac})


def runtime_scaling(scale: float = 1.0) -> CriterionResult:
    med = {}
    unstable = 0
    alarmed = 0
    for n in LV_GRID:
        reps = runs(_batch(n, "las_vegas", 50, scale, audit=False))
        unstable += sum(not r.stabilized for r in reps)
        alarmed += sum(r.stats["first_alarm"] is not None for r in reps)
        norm = [r.interactions_total / (n * math.log2(n) ** 2) for r in reps]
        med[n] = float(np.median(norm))
    ratio = max(med.values()) / min(med.values())
    detail = ", ".join(f"2^{int(math.log2(n))}: {v:.1f}" for n, v in med.items())
    return CriterionResult(3, "Las Vegas runtime scaling", ratio < 3 and unstable == 0,
                           f"median T/(n log2^2 n) {detail}; max/min {ratio:.2f} (need < 3); "
                           f"{alarmed} runs raised a distant-phase alarm"
                           + (f"; {unstable} runs hit the cap" if unstable else ""),
                           {"medians": med, "ratio": ratio})


def epidemic_oracle(n: int) -> float:
    """Sum over the infected count ``i`` of ``n(n-1) / (i(n-i))``."""
    return sum(n * (n - 1) / (i * (n - i)) for i in range(1, n))


def epidemic_mean(scale: float = 1.0) -> CriterionResult:
    n = 10_000
    reps = runs(_batch(n, "epidemic_only", 100, scale))
    mean = float(np.mean([r.epidemic_completion for r in reps]))
    want = epidemic_oracle(n)
    err = abs(mean / want - 1)
    return CriterionResult(4, "epidemic completion mean", err <= 0.10,
                           f"mean {mean:.0f} vs oracle {want:.0f}, rel. error {err:.3f} (need <= 0.10)",
                           {"mean": mean, "oracle": want, "rel_error": err})


def _junta_grid(scale):
    return {n: runs(_batch(n, "junta_only", 50, scale)) for n in JUNTA_GRID}


def junta_size(scale: float = 1.0) -> CriterionResult:
    grid = _junta_grid(scale)
    med = {n: float(np.median([r.junta_size / math.sqrt(n * math.log(n)) for r in reps]))
           for n, reps in grid.items()}
    smallest = min(r.junta_size for reps in grid.values() for r in reps)
    x = np.log2(list(med))
    slope = float(np.polyfit(x, list(med.values()), 1)[0])
    bounded = max(med.values()) < 10
    ok = bounded and slope <= 0 and smallest >= 1
    detail = ", ".join(f"2^{int(math.log2(n))}: {v:.3f}" for n, v in med.items())
    return CriterionResult(5, "junta size", ok,
                           f"median size/sqrt(n ln n) {detail}; all < 10: {bounded}; "
                           f"OLS slope vs log2 n {slope:+.4f} (need <= 0); min size {smallest}",
                           {"medians": med, "slope": slope, "min_size": smallest})


def max_level_band(scale: float = 1.0) -> CriterionResult:
    grid = _junta_grid(scale)
    off = [r.max_level - math.log2(math.log2(n)) for n, reps in grid.items() for r in reps]
    width = max(off) - min(off)
    return CriterionResult(6, "max level band", width <= 3,
                           f"L* - log2 log2 n in [{min(off):.2f}, {max(off):.2f}], "
                           f"width {width:.2f} (need <= 3)", {"width": width})


def junta_time(scale: float = 1.0) -> CriterionResult:
    grid = _junta_grid(scale)
    p99 = {n: float(np.quantile([r.interactions_total / (n * math.log(n)) for r in reps], 0.99))
           for n, reps in grid.items()}
    unstable = sum(not r.stabilized for reps in grid.values() for r in reps)
    ratio = max(p99.values()) / min(p99.values())
    detail = ", ".join(f"2^{int(math.log2(n))}: {v:.2f}" for n, v in p99.items())
    return CriterionResult(7, "junta stabilization time", ratio < 2 and unstable == 0,
                           f"p99 T/(n ln n) {detail}; max/min {ratio:.2f} (need < 2)",
                           {"p99": p99, "ratio": ratio})


def clock_spread(scale: float = 1.0, m: int = CLOCK_M) -> CriterionResult:
    frac = {}
    worst = {}
    for n in (2**10, 2**12):
        reps = runs(_batch(n, "clock_only", 200, scale, m=m, k=2, clock_passes=20),
                    monitors=True)
        windows = [r.stats["max_clock_window"] for r in reps]
        frac[n] = float(np.mean([w <= m / 4 for w in windows]))
        worst[n] = int(max(windows))
    ok = all(f >= 0.99 for f in frac.values())
    detail = "; ".join(f"n=2^{int(math.log2(n))}: {frac[n]:.3f} within m/4={m // 4}, "
                       f"widest {worst[n]}" for n in frac)
    return CriterionResult(8, f"clock spread (m={m})", ok, detail + " (need >= 0.99)",
                           {"fraction": frac, "widest": worst})


def slow_exact(scale: float = 1.0) -> CriterionResult:
    reps = runs(_batch(4, "slow_only", 100_000, scale))
    mean = float(np.mean([r.interactions_total for r in reps]))
    single = all(r.leader_count_final == 1 for r in reps)
    err = abs(mean / 9.5 - 1)
    return CriterionResult(9, "slow protocol at n=4", err <= 0.10 and single,
                           f"mean {mean:.3f} vs 9.5, rel. error {err:.4f}; "
                           f"single survivor always: {single}", {"mean": mean})


def state_audit(scale: float = 1.0, m: int = 16) -> CriterionResult:
    parts = []
    ok = True
    measured = {}
    for n in AUDIT_GRID:
        rep = runs([SimConfig(n=n, variant="fast", m=m, seed=0, audit=True)])[0]
        bound = 48 * m * m * (math.ceil(math.log2(math.log2(n))) + C_AUDIT)
        count = rep.distinct_states_observed
        ok &= 0 < count <= bound and rep.stabilized
        measured[n] = count
        parts.append(f"n=2^{int(math.log2(n))}: {count} <= {bound}")
    return CriterionResult(10, "state audit", ok,
                           f"distinct full agent states (m={m}): " + "; ".join(parts),
                           measured)


def clock_robustness(scale: float = 1.0, m: int = CLOCK_M) -> CriterionResult:
    from .phase_clock import paired_clock_run

    hits = []
    trials = _count(50, scale)
    for kind, kw in (("demote 50%", {"demote_fraction": 0.5}),
                     ("void 20%", {"void_fraction": 0.2})):
        for i in range(trials):
            seed = trial_seed(0, i)
            at = paired_clock_run(1024, m, 2, seed, **kw)
            if at >= 0:
                hits.append((kind, seed, at))
    return CriterionResult(11, f"clock robustness (m={m})", not hits,
                           f"{2 * trials - len(hits)}/{2 * trials} paired runs never ahead"
                           + (f"; first {hits[:3]}" if hits else ""), {"hits": hits})


def epidemic_chain(seed: int) -> int:
    """Hand-derived two-agent epidemic: agent 0 starts infected, so the first
    draw with agent 0 as initiator completes it."""
    sched = Scheduler(2, seed)
    t = 0
    while True:
        t += 1
        if sched.draw().initiator == 0:
            return t


def junta_chain(seed: int) -> tuple[int, int, int]:
    """Hand-derived two-agent Forming_junta.

    The first interaction freezes the responder at level 0 and lifts the
    initiator to level 1. The level-1 agent then freezes the next time it
    responds, because its partner is lower. Returns (time, L*, junta size).
    """
    sched = Scheduler(2, seed)
    first = sched.draw()
    winner = first.initiator
    t = 1
    while True:
        t += 1
        if sched.draw().responder == winner:
            return t, 1, 1


def small_chains(scale: float = 1.0) -> CriterionResult:
    trials = _count(10_000, scale)
    bad = []
    epi = runs(_batch(2, "epidemic_only", trials, 1.0 if trials == 10_000 else scale))
    jun = runs(_batch(2, "junta_only", trials, 1.0 if trials == 10_000 else scale))
    for rep in epi:
        if not rep.stabilized or rep.epidemic_completion != epidemic_chain(rep.seed):
            bad.append(("epidemic", rep.seed))
    for rep in jun:
        got = (rep.interactions_total, rep.max_level, rep.junta_size)
        if not rep.stabilized or got != junta_chain(rep.seed):
            bad.append(("junta", rep.seed))
    total = len(epi) + len(jun)
    return CriterionResult(12, "two-agent chains", not bad,
                           f"{total - len(bad)}/{total} traces match the hand-derived chains",
                           {"mismatches": bad})


CRITERIA = {
    1: las_vegas_safety, 2: fast_success, 3: runtime_scaling, 4: epidemic_mean,
    5: junta_size, 6: max_level_band, 7: junta_time, 8: clock_spread, 9: slow_exact,
    10: state_audit, 11: clock_robustness, 12: small_chains,
}

SUITES = {
    "epidemic": (4, 12),
    "junta": (5, 6, 7, 12),
    "clock": (8, 11),
    "leader": (1, 2, 3, 9, 10),
    "quick": (4, 9, 12),
    "all": tuple(CRITERIA),
}


def run_suite(name: str, scale: float = 1.0) -> list[CriterionResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    out = []
    for k in SUITES[name]:
        res = CRITERIA[k](scale)
        log.info(res.line())
        out.append(res)
    return out
