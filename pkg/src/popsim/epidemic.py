"""One-way epidemic: the responder takes the maximum of the two bits."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

SUSCEPTIBLE = 0
INFECTED = 1


@dataclass(frozen=True)
class EpidemicState:
    value: int = SUSCEPTIBLE


def epidemic_step(responder_value: int, initiator_value: int) -> int:
    """New responder bit; the initiator never changes."""
    return responder_value if responder_value >= initiator_value else initiator_value


def epidemic_complete(infected_count: int, n: int) -> bool:
    return infected_count == n


def expected_completion(n: int) -> float:
    """Mean interactions to infect everyone from one source.

    With ``i`` infected the next infection needs an (susceptible responder,
    infected initiator) pair, which has probability ``i(n-i)/(n(n-1))``.
    """
    i = np.arange(1, n, dtype=np.float64)
    return float(np.sum(n * (n - 1) / (i * (n - i))))


@numba.njit(cache=True)
def epidemic_kernel(value, resp, init, lo, hi, infected):
    n = value.shape[0]
    for j in range(lo, hi):
        r = resp[j]
        if value[r] == 0 and value[init[j]] == 1:
            value[r] = 1
            infected += 1
            if infected == n:
                return j - lo + 1, infected
    return hi - lo, infected


class EpidemicDriver:
    """Single infected source (agent 0); stabilizes when all are infected."""

    def __init__(self, config):
        self.n = config.n
        self.value = np.zeros(self.n, dtype=np.int8)
        self.value[0] = INFECTED
        self.infected = 1
        self.done = epidemic_complete(self.infected, self.n)
        self.completion = None
        self.violations: list[str] = []

    def advance(self, resp, init, lo, hi, t0):
        used, self.infected = epidemic_kernel(self.value, resp, init, lo, hi, self.infected)
        self.done = epidemic_complete(self.infected, self.n)
        if self.done:
            self.completion = t0 + used
        return used, self.done

    def leader_count(self) -> int:
        return 0

    def phases(self):
        return None

    def check(self, t: int) -> None:
        pass

    def fill(self, report) -> None:
        report.epidemic_completion = self.completion
        report.distinct_states_observed = 2
        report.stats["infected"] = int(self.infected)
