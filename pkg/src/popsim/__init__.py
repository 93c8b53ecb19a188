"""Seeded population-protocol simulator for junta-driven phase clocks and
space-efficient leader election under the uniform random scheduler."""
from .engine import (
    CSV_COLUMNS,
    CapReached,
    ConfigError,
    Interaction,
    RunReport,
    Scheduler,
    SimConfig,
    draw_interaction,
    parallel_time,
    run,
)

__all__ = [
    "CSV_COLUMNS", "CapReached", "ConfigError", "Interaction", "RunReport",
    "Scheduler", "SimConfig", "draw_interaction", "parallel_time", "run",
]
__version__ = "0.1.0"
