"""Command-line front end: ``popsim {run,sweep,verify,bench}``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines, then flags. Data goes to ``--output`` or stdout; logs go
to stderr. Trial ``i`` of a batch uses seed ``(seed + i) mod 2**64``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time

from .engine import (CSV_COLUMNS, VARIANTS, ConfigError, SimConfig, run_trials,
                     trial_seed)

log = logging.getLogger("popsim")

DEFAULTS = {
    "variant": "las_vegas",
    "n": "1024",
    "m": 16,
    "k": 2,
    "level_cap": None,
    "seed": 0,
    "trials": 1,
    "max_interactions": None,
    "snapshot_every": None,
    "output": None,
    "format": "csv",
    "suite": "quick",
    "scale": 1.0,
}

_INT_KEYS = ("m", "k", "level_cap", "seed", "trials", "max_interactions", "snapshot_every")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="popsim", description="Population protocol simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--output", help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")

    def sim(sp):
        sp.add_argument("--variant", choices=VARIANTS, help="protocol (default las_vegas)")
        sp.add_argument("--n", help="population size, or a comma list (default 1024)")
        sp.add_argument("--m", type=int, help="clock modulus, 2..255 (default 16)")
        sp.add_argument("--k", type=int, help="junta exponent parameter (default 2)")
        sp.add_argument("--level-cap", type=int, dest="level_cap",
                        help="Forming_junta level cap (default: on for las_vegas only)")
        sp.add_argument("--seed", type=int, help="base seed (default 0)")
        sp.add_argument("--max-interactions", type=int, dest="max_interactions",
                        help="interaction cap per run")
        sp.add_argument("--snapshot-every", type=int, dest="snapshot_every",
                        help="monitor cadence in interactions (default n)")

    r = sub.add_parser("run", help="one run per n")
    sim(r)
    common(r)
    s = sub.add_parser("sweep", help="--trials runs per n")
    sim(s)
    s.add_argument("--trials", type=int, help="trials per n (default 1)")
    s.add_argument("--aggregate", action="store_true",
                   help="emit quantile rows instead of one row per trial")
    common(s)
    v = sub.add_parser("verify", help="run an acceptance suite; exit 1 on any failure")
    v.add_argument("--suite", help="epidemic, junta, clock, leader, quick or all (default quick)")
    v.add_argument("--scale", type=float, help="multiply trial counts (smoke runs use < 1)")
    common(v)
    b = sub.add_parser("bench", help="interactions per second")
    sim(b)
    b.add_argument("--trials", type=int, help="runs to time (default 1)")
    common(b)
    return p


def read_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _coerce(key, value):
    if value is None or value == "":
        return None
    if key in _INT_KEYS:
        return int(value)
    if key == "scale":
        return float(value)
    return value


def parse_args(argv) -> argparse.Namespace:
    """Parse and validate; raises :class:`UsageError` naming the bad setting."""
    parser = _parser()
    ns = parser.parse_args(argv)
    merged = dict(DEFAULTS)
    if getattr(ns, "config", None):
        try:
            merged.update(read_config_file(ns.config))
        except OSError as exc:
            raise UsageError(f"--config: {exc}") from exc
    for key, value in vars(ns).items():
        if value is not None and key in DEFAULTS:
            merged[key] = value
    try:
        settings = {k: _coerce(k, v) for k, v in merged.items()}
        sizes = [int(x) for x in str(settings["n"]).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"invalid value: {exc}") from exc
    if not sizes:
        raise UsageError("--n: no population size given")
    settings["n"] = sizes
    if settings["variant"] not in VARIANTS:
        raise UsageError(f"--variant: unknown variant {settings['variant']!r}")
    if settings["format"] not in ("csv", "json"):
        raise UsageError(f"--format: expected csv or json, got {settings['format']!r}")
    if settings["trials"] < 1:
        raise UsageError("--trials must be >= 1")
    ns.settings = settings
    if ns.command != "verify":
        try:
            ns.configs = _configs(ns)
        except ConfigError as exc:
            raise UsageError(f"invalid configuration: {exc}") from exc
    return ns


def _configs(ns) -> list[SimConfig]:
    s = ns.settings
    trials = s["trials"] if ns.command in ("sweep", "bench") else 1
    return [
        SimConfig(n=n, variant=s["variant"], m=s["m"], k=s["k"], level_cap=s["level_cap"],
                  seed=trial_seed(s["seed"], i), max_interactions=s["max_interactions"],
                  snapshot_every=s["snapshot_every"])
        for n in s["n"] for i in range(trials)
    ]


def _emit_reports(reports, fmt) -> str:
    if fmt == "json":
        return "".join(r.to_json() + "\n" for r in reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def execute(ns) -> int:
    s = ns.settings
    fmt = s["format"]
    if ns.command in ("run", "sweep"):
        reports = run_trials(ns.configs)
        for r in reports:
            for v in r.violations:
                log.warning("n=%d seed=%d: %s", r.n, r.seed, v)
        if getattr(ns, "aggregate", False):
            from .analysis import TrialAggregate

            agg = TrialAggregate()
            for r in reports:
                agg.add(r)
            text = agg.to_json() + "\n" if fmt == "json" else agg.to_csv()
        else:
            text = _emit_reports(reports, fmt)
        status = 0
    elif ns.command == "verify":
        from .suites import run_suite

        try:
            results = run_suite(s["suite"], scale=s["scale"])
        except KeyError as exc:
            raise UsageError(f"--suite: {exc.args[0]}") from exc
        if fmt == "json":
            text = json.dumps([{"criterion": r.number, "name": r.name, "passed": r.passed,
                                "detail": r.detail} for r in results], indent=2) + "\n"
        else:
            text = "".join(r.line() + "\n" for r in results)
        status = 0 if all(r.passed for r in results) else 1
    else:
        rows = []
        for config in ns.configs:
            t0 = time.perf_counter()
            rep = run_trials([config], threads=1, monitors=False)[0]
            dt = time.perf_counter() - t0
            rows.append({"n": config.n, "variant": config.variant, "seed": config.seed,
                         "interactions": rep.interactions_total, "seconds": round(dt, 4),
                         "interactions_per_second": round(rep.interactions_total / dt)})
        if fmt == "json":
            text = "".join(json.dumps(r) + "\n" for r in rows)
        else:
            buf = io.StringIO()
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
            text = buf.getvalue()
        status = 0
    if s["output"]:
        with open(s["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        ns = parse_args(sys.argv[1:] if argv is None else argv)
        return execute(ns)
    except UsageError as exc:
        print(f"popsim: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"popsim: error: cannot write output: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
