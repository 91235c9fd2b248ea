"""Command-line front end: run scenarios, check traces, report metrics.

Exit codes: 0 when everything ran and nothing was flagged, 2 for
configuration errors, 3 when a schedule does not satisfy its model condition
(reported as a warning; no property violations were found), 4 when a trace
violates a checked property, 5 when there is not enough trace data for a
report.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import trace as T
from .scenario import ScenarioError, parse_scenario
from .sim import run as run_scenario
from .verify import InsufficientTrace, Metrics, PiGeEta, compliance, metrics, verify_trace
from .workload import AXES, apply_axis

OK = 0
CONFIG = 2
MODEL_NONCOMPLIANT = 3
PROPERTY_VIOLATION = 4
INSUFFICIENT_TRACE = 5

OUT_ENV = "SLEEPYTOB_OUT"

# declared adversarial resilience of the implemented protocols
RESILIENCE = {"TOB1": "1/2", "TOB2": "1/2", "TOB1_LMD": "1/2"}


@dataclass
class RunConfig:
    command: str
    scenario: Optional[Path]
    seeds: range
    out: Path
    jobs: int = 1

    def __post_init__(self):
        if len(self.seeds) == 0:
            raise ValueError("empty seed range")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


def parse_seeds(text: Optional[str]) -> Optional[range]:
    """``S`` or ``S..S'`` (inclusive)."""
    if text is None:
        return None
    lo, sep, hi = text.partition("..")
    first = int(lo)
    last = int(hi) if sep else first
    if last < first:
        raise ValueError(f"empty seed range {text!r}")
    return range(first, last + 1)


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def _worst(codes) -> int:
    """Combine per-item outcomes; property violations outrank model warnings."""
    codes = set(codes)
    for c in (CONFIG, PROPERTY_VIOLATION, INSUFFICIENT_TRACE, MODEL_NONCOMPLIANT):
        if c in codes:
            return c
    return OK


# -- commands ---------------------------------------------------------------------------


def _pmap(fn, items, jobs: int) -> list:
    """``map`` over independent runs, in a process pool when ``jobs`` > 1; order is preserved."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _run_one(item) -> tuple[bool, list]:
    sc, path = item
    ok, _ = compliance(sc)
    tr = run_scenario(sc)
    tr.dump(path)
    return ok, [v.to_json() for v in verify_trace(tr)]


def cmd_run(args) -> int:
    sc = parse_scenario(args.scenario)
    seeds = parse_seeds(args.seed) or range(sc.seed, sc.seed + 1)
    cfg = RunConfig("run", Path(args.scenario), seeds, Path(args.out) if args.out else default_out(), args.jobs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    stem = cfg.scenario.stem
    items = [(sc.with_seed(seed), cfg.out / f"{stem}_seed{seed}.jsonl") for seed in cfg.seeds]
    codes = []
    for (_, path), (ok, violations) in zip(items, _pmap(_run_one, items, cfg.jobs)):
        print(f"{path}\tcompliant={ok}\tviolations={len(violations)}")
        for v in violations:
            print(json.dumps(v, sort_keys=True))
        codes.append(PROPERTY_VIOLATION if violations else (OK if ok else MODEL_NONCOMPLIANT))
    return _worst(codes)


def cmd_verify(args) -> int:
    tr = T.Trace.load(args.trace)
    violations = verify_trace(tr)
    print(json.dumps([v.to_json() for v in violations], indent=1, sort_keys=True))
    return PROPERTY_VIOLATION if violations else OK


def cmd_metrics(args) -> int:
    m = metrics(T.Trace.load(args.trace))
    if args.format == "json":
        print(json.dumps(m.to_json(), sort_keys=True))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(Metrics.CSV_FIELDS)
        w.writerow(m.csv_row())
    return OK


def format_table(rows: dict) -> str:
    """Render per-protocol mean metrics as a fixed-width table, in multiples of Δ."""
    protocols = sorted(rows)
    labels = [
        ("adversarial resilience", lambda p, m: RESILIENCE.get(p, "?")),
        ("best-case latency", lambda p, m: f"{m['best_latency']:.2f}Δ"),
        ("average-case latency", lambda p, m: f"{m['avg_latency']:.2f}Δ"),
        ("block time", lambda p, m: f"{m['block_time']:.2f}Δ"),
        ("voting rounds per block", lambda p, m: f"{m['votes_per_decision']:.2f}"),
        ("good-leader rate", lambda p, m: f"{m['good_leader_rate']:.3f}"),
        ("runs", lambda p, m: str(m["runs"])),
    ]
    width = max(len(lbl) for lbl, _ in labels)
    lines = [" " * width + "".join(f"  {p:>10}" for p in protocols)]
    for lbl, fn in labels:
        lines.append(f"{lbl:<{width}}" + "".join(f"  {fn(p, rows[p]):>10}" for p in protocols))
    return "\n".join(lines)


def table_rows(paths) -> dict:
    acc = defaultdict(list)
    for path in paths:
        m = metrics(T.Trace.load(path))
        acc[m.protocol].append(m.in_deltas())
    if not acc:
        raise InsufficientTrace("INSUFFICIENT_TRACE: no traces with metrics")
    rows = {}
    for proto, ms in acc.items():
        rows[proto] = {k: sum(x[k] for x in ms) / len(ms) for k in ms[0]}
        rows[proto]["runs"] = len(ms)
    return rows


def cmd_table(args) -> int:
    paths = sorted(Path(args.dir).glob("*.jsonl"))
    print(format_table(table_rows(paths)))
    return OK


SWEEP_FIELDS = ("axis", "value", "seed", "verdict", "violations", "detail")


def _sweep_cell(item) -> dict:
    base, axis, value, seed = item
    row = {"axis": axis, "value": value, "seed": seed, "verdict": "", "violations": "", "detail": ""}
    try:
        sc = apply_axis(base, axis, value).with_seed(seed)
    except ScenarioError as exc:
        row["verdict"] = exc.reason
        row["detail"] = str(exc)
        return row
    try:
        ok, _ = compliance(sc)
    except PiGeEta as exc:
        row["verdict"], row["detail"] = PiGeEta.code, str(exc)
        return row
    violations = verify_trace(run_scenario(sc))
    row["verdict"] = "compliant" if ok else "noncompliant"
    row["violations"] = len(violations)
    row["detail"] = ";".join(sorted({v.kind for v in violations}))
    return row


def sweep(base, axis: str, values, seeds, jobs: int = 1) -> list[dict]:
    """Run every (value, seed) cell and report its model verdict and violation count.

    ``verdict`` is ``compliant``, ``noncompliant`` or the error code of a
    rejected configuration (for instance ``PI_GE_ETA``).
    """
    items = [(base, axis, value, seed) for value in values for seed in seeds]
    return _pmap(_sweep_cell, items, jobs)


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    base = parse_scenario(args.scenario)
    seeds = parse_seeds(args.seed) or range(base.seed, base.seed + 1)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    rows = sweep(base, args.axis, values, seeds, args.jobs)
    text = sweep_csv(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    codes = []
    for r in rows:
        if r["verdict"] == "compliant":
            codes.append(PROPERTY_VIOLATION if r["violations"] else OK)
        else:
            codes.append(MODEL_NONCOMPLIANT)
    return _worst(codes)


# -- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sleepytob", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario for one or more seeds")
    r.add_argument("--scenario", required=True, help="scenario file (text or JSON)")
    r.add_argument("--seed", help="seed S or inclusive range S..S' (default: the scenario's seed)")
    r.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./runs)")
    r.add_argument("--jobs", type=int, default=1, help="seeds run in parallel (default: 1)")
    r.set_defaults(fn=cmd_run)

    v = sub.add_parser("verify", help="check a trace for property violations")
    v.add_argument("--trace", required=True)
    v.set_defaults(fn=cmd_verify)

    m = sub.add_parser("metrics", help="latency, block time and vote metrics of a trace")
    m.add_argument("--trace", required=True)
    m.add_argument("--format", choices=("csv", "json"), default="csv")
    m.set_defaults(fn=cmd_metrics)

    t = sub.add_parser("table", help="per-protocol metric table over a directory of traces")
    t.add_argument("--dir", required=True)
    t.set_defaults(fn=cmd_table)

    s = sub.add_parser("sweep", help="vary one scenario parameter and report verdicts as CSV")
    s.add_argument("--scenario", required=True)
    s.add_argument("--axis", required=True, choices=AXES)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--seed", help="seed S or inclusive range S..S'")
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.add_argument("--jobs", type=int, default=1, help="cells run in parallel (default: 1)")
    s.set_defaults(fn=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG
    except InsufficientTrace as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INSUFFICIENT_TRACE


if __name__ == "__main__":
    sys.exit(main())
