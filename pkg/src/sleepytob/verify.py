"""Offline analysis: participation-model compliance, property oracles, metrics."""

from __future__ import annotations

import bisect
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import kernels
from . import trace as T
from .core import IncompatibleSet, Log, SimError, common_prefix, compatible, derive_seed, highest, is_chain
from .scenario import GA_PROTOCOLS, Scenario, Schedule
from .tob_single import good_leader

UNEVALUATED = "UNEVALUATED"


class PiGeEta(SimError):
    """The asynchrony window is not shorter than the expiration period."""

    code = "PI_GE_ETA"


class InsufficientTrace(SimError):
    code = "INSUFFICIENT_TRACE"


# -- sleepy-model compliance ------------------------------------------------------


@dataclass(frozen=True)
class SleepyParams:
    """(T_f = ∞, T_b, T_s, T_c, rho) in ticks."""

    T_b: int
    T_s: int
    T_c: int
    rho: Fraction = Fraction(1)

    def __post_init__(self):
        if min(self.T_b, self.T_s, self.T_c) < 0:
            raise ValueError("time constants must be non-negative")
        if Fraction(self.rho) < 1:
            raise ValueError("rho must be at least 1")

    @classmethod
    def for_protocol(cls, protocol: str, delta: int) -> "SleepyParams":
        if protocol in ("TOB1", "TOB1_LMD"):
            return cls(5 * delta, 2 * delta, 5 * delta)
        if protocol == "TOB2":
            return cls(3 * delta, 2 * delta, 3 * delta)
        if protocol == "GA2":
            return cls(3 * delta, 0, 3 * delta)
        if protocol == "GA3":
            return cls(5 * delta, 0, 5 * delta)
        raise ValueError(f"unknown protocol {protocol!r}")


@dataclass(frozen=True)
class TickRecord:
    t: int
    h: int
    f: int
    ok: object  # True, False or UNEVALUATED


@dataclass
class ComplianceReport:
    params: SleepyParams
    records: list
    overall: bool
    failures: list = field(default_factory=list)
    witnesses: dict = field(default_factory=dict)

    @property
    def first_failure(self) -> Optional[TickRecord]:
        return self.failures[0] if self.failures else None

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "params": {"T_b": self.params.T_b, "T_s": self.params.T_s, "T_c": self.params.T_c,
                       "rho": str(self.params.rho)},
            "failures": [[r.t, r.h, r.f] for r in self.failures],
            "unevaluated_from": next((r.t for r in self.records if r.ok == UNEVALUATED), None),
        }


def h_count(schedule: Schedule, t1: int, t2: int, t3: int) -> tuple[int, set]:
    """|H_{t1,t2,t3}| and the set itself."""
    if t1 > t2:
        raise ValueError("t1 must not exceed t2")
    hs = schedule.H_range(t1, t2, t3)
    return len(hs), hs


def check_sleepy(schedule: Schedule, params: SleepyParams, horizon: Optional[int] = None,
                 step: int = 1) -> ComplianceReport:
    """Evaluate ``h_{t-T_s,t,t+T_c} > rho * f_{t+T_b}`` at every tick.

    Ticks whose look-ahead ``t + T_c`` passes the horizon are UNEVALUATED.
    ``step`` > 1 gives the coarser mode that only checks multiples of it.
    """
    horizon = schedule.horizon if horizon is None else horizon
    last = kernels.last_asleep(schedule.awake)
    h, f = kernels.window_counts(last, schedule.corrupt_at, params.T_s, params.T_c, params.T_b, horizon + 1)
    rho = Fraction(params.rho)
    limit = horizon - params.T_c
    records, failures, witnesses = [], [], {}
    for t in range(0, horizon + 1, step):
        if t > limit:
            records.append(TickRecord(t, h[t], f[t], UNEVALUATED))
            continue
        ok = h[t] > rho * f[t]
        rec = TickRecord(t, h[t], f[t], ok)
        records.append(rec)
        if not ok:
            failures.append(rec)
            if len(witnesses) < 16:
                witnesses[t] = {
                    "H": sorted(schedule.H_range(t - params.T_s, t, t + params.T_c)),
                    "B": sorted(schedule.B(t + params.T_b)),
                }
    return ComplianceReport(params, records, not failures, failures, witnesses)


def ga_condition(schedule: Schedule, kind_grades: int, delta: int) -> bool:
    """``h_{0,0,TΔ} > f_{TΔ}`` for a GA with 2 (T=3) or 3 (T=5) grades starting at 0."""
    span = (3 if kind_grades == 2 else 5) * delta
    return len(schedule.H_range(0, 0, span)) > len(schedule.B(span))


# -- asynchrony conditions ----------------------------------------------------------


@dataclass
class AsyncReport:
    eta: float
    v_a: int
    pi: int
    eq2: list  # (t, lhs, rhs, ok)
    eq3: list  # (v', lhs, rhs, ok)
    awake_ok: bool
    missing_awake: list
    overall: bool
    witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "eq2_failures": [list(r[:3]) for r in self.eq2 if r[3] is False],
            "eq3": [list(r) for r in self.eq3],
            "awake_ok": self.awake_ok,
            "missing_awake": self.missing_awake,
            "witness": self.witness,
        }


def _stable_masks(schedule: Schedule, span: int) -> list[int]:
    """Bitmask of H_{s-span, s} for every tick s (windows clamped at 0)."""
    n = schedule.n
    last = kernels.last_asleep(schedule.awake)
    out = []
    for s in range(schedule.width):
        lo = max(0, s - span)
        m = 0
        for v in range(n):
            if schedule.corrupt_at[v] > s and last[v][s] < lo:
                m |= 1 << v
        out.append(m)
    return out


def _bits(mask: int) -> list[int]:
    return [v for v in range(mask.bit_length()) if mask >> v & 1]


def _mask(vs) -> int:
    m = 0
    for v in vs:
        m |= 1 << v
    return m


def check_eq2(schedule: Schedule, eta, horizon: Optional[int] = None,
              stable: Optional[list] = None) -> list:
    """Per-tick condition of the expiration-period protocol.

    At every tick ``t``, ``h_{t-2Δ,t,t+5Δ}`` must exceed the number of
    validators that are corrupted by ``t + 5Δ`` or were stably awake at some
    ``s`` in ``[t - 4ηΔ, t]`` but are not stably awake at ``t`` (their latest
    votes are unexpired yet stale). Returns ``(t, lhs, rhs, ok)`` rows;
    ``ok`` is UNEVALUATED where ``t + 5Δ`` passes the horizon.
    """
    d = schedule.delta
    horizon = schedule.horizon if horizon is None else horizon
    if stable is None:
        stable = _stable_masks(schedule, 2 * d)
    B = lambda t: _mask(schedule.B(t))  # noqa: E731
    eq2 = []
    back = math.inf if eta == math.inf else 4 * eta * d
    # incremental union: for each validator the last tick it was in a stable mask
    last_in = [-1] * schedule.n
    for t in range(0, horizon + 1):
        for v in _bits(stable[t]):
            last_in[v] = t
        if t + 5 * d > horizon:
            eq2.append((t, None, None, UNEVALUATED))
            continue
        lo = -math.inf if back == math.inf else t - back
        union = _mask(v for v in range(schedule.n) if last_in[v] >= 0 and last_in[v] >= lo)
        cur = stable[t]
        lhs_set = _mask(schedule.H_range(t - 2 * d, t, t + 5 * d))
        rhs = (union & ~cur) | B(t + 5 * d)
        lhs, rhs_n = bin(lhs_set).count("1"), bin(rhs).count("1")
        eq2.append((t, lhs, rhs_n, lhs > rhs_n))
    return eq2


def check_async(schedule: Schedule, eta, window: tuple[int, int], horizon: Optional[int] = None) -> AsyncReport:
    """Check the expiration-period conditions for one asynchrony window.

    Evaluates the per-tick sleepiness condition with stale-vote holders
    counted as adversarial, the per-view condition for every view from
    ``v_a`` to ``v_a + pi + 1``, and that the validators stably awake around
    ``t_{v_a}`` are awake at ``t_{v_a} + 2Δ``.
    """
    v_a, pi = window
    if pi >= eta:
        raise PiGeEta(f"PI_GE_ETA: pi={pi} must be smaller than eta={eta}")
    d = schedule.delta
    horizon = schedule.horizon if horizon is None else horizon
    tv = schedule.view_start
    stable = _stable_masks(schedule, 2 * d)
    B = lambda t: _mask(schedule.B(t))  # noqa: E731

    def union_since(lo: int, hi: int) -> int:
        m = 0
        for s in range(max(0, lo), min(hi, len(stable) - 1) + 1):
            m |= stable[s]
        return m

    eq2 = check_eq2(schedule, eta, horizon, stable)

    base = schedule.H_range(tv(v_a) - d, tv(v_a) + d)
    base_mask = _mask(base)
    eq3 = []
    witness = {}
    for vp in range(v_a, v_a + pi + 2):
        end = tv(vp) + 6 * d
        lhs_set = schedule.H_range(tv(v_a) - d, tv(v_a) + d, end)
        start = tv(vp - eta) + d if eta != math.inf else 0
        u = union_since(start, tv(vp) + d)
        rhs = (u & ~base_mask) | B(end)
        ok = len(lhs_set) > bin(rhs).count("1")
        eq3.append((vp, len(lhs_set), bin(rhs).count("1"), ok))
        if not ok and "eq3" not in witness:
            witness["eq3"] = {"view": vp, "H": sorted(lhs_set), "rhs": _bits(rhs)}
    wake_t = tv(v_a) + 2 * d
    missing = sorted(v for v in base if schedule.honest(v, wake_t) and not schedule.is_awake(v, wake_t))
    awake_ok = not missing
    eq2_ok = all(r[3] is not False for r in eq2)
    first_eq2 = next((r for r in eq2 if r[3] is False), None)
    if first_eq2 is not None:
        witness["eq2"] = {"t": first_eq2[0], "lhs": first_eq2[1], "rhs": first_eq2[2]}
    overall = eq2_ok and all(r[3] for r in eq3) and awake_ok
    return AsyncReport(eta, v_a, pi, eq2, eq3, awake_ok, missing, overall, witness)


def compliance(sc: Scenario) -> tuple[bool, dict]:
    """Whether ``sc``'s schedule satisfies the model condition its protocol relies on.

    GA runs use ``h > f`` over the instance; TOB runs use the sleepy-model
    inequality with the protocol's constants; runs with an asynchrony window
    use the expiration-period conditions instead. Returns the verdict and a
    JSON-ready report.
    """
    schedule = Schedule.from_scenario(sc)
    if sc.protocol in GA_PROTOCOLS:
        # every validator counted as an honest participant must hold an input
        span = (3 if sc.protocol == "GA2" else 5) * sc.delta
        have = {v for v, _ in sc.inputs}
        missing = sorted(v for v in schedule.H_range(0, 0, span) if v not in have)
        ok = not missing and ga_condition(schedule, 2 if sc.protocol == "GA2" else 3, sc.delta)
        return ok, {"overall": ok, "missing_inputs": missing}
    if sc.asynchrony is not None:
        rep = check_async(schedule, sc.eta, sc.asynchrony)
        return rep.overall, rep.to_json()
    if sc.protocol == "TOB1_LMD" and sc.eta:
        rows = check_eq2(schedule, sc.eta)
        bad = [list(r[:3]) for r in rows if r[3] is False]
        return not bad, {"overall": not bad, "eq2_failures": bad[:16]}
    rep = check_sleepy(schedule, SleepyParams.for_protocol(sc.protocol, sc.delta))
    return rep.overall, rep.to_json()


# -- trace property oracles ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    tick: Optional[int]
    validator: Optional[int]
    detail: str

    def to_json(self) -> dict:
        return {"kind": self.kind, "tick": self.tick, "validator": self.validator, "detail": self.detail}


def scenario_of(trace: T.Trace) -> Scenario:
    return Scenario.from_dict(trace.header["scenario"])


def _log(data) -> Optional[Log]:
    return None if data is None else Log.from_json(data)


class _GAView:
    """Outputs and inputs of one GA instance, gathered from a trace."""

    def __init__(self):
        self.outputs: dict[int, dict[int, list]] = defaultdict(lambda: defaultdict(list))  # grade -> v -> [top]
        self.ticks: dict[int, int] = {}
        self.instrumented: dict[tuple[int, int], dict] = {}


def _ga_views(trace: T.Trace) -> dict:
    views: dict = defaultdict(_GAView)
    for e in trace.of_kind(T.GA_OUTPUT):
        tag = tuple(e.payload["instance"])
        g = e.payload["grade"]
        gv = views[tag]
        gv.outputs[g][e.validator].append(_log(e.payload["log"]))
        gv.ticks[g] = e.tick
        if "senders" in e.payload:
            gv.instrumented[(g, e.validator)] = e.payload
    return views


def _check_ga(tag, gv: _GAView, max_grade: int, honest_inputs: Optional[list], validity_inputs: Optional[list],
              out: list) -> None:
    grades = range(max_grade + 1)
    tops = {}
    for g in grades:
        tops[g] = {}
        for v, logs in gv.outputs.get(g, {}).items():
            if len(logs) > 1:
                out.append(Violation("GA_UNIQUENESS", gv.ticks.get(g), v, f"{tag}: several outputs at grade {g}"))
            tops[g][v] = logs[0]
    # consistency
    for g in grades:
        if g == 0:
            continue
        present = [lg for lg in tops[g].values() if lg is not None]
        if not is_chain(present):
            out.append(Violation("GA_CONSISTENCY", gv.ticks.get(g), None, f"{tag}: conflicting grade-{g} outputs"))
    # graded delivery
    for g in grades:
        if g == 0:
            continue
        present = [lg for lg in tops[g].values() if lg is not None]
        if not present or not is_chain(present):
            continue
        target = highest(present)
        for v, lg in tops[g - 1].items():
            if lg is None or not target.is_prefix_of(lg):
                out.append(Violation("GA_GRADED_DELIVERY", gv.ticks.get(g - 1), v,
                                     f"{tag}: grade-{g} output {target!r} missing at grade {g - 1}"))
    # integrity
    if honest_inputs is not None:
        for g in grades:
            for v, lg in tops[g].items():
                if lg is not None and not any(lg.is_prefix_of(x) for x in honest_inputs):
                    out.append(Violation("GA_INTEGRITY", gv.ticks.get(g), v,
                                         f"{tag}: output {lg!r} at grade {g} extends no honest input"))
    # validity
    if validity_inputs:
        target = common_prefix(validity_inputs)
        for g in grades:
            for v, lg in tops[g].items():
                if lg is None or not target.is_prefix_of(lg):
                    out.append(Violation("GA_VALIDITY", gv.ticks.get(g), v,
                                         f"{tag}: grade-{g} output {lg!r} does not extend {target!r}"))
    # inclusion chain (instrumented three-grade instances)
    if max_grade == 2 and gv.instrumented:
        by = defaultdict(list)
        for (g, v), p in gv.instrumented.items():
            by[g].append((v, set(p["senders"]), {tuple(x) for x in p["entries"]}))
        for i, s0, e0 in by[0]:
            for j, s1, e1 in by[1]:
                if not s0 <= s1 or not e1 <= e0:
                    out.append(Violation("GA_INCLUSION", gv.ticks.get(1), j, f"{tag}: grade 0/1 sets of {i},{j}"))
        for j, s1, e1 in by[1]:
            for k, s2, e2 in by[2]:
                if not s1 <= s2 or not e2 <= e1:
                    out.append(Violation("GA_INCLUSION", gv.ticks.get(2), k, f"{tag}: grade 1/2 sets of {j},{k}"))


def _decision_window_views(sc: Scenario):
    if sc.asynchrony is None:
        return None
    v_a, pi = sc.asynchrony
    return v_a, pi


def verify_trace(trace: T.Trace, protocol: Optional[str] = None,
                 scenario: Optional[Scenario] = None) -> list[Violation]:
    """Check every applicable property; an empty list means a clean run.

    The scenario is read from the trace header unless given explicitly.
    """
    sc = scenario or scenario_of(trace)
    protocol = protocol or sc.protocol
    schedule = Schedule.from_scenario(sc)
    out: list[Violation] = []
    for e in trace.of_kind(T.ABORT):
        out.append(Violation("ABORT", e.tick, e.validator, e.payload.get("reason", "")))
    for e in trace.of_kind(T.SAFETY_VIOLATION):
        out.append(Violation("SAFETY", e.tick, e.validator, e.payload.get("reason", "")))
    views = _ga_views(trace)
    if protocol in GA_PROTOCOLS:
        _verify_ga_run(trace, sc, schedule, views, out)
    else:
        _verify_tob_run(trace, sc, schedule, views, out)
    return out


def _verify_ga_run(trace, sc, schedule, views, out):
    max_grade = 1 if sc.protocol == "GA2" else 2
    span = (max_grade * 2 + 1) * sc.delta
    inputs = {e.validator: _log(e.payload["log"]) for e in trace.of_kind(T.INPUT_SENT)}
    survivors = schedule.H_range(0, 0, span)
    valid = [inputs[v] for v in sorted(survivors) if v in inputs]
    for tag, gv in views.items():
        _check_ga(tag, gv, max_grade, list(inputs.values()), valid, out)


def _verify_tob_run(trace, sc, schedule, views, out):
    d = sc.delta
    tob2 = sc.protocol == "TOB2"
    lmd = sc.protocol == "TOB1_LMD"
    window = sc.asynchrony
    votes = defaultdict(dict)  # (view, round) -> validator -> log
    vote_ticks = {}
    for e in trace.of_kind(T.VOTE_CAST):
        tag = (e.payload["view"], e.payload.get("round", 0))
        votes[tag][e.validator] = _log(e.payload["log"])
        vote_ticks[tag] = e.tick
    ga_len = (3 if tob2 else 5) * d
    # GA properties of every internal instance
    for tag, gv in views.items():
        view = tag[0]
        if window is not None and view >= window[0]:
            continue
        start = vote_ticks.get(tag)
        if start is None:
            start = (5 * view + (1 if tag[1] == 1 else 3)) * d if tob2 else (4 * view + 1) * d
        if start + ga_len > sc.horizon:
            continue  # the instance does not finish inside the trace
        honest_votes = votes.get(tag, {})
        if lmd and sc.eta:
            lo = -math.inf if sc.eta == math.inf else view - sc.eta
            pool = [lg for (w, r), vs in votes.items() if lo <= w <= view for lg in vs.values()]
        else:
            pool = list(honest_votes.values())
        if lmd and sc.eta:
            # each honest validator's latest vote in the window is what tallies may count
            latest = {}
            for w in range(view, -1, -1):
                if view - w > sc.eta:
                    break
                for v, lg in votes.get((w, 0), {}).items():
                    latest.setdefault(v, lg)
            survivors = [lg for v, lg in latest.items() if schedule.honest(v, start + ga_len)]
        else:
            survivors = [lg for v, lg in honest_votes.items() if schedule.honest(v, start + ga_len)]
        _check_ga(tag, gv, 1 if tob2 else 2, pool or None, survivors, out)

    decisions = [(e.tick, e.validator, e.payload["view"], _log(e.payload["log"])) for e in trace.of_kind(T.DECIDED)]
    # safety
    protected = decisions
    if window is not None:
        v_a, pi = window
        protected = [x for x in decisions if x[2] <= v_a or x[2] >= v_a + pi + 2]
    _pairwise_safety(protected, window, out)
    # reorg resilience
    _check_reorg(trace, sc, schedule, decisions, out)
    if window is not None:
        _check_window_votes(trace, sc, schedule, decisions, votes, out)


def _pairwise_safety(decisions, window, out):
    # decisions compatible pairwise iff the distinct logs form a chain; locate a witness pair if not
    logs = sorted({x[3] for x in decisions}, key=len)
    if is_chain(logs):
        return
    first = {}
    for x in decisions:
        first.setdefault(x[3], x)
    for i, a in enumerate(logs):
        for b in logs[i + 1:]:
            if not compatible(a, b):
                xa, xb = first[a], first[b]
                kind = "SAFETY"
                if window is not None:
                    v_a, pi = window
                    lo, hi = sorted((xa[2], xb[2]))
                    if lo <= v_a and hi >= v_a + pi + 2:
                        kind = "ASYNC"
                out.append(Violation(kind, xb[0], xb[1],
                                     f"view {xa[2]} decision {a!r} by {xa[1]} conflicts with view {xb[2]} "
                                     f"decision {b!r}"))
                return


def reorg_bounds(protocol: str, delta: int) -> tuple[int, int]:
    """(first tick offset after t_v at which decisions must extend the good
    leader's proposal, continuous-awake span after which it must be decided)."""
    return (4 * delta if protocol == "TOB2" else 6 * delta), 8 * delta


def good_leaders(sc: Scenario, schedule: Optional[Schedule] = None) -> dict[int, Optional[int]]:
    schedule = schedule or Schedule.from_scenario(sc)
    out = {}
    for v in range(sc.views):
        tv = sc.view_start(v)
        if tv + sc.delta > sc.horizon:
            break
        out[v] = good_leader(sc.seed, v, schedule.H(tv), schedule.B(tv + sc.delta))
    return out


def _check_reorg(trace, sc, schedule, decisions, out):
    d = sc.delta
    lat, span = reorg_bounds(sc.protocol, d)
    proposals = {}
    for e in trace.of_kind(T.PROPOSAL_SENT):
        proposals[(e.validator, e.payload["view"])] = (_log(e.payload["log"]), e.tick)
    window = sc.asynchrony
    by_validator = defaultdict(list)
    for tick, v, view, lg in decisions:
        by_validator[v].append((tick, lg))
    for view, leader in good_leaders(sc, schedule).items():
        if leader is None:
            continue
        if window is not None and window[0] < view:
            continue
        tv = sc.view_start(view)
        if tv + lat > sc.horizon:
            continue
        prop = proposals.get((leader, view))
        if prop is None:
            out.append(Violation("REORG", tv, leader, f"good leader of view {view} did not propose"))
            continue
        target = prop[0]
        limit = math.inf if window is None else sc.view_start(window[0] + 1)
        for tick, v, dview, lg in decisions:
            if tv + lat <= tick < limit and not target.is_prefix_of(lg):
                out.append(Violation("REORG", tick, v, f"decision {lg!r} drops good proposal {target!r} of view {view}"))
                break
        for v in range(sc.n):
            s = _first_stable_start(schedule, v, tv, span)
            if s is None or s + span > sc.horizon or s + span >= limit:
                continue
            if not schedule.honest(v, s + span):
                continue
            if not any(tick <= s + span and target.is_prefix_of(lg) for tick, lg in by_validator[v]):
                out.append(Violation("REORG", s + span, v,
                                     f"awake on [{s}, {s + span}] but never decided view-{view} proposal {target!r}"))


def _first_stable_start(schedule: Schedule, v: int, start: int, span: int) -> Optional[int]:
    """Smallest s >= start with v awake throughout [s, s + span]."""
    run = 0
    for t in range(start, schedule.width):
        run = run + 1 if schedule.is_awake(v, t) else 0
        if run == span + 1:
            return t - span
    return None


def _check_window_votes(trace, sc, schedule, decisions, votes, out):
    """Votes of validators stably awake around t_{v_a} keep extending the
    pre-window decided log through the window."""
    v_a, pi = sc.asynchrony
    d = sc.delta
    tv = sc.view_start
    before = [lg for tick, v, view, lg in decisions if view <= v_a]
    if not before or not is_chain(before):
        return
    anchor = highest(before)
    base = schedule.H_range(tv(v_a) - d, tv(v_a) + d)
    for w in range(v_a, v_a + pi + 2):
        for v, lg in votes.get((w, 0), {}).items():
            if v in base and schedule.honest(v, tv(w) + 2 * d) and not anchor.is_prefix_of(lg):
                out.append(Violation("WINDOW_VOTE", tv(w) + d, v, f"view-{w} vote {lg!r} does not extend {anchor!r}"))


# -- metrics -------------------------------------------------------------------------------


@dataclass
class Metrics:
    protocol: str
    seed: int
    delta: int
    best_latency: float
    avg_latency: float
    block_time: float
    votes_per_decision: float
    good_leader_rate: float
    samples: int

    def in_deltas(self) -> dict:
        return {
            "best_latency": self.best_latency / self.delta,
            "avg_latency": self.avg_latency / self.delta,
            "block_time": self.block_time / self.delta,
            "votes_per_decision": self.votes_per_decision,
            "good_leader_rate": self.good_leader_rate,
        }

    def to_json(self) -> dict:
        out = {"protocol": self.protocol, "seed": self.seed, "delta": self.delta, "samples": self.samples}
        out.update(self.in_deltas())
        return out

    CSV_FIELDS = ("protocol", "seed", "best", "avg", "block_time", "votes", "good_leader_rate")

    def csv_row(self) -> list:
        m = self.in_deltas()
        return [self.protocol, self.seed, m["best_latency"], m["avg_latency"], m["block_time"],
                m["votes_per_decision"], m["good_leader_rate"]]


def metrics(trace: T.Trace, samples: int = 20000) -> Metrics:
    sc = scenario_of(trace)
    decided = trace.of_kind(T.DECIDED)
    logs = [Log.from_json(e.payload["log"]) for e in decided]
    if not logs:
        raise InsufficientTrace("INSUFFICIENT_TRACE: no decisions")
    try:
        canonical = highest(logs)
    except IncompatibleSet:
        canonical = max(logs, key=len)
    proposed = {}
    for e in trace.of_kind(T.PROPOSAL_SENT):
        proposed.setdefault(e.payload["log"][-1], e.tick)
    first_decided = {}
    for e in decided:
        for b in e.payload["log"][1:]:
            if b not in first_decided or e.tick < first_decided[b]:
                first_decided[b] = e.tick
    blocks = [(proposed[b], first_decided[b]) for b in canonical.blocks[1:] if b in proposed]
    if len(blocks) < 2:
        raise InsufficientTrace("INSUFFICIENT_TRACE: fewer than two decided honest proposals")
    best = min(dec - prop for prop, dec in blocks)
    gaps = [b[0] - a[0] for a, b in zip(blocks, blocks[1:])]
    block_time = sum(gaps) / len(gaps)
    rng = random.Random(derive_seed(sc.seed, "metrics"))
    p0, p_last = blocks[0][0], blocks[-1][0]
    props = [p for p, _ in blocks]
    total = 0.0
    for _ in range(samples):
        tau = p0 + (p_last - p0) * (1.0 - rng.random())  # uniform on (p0, p_last]
        i = bisect.bisect_left(props, tau)
        total += blocks[i][1] - tau
    avg = total / samples
    vote_count = defaultdict(int)
    for e in trace.of_kind(T.VOTE_CAST):
        vote_count[(e.validator, e.payload["view"])] += 1
    pairs = {(e.validator, e.payload["view"]) for e in decided}
    vpd = sum(vote_count[p] for p in pairs) / len(pairs)
    leaders = good_leaders(sc)
    rate = sum(1 for x in leaders.values() if x is not None) / len(leaders) if leaders else 0.0
    return Metrics(sc.protocol, sc.seed, sc.delta, best, avg, block_time, vpd, rate, samples)
