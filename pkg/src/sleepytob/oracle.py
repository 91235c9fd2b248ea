"""Exhaustive check of one two-grade GA instance on a small system.

Setup: five validators, Δ = 1 tick. Validators 0, 1 and 2 are honest and
always awake; 3 and 4 are Byzantine. Every log in play is genesis ``G``,
``A = G·a`` or ``B = G·b``.

Only first-arrival ticks matter to a recipient, and the instance reads its
state at ticks 1 (snapshot), 2 and 3 (outputs), so each Byzantine
(sender, log) pair reduces to a vector giving every honest recipient's first
arrival in ``{1, 2, 3, NEVER}`` (1 stands for "by the snapshot"). Honest
validators forward what they receive within Δ. So a pair first seen by one
recipient at tick ``t`` reaches every other honest recipient by ``t + 1``,
and only vectors closed under that rule are realizable. Each Byzantine
sender picks one vector for ``A`` and one for ``B``; the all-``NEVER``
vector means the log is not sent. Honest inputs reach everyone by tick 1.

Symmetry: the two blocks can be swapped, the honest validators can be
permuted when they hold the same input, and the Byzantine validators can be
exchanged. Up to symmetry the honest inputs are ``AAA`` or ``AAB``. One
canonical representative per orbit is enumerated.

Each case runs through the production engine (:class:`GAState`) and through
:func:`reference_outputs`, which evaluates the output rules directly from
their set definitions without sharing any code with the engine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .core import Log, compatible
from .ga import GAKind, GAState

NEVER = 99
HONEST = (0, 1, 2)
BYZANTINE = (3, 4)
G = Log()
A = G.extend(1)
B = G.extend(2)
LOGS = (G, A, B)
INPUT_CLASSES = {"AAA": (A, A, A), "AAB": (A, A, B)}


def arrival_vectors() -> list[tuple[int, ...]]:
    """All first-arrival vectors over the honest recipients that forwarding allows."""
    out = []
    for vec in itertools.product((1, 2, 3, NEVER), repeat=len(HONEST)):
        first = min(vec)
        if first >= 3 or all(a <= first + 1 for a in vec):
            out.append(vec)
    return out


@dataclass(frozen=True)
class Case:
    """One adversary choice: honest inputs plus ``arrivals[z] = (vec_A, vec_B)``."""

    inputs: str
    arrivals: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    def honest_input(self, r: int) -> Log:
        return INPUT_CLASSES[self.inputs][r]

    def first_arrival(self, z: int, log: Log, r: int) -> int:
        va, vb = self.arrivals[z - BYZANTINE[0]]
        return (va if log == A else vb)[r]


def _honest_perms(inputs: str):
    if inputs == "AAA":
        return list(itertools.permutations(HONEST))
    return [(0, 1, 2), (1, 0, 2)]


def _canonical(inputs, arrivals):
    """Lexicographically smallest image of ``arrivals`` under the case's symmetries."""
    best = None
    for perm in _honest_perms(inputs):
        permuted = tuple(tuple(tuple(vec[perm[i]] for i in range(len(HONEST))) for vec in pair)
                         for pair in arrivals)
        for order in (permuted, permuted[::-1]):
            if best is None or order < best:
                best = order
    return best


def enumerate_cases():
    """Yield one canonical :class:`Case` per symmetry orbit."""
    vectors = arrival_vectors()
    pairs = list(itertools.product(vectors, repeat=2))
    for inputs in INPUT_CLASSES:
        for z3, z4 in itertools.combinations_with_replacement(pairs, 2):
            arrivals = (z3, z4)
            if _canonical(inputs, arrivals) == arrivals:
                yield Case(inputs, arrivals)


def _deliveries(case: Case, r: int) -> list[tuple[int, int, Log]]:
    """(tick, sender, log) deliveries to honest recipient ``r`` in delivery order."""
    out = [(0 if s == r else 1, s, case.honest_input(s)) for s in HONEST]
    for z in BYZANTINE:
        for log in (A, B):
            at = case.first_arrival(z, log, r)
            if at != NEVER:
                out.append((at, z, log))
    out.sort(key=lambda d: (d[0], d[1], d[2].tip))
    return out


def engine_outputs(case: Case) -> dict[int, dict[int, frozenset]]:
    """Recipient -> grade -> set of output logs, from the production engine."""
    result = {}
    for r in HONEST:
        state = GAState((0, 0), GAKind.TWO_GRADE, 0, 1, r)
        pending = _deliveries(case, r)
        outs = {}
        for t in range(4):
            while pending and pending[0][0] <= t:
                _, s, log = pending.pop(0)
                state.handle_input(s, log, t)
            if t == 1:
                state.take_snapshot(t)
            elif t in (2, 3):
                grade = t - 2
                outs[grade] = frozenset(o.log for o in state.outputs_for_grade(grade, t))
        result[r] = outs
    return result


def reference_outputs(case: Case) -> dict[int, dict[int, frozenset]]:
    """Recipient -> grade -> set of output logs, straight from the definitions.

    With ``R_t`` the (sender, log) pairs received by tick ``t``:
    ``S_t`` are senders with any pair, ``V_t`` the pairs whose sender has
    exactly one log in ``R_t``. Grade 0 at tick 2 outputs every log
    extended by more than ``|S_2| / 2`` pairs of ``V_2``. Grade 1 at tick 3
    outputs every log extended by more than ``|S_3| / 2`` pairs in both
    ``V_1`` and ``V_3``.
    """
    result = {}
    for r in HONEST:
        def received(t):
            pairs = {(s, case.honest_input(s)) for s in HONEST}
            for z in BYZANTINE:
                for log in (A, B):
                    if case.first_arrival(z, log, r) <= t:
                        pairs.add((z, log))
            return pairs

        def unique(pairs):
            return {(s, lg) for s, lg in pairs if sum(1 for s2, _ in pairs if s2 == s) == 1}

        r1, r2, r3 = received(1), received(2), received(3)
        s2 = {s for s, _ in r2}
        s3 = {s for s, _ in r3}
        v1, v2, v3 = unique(r1), unique(r2), unique(r3)
        both = v1 & v3
        grade0 = frozenset(lg for lg in LOGS
                           if 2 * sum(1 for _, x in v2 if lg.is_prefix_of(x)) > len(s2))
        grade1 = frozenset(lg for lg in LOGS
                           if 2 * sum(1 for _, x in both if lg.is_prefix_of(x)) > len(s3))
        result[r] = {0: grade0, 1: grade1}
    return result


def property_violations(case: Case, outs: dict[int, dict[int, frozenset]]) -> list[str]:
    """Uniqueness, consistency, graded delivery, validity and integrity checks."""
    bad = []
    inputs = [case.honest_input(r) for r in HONEST]
    all_g1 = [lg for r in HONEST for lg in outs[r][1]]
    for r in HONEST:
        for g in (0, 1):
            for x, y in itertools.combinations(outs[r][g], 2):
                if not compatible(x, y):
                    bad.append(f"uniqueness r={r} g={g}")
            for lg in outs[r][g]:
                if not any(lg.is_prefix_of(i) for i in inputs):
                    bad.append(f"integrity r={r} g={g} {lg!r}")
        for lg in all_g1:
            if lg not in outs[r][0]:
                bad.append(f"graded delivery r={r} {lg!r}")
    for x, y in itertools.combinations(all_g1, 2):
        if not compatible(x, y):
            bad.append("consistency")
    common = G if len(set(inputs)) > 1 else inputs[0]
    for r in HONEST:
        for g in (0, 1):
            if common not in outs[r][g]:
                bad.append(f"validity r={r} g={g}")
    return bad


def scenario_for(case: Case):
    """The GA2 scenario matching ``case``; its blocks ``a`` and ``b`` become ``A`` and ``B``."""
    from .scenario import Scenario

    labels = {A: "a", B: "b"}
    inputs = tuple((r, labels[case.honest_input(r)]) for r in HONEST)
    return Scenario(n=5, delta=1, protocol="GA2", horizon=3, byzantine=BYZANTINE, inputs=inputs)


def simulate(case: Case):
    """Run ``case`` through the full simulator with a scripted adversary.

    Returns ``(trace, outputs)`` where ``outputs`` maps recipient -> grade ->
    highest output log (or None).
    """
    from . import trace as T
    from .core import Message, MsgKind
    from .scenario import label_logs
    from .sim import ScriptedAdversary, World

    sc = scenario_for(case)
    named = label_logs(["a", "b"])
    script = []
    for z in BYZANTINE:
        for log in (A, B):
            msg = Message(MsgKind.GA_INPUT, z, 0, named["a" if log == A else "b"])
            for r in HONEST:
                at = case.first_arrival(z, log, r)
                if at != NEVER:
                    script.append((r, msg, at))
    trace = World(sc, ScriptedAdversary(sc, script)).run()
    back = {tuple(named["a"].blocks): A, tuple(named["b"].blocks): B}
    outs: dict[int, dict[int, object]] = {r: {} for r in HONEST}
    for ev in trace.of_kind(T.GA_OUTPUT):
        lg = ev.payload["log"]
        outs[ev.validator][ev.payload["grade"]] = None if lg is None else back.get(tuple(lg), G)
    return trace, outs


def highest_of(outs: dict[int, dict[int, frozenset]]) -> dict[int, dict[int, object]]:
    """Reduce output sets to their highest log (None for an empty set)."""
    return {r: {g: max(s, key=lambda lg: lg.height) if s else None for g, s in gs.items()}
            for r, gs in outs.items()}
