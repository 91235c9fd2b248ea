"""Graded Agreement engines with two and three grades.

One :class:`GAState` is one validator's view of one GA instance. The state
keeps the non-equivocating inputs ``V`` with their reception ticks and the
equivocation evidence ``E``. Snapshots are tick markers: since a ``V``
entry never changes its log (it can only be dropped), the entries of the
current ``V`` received by the marker are exactly ``V^marker ∩ V``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Hashable, Optional, Union

from . import kernels
from .core import IncompatibleOutput, Log, Message, MissingSnapshot, MsgKind


class GAKind(enum.IntEnum):
    """Value is the number of grades."""

    TWO_GRADE = 2
    THREE_GRADE = 3

    @property
    def max_grade(self) -> int:
        return int(self) - 1

    @property
    def duration(self) -> int:
        """Length of the instance in multiples of delta."""
        return 3 if self is GAKind.TWO_GRADE else 5


# Snapshot offsets (in deltas after the input phase) each kind stores.
SNAPSHOT_OFFSETS = {GAKind.TWO_GRADE: (1,), GAKind.THREE_GRADE: (1, 2)}

# grade -> (output offset, snapshot offset the tally is filtered by)
OUTPUT_PHASES = {
    GAKind.TWO_GRADE: {0: (2, None), 1: (3, 1)},
    GAKind.THREE_GRADE: {0: (3, None), 1: (4, 2), 2: (5, 1)},
}


class HandleResult(enum.Enum):
    RECORDED = "RECORDED"
    EQUIVOCATION_RECORDED = "EQUIVOCATION_RECORDED"
    IGNORED = "IGNORED"

    @property
    def forward(self) -> bool:
        return self is not HandleResult.IGNORED


class _NotParticipating:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NOT_PARTICIPATING"

    def __bool__(self):
        return False


NOT_PARTICIPATING = _NotParticipating()


@dataclass(frozen=True)
class InputRecord:
    log: Log
    received_at: int


@dataclass(frozen=True)
class GradedOutput:
    log: Log
    grade: int


@dataclass
class GAState:
    instance: Hashable
    kind: GAKind
    started_at: int
    delta: int
    owner: int = -1
    V: dict = field(default_factory=dict)
    E: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)

    @property
    def max_grade(self) -> int:
        return self.kind.max_grade

    def phase_tick(self, offset: int) -> int:
        return self.started_at + offset * self.delta

    # -- message handling ---------------------------------------------------

    def handle_input(self, sender: int, log: Log, now: int) -> HandleResult:
        if sender in self.E:
            return HandleResult.IGNORED
        rec = self.V.get(sender)
        if rec is None:
            self.V[sender] = InputRecord(log, now)
            return HandleResult.RECORDED
        if rec.log == log:
            # duplicate of an already recorded input; not forwarded again
            return HandleResult.IGNORED
        del self.V[sender]
        self.E[sender] = (rec.log, log)
        return HandleResult.EQUIVOCATION_RECORDED

    def take_snapshot(self, now: int) -> int:
        """Record the snapshot marker for the designated tick ``now``."""
        for k in SNAPSHOT_OFFSETS[self.kind]:
            if self.phase_tick(k) == now:
                self.snapshots[k] = now
                return k
        raise ValueError(f"tick {now} is not a snapshot tick of {self.instance!r}")

    # -- tallies ------------------------------------------------------------

    def sender_count(self) -> int:
        return len(self.V) + len(self.E)

    def senders(self) -> set:
        return set(self.V) | set(self.E)

    def _marker(self, snap: Optional[int]) -> Optional[int]:
        if snap is None:
            return None
        try:
            return self.snapshots[snap]
        except KeyError:
            raise MissingSnapshot(f"snapshot {snap} not taken for {self.instance!r}") from None

    def entries(self, snap: Optional[int] = None) -> dict[int, Log]:
        """Senders and logs of ``V^snap ∩ V`` (all of ``V`` when snap is None)."""
        marker = self._marker(snap)
        if marker is None:
            return {s: r.log for s, r in self.V.items()}
        return {s: r.log for s, r in self.V.items() if r.received_at <= marker}

    def support(self, log: Log, snap: Optional[int] = None) -> int:
        return sum(1 for lg in self.entries(snap).values() if log.is_prefix_of(lg))

    def participation_allowed(self, grade: int) -> bool:
        if not 0 <= grade <= self.max_grade:
            raise ValueError(f"grade {grade} out of range for {self.kind.name}")
        _, snap = OUTPUT_PHASES[self.kind][grade]
        return snap is None or snap in self.snapshots

    def highest_output(self, grade: int) -> Union[Log, None, _NotParticipating]:
        """Highest log output with ``grade``; None when nothing passes."""
        if not self.participation_allowed(grade):
            return NOT_PARTICIPATING
        _, snap = OUTPUT_PHASES[self.kind][grade]
        return majority_chain(self.entries(snap).values(), self.sender_count())

    def outputs_for_grade(self, grade: int, now: Optional[int] = None):
        """All graded outputs of the phase, or NOT_PARTICIPATING.

        The output set is prefix-closed, so it is every prefix of the
        highest output.
        """
        if now is not None:
            expected = self.phase_tick(OUTPUT_PHASES[self.kind][grade][0])
            if now != expected:
                raise ValueError(f"grade {grade} output phase is at {expected}, not {now}")
        top = self.highest_output(grade)
        if top is NOT_PARTICIPATING:
            return NOT_PARTICIPATING
        if top is None:
            return []
        return [GradedOutput(top.prefix(h), grade) for h in range(top.height + 1)]


def majority_chain(logs, senders: int) -> Optional[Log]:
    """Highest log supported by a strict majority of ``senders``.

    ``logs`` holds one log per counted supporter. Returns None when not even
    genesis has a majority; raises IncompatibleOutput if two conflicting
    logs both clear the threshold.
    """
    weights: dict[Log, int] = {}
    for lg in logs:
        weights[lg] = weights.get(lg, 0) + 1
    if not weights:
        return None
    distinct = list(weights)
    counts = kernels.prefix_support([lg.blocks for lg in distinct], [weights[lg] for lg in distinct])
    best: Optional[Log] = None
    for lg in distinct:
        blocks = lg.blocks
        # support is non-increasing along a path
        k = 0
        while k < len(blocks) and 2 * counts[blocks[k]] > senders:
            k += 1
        if k == 0:
            continue
        cand = lg if k == len(blocks) else Log(blocks[:k])
        if best is None:
            best = cand
        elif best.is_prefix_of(cand):
            best = cand
        elif not cand.is_prefix_of(best):
            raise IncompatibleOutput(f"{best!r} and {cand!r} both have a majority")
    return best


def start_instance(owner: int, tag: Hashable, kind: GAKind, input: Optional[Log],
                   now: int, delta: int, view: int = 0, round: int = 0):
    """Create the owner's state for a new instance and its input broadcast.

    Returns ``(state, messages)``; ``messages`` is empty when the owner has
    no input.
    """
    state = GAState(tag, kind, now, delta, owner)
    if input is None:
        return state, []
    return state, [Message(MsgKind.GA_INPUT, owner, view, input, round=round)]
