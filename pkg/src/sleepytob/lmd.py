"""Latest-message variant of the one-vote protocol with vote expiration.

Votes carry their view. For ``GA_v`` a validator counts, for every sender
not caught equivocating in a view of the window ``[v - eta, v]``, only that
sender's latest vote from the window. ``eta = 0`` gives back the plain
protocol; ``eta = math.inf`` never expires anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from . import trace as T
from .core import Log, Message, MsgKind
from .ga import (
    NOT_PARTICIPATING,
    OUTPUT_PHASES,
    SNAPSHOT_OFFSETS,
    GAKind,
    HandleResult,
    InputRecord,
    majority_chain,
)
from .core import MissingSnapshot
from .tob_single import TobSingleNode

Eta = Union[int, float]


@dataclass(frozen=True)
class AsynchronyWindow:
    v_a: int
    pi: int

    def __post_init__(self):
        if self.v_a < 0 or self.pi < 0:
            raise ValueError("asynchrony window fields must be non-negative")

    def protected_views(self, view: int) -> bool:
        """True for views whose decisions must survive the window."""
        return view <= self.v_a or view >= self.v_a + self.pi + 2


class VoteBook:
    """All votes a validator has seen, keyed by sender and view."""

    def __init__(self, eta: Eta):
        if eta < 0:
            raise ValueError("eta must be non-negative")
        self.eta = eta
        self.votes: dict[int, dict[int, InputRecord]] = {}
        self.evidence: dict[int, dict[int, tuple[Log, Log]]] = {}

    def in_window(self, view: int, current: int) -> bool:
        return current - self.eta <= view <= current

    def handle_vote(self, sender: int, view: int, log: Log, now: int) -> HandleResult:
        if view in self.evidence.get(sender, ()):
            return HandleResult.IGNORED
        slots = self.votes.setdefault(sender, {})
        rec = slots.get(view)
        if rec is None:
            slots[view] = InputRecord(log, now)
            return HandleResult.RECORDED
        if rec.log == log:
            return HandleResult.IGNORED
        del slots[view]
        self.evidence.setdefault(sender, {})[view] = (rec.log, log)
        return HandleResult.EQUIVOCATION_RECORDED

    def equivocating(self, sender: int, current: int) -> bool:
        return any(self.in_window(w, current) for w in self.evidence.get(sender, ()))

    def latest_unexpired(self, sender: int, current: int) -> Optional[tuple[Log, int]]:
        rec = self._latest(sender, current)
        return None if rec is None else (rec[1].log, rec[0])

    def _latest(self, sender, current):
        if self.equivocating(sender, current):
            return None
        best = None
        for w, rec in self.votes.get(sender, {}).items():
            if self.in_window(w, current) and (best is None or w > best[0]):
                best = (w, rec)
        return best

    def tally_entries(self, current: int, marker: Optional[int]) -> dict[int, Log]:
        """Sender -> latest unexpired vote, restricted to votes received by ``marker``."""
        out = {}
        for sender in self.votes:
            best = self._latest(sender, current)
            if best is not None and (marker is None or best[1].received_at <= marker):
                out[sender] = best[1].log
        return out

    def senders(self, current: int) -> set:
        out = set()
        for sender, slots in self.votes.items():
            if any(self.in_window(w, current) for w in slots):
                out.add(sender)
        for sender, ev in self.evidence.items():
            if any(self.in_window(w, current) for w in ev):
                out.add(sender)
        return out

    def support(self, log: Log, current: int, marker: Optional[int] = None) -> int:
        return sum(1 for lg in self.tally_entries(current, marker).values() if log.is_prefix_of(lg))

    def expire(self, below: int) -> list[tuple[int, int]]:
        """Drop votes and evidence from views before ``below``.

        Returns the (sender, view) pairs dropped while still being the
        sender's latest vote.
        """
        gone = []
        for sender, slots in self.votes.items():
            old = [w for w in slots if w < below]
            if not old:
                continue
            if len(old) == len(slots):
                gone.append((sender, max(old)))
            for w in old:
                del slots[w]
        for ev in self.evidence.values():
            for w in [w for w in ev if w < below]:
                del ev[w]
        return sorted(gone)


def support_lmd(book: VoteBook, log: Log, marker: Optional[int], view: int) -> int:
    return book.support(log, view, marker)


class LmdInstance:
    """Adapter exposing one view's tally over the shared :class:`VoteBook`.

    It mirrors the parts of ``GAState`` the node driver uses.
    """

    kind = GAKind.THREE_GRADE

    def __init__(self, tag, book: VoteBook, started_at: int, delta: int):
        self.instance = tag
        self.view = tag[0]
        self.book = book
        self.started_at = started_at
        self.delta = delta
        self.snapshots: dict[int, int] = {}

    def take_snapshot(self, now: int) -> int:
        for k in SNAPSHOT_OFFSETS[self.kind]:
            if self.started_at + k * self.delta == now:
                self.snapshots[k] = now
                return k
        raise ValueError(f"tick {now} is not a snapshot tick of {self.instance!r}")

    def _marker(self, snap):
        if snap is None:
            return None
        if snap not in self.snapshots:
            raise MissingSnapshot(f"snapshot {snap} not taken for {self.instance!r}")
        return self.snapshots[snap]

    def entries(self, snap=None) -> dict[int, Log]:
        return self.book.tally_entries(self.view, self._marker(snap))

    def senders(self) -> set:
        return self.book.senders(self.view)

    def sender_count(self) -> int:
        return len(self.senders())

    def participation_allowed(self, grade: int) -> bool:
        _, snap = OUTPUT_PHASES[self.kind][grade]
        return snap is None or snap in self.snapshots

    def highest_output(self, grade: int):
        if not self.participation_allowed(grade):
            return NOT_PARTICIPATING
        _, snap = OUTPUT_PHASES[self.kind][grade]
        return majority_chain(self.entries(snap).values(), self.sender_count())


class TobLmdNode(TobSingleNode):
    protocol = "TOB1_LMD"

    def __init__(self, vid, n, delta, seed, trace, eta: Eta = 0, detail=False, instrument=False):
        super().__init__(vid, n, delta, seed, trace, detail, instrument)
        self.book = VoteBook(eta)
        self.eta = eta

    def instance(self, tag):
        st = self.ga.get(tag)
        if st is None:
            st = LmdInstance(tag, self.book, self.instance_start(tag), self.delta)
            self.ga[tag] = st
        return st

    def _relevant_until(self, view: int) -> float:
        if self.eta == math.inf:
            return math.inf
        return self.instance_end((view + self.eta, 0))

    def receive(self, msg: Message, now: int) -> list[Message]:
        if msg.kind is MsgKind.PROPOSAL:
            return super().receive(msg, now)
        if msg.round != 0 or self._relevant_until(msg.view) < now:
            return []
        book = self.book
        prior = None
        if self.eta > 0:
            prior = book._latest(msg.sender, msg.view)
        res = book.handle_vote(msg.sender, msg.view, msg.log, now)
        tag = [msg.view, 0]
        if res is HandleResult.EQUIVOCATION_RECORDED:
            first, second = book.evidence[msg.sender][msg.view]
            self.emit(now, T.EQUIVOCATION_DETECTED, instance=tag, sender=msg.sender,
                      logs=[first.to_json(), second.to_json()])
        elif res is HandleResult.RECORDED:
            if self.detail:
                self.emit(now, T.INPUT_RECORDED, instance=tag, sender=msg.sender, log=msg.log.to_json())
            if prior is not None and prior[0] < msg.view:
                self.emit(now, T.VOTE_SUPERSEDED, sender=msg.sender, old_view=prior[0], new_view=msg.view)
        return [msg] if res.forward else []

    def on_tick(self, now):
        out = super().on_tick(now)
        loc = self.clock.locate(now)
        if loc is not None and loc[1] == 2 and self.eta != math.inf:
            # GA_{v-1} has just ended; its window's oldest view is no longer needed
            view = loc[0]
            for sender, w in self.book.expire(view - self.eta):
                if self.eta > 0:
                    self.emit(now, T.VOTE_EXPIRED, sender=sender, view=w)
        return out
