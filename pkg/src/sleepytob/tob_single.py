"""Total-order broadcast with one vote per decision.

Views last 4Δ. ``GA_v`` is a three-grade instance whose input phase is the
vote at ``t_v + Δ``; its grade-0, grade-1 and grade-2 outputs land on the
propose, vote and decide phases of view ``v + 1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

from . import trace as T
from .core import (
    GENESIS_LOG,
    Log,
    Message,
    MsgKind,
    SafetyViolation,
    compatible,
    proposal_block_id,
    vrf,
    vrf_rank_key,
)
from .ga import NOT_PARTICIPATING, GAKind, GAState
from .node import ValidatorNode


class Phase(enum.IntEnum):
    PROPOSE = 0
    VOTE = 1
    DECIDE = 2
    IDLE = 3


@dataclass(frozen=True)
class ViewClock:
    """Maps ticks to (view, phase) for views of ``period`` deltas."""

    delta: int
    period: int = 4

    def view_start(self, view: int) -> int:
        return self.period * self.delta * view

    def locate(self, now: int) -> Optional[tuple[int, int]]:
        """``(view, phase index)`` if ``now`` is a phase boundary, else None."""
        k, rem = divmod(now, self.delta)
        if rem:
            return None
        return divmod(k, self.period)


class ProposalBook:
    """Proposals received per view, with per-sender equivocation tracking."""

    def __init__(self, seed: int):
        self.seed = seed
        self.by_view: dict[int, dict[int, list[Log]]] = {}

    def add(self, msg: Message) -> bool:
        """Record ``msg``; True when it should be forwarded.

        Proposals with a wrong VRF value are dropped. At most two distinct
        logs per (sender, view) are forwarded, which is enough for every
        recipient to see the equivocation.
        """
        if msg.vrf != vrf(self.seed, msg.sender, msg.view):
            return False
        logs = self.by_view.setdefault(msg.view, {}).setdefault(msg.sender, [])
        if msg.log in logs or len(logs) >= 2:
            return False
        logs.append(msg.log)
        return True

    def best_extending(self, view: int, lock: Log) -> Optional[Log]:
        best = None
        best_key = None
        for sender, logs in self.by_view.get(view, {}).items():
            if len(logs) != 1 or not lock.is_prefix_of(logs[0]):
                continue
            key = vrf_rank_key(vrf(self.seed, sender, view), sender)
            if best_key is None or key > best_key:
                best, best_key = logs[0], key
        return best

    def prune(self, below: int) -> None:
        for w in [w for w in self.by_view if w < below]:
            del self.by_view[w]


def select_vote(book: ProposalBook, view: int, lock: Log) -> Log:
    """Highest-VRF non-equivocating proposal extending ``lock``, else ``lock``."""
    best = book.best_extending(view, lock)
    return lock if best is None else best


class TobNodeBase(ValidatorNode):
    """Machinery shared by the one-vote and two-vote protocols.

    GA instances are keyed by ``(view, round)``. Subclasses provide the
    instance schedule (:meth:`instance_start`, :meth:`active_tags`) and the
    per-phase actions (:meth:`act`).
    """

    period = 4
    ga_kind = GAKind.THREE_GRADE
    protocol = "TOB"

    def __init__(self, vid, n, delta, seed, trace, detail=False, instrument=False):
        super().__init__(vid, n, delta, seed, trace, detail, instrument)
        self.clock = ViewClock(delta, self.period)
        self.ga: dict[tuple[int, int], GAState] = {}
        self.proposals = ProposalBook(seed)
        self.decided: Log = GENESIS_LOG
        self.decisions: list[tuple[int, Log]] = []
        self.ga_span = self.ga_kind.duration * delta

    # -- instance bookkeeping --------------------------------------------------

    def instance_start(self, tag: tuple[int, int]) -> int:
        raise NotImplementedError

    def instance_end(self, tag) -> int:
        return self.instance_start(tag) + self.ga_span

    def active_tags(self, view: int) -> Iterable[tuple[int, int]]:
        raise NotImplementedError

    def instance(self, tag) -> GAState:
        st = self.ga.get(tag)
        if st is None:
            st = GAState(tag, self.ga_kind, self.instance_start(tag), self.delta, self.id)
            self.ga[tag] = st
        return st

    # -- message handling -------------------------------------------------------

    def receive(self, msg: Message, now: int) -> list[Message]:
        if msg.kind is MsgKind.PROPOSAL:
            if msg.view < self.current_view(now):
                return []
            return [msg] if self.proposals.add(msg) else []
        tag = (msg.view, msg.round)
        st = self.ga.get(tag)
        if st is None:
            if not self.valid_round(msg.round) or self.instance_end(tag) < now:
                return []
            st = self.instance(tag)
        elif st.started_at + self.ga_span < now:
            return []
        return self.ga_receive(st, msg, now)

    def valid_round(self, rnd: int) -> bool:
        return rnd == 0

    def current_view(self, now: int) -> int:
        return now // (self.period * self.delta)

    # -- tick -----------------------------------------------------------------

    def on_tick(self, now: int) -> list[Message]:
        loc = self.clock.locate(now)
        if loc is None:
            return []
        view, phase = loc
        results = {}
        for tag in self.active_tags(view):
            st = self.instance(tag)
            if st.started_at < now <= st.started_at + self.ga_span:
                res = self.ga_phase(st, now)
                if res:
                    results[tag] = res
        out = self.act(view, phase, now, results)
        for tag in [t for t, st in self.ga.items() if st.started_at + self.ga_span <= now]:
            del self.ga[tag]
        self.proposals.prune(view)
        return out

    def act(self, view, phase, now, results) -> list[Message]:
        raise NotImplementedError

    # -- shared actions ---------------------------------------------------------

    @staticmethod
    def output(results, tag, grade):
        """Output of ``tag`` at ``grade`` from this tick's results.

        Instances with a negative view are the virtual pre-genesis instance,
        which outputs the genesis log at every grade.
        """
        if tag[0] < 0:
            return GENESIS_LOG
        return results.get(tag, {}).get(grade, NOT_PARTICIPATING)

    def propose(self, view, now, candidate) -> list[Message]:
        if candidate is NOT_PARTICIPATING or candidate is None:
            return []
        log = candidate.extend(proposal_block_id(self.n, view, self.id))
        value = vrf(self.seed, self.id, view)
        self.emit(now, T.PROPOSAL_SENT, view=view, log=log.to_json(), vrf=value)
        return [Message(MsgKind.PROPOSAL, self.id, view, log, vrf=value)]

    def vote(self, view, rnd, now, log) -> list[Message]:
        if log is NOT_PARTICIPATING or log is None:
            return []
        self.instance((view, rnd))
        payload = dict(view=view, log=log.to_json())
        if rnd:
            payload["round"] = rnd
        self.emit(now, T.VOTE_CAST, **payload)
        return [Message(MsgKind.GA_INPUT, self.id, view, log, round=rnd)]

    def decide(self, view, now, top) -> None:
        if top is NOT_PARTICIPATING:
            return
        log = GENESIS_LOG if top is None else top
        self.emit(now, T.DECIDED, view=view, log=log.to_json())
        prior = self.decided
        self.decisions.append((view, log))
        if not compatible(prior, log):
            raise SafetyViolation(f"validator {self.id} decided {log!r} after {prior!r}")
        if prior.is_prefix_of(log):
            self.decided = log


class TobSingleNode(TobNodeBase):
    """One validator running the 4Δ-view, one-vote protocol."""

    period = 4
    ga_kind = GAKind.THREE_GRADE
    protocol = "TOB1"

    def instance_start(self, tag):
        return (self.period * tag[0] + 1) * self.delta

    def active_tags(self, view):
        return [(view - 1, 0), (view, 0)] if view > 0 else [(0, 0)]

    def act(self, view, phase, now, results):
        prev = (view - 1, 0)
        if phase == Phase.PROPOSE:
            return self.propose(view, now, self.output(results, prev, 0))
        if phase == Phase.VOTE:
            lock = self.output(results, prev, 1)
            if lock is NOT_PARTICIPATING or lock is None:
                return []
            return self.vote(view, 0, now, select_vote(self.proposals, view, lock))
        if phase == Phase.DECIDE:
            self.decide(view, now, self.output(results, prev, 2))
        return []


def good_leader(seed: int, view: int, honest_awake: Iterable[int], corrupted: Iterable[int]) -> Optional[int]:
    """Good leader of ``view`` given H_{t_v} and B_{t_v+Δ}, or None.

    The highest VRF among every validator that could have a proposal
    received by ``t_v + Δ`` wins; it is a good leader only if it is honest
    and awake at ``t_v`` and still uncorrupted at ``t_v + Δ``.
    """
    honest = set(honest_awake)
    bad = set(corrupted)
    pool = honest | bad
    if not pool:
        return None
    top = max(pool, key=lambda v: vrf_rank_key(vrf(seed, v, view), v))
    return top if top in honest and top not in bad else None
