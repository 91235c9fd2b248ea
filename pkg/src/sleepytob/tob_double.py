"""Total-order broadcast with two votes per decision and 5Δ views.

Each view ``v`` runs two two-grade instances: ``GA_{v,1}`` on
``[t_v + Δ, t_v + 4Δ]`` and ``GA_{v,2}`` on ``[t_v + 3Δ, t_{v+1} + Δ]``.
Decisions come from grade 1 of ``GA_{v,1}``; the lock and candidate come
from ``GA_{v-1,2}``.
"""

from __future__ import annotations

import enum

from .ga import NOT_PARTICIPATING, GAKind
from .tob_single import TobNodeBase, select_vote


class Phase5(enum.IntEnum):
    PROPOSE = 0
    VOTE1 = 1
    IDLE = 2
    VOTE2 = 3
    DECIDE = 4


# start offset (in deltas from t_v) of each round's instance
ROUND_OFFSET = {1: 1, 2: 3}


class TobDoubleNode(TobNodeBase):
    period = 5
    ga_kind = GAKind.TWO_GRADE
    protocol = "TOB2"

    def instance_start(self, tag):
        view, rnd = tag
        return (self.period * view + ROUND_OFFSET[rnd]) * self.delta

    def valid_round(self, rnd):
        return rnd in ROUND_OFFSET

    def active_tags(self, view):
        tags = [(view, 1), (view, 2)]
        if view > 0:
            tags.insert(0, (view - 1, 2))
        return tags

    def act(self, view, phase, now, results):
        prev = (view - 1, 2)
        if phase == Phase5.PROPOSE:
            return self.propose(view, now, self.output(results, prev, 0))
        if phase == Phase5.VOTE1:
            lock = self.output(results, prev, 1)
            if lock is NOT_PARTICIPATING or lock is None:
                return []
            return self.vote(view, 1, now, select_vote(self.proposals, view, lock))
        if phase == Phase5.VOTE2:
            return self.vote(view, 2, now, self.output(results, (view, 1), 0))
        if phase == Phase5.DECIDE:
            self.decide(view, now, self.output(results, (view, 1), 1))
        return []
