"""Validator base class and the standalone GA driver."""

from __future__ import annotations

from typing import Optional

from . import trace as T
from .core import Log, Message, MsgKind
from .ga import NOT_PARTICIPATING, OUTPUT_PHASES, SNAPSHOT_OFFSETS, GAKind, HandleResult, start_instance


def log_json(log):
    return None if log is None else log.to_json()


class ValidatorNode:
    """Honest protocol logic for one validator.

    The simulator calls :meth:`receive` for every delivered message and
    :meth:`on_tick` once per awake tick, after all deliveries of that tick.
    Both return messages to broadcast. ``trace`` is None while the node runs
    as the adversary's shadow of a corrupted validator.
    """

    def __init__(self, vid: int, n: int, delta: int, seed: int, trace: Optional[T.Trace],
                 detail: bool = False, instrument: bool = False):
        self.id = vid
        self.n = n
        self.delta = delta
        self.seed = seed
        self.trace = trace
        self.detail = detail
        self.instrument = instrument

    def emit(self, now: int, kind: str, **payload) -> None:
        if self.trace is not None:
            self.trace.emit(now, self.id, kind, **payload)

    def receive(self, msg: Message, now: int) -> list[Message]:
        raise NotImplementedError

    def on_tick(self, now: int) -> list[Message]:
        raise NotImplementedError

    # -- GA plumbing shared by every protocol --------------------------------

    def ga_receive(self, state, msg: Message, now: int) -> list[Message]:
        res = state.handle_input(msg.sender, msg.log, now)
        if res is HandleResult.EQUIVOCATION_RECORDED:
            first, second = state.E[msg.sender][:2]
            self.emit(now, T.EQUIVOCATION_DETECTED, instance=list(state.instance),
                      sender=msg.sender, logs=[first.to_json(), second.to_json()])
        elif res is HandleResult.RECORDED and self.detail:
            self.emit(now, T.INPUT_RECORDED, instance=list(state.instance),
                      sender=msg.sender, log=msg.log.to_json())
        return [msg] if res.forward else []

    def ga_phase(self, state, now: int) -> dict:
        """Run the snapshot/output step of ``state`` due at ``now``.

        Returns ``{grade: highest output}`` for an output phase the owner
        participates in (value None when nothing clears the threshold),
        ``{grade: NOT_PARTICIPATING}`` when it may not participate, and an
        empty dict otherwise.
        """
        off, rem = divmod(now - state.started_at, self.delta)
        if rem or off < 1:
            return {}
        if off in SNAPSHOT_OFFSETS[state.kind]:
            state.take_snapshot(now)
            if self.detail:
                self.emit(now, T.SNAPSHOT_TAKEN, instance=list(state.instance), offset=off)
        for grade, (o, snap) in OUTPUT_PHASES[state.kind].items():
            if o != off:
                continue
            top = state.highest_output(grade)
            if top is not NOT_PARTICIPATING:
                payload = dict(instance=list(state.instance), grade=grade, log=log_json(top))
                if self.instrument:
                    entries = state.entries(snap)
                    payload["senders"] = sorted(state.senders())
                    payload["entries"] = sorted([s, lg.tip] for s, lg in entries.items())
                self.emit(now, T.GA_OUTPUT, **payload)
            return {grade: top}
        return {}


class GANode(ValidatorNode):
    """Runs a single GA instance started at tick 0."""

    def __init__(self, vid, n, delta, seed, trace, kind: GAKind, input: Optional[Log],
                 detail=False, instrument=False):
        super().__init__(vid, n, delta, seed, trace, detail, instrument)
        self.kind = kind
        self.input = input
        self.state, _ = start_instance(vid, (0, 0), kind, None, 0, delta)

    def receive(self, msg, now):
        if msg.kind is not MsgKind.GA_INPUT or msg.view != 0:
            return []
        return self.ga_receive(self.state, msg, now)

    def on_tick(self, now):
        if now == 0:
            if self.input is None:
                return []
            _, msgs = start_instance(self.id, (0, 0), self.kind, self.input, now, self.delta)
            self.emit(now, T.INPUT_SENT, instance=[0, 0], log=self.input.to_json())
            return msgs
        if now <= self.kind.duration * self.delta:
            self.ga_phase(self.state, now)
        return []
