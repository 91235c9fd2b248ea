"""Deterministic tick-driven world for the sleepy model.

Per tick, in order: wake/sleep transitions, flush of queued messages to
validators that just woke, delivery of due messages (zero-delay forwards
cascade within the tick), corruption activations, GA output phases and
protocol actions for every awake validator in index order, adversary sends,
and finally delay assignment for everything sent this tick. Sends given
delay 0 are delivered before the tick ends.
"""

from __future__ import annotations

import random
from collections import deque
from typing import Optional

from . import trace as T
from .core import (
    IncompatibleOutput,
    IncompatibleSet,
    Message,
    SafetyViolation,
    derive_seed,
    proposal_block_id,
)
from .ga import GAKind
from .lmd import TobLmdNode
from .node import GANode
from .scenario import GA_PROTOCOLS, Scenario, Schedule, label_logs, validate
from .tob_double import TobDoubleNode
from .tob_single import TobSingleNode

# byzantine_mode / delay_mode of each named strategy
STRATEGIES = {
    "SILENT": ("silent", "random"),
    "EQUIVOCATE_SPLIT": ("equivocate", "random"),
    "WITHHOLD_MAX_DELAY": ("silent", "max"),
    "ASYNC_PARTITION": (None, "partition"),
}


class Adversary:
    """Controls corrupted validators' sends and every message delay.

    ``byzantine_mode`` is ``silent`` (corrupted validators send nothing) or
    ``equivocate`` (each send of a corrupted validator goes out as the
    original to one half of the validators and a conflicting twin to the
    other half; parameter ``fork_depth`` sets how deep the twin forks). ``delay_mode`` is ``random`` (uniform in [0, Δ]), ``max``
    (always Δ) or ``partition`` (random outside the asynchrony window;
    messages sent inside it are held until it closes).
    """

    def __init__(self, sc: Scenario):
        mode, delay_mode = STRATEGIES[sc.adversary]
        params = sc.params
        self.byzantine_mode = params.get("byzantine_mode", mode or "silent")
        if self.byzantine_mode not in ("silent", "equivocate"):
            raise ValueError(f"unknown byzantine_mode {self.byzantine_mode!r}")
        self.delay_mode = delay_mode
        self.fork_depth = int(params.get("fork_depth", 1))
        self.n = sc.n
        self.delta = sc.delta
        self.rng = random.Random(derive_seed(sc.seed, "adversary"))
        self.window: Optional[tuple[int, int]] = None
        if sc.asynchrony is not None and delay_mode == "partition":
            v_a, pi = sc.asynchrony
            self.window = (sc.view_start(v_a + 1), sc.view_start(v_a + pi + 1))

    def inject(self, now: int) -> list:
        """Extra (recipient, msg, at) deliveries the adversary originates at ``now``."""
        return []

    def delay(self, now: int) -> int:
        """Delivery tick of an honest message sent at ``now`` to another validator."""
        if self.window is not None and self.window[0] <= now < self.window[1]:
            return self.window[1] + self.rng.randint(0, self.delta)
        if self.delay_mode == "max":
            return now + self.delta
        return now + int(self.rng.random() * (self.delta + 1))

    def corrupt_sends(self, sender: int, msgs: list[Message], now: int, honest: list[int]):
        """Turn a corrupted validator's would-be sends into (recipient, msg, at) deliveries."""
        out = []
        if self.byzantine_mode == "silent":
            return out
        for msg in msgs:
            if msg.sender != sender:
                continue  # forwards are dropped
            twin = equivocating_twin(msg, self.n, self.fork_depth)
            order = list(honest)
            self.rng.shuffle(order)
            half = len(order) // 2
            for i, r in enumerate(order):
                m = msg if i < half else twin
                out.append((r, m, now + self.rng.randint(0, self.delta)))
            out.append((sender, msg, now))
        return out


def equivocating_twin(msg: Message, n: int, fork_depth: int = 1) -> Message:
    """A message from the same sender and instance with a conflicting log.

    The twin forks ``fork_depth`` blocks below the original's tip (never
    below genesis) and adds one fabricated block.
    """
    log = msg.log
    base = log.prefix(max(0, log.height - fork_depth))
    variant = 1 + (msg.round % 3)
    twin_log = base.extend(proposal_block_id(n, msg.view, msg.sender, variant))
    return Message(msg.kind, msg.sender, msg.view, twin_log, vrf=msg.vrf, round=msg.round)


def make_nodes(sc: Scenario, trace: T.Trace) -> list:
    args = dict(detail=sc.detail, instrument=sc.instrument)
    if sc.protocol in GA_PROTOCOLS:
        kind = GAKind.TWO_GRADE if sc.protocol == "GA2" else GAKind.THREE_GRADE
        logs = label_logs([p for _, p in sc.inputs])
        inputs = {v: logs[p] for v, p in sc.inputs}
        return [GANode(v, sc.n, sc.delta, sc.seed, trace, kind, inputs.get(v), **args) for v in range(sc.n)]
    if sc.protocol == "TOB1":
        return [TobSingleNode(v, sc.n, sc.delta, sc.seed, trace, **args) for v in range(sc.n)]
    if sc.protocol == "TOB2":
        return [TobDoubleNode(v, sc.n, sc.delta, sc.seed, trace, **args) for v in range(sc.n)]
    return [TobLmdNode(v, sc.n, sc.delta, sc.seed, trace, eta=sc.eta, **args) for v in range(sc.n)]


_UNSEEN = 1 << 62


class Aborted(Exception):
    pass


class ScriptedAdversary(Adversary):
    """Delivers a fixed list of adversarial messages; honest delays are always Δ.

    ``script`` holds ``(recipient, msg, at)`` triples, all originated at
    tick 0. Corrupted validators' own protocol sends are dropped.
    """

    def __init__(self, sc: Scenario, script):
        super().__init__(sc)
        self.byzantine_mode = "silent"
        self.delay_mode = "max"
        self.script = list(script)

    def inject(self, now):
        return self.script if now == 0 else []


class World:
    def __init__(self, sc: Scenario, adversary: Optional[Adversary] = None, check: bool = True):
        if check:
            validate(sc)
        self.sc = sc
        self.delta = sc.delta
        self.trace = T.Trace()
        self.schedule = Schedule.from_scenario(sc)
        self.nodes = make_nodes(sc, self.trace)
        self.adversary = adversary or Adversary(sc)
        self.corrupted: set[int] = set()
        self.awake = [True] * sc.n
        self.pending: dict[int, list[Message]] = {v: [] for v in range(sc.n)}
        self.buckets: dict[int, list[tuple[int, Message]]] = {}
        self.arrival: dict[tuple, list[int]] = {}  # message key -> first arrival per recipient
        self.activations: dict[int, list[int]] = {}
        for v in sc.byzantine:
            self.activations.setdefault(0, []).append(v)
        for v, t in sc.corruptions:
            self.activations.setdefault(t + sc.delta, []).append(v)
        self.now = 0
        self.deliveries = 0

    # -- scheduling ---------------------------------------------------------------

    def _schedule(self, r: int, msg: Message, at: int, queue: deque) -> None:
        row = self.arrival.get(msg.key)
        if row is None:
            row = self.arrival[msg.key] = [_UNSEEN] * self.sc.n
        if row[r] <= at:
            return
        row[r] = at
        if at == self.now:
            queue.append((r, msg))
        else:
            self.buckets.setdefault(at, []).append((r, msg))

    def _send_honest(self, sender: int, msgs: list[Message], queue: deque) -> None:
        now = self.now
        delay = self.adversary.delay
        buckets = self.buckets
        n = self.sc.n
        for msg in msgs:
            key = msg.key
            row = self.arrival.get(key)
            if row is None:
                row = self.arrival[key] = [_UNSEEN] * n
            for r in range(n):
                if row[r] <= now:
                    continue  # cannot arrive any earlier
                at = now if r == sender else delay(now)
                if row[r] <= at:
                    continue
                row[r] = at
                if at == now:
                    queue.append((r, msg))
                else:
                    buckets.setdefault(at, []).append((r, msg))

    def _send(self, sender: int, msgs: list[Message], queue: deque) -> None:
        if not msgs:
            return
        if sender in self.corrupted:
            honest = [v for v in range(self.sc.n) if v not in self.corrupted]
            for r, m, at in self.adversary.corrupt_sends(sender, msgs, self.now, honest):
                if r != sender:
                    self.trace.emit(self.now, sender, T.ADVERSARY_SEND, recipient=r, at=at, msg=m.to_json())
                self._schedule(r, m, at, queue)
        else:
            self._send_honest(sender, msgs, queue)

    # -- node calls ------------------------------------------------------------------

    def _call(self, v: int, fn, *args):
        try:
            return fn(*args)
        except SafetyViolation as exc:
            if v in self.corrupted:
                return []
            self.trace.emit(self.now, v, T.SAFETY_VIOLATION, reason=str(exc))
            return []
        except (IncompatibleOutput, IncompatibleSet) as exc:
            if v in self.corrupted:
                return []
            self.trace.emit(self.now, v, T.ABORT, reason=f"{type(exc).__name__}: {exc}")
            raise Aborted from exc

    def _drain(self, queue: deque) -> None:
        nodes = self.nodes
        detail = self.sc.detail
        while queue:
            r, msg = queue.popleft()
            if not self.awake[r]:
                self.pending[r].append(msg)
                continue
            self.deliveries += 1
            if detail and r not in self.corrupted:
                self.trace.emit(self.now, r, T.DELIVER, msg=msg.to_json())
            fwd = self._call(r, nodes[r].receive, msg, self.now)
            if fwd:
                self._send(r, fwd, queue)

    # -- main loop ----------------------------------------------------------------

    def step(self) -> None:
        t = self.now
        sc = self.sc
        queue: deque = deque()
        # wake/sleep transitions and flush of queued messages
        for v in range(sc.n):
            up = v in self.corrupted or self.schedule.is_awake(v, t)
            if up != self.awake[v]:
                self.awake[v] = up
                if v not in self.corrupted:
                    self.trace.emit(t, v, T.WAKE if up else T.SLEEP)
                if up:
                    queue.extend((v, m) for m in self.pending[v])
                    self.pending[v] = []
        self._drain(queue)
        queue.extend(self.buckets.pop(t, ()))
        self._drain(queue)
        for v in self.activations.pop(t, ()):
            self.corrupted.add(v)
            self.trace.emit(t, v, T.CORRUPTED)
            self.nodes[v].trace = None
            if not self.awake[v]:
                self.awake[v] = True
                queue.extend((v, m) for m in self.pending[v])
                self.pending[v] = []
        self._drain(queue)
        if t % self.delta == 0:
            for v in range(sc.n):
                if self.awake[v]:
                    sends = self._call(v, self.nodes[v].on_tick, t)
                    if sends:
                        self._send(v, sends, queue)
            self._drain(queue)
        for r, m, at in self.adversary.inject(t):
            self.trace.emit(t, m.sender, T.ADVERSARY_SEND, recipient=r, at=at, msg=m.to_json())
            self._schedule(r, m, at, queue)
        self._drain(queue)

    def run(self) -> T.Trace:
        self.trace.emit(0, None, T.RUN_START, scenario=self.sc.to_dict())
        try:
            while self.now <= self.sc.horizon:
                self.step()
                self.now += 1
        except Aborted:
            return self.trace
        self.trace.emit(self.sc.horizon, None, T.RUN_END, deliveries=self.deliveries)
        return self.trace


def run(sc: Scenario, adversary: Optional[Adversary] = None) -> T.Trace:
    return World(sc, adversary).run()


def corrupt(world: World, v: int, at: int) -> None:
    """Schedule ``v`` to become adversarial at ``at + Δ``."""
    if at < world.now:
        raise ValueError("cannot schedule a corruption in the past")
    world.activations.setdefault(at + world.delta, []).append(v)
    world.schedule.corrupt_at[v] = min(world.schedule.corrupt_at[v], at + world.delta)
