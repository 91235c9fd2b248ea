"""Append-only event log of a run, serialised as JSON lines."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

# event kinds
RUN_START = "RUN_START"
RUN_END = "RUN_END"
ABORT = "ABORT"
WAKE = "WAKE"
SLEEP = "SLEEP"
CORRUPTED = "CORRUPTED"
DELIVER = "DELIVER"
INPUT_SENT = "INPUT_SENT"
INPUT_RECORDED = "INPUT_RECORDED"
EQUIVOCATION_DETECTED = "EQUIVOCATION_DETECTED"
SNAPSHOT_TAKEN = "SNAPSHOT_TAKEN"
GA_OUTPUT = "GA_OUTPUT"
PROPOSAL_SENT = "PROPOSAL_SENT"
VOTE_CAST = "VOTE_CAST"
DECIDED = "DECIDED"
SAFETY_VIOLATION = "SAFETY_VIOLATION"
VOTE_SUPERSEDED = "VOTE_SUPERSEDED"
VOTE_EXPIRED = "VOTE_EXPIRED"
ADVERSARY_SEND = "ADVERSARY_SEND"


@dataclass(frozen=True)
class Event:
    tick: int
    validator: Optional[int]
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"tick": self.tick, "validator": self.validator, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Event":
        d = json.loads(line)
        return cls(d["tick"], d["validator"], d["kind"], d["payload"])


class Trace:
    def __init__(self, events: Iterable[Event] = ()):
        self.events: list[Event] = list(events)

    def emit(self, tick: int, validator: Optional[int], kind: str, **payload) -> None:
        self.events.append(Event(tick, validator, kind, payload))

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def of_kind(self, *kinds: str) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]

    @property
    def header(self) -> dict:
        if not self.events or self.events[0].kind != RUN_START:
            raise ValueError("trace has no RUN_START header")
        return self.events[0].payload

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def dump(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        return cls(Event.from_json(line) for line in text.splitlines() if line.strip())

    @classmethod
    def load(cls, path) -> "Trace":
        return cls.from_jsonl(Path(path).read_text())
