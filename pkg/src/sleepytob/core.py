"""Shared domain types: blocks, logs, VRF draws and message envelopes."""

from __future__ import annotations

import enum
import functools
import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

GENESIS_ID = 0


class SimError(Exception):
    """Base class for errors raised by the simulator stack."""


class IncompatibleSet(SimError):
    """Two members of a set that should form a chain conflict."""


class IncompatibleOutput(SimError):
    """A GA output phase found two conflicting logs above threshold."""


class MissingSnapshot(SimError):
    pass


class SafetyViolation(SimError):
    """A validator's new decision conflicts with one it already made."""


@dataclass(frozen=True)
class Block:
    id: int
    parent: Optional[int]
    payload: str = ""


GENESIS = Block(GENESIS_ID, None, "genesis")


class Log:
    """An immutable chain of block ids starting at genesis.

    Block ids are unique within a run, so a log is identified by its tip and
    two logs are equal iff their id sequences are equal.
    """

    __slots__ = ("blocks", "_hash")

    def __init__(self, blocks: Iterable[int] = (GENESIS_ID,)):
        blocks = tuple(blocks)
        if not blocks or blocks[0] != GENESIS_ID:
            raise ValueError("a log must start at the genesis block")
        self.blocks = blocks
        self._hash = hash(blocks)

    @property
    def tip(self) -> int:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def extend(self, block_id: int) -> "Log":
        return Log(self.blocks + (block_id,))

    def prefix(self, height: int) -> "Log":
        return Log(self.blocks[: height + 1])

    def is_prefix_of(self, other: "Log") -> bool:
        n = len(self.blocks)
        return n <= len(other.blocks) and other.blocks[:n] == self.blocks

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Log):
            return NotImplemented
        return self._hash == other._hash and self.blocks == other.blocks

    def __hash__(self):
        return self._hash

    def __len__(self):
        return len(self.blocks)

    def __repr__(self):
        return "Log(%s)" % ",".join(map(str, self.blocks))

    def to_json(self) -> list[int]:
        return list(self.blocks)

    @classmethod
    def from_json(cls, data: Sequence[int]) -> "Log":
        return cls(data)


GENESIS_LOG = Log()


def is_prefix(a: Log, b: Log) -> bool:
    return a.is_prefix_of(b)


def compatible(a: Log, b: Log) -> bool:
    return a.is_prefix_of(b) or b.is_prefix_of(a)


def highest(logs: Iterable[Log]) -> Log:
    """Return the longest member of a set of pairwise compatible logs.

    Raises IncompatibleSet when the set is not a chain and ValueError when it
    is empty.
    """
    chain = sorted(set(logs), key=len)
    if not chain:
        raise ValueError("highest() of an empty set")
    for lower, upper in zip(chain, chain[1:]):
        if not lower.is_prefix_of(upper):
            raise IncompatibleSet(f"{lower!r} conflicts with {upper!r}")
    return chain[-1]


def is_chain(logs: Iterable[Log]) -> bool:
    try:
        highest(logs)
    except IncompatibleSet:
        return False
    except ValueError:
        return True
    return True


def common_prefix(logs: Iterable[Log]) -> Log:
    """Longest log that every member extends."""
    logs = list(logs)
    if not logs:
        raise ValueError("common_prefix() of an empty set")
    blocks = logs[0].blocks
    for log in logs[1:]:
        k = 0
        other = log.blocks
        limit = min(len(blocks), len(other))
        while k < limit and blocks[k] == other[k]:
            k += 1
        blocks = blocks[:k]
    return Log(blocks)


# -- VRF ---------------------------------------------------------------------

VRF_BITS = 64


@functools.lru_cache(maxsize=1 << 16)
def vrf(seed: int, validator: int, view: int) -> int:
    """Deterministic 64-bit stand-in for a VRF output."""
    key = struct.pack(">q", seed & 0x7FFFFFFFFFFFFFFF)
    h = hashlib.blake2b(struct.pack(">qq", validator, view), key=key, digest_size=8)
    return int.from_bytes(h.digest(), "big")


def vrf_rank_key(value: int, validator: int) -> tuple[int, int]:
    """Sort key under which max() picks the highest VRF, smaller id on ties."""
    return (value, -validator)


def vrf_leader(seed: int, validators: Iterable[int], view: int) -> Optional[int]:
    best = None
    best_key = None
    for v in validators:
        key = vrf_rank_key(vrf(seed, v, view), v)
        if best_key is None or key > best_key:
            best, best_key = v, key
    return best


def derive_seed(seed: int, label: str) -> int:
    """Per-component seed obtained by labelled hashing of the run seed."""
    h = hashlib.blake2b(f"{seed}/{label}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


# -- messages ----------------------------------------------------------------


class MsgKind(str, enum.Enum):
    GA_INPUT = "GA_INPUT"
    PROPOSAL = "PROPOSAL"


@dataclass(frozen=True)
class Message:
    """Authenticated envelope.

    ``view`` tags the GA instance (or the proposal's view). ``round``
    distinguishes the two GA invocations of a two-vote view and is 0
    elsewhere.
    """

    kind: MsgKind
    sender: int
    view: int
    log: Log
    vrf: Optional[int] = None
    round: int = 0
    block: Optional[Block] = field(default=None, compare=False)

    def __post_init__(self):
        if self.view < 0:
            raise ValueError("view must be non-negative")
        if self.kind is MsgKind.GA_INPUT and self.vrf is not None:
            raise ValueError("GA inputs carry no VRF value")
        if self.kind is MsgKind.PROPOSAL and self.vrf is None:
            raise ValueError("proposals must carry a VRF value")

    @property
    def key(self) -> tuple:
        return (self.kind, self.sender, self.view, self.round, self.log)

    def to_json(self) -> dict:
        out = {
            "kind": self.kind.value,
            "sender": self.sender,
            "view": self.view,
            "round": self.round,
            "log": self.log.to_json(),
        }
        if self.vrf is not None:
            out["vrf"] = self.vrf
        return out


def proposal_block_id(n: int, view: int, proposer: int, variant: int = 0) -> int:
    """Unique, schedule-independent id for a block proposed in ``view``.

    Variant 0 is the honest proposal; the adversary uses variants 1..3 for
    the conflicting twins it fabricates.
    """
    return ((view * n + proposer) << 2 | variant) + 1
