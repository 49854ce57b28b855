"""Fixed-point time, timestamped messages, and the ordered queues an LP owns.

Times are plain ``int`` tick counts at a resolution of one microsecond of an
abstract time unit.  Integers give exact comparison, which rollback depends on.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence, TypeVar

TICKS_PER_UNIT = 1_000_000

VirtualTime = int
SimTime = int

# (receive_time, src, id): the total order used for every receive-time tie.
MessageKey = tuple[int, int, int]


class ProtocolError(Exception):
    """Raised when a message stream breaks the anti-message protocol."""


def ticks(units: float) -> int:
    """Convert a time in units to ticks, rounding to the nearest tick."""
    if isinstance(units, int):
        if units < 0:
            raise ValueError(f"negative time {units!r}")
        return units * TICKS_PER_UNIT
    if not math.isfinite(units):
        raise ValueError(f"time must be finite, got {units!r}")
    t = round(units * TICKS_PER_UNIT)
    if t < 0:
        raise ValueError(f"negative time {units!r}")
    return t


def units(t: int) -> float:
    return t / TICKS_PER_UNIT


def make_id(src: int, seq: int) -> int:
    """Message ids are unique per (source LP, emission sequence number)."""
    return (src << 32) | seq


@dataclass(frozen=True, slots=True)
class Message:
    id: int
    src: int
    dst: int
    send_time: VirtualTime
    receive_time: VirtualTime
    anti: bool = False
    real_stamp: Optional[SimTime] = None
    payload: Any = None

    def __post_init__(self) -> None:
        if self.send_time < 0:
            raise ValueError("send_time must be non-negative")
        if self.receive_time < self.send_time:
            raise ValueError(
                f"receive_time {self.receive_time} precedes send_time {self.send_time}"
            )

    @property
    def key(self) -> MessageKey:
        return (self.receive_time, self.src, self.id)

    @property
    def is_real(self) -> bool:
        return self.real_stamp is not None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "src": self.src,
            "dst": self.dst,
            "send": units(self.send_time),
            "recv": units(self.receive_time),
            "anti": self.anti,
            "real": None if self.real_stamp is None else units(self.real_stamp),
        }


def make_anti(m: Message) -> Message:
    if m.anti:
        raise ProtocolError(f"message {m.id} is already an anti-message")
    return replace(m, anti=True)


@dataclass(frozen=True, slots=True)
class Annihilated:
    """Result of an enqueue whose message met its partner."""

    id: int


class ReceiveQueue:
    """Pending messages ordered by (receive_time, src, id).

    Anti-messages that arrive before their original wait in the queue and
    annihilate on the original's arrival.  Waiting anti-messages are never
    offered by :meth:`head`.
    """

    def __init__(self, messages: Iterable[Message] = ()) -> None:
        self._items: list[Message] = []
        self._by_id: dict[int, Message] = {}
        for m in messages:
            self.enqueue(m)

    def enqueue(self, m: Message) -> Optional[Annihilated]:
        partner = self._by_id.get(m.id)
        if partner is not None:
            if partner.anti == m.anti:
                raise ProtocolError(f"duplicate message id {m.id} (anti={m.anti})")
            self._remove(partner)
            return Annihilated(m.id)
        bisect.insort(self._items, m, key=_order)
        self._by_id[m.id] = m
        return None

    def _remove(self, m: Message) -> None:
        i = bisect.bisect_left(self._items, _order(m), key=_order)
        assert self._items[i] is m
        del self._items[i]
        del self._by_id[m.id]

    def head(self) -> Optional[Message]:
        for m in self._items:
            if not m.anti:
                return m
        return None

    def pop_head(self) -> Message:
        m = self.head()
        if m is None:
            raise IndexError("no executable message")
        self._remove(m)
        return m

    def contains(self, msg_id: int) -> bool:
        return msg_id in self._by_id

    def waiting_antis(self) -> list[Message]:
        return [m for m in self._items if m.anti]

    def __iter__(self) -> Iterator[Message]:
        return iter(list(self._items))

    def __len__(self) -> int:
        return len(self._items)

    def __repr__(self) -> str:
        return f"ReceiveQueue({[units(m.receive_time) for m in self._items]})"


def _order(m: Message) -> tuple[int, int, int, bool]:
    return (m.receive_time, m.src, m.id, m.anti)


@dataclass(frozen=True, slots=True)
class SentEntry:
    """A copy of an emitted message plus the key of the event that caused it."""

    message: Message
    cause: MessageKey

    @property
    def send_time(self) -> int:
        return self.message.send_time


@dataclass(frozen=True, slots=True)
class StateRecord:
    lp: int
    at: VirtualTime
    snapshot: Any
    seq: int
    rng_state: Any
    last_key: Optional[MessageKey]  # key of the last event folded into the snapshot


T = TypeVar("T")


def purge_older_than(seq: Sequence[T], cutoff: int, time_of: Callable[[T], int]) -> list[T]:
    """Drop entries whose time is strictly before ``cutoff``; ``seq`` must be sorted."""
    i = bisect.bisect_left(seq, cutoff, key=time_of)
    return list(seq[i:])


@dataclass
class SendQueue:
    entries: list[SentEntry] = field(default_factory=list)

    def append(self, entry: SentEntry) -> None:
        # send times are nondecreasing for a forward-executing LP
        if self.entries and entry.send_time < self.entries[-1].send_time:
            bisect.insort(self.entries, entry, key=lambda e: e.send_time)
        else:
            self.entries.append(entry)

    def __iter__(self) -> Iterator[SentEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)
