"""Logical Process container: a Physical Process plus its queues and clock.

The LP executes optimistically ahead of real time, saving state after events,
and supports the two rollback variants used by the predictive manager:

* causality rollback, triggered by a straggler (false) message or by an
  anti-message whose original has already been executed;
* verification rollback, which forces the LP onto a ground-truth value at a
  verification instant.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Any, NamedTuple, Optional, Protocol

from .timebase import (
    Message,
    MessageKey,
    ReceiveQueue,
    SendQueue,
    SentEntry,
    StateRecord,
    make_anti,
    make_id,
    units,
)


class FalseMessageError(Exception):
    """The head of the receive queue lies in the LP's past."""


class ReplayMismatch(AssertionError):
    """Silent re-execution produced output that differs from the saved copies."""


class Outgoing(NamedTuple):
    dst: int
    receive_time: int
    payload: Any


class Streams(Protocol):
    def checkpoint(self) -> Any: ...

    def restore(self, cp: Any) -> None: ...


class PhysicalProcess(Protocol):
    """Model behaviour wrapped by an LP.

    ``handle`` must be a pure function of (state, message, rng position) so that
    re-execution after a rollback reproduces the original outputs.
    """

    def initial_state(self) -> Any: ...

    def handle(self, state: Any, msg: Message, rng: Streams) -> tuple[Any, list[Outgoing]]: ...

    def observe(self, state: Any) -> float: ...

    def correct(self, state: Any, value: float) -> Any: ...


@dataclass(frozen=True, slots=True)
class RollbackRecord:
    lp: int
    cause: str  # "causality" | "verification"
    from_lvt: int
    to_time: int
    anti_count: int
    at_real: int
    restored_to: int
    below_floor: bool = False

    def to_json(self) -> dict:
        return {
            "lp": self.lp,
            "cause": self.cause,
            "from_lvt": units(self.from_lvt),
            "to_time": units(self.to_time),
            "anti_count": self.anti_count,
            "at_real": units(self.at_real),
            "restored_to": units(self.restored_to),
            "below_floor": self.below_floor,
        }


@dataclass(frozen=True, slots=True)
class CommittedEvent:
    lp: int
    recv: int
    src: int
    id: int
    send: int
    value: float

    @property
    def key(self) -> MessageKey:
        return (self.recv, self.src, self.id)

    def to_json(self) -> dict:
        return {
            "lp": self.lp,
            "recv": units(self.recv),
            "src": self.src,
            "id": self.id,
            "send": units(self.send),
            "value": self.value,
        }


@dataclass(slots=True)
class _Processed:
    msg: Message
    value: float


class StepResult(NamedTuple):
    emitted: list[Message]
    held: bool
    executed: Optional[Message] = None


@dataclass
class CausalityResult:
    anti: list[Message]
    replayed: list[Message]
    record: RollbackRecord


class LogicalProcess:
    def __init__(
        self,
        lp_id: int,
        pp: PhysicalProcess,
        rng: Streams,
        *,
        tolerance: float = math.inf,
        save_every: int = 1,
        checked: bool = True,
        first_seq: int = 0,
    ) -> None:
        if tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        self.id = lp_id
        self.pp = pp
        self.rng = rng
        self.tolerance = tolerance
        self.save_every = save_every
        self.checked = checked

        self.state = pp.initial_state()
        self.seq = first_seq
        self.lvt = 0
        self.recv_q = ReceiveQueue()
        self.send_q = SendQueue()
        self.processed: list[_Processed] = []
        self._processed_ids: dict[int, _Processed] = {}
        self.committed: list[CommittedEvent] = []
        self.rollbacks: list[RollbackRecord] = []
        self._horizon: Optional[int] = None
        self._since_save = 0
        self._purged = False  # history dropped or committed: initial state is stale

        self._initial = StateRecord(lp_id, 0, self.state, self.seq, rng.checkpoint(), None)
        self.states: list[StateRecord] = [self._initial]

    # -- clocks -----------------------------------------------------------

    @property
    def clock(self) -> int:
        """Virtual time through which this LP's prediction is complete.

        Equal to ``lvt`` while the LP has work inside the window; once it holds
        (or idles) it has predicted everything up to the window edge.
        """
        if self._horizon is None:
            return self.lvt
        return max(self.lvt, self._horizon)

    @property
    def last_key(self) -> Optional[MessageKey]:
        return self.processed[-1].msg.key if self.processed else None

    # -- forward execution ------------------------------------------------

    def step(self, now: int, window: int) -> StepResult:
        head = self.recv_q.head()
        if head is None:
            self._horizon = now + window
            return StepResult([], False)
        if head.receive_time - now > window:
            self._horizon = now + window
            return StepResult([], True)
        if self._is_past(head):
            raise FalseMessageError(
                f"LP {self.id}: head at {units(head.receive_time)} precedes lvt {units(self.lvt)}"
            )
        self.recv_q.pop_head()
        self._horizon = None
        emitted = self._execute(head, now)
        for m in emitted:
            self.send_q.append(SentEntry(m, head.key))
        self._since_save += 1
        if self.save_every and self._since_save >= self.save_every:
            self.save_state()
        return StepResult(emitted, False, head)

    def _execute(self, msg: Message, now: int) -> list[Message]:
        self.state, outs = self.pp.handle(self.state, msg, self.rng)
        emitted = [
            Message(
                id=make_id(self.id, self.seq + i),
                src=self.id,
                dst=o.dst,
                send_time=msg.receive_time,
                receive_time=o.receive_time,
                real_stamp=now if o.receive_time <= now else None,
                payload=o.payload,
            )
            for i, o in enumerate(outs)
        ]
        self.seq += len(outs)
        self.lvt = msg.receive_time
        p = _Processed(msg, self.pp.observe(self.state))
        self.processed.append(p)
        self._processed_ids[msg.id] = p
        return emitted

    def save_state(self) -> StateRecord:
        rec = StateRecord(
            self.id, self.lvt, self.state, self.seq, self.rng.checkpoint(), self.last_key
        )
        if self.states and self.states[-1].at == rec.at:
            self.states[-1] = rec
        else:
            self.states.append(rec)
        self._since_save = 0
        return rec

    # -- message arrival --------------------------------------------------

    def _is_past(self, m: Message) -> bool:
        last = self.last_key
        return m.receive_time < self.lvt or (last is not None and m.key <= last)

    def receive(self, m: Message, now: int) -> list[Message]:
        """Accept a delivered message; returns anti-messages produced by any rollback."""
        if m.anti:
            if self.recv_q.contains(m.id):
                self.recv_q.enqueue(m)
                return []
            if m.id in self._processed_ids:
                return self.rollback_causality(m, now).anti
            self.recv_q.enqueue(m)
            return []
        if self._is_past(m):
            return self.rollback_causality(m, now).anti
        self.recv_q.enqueue(m)
        if self._horizon is not None and m.receive_time <= self._horizon:
            self._horizon = None
        return []

    # -- rollback ---------------------------------------------------------

    def _restore(self, rec: StateRecord) -> None:
        self.state = rec.snapshot
        self.seq = rec.seq
        self.rng.restore(rec.rng_state)
        self.lvt = rec.at
        self._since_save = 0

    def _undo_from(self, pred) -> None:
        """Move processed events matching ``pred`` (a suffix) back to the receive queue."""
        while self.processed and pred(self.processed[-1].msg):
            p = self.processed.pop()
            del self._processed_ids[p.msg.id]
            self.recv_q.enqueue(p.msg)

    def _cancel_sends(self, pred) -> list[Message]:
        keep, anti = [], []
        for e in self.send_q.entries:
            (anti if pred(e) else keep).append(e)
        self.send_q.entries = keep
        return [make_anti(e.message) for e in anti]

    def _replay(self, upto) -> list[Message]:
        """Silently re-execute processed events after the restored state.

        No messages are sent or cancelled for this interval; in checked mode the
        regenerated outputs must equal the saved send-queue copies.
        """
        start = self.states[-1].last_key if self.states else None
        replayed = []
        for p in self.processed:
            k = p.msg.key
            if start is not None and k <= start:
                continue
            if not upto(p.msg):
                break
            outs = self._execute_silent(p)
            if self.checked:
                saved = [e.message for e in self.send_q.entries if e.cause == k]
                if [_comparable(m) for m in outs] != [_comparable(m) for m in saved]:
                    raise ReplayMismatch(f"LP {self.id}: replay of {k} diverged")
            replayed.append(p.msg)
            self._since_save += 1
            if self.save_every and self._since_save >= self.save_every:
                self.save_state()
        return replayed

    def _execute_silent(self, p: _Processed) -> list[Message]:
        self.state, outs = self.pp.handle(self.state, p.msg, self.rng)
        msgs = [
            Message(make_id(self.id, self.seq + i), self.id, o.dst,
                    p.msg.receive_time, o.receive_time, payload=o.payload)
            for i, o in enumerate(outs)
        ]
        self.seq += len(outs)
        self.lvt = p.msg.receive_time
        p.value = self.pp.observe(self.state)
        return msgs

    def _newest_record(self, pred) -> StateRecord:
        for rec in reversed(self.states):
            if pred(rec):
                return rec
        if not self._purged:
            return self._initial
        # everything older was purged: clamp to the oldest surviving anchor
        return self.states[0]

    def rollback_causality(self, false_msg: Message, now: int) -> CausalityResult:
        if not self._is_past(false_msg):
            raise ValueError("rollback_causality needs a message in the LP's past")
        target = false_msg.key
        t = false_msg.receive_time
        from_lvt = self.clock

        # phase 1: restore the newest state that precedes the false message;
        # comparing folded-in event keys also orders equal-time events
        def before(r: StateRecord) -> bool:
            return r.last_key is None or r.last_key < target

        self._undo_from(lambda m: m.key >= target)
        rec = self._newest_record(before)
        self.states = [r for r in self.states if before(r)] or [rec]
        self._restore(rec)

        # phase 2: cancel output of every undone event
        anti = self._cancel_sends(lambda e: e.cause >= target)

        # phase 3: roll forward to the false message without sending
        replayed = self._replay(lambda m: m.key < target)

        self.recv_q.enqueue(false_msg)
        self._horizon = None
        record = RollbackRecord(
            self.id, "causality", from_lvt, t, len(anti), now, rec.at, below_floor=t < now
        )
        self.rollbacks.append(record)
        return CausalityResult(anti, replayed, record)

    def rollback_verification(self, t_v: int, s_v: float, now: int) -> Optional[list[Message]]:
        """Realign to ground truth ``s_v`` at exactly ``t_v``.

        Returns the anti-messages sent, or ``None`` when nothing has been
        predicted at ``t_v`` yet (the verification is skipped).
        """
        if t_v > self.clock:
            return None
        from_lvt = self.clock
        self._undo_from(lambda m: m.receive_time > t_v)
        rec = self._newest_record(lambda r: r.at <= t_v)
        self.states = [r for r in self.states if r.at <= t_v] or [rec]
        self._restore(rec)
        anti = self._cancel_sends(lambda e: e.send_time > t_v)
        self._replay(lambda m: m.receive_time <= t_v)

        self.state = self.pp.correct(self.state, s_v)
        self.lvt = t_v
        self.save_state()
        self._horizon = None
        self.rollbacks.append(
            RollbackRecord(self.id, "verification", from_lvt, t_v, len(anti), now, rec.at,
                           below_floor=t_v < now)
        )
        return anti

    # -- fossil collection ------------------------------------------------

    def predicted_at(self, t: int) -> Optional[StateRecord]:
        i = bisect.bisect_right(self.states, t, key=lambda r: r.at)
        return self.states[i - 1] if i else None

    def purge(self, now: int) -> list[CommittedEvent]:
        """Discard history older than real time ``now`` (never by GVT).

        The newest record at or before ``now`` is kept as a rollback anchor.
        Events folded into the anchor and older than ``now`` become committed.
        """
        anchor = self.predicted_at(now)
        kept = [r for r in self.states if r.at >= now or r is anchor]
        self._purged |= len(kept) < len(self.states)
        self.states = kept
        self.send_q.entries = [e for e in self.send_q.entries if e.send_time >= now]
        if anchor is None or anchor.last_key is None:
            return []
        return self._commit(lambda m: m.receive_time < now and m.key <= anchor.last_key)

    def commit_through(self, t: int) -> list[CommittedEvent]:
        return self._commit(lambda m: m.receive_time <= t)

    def _commit(self, pred) -> list[CommittedEvent]:
        n = 0
        while n < len(self.processed) and pred(self.processed[n].msg):
            n += 1
        done, self.processed = self.processed[:n], self.processed[n:]
        out = []
        for p in done:
            del self._processed_ids[p.msg.id]
            m = p.msg
            out.append(CommittedEvent(self.id, m.receive_time, m.src, m.id, m.send_time, p.value))
        self.committed.extend(out)
        self._purged |= bool(out)
        return out

    def __repr__(self) -> str:
        return f"LogicalProcess(id={self.id}, lvt={units(self.lvt)}, pending={len(self.recv_q)})"


def _comparable(m: Message) -> tuple:
    return (m.id, m.dst, m.send_time, m.receive_time, m.payload)
