"""Global Virtual Time, lookahead-window enforcement, and the two-clock coordinator.

Real time is virtualized: the coordinator owns ``now`` and moves it forward in
fixed steps.  Each round advances the ground truth, lets every LP run ahead
until its next event leaves the window, runs the verification queries that
fall due while the LPs hold, and records a GVT sample.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

from .kernel import LogicalProcess
from .network import GroundTruthSystem, query_agent
from .timebase import Message, units
from .verification import VerificationPolicy, check, due_verifications

@dataclass(frozen=True)
class GvtSnapshot:
    gvt: int
    per_lp_lvt: dict[int, int]
    in_flight_min_send: Optional[int]
    at_real: int

    def to_json(self) -> dict:
        return {
            "gvt": units(self.gvt),
            "per_lp_lvt": {str(k): units(v) for k, v in sorted(self.per_lp_lvt.items())},
            "in_flight_min_send": None if self.in_flight_min_send is None
            else units(self.in_flight_min_send),
            "real_time": units(self.at_real),
            "t_ahead": units(t_ahead(self.gvt, self.at_real)),
        }


def compute_gvt(lvts: Mapping[int, int], copied_send_times: Iterable[int] = (),
                at_real: int = 0) -> GvtSnapshot:
    """Minimum over every LP's virtual time and every unconfirmed message send time."""
    if not lvts:
        raise ValueError("GVT needs at least one LP")
    sends = list(copied_send_times)
    in_flight = min(sends) if sends else None
    gvt = min(lvts.values())
    if in_flight is not None:
        gvt = min(gvt, in_flight)
    return GvtSnapshot(gvt, dict(lvts), in_flight, at_real)


def t_ahead(gvt: int, now: int) -> int:
    return gvt - now


@dataclass(frozen=True)
class WindowPolicy:
    lam: int  # ticks

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError("lookahead window must be non-negative")


def within_window(lvt_next: int, now: int, policy: WindowPolicy) -> bool:
    return lvt_next - now <= policy.lam


@dataclass
class RoundStats:
    executed: int = 0
    delivered: int = 0
    anti_sent: int = 0


class Coordinator:
    """Single owner of real time; drives the LPs and the ground truth in lockstep."""

    def __init__(
        self,
        truth: GroundTruthSystem,
        lps: list[LogicalProcess],
        window: WindowPolicy,
        verification: VerificationPolicy,
        *,
        gvt_mode: str = "exact",
        emit: Optional[Callable[[dict], None]] = None,
        pace: float = 0.0,
    ) -> None:
        if gvt_mode not in ("exact", "approx"):
            raise ValueError(f"unknown GVT mode {gvt_mode!r}")
        self.truth = truth
        self.lps = lps
        self.window = window
        self.verification = verification
        self.gvt_mode = gvt_mode
        self.trace: list[dict] = []
        self.emit = emit if emit is not None else self.trace.append
        self.pace = pace

        self.now = 0
        self.router: deque[Message] = deque()
        self.stats = RoundStats()
        self.last_verified = 0
        self.last_aligned = {lp.id: 0 for lp in lps}
        self.error_samples: list[tuple[float, float]] = []
        self.outcomes = []
        self.gvt_history: list[GvtSnapshot] = []
        self._rb_seen = {lp.id: 0 for lp in lps}
        self._approx: Optional[GvtSnapshot] = None

    # -- message plumbing -------------------------------------------------

    def inject(self, messages: Iterable[Message]) -> None:
        self.router.extend(messages)

    def _deliver(self) -> None:
        while self.router:
            m = self.router.popleft()
            self.stats.delivered += 1
            anti = self.lps[m.dst].receive(m, self.now)
            self.stats.anti_sent += len(anti)
            self.router.extend(anti)

    def _snapshot(self) -> GvtSnapshot:
        return compute_gvt(
            {lp.id: lp.clock for lp in self.lps},
            (m.send_time for m in self.router),
            self.now,
        )

    def drain(self) -> None:
        """Run every LP until each one holds or idles and nothing is in flight."""
        while True:
            progressed = False
            self._deliver()
            for i, lp in enumerate(self.lps):
                while True:
                    r = lp.step(self.now, self.window.lam)
                    if r.executed is None:
                        break
                    progressed = True
                    self.stats.executed += 1
                    self.router.extend(r.emitted)
                if self._approx is None and self.gvt_mode == "approx":
                    # the GVT service polls while LPs are still running
                    self._approx = self._snapshot()
                self._deliver()
            if not progressed and not self.router:
                return

    # -- verification -----------------------------------------------------

    def verify(self, t_v: int) -> None:
        if t_v != self.now:
            raise ValueError("verification instants must coincide with round boundaries")
        theta = self.verification.theta
        for lp in self.lps:
            actual = query_agent(self.truth, lp.id).value
            outcome = check(lp, t_v, actual, theta)
            if outcome is None:
                self.emit({"kind": "verify", "real_time": units(t_v), "device": lp.id,
                           "status": "unverifiable"})
                continue
            self.outcomes.append(outcome)
            elapsed = units(t_v - self.last_aligned[lp.id])
            self.error_samples.append((elapsed, abs(outcome.delta)))
            self.emit({
                "kind": "error", "real_time": units(t_v), "device": lp.id,
                "predicted": outcome.predicted, "actual": outcome.actual,
                "delta": outcome.delta, "theta": None if theta == float("inf") else theta,
                "within": outcome.within,
            })
            if outcome.within:
                continue
            anti = lp.rollback_verification(t_v, actual, self.now)
            if anti is None:
                self.emit({"kind": "verify", "real_time": units(t_v), "device": lp.id,
                           "status": "skipped"})
                continue
            self.last_aligned[lp.id] = t_v
            self.stats.anti_sent += len(anti)
            self.router.extend(anti)

    # -- rounds -----------------------------------------------------------

    def round(self, now: int) -> GvtSnapshot:
        if now < self.now:
            raise ValueError("real time cannot move backwards")
        self.now = now
        self._approx = None
        self.truth.advance(now)
        self.drain()
        due = due_verifications(self.verification, now, self.last_verified)
        for t_v in due:
            self.verify(t_v)
        if due:
            self.last_verified = due[-1]
            self.drain()
        snap = self._approx if self.gvt_mode == "approx" else self._snapshot()
        self.gvt_history.append(snap)
        self._record(snap)
        for lp in self.lps:
            for c in lp.purge(now):
                self.emit({"kind": "commit", **c.to_json()})
        if self.pace:
            time.sleep(self.pace)
        return snap

    def _record(self, snap: GvtSnapshot) -> None:
        row = {"kind": "gvt", **snap.to_json(),
               "per_lp_last": {str(lp.id): units(lp.lvt) for lp in self.lps},
               "in_flight": [units(m.send_time) for m in self.router] if self.gvt_mode == "exact"
               else None,
               "mode": self.gvt_mode}
        if snap is self._approx:
            row["in_flight"] = None
        self.emit(row)
        for lp in self.lps:
            for rb in lp.rollbacks[self._rb_seen[lp.id]:]:
                self.emit({"kind": "rollback", **rb.to_json()})
            self._rb_seen[lp.id] = len(lp.rollbacks)
            rec = lp.predicted_at(self.now)
            self.emit({
                "kind": "state", "real_time": units(self.now), "device": lp.id,
                "predicted": None if rec is None else lp.pp.observe(rec.snapshot),
                "actual": self.truth.switches[lp.id].counter,
            })

    def run(self, schedule: Iterable[int]) -> None:
        for now in schedule:
            self.round(now)

    def finish(self, end: int) -> None:
        """Commit everything up to ``end``; nothing can roll back past it any more."""
        for lp in self.lps:
            for rb in lp.rollbacks[self._rb_seen[lp.id]:]:
                self.emit({"kind": "rollback", **rb.to_json()})
            self._rb_seen[lp.id] = len(lp.rollbacks)
            for c in lp.commit_through(end):
                self.emit({"kind": "commit", **c.to_json()})

    def unmatched_antis(self) -> int:
        return sum(m.anti for m in self.router) + sum(
            len(lp.recv_q.waiting_antis()) for lp in self.lps
        )


def round_schedule(duration: int, step: int, upsilon: int) -> list[int]:
    """Round boundaries every ``step`` ticks, plus every verification instant."""
    if step <= 0:
        raise ValueError("coordinator step must be positive")
    points = set(range(0, duration + 1, step))
    points.update(range(upsilon, duration + 1, upsilon))
    points.add(duration)
    return sorted(points)
