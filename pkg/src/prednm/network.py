"""The managed system: a closed network of FCFS switches.

Each switch has a single FCFS queue feeding ``servers`` exponential stages in
series, so a packet's service time is Erlang distributed with mean
``servers * mean_service``.  On leaving, a packet is forwarded to a switch
chosen uniformly at random, possibly the same one.  A switch's monitored state
is the cumulative number of packets that have entered its queue.

Both the ground truth and the predictive twin draw service and routing from
named per-switch streams.  Given the same stream names, the two walk through
identical random sequences.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

from .kernel import Outgoing
from .timebase import Message, make_id, ticks


@dataclass(frozen=True)
class Topology:
    switches: int = 3
    servers: int = 10
    mean_service: float = 10.0  # per stage, in time units
    packets_per_switch: int = 1

    def __post_init__(self) -> None:
        if self.switches < 1 or self.servers < 1 or self.packets_per_switch < 1:
            raise ValueError("switches, servers and packets_per_switch must be >= 1")
        if self.mean_service <= 0:
            raise ValueError("mean_service must be positive")


@dataclass(frozen=True)
class TwinConfig:
    mean_service: Optional[float] = None  # None: same as ground truth
    exact: bool = False  # share the ground truth's random streams


class SwitchStreams:
    """Seeded service and routing streams for one switch."""

    def __init__(self, seed: int, role: str, switch: int) -> None:
        self.service = random.Random(f"{seed}/{role}/{switch}/service")
        self.route = random.Random(f"{seed}/{role}/{switch}/route")

    def stage(self, mean: float) -> int:
        return ticks(self.service.expovariate(1.0 / mean))

    def route_to(self, k: int) -> int:
        return self.route.randrange(k)

    def checkpoint(self):
        return (self.service.getstate(), self.route.getstate())

    def restore(self, cp) -> None:
        self.service.setstate(cp[0])
        self.route.setstate(cp[1])


class MeanStreams:
    """Deterministic stand-in: every stage takes exactly its mean."""

    def __init__(self, dst: int = 0) -> None:
        self.dst = dst

    def stage(self, mean: float) -> int:
        return ticks(mean)

    def route_to(self, k: int) -> int:
        return self.dst % k

    def checkpoint(self):
        return None

    def restore(self, cp) -> None:
        pass


@dataclass(frozen=True)
class Packet:
    service_end: int  # time the packet finishes service at the sender (ticks)
    hops: int  # times this packet has entered a switch
    idmsg: bool = False


@dataclass(frozen=True)
class SwitchState:
    counter: int = 0
    busy_until: int = 0


def switch_pp(
    state: SwitchState, msg: Message, rng, *, switches: int, servers: int, mean_service: float
) -> tuple[SwitchState, list[Outgoing]]:
    """One packet arrival at a switch: count it, serve it FCFS, forward it."""
    start = max(msg.receive_time, state.busy_until)
    service = sum(rng.stage(mean_service) for _ in range(servers))
    done = start + service
    dst = rng.route_to(switches)
    hops = msg.payload.hops if isinstance(msg.payload, Packet) else 0
    out = Outgoing(dst, done, Packet(done, hops + 1))
    return SwitchState(state.counter + 1, done), [out]


@dataclass(frozen=True)
class SwitchProcess:
    switches: int
    servers: int
    mean_service: float

    def initial_state(self) -> SwitchState:
        return SwitchState()

    def handle(self, state, msg, rng):
        return switch_pp(state, msg, rng, switches=self.switches, servers=self.servers,
                         mean_service=self.mean_service)

    def observe(self, state: SwitchState) -> float:
        return state.counter

    def correct(self, state: SwitchState, value: float) -> SwitchState:
        return replace(state, counter=int(round(value)))


def driving_emit(topology: Topology) -> list[Message]:
    """Startup injection: each switch's queue receives its id-association packets at time 0."""
    return [
        Message(make_id(i, k), i, i, 0, 0, real_stamp=0, payload=Packet(0, 0, idmsg=True))
        for i in range(topology.switches)
        for k in range(topology.packets_per_switch)
    ]


@dataclass(frozen=True)
class AgentQueryResult:
    device: int
    at: int
    value: int


_DEP, _ARR = 0, 1


@dataclass
class _Switch:
    streams: SwitchStreams
    seq: int
    counter: int = 0
    busy: bool = False
    queue: deque = field(default_factory=deque)


class GroundTruthSystem:
    """Event-list simulation of the managed network on the real-time clock."""

    def __init__(self, topology: Topology, seed: int) -> None:
        self.topology = topology
        self.clock = 0
        self.polls = 0
        self.injected = topology.switches * topology.packets_per_switch
        self.in_transit = self.injected
        self._events: list[tuple] = []
        self.switches = [
            _Switch(SwitchStreams(seed, "truth", i), seq=topology.packets_per_switch)
            for i in range(topology.switches)
        ]
        for m in driving_emit(topology):
            heapq.heappush(self._events, (0, _ARR, m.src, m.id, m.dst, 0))
        self.advance(0)  # the startup packets have entered by time 0

    def advance(self, to: int) -> None:
        if to < self.clock:
            raise ValueError(f"cannot move ground truth back from {self.clock} to {to}")
        ev = self._events
        while ev and ev[0][0] <= to:
            t, kind, a, _, dst, hops = heapq.heappop(ev)
            if kind == _DEP:
                sw = self.switches[a]
                sw.busy = False
                self.in_transit += 1
                if sw.queue:
                    self._start(a, t, sw.queue.popleft())
            else:
                sw = self.switches[dst]
                sw.counter += 1
                self.in_transit -= 1
                if sw.busy:
                    sw.queue.append(hops + 1)
                else:
                    self._start(dst, t, hops + 1)
        self.clock = to

    def _start(self, i: int, t: int, hops: int) -> None:
        sw = self.switches[i]
        topo = self.topology
        service = sum(sw.streams.stage(topo.mean_service) for _ in range(topo.servers))
        done = t + service
        dst = sw.streams.route_to(topo.switches)
        msg_id = make_id(i, sw.seq)
        sw.seq += 1
        sw.busy = True
        heapq.heappush(self._events, (done, _DEP, i, 0, None, None))
        heapq.heappush(self._events, (done, _ARR, i, msg_id, dst, hops))

    def counters(self) -> list[int]:
        return [sw.counter for sw in self.switches]

    def population(self) -> int:
        """Packets queued, in service, or between switches."""
        return sum(len(sw.queue) + sw.busy for sw in self.switches) + self.in_transit


def advance_truth(sys: GroundTruthSystem, to: int) -> GroundTruthSystem:
    sys.advance(to)
    return sys


def query_agent(sys: GroundTruthSystem, device: int) -> AgentQueryResult:
    if not 0 <= device < len(sys.switches):
        raise KeyError(f"unknown device {device}")
    sys.polls += 1
    return AgentQueryResult(device, sys.clock, sys.switches[device].counter)


@dataclass
class ManagedNetwork:
    truth: GroundTruthSystem
    processes: list[SwitchProcess]
    streams: list[SwitchStreams]
    first_seq: int


def build_network(
    topology: Topology, seed: int, twin: TwinConfig = TwinConfig()
) -> ManagedNetwork:
    """Ground truth plus the matching predictive Physical Processes."""
    truth = GroundTruthSystem(topology, seed)
    mean = topology.mean_service if twin.mean_service is None else twin.mean_service
    if mean <= 0:
        raise ValueError("twin mean_service must be positive")
    role = "truth" if twin.exact else "twin"
    pp = SwitchProcess(topology.switches, topology.servers, mean)
    return ManagedNetwork(
        truth=truth,
        processes=[pp] * topology.switches,
        streams=[SwitchStreams(seed, role, i) for i in range(topology.switches)],
        first_seq=topology.packets_per_switch,
    )
