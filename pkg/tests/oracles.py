"""Independent reference computations used as test oracles.

The sequential simulator below shares nothing with the package except the
naming convention of the seeded random streams, which is part of the model's
reproducibility contract.
"""

from __future__ import annotations

import heapq
import itertools
import random

TICKS = 1_000_000


def sequential_counters(seed, switches=3, servers=10, mean=10.0, packets=1, until=1000.0):
    """Event-list simulation of the closed FCFS network.

    Returns, per switch, the list of (arrival tick, counter after arrival).
    """
    svc = [random.Random(f"{seed}/truth/{i}/service") for i in range(switches)]
    rte = [random.Random(f"{seed}/truth/{i}/route") for i in range(switches)]
    end = round(until * TICKS)
    tie = itertools.count()
    # (time, order, kind, switch)
    events = []
    for i in range(switches):
        for _ in range(packets):
            heapq.heappush(events, (0, next(tie), "arrive", i))
    waiting = [0] * switches
    busy = [False] * switches
    count = [0] * switches
    history = [[] for _ in range(switches)]

    def begin(i, t):
        total = 0
        for _ in range(servers):
            total += round(svc[i].expovariate(1.0 / mean) * TICKS)
        dst = rte[i].randrange(switches)
        busy[i] = True
        heapq.heappush(events, (t + total, next(tie), "leave", i))
        heapq.heappush(events, (t + total, next(tie), "arrive", dst))

    while events and events[0][0] <= end:
        t, _, kind, i = heapq.heappop(events)
        if kind == "leave":
            busy[i] = False
            if waiting[i]:
                waiting[i] -= 1
                begin(i, t)
        else:
            count[i] += 1
            history[i].append((t, count[i]))
            if busy[i]:
                waiting[i] += 1
            else:
                begin(i, t)
    return history


def brute_ac_t(gain, eps, me_dp, hops, tau):
    """Minimum recursive error over maximal chains, by exhaustive enumeration."""
    hmin = min(hops)
    best = None

    def walk(total, err, n):
        nonlocal best
        if total + hmin > tau + 1e-9:
            if best is None or err < best:
                best = err
        for h in hops:
            if total + h <= tau + 1e-9:
                walk(total + h, gain * (me_dp if n == 0 else err) + eps, n + 1)

    walk(0.0, me_dp, 0)
    return best
