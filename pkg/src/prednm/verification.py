"""Verification queries, tolerance checks, and the accumulated-error model."""

from __future__ import annotations

import heapq
import math
import statistics
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .kernel import LogicalProcess
from .timebase import ticks


@dataclass(frozen=True)
class VerificationPolicy:
    upsilon: int  # query period, ticks
    theta: float = math.inf
    mode: str = "states"  # compare against the state queue

    def __post_init__(self) -> None:
        if self.upsilon <= 0:
            raise ValueError("verification period must be positive")
        if self.theta < 0:
            raise ValueError("tolerance must be non-negative")
        if self.mode != "states":
            raise ValueError(f"unsupported verification mode {self.mode!r}")

    @classmethod
    def from_units(cls, upsilon: float, theta: float = math.inf) -> "VerificationPolicy":
        return cls(ticks(upsilon), theta)


def due_verifications(policy: VerificationPolicy, now: int, last_done: int) -> list[int]:
    """Every multiple of the query period in ``(last_done, now]``."""
    u = policy.upsilon
    first = last_done // u + 1
    return [k * u for k in range(first, now // u + 1)]


@dataclass(frozen=True)
class VerificationOutcome:
    device: int
    t_v: int
    predicted: float
    actual: float
    delta: float
    within: bool


def check(lp: LogicalProcess, t_v: int, actual: float, theta: float) -> Optional[VerificationOutcome]:
    """Compare the newest saved state at or before ``t_v`` with the ground truth.

    Returns ``None`` when the LP holds no state that old (unverifiable).
    """
    rec = lp.predicted_at(t_v)
    if rec is None:
        return None
    predicted = lp.pp.observe(rec.snapshot)
    delta = predicted - actual
    return VerificationOutcome(lp.id, t_v, predicted, actual, delta, abs(delta) <= theta)


# -- accumulated error ------------------------------------------------------

CE = Callable[[float, float], float]


@dataclass(frozen=True)
class ErrorModel:
    """Per-hop computation error ``gain * e + eps`` and the driving-message error.

    ``hop_times`` lists the hop durations (time units) a prediction chain can be
    built from.  ``compose="recursive"`` feeds each hop's output error into the
    next hop; ``"sum"`` adds independent per-hop terms.
    """

    gain: float = 1.0
    eps: float = 0.0
    me_dp: float = 0.0
    hop_times: tuple[float, ...] = (10.0,)
    compose: str = "recursive"
    ce: Optional[CE] = None
    samples: tuple[tuple[float, float], ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not self.hop_times or min(self.hop_times) <= 0:
            raise ValueError("hop_times must be positive")
        if self.compose not in ("recursive", "sum"):
            raise ValueError(f"unknown composition {self.compose!r}")

    def computation_error(self, e: float, t: float) -> float:
        if self.ce is not None:
            return self.ce(e, t)
        return self.gain * e + self.eps

    def chain_error(self, times: Sequence[float]) -> float:
        if not times:
            return self.me_dp
        if self.compose == "sum":
            return sum(
                self.computation_error(self.me_dp if i == 0 else 0.0, t)
                for i, t in enumerate(times)
            )
        e = self.me_dp
        for t in times:
            e = self.computation_error(e, t)
        return e


def ac_n(model: ErrorModel, n: int, times: Optional[Sequence[float]] = None) -> float:
    """Accumulated error in the output of the n-th LP downstream of the driving process."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if times is None:
        times = [model.hop_times[0]] * n
    elif len(times) != n:
        raise ValueError("need one elapsed time per hop")
    return model.chain_error(times)


_ROUND = 9
MIXED_HOP_CAP = 400


def _extend(model: ErrorModel, e_prev: float, n_prev: int, h: float) -> float:
    """Error of a chain after appending a hop of length ``h``."""
    if n_prev == 0:
        return model.computation_error(model.me_dp, h)
    if model.compose == "sum":
        return e_prev + model.computation_error(0.0, h)
    return model.computation_error(e_prev, h)


def _reachable(model: ErrorModel, limit: float) -> dict[float, float]:
    """Least error over chains whose hop times sum exactly to each reachable total.

    Valid when the computation error is nondecreasing in its error argument.
    """
    hops = sorted(set(model.hop_times))
    seen = {0.0}
    frontier = [0.0]
    while frontier:
        s = heapq.heappop(frontier)
        for h in hops:
            s2 = round(s + h, _ROUND)
            if s2 <= limit + 1e-9 and s2 not in seen:
                seen.add(s2)
                heapq.heappush(frontier, s2)
    errs: dict[float, float] = {0.0: model.me_dp}
    for s in sorted(seen)[1:]:
        errs[s] = min(
            _extend(model, errs[prev], 0 if prev == 0.0 else 1, h)
            for h in hops
            if (prev := round(s - h, _ROUND)) in errs
        )
    return errs


def ac_t(model: ErrorModel, tau: float) -> float:
    """Accumulated error ``tau`` time units after the driving process emits.

    The lower limit over chains whose elapsed times approach ``tau`` is taken
    over maximal chains built from ``model.hop_times``: total at most ``tau``
    with no room for another hop.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    errs = _reachable(model, tau)
    hmin = min(model.hop_times)
    return min(e for s, e in errs.items() if s + hmin > tau + 1e-9)


def t_vfail(model: ErrorModel, theta: float, max_hops: int = 100_000) -> float:
    """Earliest elapsed time at which the accumulated error exceeds ``theta``.

    ``math.inf`` if it never does within ``max_hops`` hops of the shortest kind
    (``MIXED_HOP_CAP`` when hop lengths differ).
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if math.isinf(theta):
        return math.inf
    if len(set(model.hop_times)) == 1:
        # uniform chain: the error only changes on hop boundaries
        h = model.hop_times[0]
        e = model.me_dp
        if e > theta:
            return 0.0
        for k in range(1, max_hops + 1):
            nxt = _extend(model, e, k - 1, h)
            if nxt > theta:
                return k * h
            if k > 1 and nxt == e and model.compose == "recursive":
                return math.inf  # fixed point below theta
            e = nxt
        return math.inf
    hmin = min(model.hop_times)
    # mixed hop lengths: enumerate reachable totals, far fewer hops affordable
    errs = _reachable(model, min(max_hops, MIXED_HOP_CAP) * hmin)
    points = sorted(errs)
    lo = 0
    for hi, tau in enumerate(points):
        while points[lo] <= tau - hmin + 1e-9:
            lo += 1
        if min(errs[s] for s in points[lo:hi + 1]) > theta:
            return tau
    return math.inf


def calibrate(model: ErrorModel, samples: Sequence[tuple[float, float]],
              hop_time: Optional[float] = None) -> ErrorModel:
    """Fit per-hop error from (elapsed time, |predicted - actual|) samples.

    A least-squares line gives an error rate per time unit; scaled by the hop
    time it becomes the additive per-hop error of a uniform chain.
    """
    if len(samples) < 2:
        return model
    h = hop_time if hop_time is not None else model.hop_times[0]
    xs = [float(x) for x, _ in samples]
    ys = [abs(float(y)) for _, y in samples]
    try:
        slope, intercept = statistics.linear_regression(xs, ys)
    except statistics.StatisticsError:
        sxx = sum(x * x for x in xs)
        slope = sum(x * y for x, y in zip(xs, ys)) / sxx if sxx else 0.0
        intercept = 0.0
    slope = max(slope, 0.0)
    intercept = max(intercept, 0.0)
    return replace(
        model,
        gain=1.0,
        eps=slope * h,
        me_dp=intercept,
        hop_times=(h,),
        compose="recursive",
        ce=None,
        samples=tuple(samples),
    )
