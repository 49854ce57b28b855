"""Management polling budget: overhead bandwidth, device bounds, interval choice, fusion."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .verification import ErrorModel, t_vfail

_EPS = 1e-12


@dataclass(frozen=True)
class PollingParams:
    P: float  # packets per poll
    S: float  # bits per packet
    N: float  # devices polled
    T: float  # polling period
    delta: float  # time for a single poll
    bw_total: float  # bits per time unit

    def __post_init__(self) -> None:
        for name in ("P", "S", "N", "T", "delta", "bw_total"):
            v = getattr(self, name)
            if not (v > 0) or math.isnan(v):
                raise ValueError(f"{name} must be strictly positive, got {v!r}")


def overhead_bandwidth_pct(p: PollingParams, *, printed_form: bool = False) -> float:
    """Share of total bandwidth consumed by polling, in percent.

    ``printed_form=True`` evaluates ``100 P N S Bw / T`` for compatibility with
    the historical formula, which is not a fraction of bandwidth.
    """
    if p.T <= 0 or p.bw_total <= 0:
        raise ValueError("T and bw_total must be positive")
    if printed_form:
        return 100.0 * p.P * p.N * p.S * p.bw_total / p.T
    return 100.0 * p.P * p.N * p.S / (p.T * p.bw_total)


def max_devices(T: float, delta: float) -> int:
    if T <= 0 or delta <= 0:
        raise ValueError("T and delta must be positive")
    # tolerate T/delta landing a hair below an integer
    return math.floor(T / delta * (1 + _EPS))


def min_period(delta: float, N: float) -> float:
    if delta <= 0 or N <= 0:
        raise ValueError("delta and N must be positive")
    return delta * N


class InfeasiblePlan(ValueError):
    def __init__(self, constraint: str, lower: float, upper: float) -> None:
        super().__init__(
            f"no polling period satisfies all constraints: {constraint} "
            f"(need T >= {lower:g} but T <= {upper:g})"
        )
        self.constraint = constraint
        self.lower = lower
        self.upper = upper


@dataclass(frozen=True)
class PollPlan:
    period: float
    accuracy_bound: float  # t_vfail
    capacity_bound: float  # delta * N
    bandwidth_bound: float  # smallest T within the budget
    binding: str

    def to_json(self) -> dict:
        def f(x: float) -> Optional[float]:
            return None if math.isinf(x) else x

        return {
            "period": f(self.period),
            "t_vfail": f(self.accuracy_bound),
            "min_period_capacity": self.capacity_bound,
            "min_period_bandwidth": self.bandwidth_bound,
            "binding": self.binding,
        }


def recommend_interval(
    model: ErrorModel,
    theta: float,
    constraints: PollingParams,
    budget_pct: float,
    *,
    printed_form: bool = False,
    upper: Optional[float] = None,
) -> PollPlan:
    """Largest polling period that stays accurate, fits the poll capacity and the budget.

    ``upper`` overrides the accuracy bound (useful when it is already known).
    With an infinite tolerance the accuracy bound is vacuous and the period is
    unbounded above.
    """
    if budget_pct <= 0:
        raise ValueError("budget_pct must be positive")
    hi = t_vfail(model, theta) if upper is None else upper
    cap = min_period(constraints.delta, constraints.N)
    # overhead is proportional to 1/T, so the budget is a lower bound on T
    at_one = overhead_bandwidth_pct(replace(constraints, T=1.0), printed_form=printed_form)
    bw = at_one / budget_pct
    lo = max(cap, bw)
    if lo > hi * (1 + _EPS):
        raise InfeasiblePlan("poll_capacity" if cap >= bw else "bandwidth_budget", lo, hi)
    return PollPlan(hi, hi, cap, bw, "accuracy" if not math.isinf(hi) else "none")


@dataclass(frozen=True)
class PredictionTriple:
    time: float
    value: float
    probability: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability!r} outside [0, 1]")


class NoInformation(ValueError):
    """Both predictions carry zero effective weight."""


def fuse(a: PredictionTriple, b: PredictionTriple, wa: float = 1.0,
         wb: float = 1.0) -> PredictionTriple:
    """Combine two predictions of the same event, weighting by probability and source weight."""
    if wa < 0 or wb < 0:
        raise ValueError("weights must be non-negative")
    ka, kb = a.probability * wa, b.probability * wb
    k = ka + kb
    if k == 0:
        raise NoInformation("both predictions have zero effective weight")
    time = (ka * a.time + kb * b.time) / k
    value = (ka * a.value + kb * b.value) / k
    prob = (wa * a.probability + wb * b.probability) / (wa + wb)
    # keep the means inside the input span despite rounding
    time = min(max(time, min(a.time, b.time)), max(a.time, b.time))
    value = min(max(value, min(a.value, b.value)), max(a.value, b.value))
    return PredictionTriple(time, value, prob)
