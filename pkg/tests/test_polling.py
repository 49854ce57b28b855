import math

import pytest
from hypothesis import given, strategies as st

from prednm.polling import (
    InfeasiblePlan,
    NoInformation,
    PollingParams,
    PredictionTriple,
    fuse,
    max_devices,
    min_period,
    overhead_bandwidth_pct,
    recommend_interval,
)
from prednm.verification import ErrorModel

pos = st.floats(0.01, 1e4)


def params(**kw):
    base = dict(P=1, S=1000, N=1, T=10, delta=1, bw_total=10000)
    base.update(kw)
    return PollingParams(**base)


def test_overhead_examples():
    assert overhead_bandwidth_pct(params()) == pytest.approx(1.0, rel=1e-12)
    assert overhead_bandwidth_pct(params(S=1e-12)) == pytest.approx(0.0, abs=1e-9)
    assert overhead_bandwidth_pct(params(N=2)) == pytest.approx(2 * overhead_bandwidth_pct(params()))


def test_printed_formula_is_available():
    assert overhead_bandwidth_pct(params(), printed_form=True) == pytest.approx(
        100 * 1 * 1 * 1000 * 10000 / 10)


def test_params_must_be_positive():
    for field in ("P", "S", "N", "T", "delta", "bw_total"):
        with pytest.raises(ValueError):
            params(**{field: 0})


@given(pos, pos, pos, pos, pos, st.floats(0.1, 10))
def test_overhead_homogeneity(P, S, N, T, bw, k):
    p = params(P=P, S=S, N=N, T=T, bw_total=bw)
    base = overhead_bandwidth_pct(p)
    assert overhead_bandwidth_pct(params(P=P, S=S, N=N, T=k * T, bw_total=bw)) == pytest.approx(base / k)
    for f in ("P", "S", "N"):
        scaled = params(**{**dict(P=P, S=S, N=N, T=T, bw_total=bw), f: k * locals()[f]})
        assert overhead_bandwidth_pct(scaled) == pytest.approx(k * base)


def test_device_bounds():
    assert max_devices(10, 2) == 5
    assert min_period(2, 5) == 10
    assert max_devices(0.3, 0.1) == 3  # not 2 from float division


@given(st.floats(0.001, 100), st.integers(1, 10_000))
def test_bounds_are_consistent(delta, n):
    assert max_devices(min_period(delta, n), delta) >= n


def uniform(eps):
    return ErrorModel(eps=eps, hop_times=(10.0,))


def test_recommend_loose_budget():
    plan = recommend_interval(uniform(1.0), 3, params(delta=2, N=5), budget_pct=100)
    assert plan.period == 40 and plan.capacity_bound == 10


def test_recommend_infeasible_names_capacity():
    with pytest.raises(InfeasiblePlan) as err:
        recommend_interval(ErrorModel(eps=1.0, hop_times=(1.0,)), 4, params(delta=2, N=5), 100)
    assert err.value.constraint == "poll_capacity"


def test_recommend_infeasible_names_bandwidth():
    with pytest.raises(InfeasiblePlan) as err:
        recommend_interval(uniform(1.0), 3, params(S=1e6), budget_pct=1)
    assert err.value.constraint == "bandwidth_budget"


def test_recommend_without_accuracy_bound():
    plan = recommend_interval(uniform(1.0), math.inf, params(delta=2, N=5), budget_pct=100)
    assert plan.period == math.inf and plan.binding == "none"


@given(st.floats(0.05, 3), st.floats(0, 20), st.floats(0.01, 3), st.integers(1, 20),
       st.floats(0.1, 100))
def test_recommendation_satisfies_constraints(eps, theta, delta, n, budget):
    p = params(delta=delta, N=n)
    try:
        plan = recommend_interval(uniform(eps), theta, p, budget)
    except InfeasiblePlan:
        return
    T = plan.period
    assert T <= plan.accuracy_bound
    assert T >= delta * n * (1 - 1e-12)
    if math.isfinite(T):
        assert overhead_bandwidth_pct(PollingParams(p.P, p.S, p.N, T, p.delta, p.bw_total)) <= budget * (1 + 1e-9)


def test_fuse_examples():
    same = fuse(PredictionTriple(2, 10, 0.5), PredictionTriple(4, 20, 0.5))
    assert (same.time, same.value) == (3, 15)
    one = fuse(PredictionTriple(7, 70, 1.0), PredictionTriple(9, 99, 0.0))
    assert (one.time, one.value) == (7, 70)
    r = fuse(PredictionTriple(10, 100, 0.8), PredictionTriple(12, 104, 0.4), 1, 1)
    assert r.time == pytest.approx(32 / 3, rel=1e-9)
    assert r.value == pytest.approx(304 / 3, rel=1e-9)
    assert r.probability == pytest.approx(0.6, rel=1e-9)


def test_fuse_without_information():
    with pytest.raises(NoInformation):
        fuse(PredictionTriple(1, 1, 0.0), PredictionTriple(2, 2, 0.0))
    with pytest.raises(ValueError):
        PredictionTriple(1, 1, 1.5)


triples = st.builds(PredictionTriple, st.floats(-1e6, 1e6), st.floats(-1e6, 1e6),
                    st.floats(0, 1))


@given(triples, triples, st.floats(0, 10), st.floats(0, 10))
def test_fuse_symmetry_and_bounds(a, b, wa, wb):
    try:
        r = fuse(a, b, wa, wb)
    except NoInformation:
        return
    s = fuse(b, a, wb, wa)
    assert r.time == pytest.approx(s.time) and r.value == pytest.approx(s.value)
    assert min(a.time, b.time) <= r.time <= max(a.time, b.time)
    assert min(a.value, b.value) <= r.value <= max(a.value, b.value)
