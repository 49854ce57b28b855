"""Acceptance criteria: each test prints one PASS/FAIL line and asserts it."""

import hashlib
import math
import time
from statistics import mean

import pytest

from oracles import sequential_counters
from prednm.harness import PERTURBED, ExperimentConfig, run, suite_configs
from prednm.network import TwinConfig
from prednm.polling import (
    PollingParams,
    PredictionTriple,
    fuse,
    max_devices,
    min_period,
    overhead_bandwidth_pct,
)
from prednm.timebase import TICKS_PER_UNIT
from prednm.verification import ErrorModel, ac_n, t_vfail

SEEDS = range(1, 21)


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail
    return report


@pytest.fixture(scope="module")
def suite_runs():
    return [run(cfg) for seed in range(1, 6) for cfg in suite_configs(seed)]


def committed_history(trace, k):
    hist = [[] for _ in range(k)]
    for r in trace:
        if r["kind"] == "commit":
            hist[r["lp"]].append((round(r["recv"] * TICKS_PER_UNIT), r["value"]))
    return hist


def test_a1_oracle_equivalence(verdict):
    mismatched, slowest = [], 0.0
    for seed in range(1, 6):
        t0 = time.perf_counter()
        rep = run(ExperimentConfig(5, math.inf, 5, seed=seed, twin=TwinConfig(exact=True)))
        slowest = max(slowest, time.perf_counter() - t0)
        if committed_history(rep.trace, 3) != sequential_counters(seed, until=1000):
            mismatched.append(seed)
    verdict("A1 oracle equivalence", not mismatched and slowest < 5,
            f"mismatched seeds={mismatched}, slowest run {slowest:.2f}s (limit 5s)")


def test_a2_tolerance_monotonicity(verdict):
    t0 = time.perf_counter()
    ge = gt = 0
    pairs = []
    for seed in SEEDS:
        tight = run(ExperimentConfig(5, 3, 5, seed=seed, twin=PERTURBED)).rollbacks["verification"]
        loose = run(ExperimentConfig(5, 10, 5, seed=seed, twin=PERTURBED)).rollbacks["verification"]
        ge += tight >= loose
        gt += tight > loose
        pairs.append((tight, loose))
    elapsed = time.perf_counter() - t0
    verdict("A2 tolerance monotonicity", ge >= 18 and gt >= 15 and elapsed < 60,
            f">= in {ge}/20 (need 18), > in {gt}/20 (need 15), {elapsed:.1f}s; "
            f"counts (theta=3, theta=10) {pairs}")


def error_at(trace, period):
    rows = [r for r in trace if r["kind"] == "error"
            and round(r["real_time"] * TICKS_PER_UNIT) % (period * TICKS_PER_UNIT) == 0]
    return mean(abs(r["delta"]) for r in rows), len(rows)


def test_a3_verification_frequency(verdict):
    ratios, better, ties = [], 0, 0
    for seed in SEEDS:
        five = run(ExperimentConfig(5, 10, 5, seed=seed, twin=PERTURBED))
        one = run(ExperimentConfig(5, 10, 1, seed=seed, twin=PERTURBED))
        ratios.append(one.polls / five.polls)
        e1, n1 = error_at(one.trace, 5)
        e5, n5 = error_at(five.trace, 5)
        assert n1 == n5
        better += e1 <= e5
        ties += e1 == e5
    ok_ratio = all(abs(r - 5) <= 5 / 600 for r in ratios)
    verdict("A3 verification frequency", ok_ratio and better >= 12,
            f"poll ratios {sorted(set(ratios))}, error(1) <= error(5) in {better}/20 "
            f"(need 12; {ties} exact ties)")


def test_a4_window_enforcement(verdict, suite_runs):
    worst = -math.inf
    for rep in suite_runs:
        cfg = next(r for r in rep.trace if r["kind"] == "config")
        for r in rep.trace:
            if r["kind"] == "gvt":
                over = max(r["per_lp_last"].values()) - r["real_time"] - cfg["lookahead"]
                worst = max(worst, over)
    big = [rep for rep in suite_runs if rep.label == "(400,5,5)"]
    in_band = all(360 <= rep.max_t_ahead <= 400 for rep in big)
    early = all(rep.max_t_ahead_at <= 0.05 * 1000 for rep in big)
    verdict("A4 window enforcement", worst <= 0 and in_band and early,
            f"max (lvt - now - lambda) = {worst:g} (must be <= 0, stricter than one-event slack); "
            f"(400,5,5) max t_ahead {[r.max_t_ahead for r in big]} "
            f"at real time {[r.max_t_ahead_at for r in big]}")


def test_a5_rollback_floor(verdict, suite_runs):
    total = below = 0
    for rep in suite_runs:
        for r in rep.trace:
            if r["kind"] == "rollback":
                total += 1
                below += r["to_time"] < r["at_real"]
    verdict("A5 rollback floor", below == 0 and total > 0,
            f"{below} of {total} rollbacks restore below real time")


def test_a6_annihilation_and_causal_order(verdict, suite_runs):
    unmatched = sum(rep.unmatched_antis for rep in suite_runs)
    rule1 = rule2 = pairs = 0
    for rep in suite_runs:
        commits = [r for r in rep.trace if r["kind"] == "commit"]
        by_lp = {}
        for r in commits:
            by_lp.setdefault(r["lp"], []).append(r)
        for rows in by_lp.values():
            keys = [(r["recv"], r["src"], r["id"]) for r in rows]
            rule1 += keys != sorted(keys)
        executed = {(r["lp"], r["recv"]) for r in commits}
        for r in commits:
            if r["src"] == r["lp"] and r["send"] == r["recv"] == 0:
                continue  # startup injection has no generating event
            pairs += 1
            rule2 += (r["src"], r["send"]) not in executed or r["send"] > r["recv"]
    verdict("A6 annihilation soundness", unmatched == 0 and rule1 == 0 and rule2 == 0,
            f"unmatched anti-messages {unmatched}, rule-1 violations {rule1}, "
            f"rule-2 violations {rule2} over {pairs} cause/effect pairs")


def test_a7_gvt_correctness(verdict, suite_runs):
    mismatch = backwards = samples = 0
    for rep in suite_runs:
        prev = -math.inf
        for r in rep.trace:
            if r["kind"] != "gvt":
                continue
            samples += 1
            assert r["mode"] == "exact"
            recomputed = min([*r["per_lp_lvt"].values(), *r["in_flight"]])
            mismatch += recomputed != r["gvt"]
            backwards += r["gvt"] < prev
            prev = r["gvt"]
    verdict("A7 GVT correctness", mismatch == 0 and backwards == 0,
            f"{samples} snapshots, {mismatch} disagree with recomputation, "
            f"{backwards} decreases")


def rel_ok(got, want):
    return math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-12)


def test_a8_formula_checks(verdict):
    t0 = time.perf_counter()
    checks = {
        # 100 * 1 * 1 * 1000 / (10 * 10000)
        "overhead_bandwidth_pct": rel_ok(
            overhead_bandwidth_pct(PollingParams(P=1, S=1000, N=1, T=10, delta=1,
                                                 bw_total=10000)), 1.0),
        "max_devices": max_devices(10, 2) == 5,
        "min_period": rel_ok(min_period(2, 5), 10),
    }
    e = 1.0
    for _ in range(3):
        e = 1.1 * e + 0.5
    checks["ac_n"] = rel_ok(ac_n(ErrorModel(gain=1.1, eps=0.5, me_dp=1.0), 3), e)
    # uniform chain, 1 per 10 units: error 4 > 3 first at the fourth hop
    checks["t_vfail"] = rel_ok(t_vfail(ErrorModel(eps=1.0, hop_times=(10.0,)), 3), 40)
    f = fuse(PredictionTriple(10, 100, 0.8), PredictionTriple(12, 104, 0.4), 1, 1)
    w = 0.8 + 0.4
    checks["fuse"] = (rel_ok(f.time, (0.8 * 10 + 0.4 * 12) / w)
                      and rel_ok(f.value, (0.8 * 100 + 0.4 * 104) / w)
                      and rel_ok(f.probability, w / 2))
    elapsed = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    verdict("A8 formula checks", not failed and elapsed < 1,
            f"failed {failed or 'none'} of {len(checks)}, {elapsed * 1000:.1f} ms")


def test_a9_determinism(verdict, tmp_path):
    digests = []
    for cfg in suite_configs(7):
        pair = [hashlib.sha256(open(run(cfg, tmp_path / f"{cfg.label}-{i}").trace_path, "rb")
                               .read()).hexdigest() for i in range(2)]
        digests.append(pair[0] == pair[1])
    verdict("A9 determinism", all(digests),
            f"{sum(digests)}/{len(digests)} configurations hash-identical across reruns")
