"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criterion 6 is expected RED at the 500 preset and is asserted faithfully
anyway: the measured worst-case denial-of-service slowdown tops out at ~0.89
of the closed-form bound there (see notes in the failure message). Run with
`pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
"""

import math
import time

import pytest

from prism.analytic import (
    abo_act_q,
    dos_bound,
    intersection_reach,
    min_supported_trh,
    p_mitigate,
    p_shq_markov,
    ssq_min_size,
    storage_bytes,
)
from prism.attacks import run_boundary_burst, run_chained_alert
from prism.channel import ChannelState
from prism.config import MttfTarget, PrismConfig, preset_config, with_overrides
from prism.engine import BankState
from prism.montecarlo import selection_mc
from prism.rng import SeededRng


def report(n, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {n}: {status} — {detail}")
    return ok


# -- 1: closed-form golden numbers -------------------------------------------------

def test_criterion_1_closed_form_goldens():
    t0 = time.time()
    checks = []
    checks.append(ssq_min_size(9) == 13)
    for (w, r), expect in {(72, 4): 1.39, (72, 7): 1.68, (48, 9): 2.31}.items():
        checks.append(abs(dos_bound(w, r, c_rfm=7).slowdown - expect) <= 0.005)
    checks.append(storage_bytes(preset_config(1000)).total_bytes == 152)
    checks.append(storage_bytes(preset_config(500)).total_bytes == 625)
    checks.append(intersection_reach(72, 7, 41) >= 0.98)
    checks.append({q: abo_act_q(q) for q in (4, 8, 16, 32)}
                  == {4: 7, 8: 10, 16: 12, 32: 14})
    ok = all(checks)
    assert report(1, ok, f"closed-form golden numbers ({time.time() - t0:.3f}s)")


# -- 2: queue-mechanics fuzz --------------------------------------------------------

def _fuzz_ssq_bound(cases):
    count = 0
    for i in range(cases):
        rng = SeededRng(1000 + i)
        r = 2 + rng.randint(8)                       # r in [2, 9]
        q_min = -(-2 * r // (r - 1)) + 1
        q = q_min + rng.randint(12)
        w = 4 * r * (1 + rng.randint(2))
        res = run_boundary_burst(r, pmq_capacity=q, w=w, seed=i)
        assert res.peak_waiting <= res.bound, \
            f"burst waiting {res.peak_waiting} > bound {res.bound} (r={r}, q={q}, w={w})"
        count += 1
    return count


def _fuzz_shq_occupancy(cases):
    count = 0
    for i in range(cases):
        rng = SeededRng(2000 + i)
        r = 2 + rng.randint(3)
        w = 4 * r + rng.randint(8)
        l = 1 + rng.randint(5)
        cfg = PrismConfig(w=w, r=r, l=l, ssq_capacity=13)
        bank = BankState(cfg, rng.derive(1))
        channel = ChannelState([bank], trr_interval_acts=1)
        span = 1 << 14
        for win in range(l + 3):
            for s in range(w):
                channel.step(0, rng.randint(span))
            assert bank.shq_occupancy() == min(win + 1, l) * (r - 1), \
                f"occupancy law broken at window {win} (w={w}, r={r}, l={l})"
        count += 1
    return count


def _fuzz_alert_drain_cadence(cases):
    count = 0
    for i in range(cases):
        rng = SeededRng(3000 + i)
        r = 2 + rng.randint(4)
        w = 4 * r
        cfg = PrismConfig(w=w, r=r, l=6, pmq_capacity=2, ssq_capacity=13,
                          trr_interval_acts=0)
        bank = BankState(cfg, rng.derive(1))
        channel = ChannelState([bank], trr_interval_acts=0, proactive_rfm=False)
        pool = 4 + rng.randint(8)                    # tiny row space: alert storm
        for g in range(320):
            channel.step(0, g % pool)
        acts = channel.alert_rfm_acts
        for a, b in zip(acts, acts[1:]):
            assert b - a >= 4, f"alert services {b - a} acts apart (case {i})"
        for j in range(len(acts)):
            for k in range(j + 1, len(acts)):
                n = acts[k] - acts[j]
                assert k - j <= math.ceil(n / 4)
        count += 1
    return count


def _fuzz_lookback_edge(cases):
    count = 0
    for i in range(cases):
        rng = SeededRng(4000 + i)
        r = 2 + rng.randint(3)
        w = 4 * r + rng.randint(6)
        l = 1 + rng.randint(5)
        x = (l + 1) * w
        cfg = PrismConfig(w=w, r=r, l=l, ssq_capacity=13)
        bank = BankState(cfg, rng.derive(1))
        channel = ChannelState([bank], trr_interval_acts=1)
        for g in range(2 * (l + 2) * w):
            channel.step(0, g % x)
        assert bank.intersections == 0, \
            f"intersection at the lookback edge (w={w}, r={r}, l={l})"
        count += 1
    return count


def test_criterion_2_queue_mechanics_fuzz():
    t0 = time.time()
    total = 0
    total += _fuzz_ssq_bound(1200)
    total += _fuzz_shq_occupancy(3100)
    total += _fuzz_alert_drain_cadence(2500)
    total += _fuzz_lookback_edge(3300)
    ok = total >= 10_000
    assert report(2, ok, f"queue-mechanics fuzz, {total} cases ({time.time() - t0:.1f}s)")


# -- 3: analytic vs Monte Carlo selection frequency ----------------------------------

#: Designated nine-point validation grid at w=72: (r, l, x). The x values sit
#: inside the sweep range, where the continuum residency model applies.
VALIDATION_GRID = [
    (3, 12, 72), (3, 25, 144), (3, 41, 288),
    (5, 12, 144), (5, 25, 288), (5, 41, 72),
    (7, 12, 288), (7, 25, 72), (7, 41, 144),
]


def test_criterion_3_analytic_empirical_cross_validation():
    t0 = time.time()
    w, windows = 72, 120_000
    worst = 0.0
    for i, (r, l, x) in enumerate(VALIDATION_GRID):
        est = selection_mc(w, r, l, x, windows=windows, seed=500 + i)
        expect = p_mitigate(w, r, l, x)
        rel = abs(est.p_m_hat - expect) / expect
        worst = max(worst, rel)
        assert rel <= 0.05, \
            f"p_m mismatch at (r={r}, l={l}, x={x}): {est.p_m_hat:.6f} vs {expect:.6f}"
    ok = worst <= 0.05
    assert report(3, ok, f"selection frequency within 5% on 9 points "
                         f"(worst {worst:.2%}, {windows} windows/point, "
                         f"{time.time() - t0:.1f}s)")


# -- 4: two-state occupancy model consistency -----------------------------------------

def _geometric(rng, p):
    u = (rng.next_u64() + 0.5) / 2**64
    return max(1, math.ceil(math.log(u) / math.log1p(-p)))


def test_criterion_4_markov_consistency():
    t0 = time.time()
    points = [(72, 7, 41), (72, 4, 12), (48, 9, 79), (72, 3, 25), (24, 2, 10)]
    rng = SeededRng(606)
    worst = 0.0
    for w, r, l in points:
        present = total = 0
        for _ in range(400_000):
            total += _geometric(rng, (r - 1) / w)
            stay = _geometric(rng, 1 / l)
            present += stay
            total += stay
        rel = abs(present / total - p_shq_markov(w, r, l)) / p_shq_markov(w, r, l)
        worst = max(worst, rel)
        assert rel <= 0.01, f"occupancy mismatch at (w={w}, r={r}, l={l}): {rel:.3%}"
    assert report(4, True, f"two-state occupancy within 1% on 5 points "
                           f"(worst {worst:.3%}, {time.time() - t0:.1f}s)")


# -- 5: supported-threshold calibration ------------------------------------------------

def test_criterion_5_threshold_calibration_and_monotonicity():
    t0 = time.time()
    anchors = {(3, 954), (8, 494)}
    details = []
    ok = True
    for r, target in anchors:
        got = min_supported_trh(PrismConfig(w=72, r=r, l=25, ssq_capacity=13)).t_supported
        gap = (got - target) / target
        details.append(f"(72,{r},25)->{got} vs {target} ({gap:+.1%})")
        ok &= abs(gap) <= 0.20
    # Full grid monotonicity: strictly decreasing in r, non-increasing in l.
    grid = {}
    for r in range(3, 10):
        for l in range(5, 46):
            grid[(r, l)] = min_supported_trh(
                PrismConfig(w=72, r=r, l=l, ssq_capacity=13)).t_supported
    mono_r = all(grid[(r + 1, l)] < grid[(r, l)]
                 for r in range(3, 9) for l in range(5, 46))
    mono_l = all(grid[(r, l + 1)] <= grid[(r, l)]
                 for r in range(3, 10) for l in range(5, 45))
    ok &= mono_r and mono_l
    # MTTF sensitivity: 10K -> 1M years raises the threshold by under 15%.
    cfg36 = PrismConfig(w=72, r=4, l=12, ssq_capacity=13)
    t10k = min_supported_trh(cfg36, mttf=MttfTarget(per_bank_years=1e4)).t_supported
    t1m = min_supported_trh(cfg36, mttf=MttfTarget(per_bank_years=1e6)).t_supported
    rise = (t1m - t10k) / t10k
    ok &= 0.0 < rise < 0.15
    details.append(f"grid monotone r={mono_r} l={mono_l}")
    details.append(f"mttf 10K->1M: {t10k}->{t1m} ({rise:+.1%})")
    assert report(5, ok, "; ".join(details) + f" ({time.time() - t0:.1f}s)")


# -- 6: denial-of-service end to end ---------------------------------------------------

#: Strongest circular cycle length found by exhaustive offline scans
#: (X in {1..12} and around w..4.5w, three seeds, full-budget horizons).
DOS_WORST_X = {1000: 8, 500: 6, 250: 128}


def _dos_ratio(threshold, horizon=300_000):
    cfg = with_overrides(preset_config(threshold), trr_interval_acts=0)
    bound = dos_bound(cfg.w, cfg.r, c_rfm=7).slowdown
    channel = ChannelState([BankState(cfg, SeededRng(1))], trr_interval_acts=0)
    x = DOS_WORST_X[threshold]
    for i in range(horizon):
        channel.step(0, i % x)
    return channel.slowdown(), bound


def test_criterion_6_dos_end_to_end():
    t0 = time.time()
    lines = []
    ok = True
    for threshold in (1000, 500, 250):
        slowdown, bound = _dos_ratio(threshold)
        ratio = slowdown / bound
        inside = 0.90 * bound <= slowdown <= 1.02 * bound
        ok &= inside
        lines.append(f"preset {threshold}: {slowdown:.4f}x vs bound {bound:.4f}x "
                     f"({ratio:.1%}{'' if inside else ' — MISS'})")
    detail = "; ".join(lines) + f" ({time.time() - t0:.1f}s)"
    report(6, ok, detail)
    assert ok, (
        "criterion 6 misses the >=90% leg at the 500 preset: the measured "
        "ceiling over the whole circular-x spectrum is ~0.889 of the bound. "
        "The bound assumes every window sustains r serviced mitigations, but "
        "the no-phantom rule (a pending row's re-selection increments its "
        "counter instead of queueing another service) caps entry creation "
        "below that at (w=72, r=7, q=16). Analysis: /root/notes/decisions.md. "
        + detail)


# -- 7: chained-Alert measurement -------------------------------------------------------

def test_criterion_7_chained_alert_budget():
    t0 = time.time()
    res = run_chained_alert(16)
    ok = abs(res.measured - res.documented) <= 4
    assert report(
        7, ok,
        f"chained-Alert extra budget at q=16: measured {res.measured}, "
        f"documented {res.documented} (tolerance ±4; schedule under-specified; "
        f"{time.time() - t0:.2f}s)")


# -- 8: out-of-scope performance results --------------------------------------------------

def test_criterion_8_out_of_scope_statement():
    # Full-system performance results (cycle-accurate workload slowdowns,
    # weighted speedups, interface-speed sensitivity) need a CPU/cache
    # simulator and are explicitly out of scope; throughput claims are covered
    # only by the slot-cost model exercised in criteria 1 and 6.
    assert report(8, True, "workload performance figures out of scope by design; "
                           "slot-cost model covers throughput (criteria 1 & 6)")
