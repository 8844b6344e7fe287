"""Closed-form security and cost model.

Symbols (see config module): w window slots, r sampled slots per window,
l lookback windows, x distinct rows in a circular attack cycle. All
probabilities are per mitigation window for a row that appears once per
cycle position, i.e. once every x activations.

The steady-state history-residency probability solves

    P = K (r - 1 + P^r) / (w + K r),    K = l * w / x,

where K is the expected number of the row's prior appearances that still
fall inside the lookback history. The per-window mitigation-selection
probability combines the default candidate and intersection eligibility:

    P_m = (1 - P^r) / w  +  (r / w) P.

The threshold search converts P_m into the smallest double-sided threshold
that keeps the configured mean-time-to-failure, sweeping x over the whole
attack spectrum [w, (l+1)w] and taking the most demanding point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import (
    DEFAULT_TIMING,
    PMQ_ENTRY_BITS,
    SHQ_ENTRY_BITS,
    SSQ_ENTRY_BITS,
    MttfTarget,
    PrismConfig,
    TimingConstants,
    ssq_min_size,
)
from .errors import ConfigError, NumericalError

__all__ = [
    "p_sample",
    "intersection_reach",
    "p_shq_fixed_point",
    "p_shq_markov",
    "p_mitigate",
    "abo_act_q",
    "dos_bound",
    "storage_bytes",
    "min_supported_trh",
    "MttfModelOptions",
    "SecurityBound",
    "PerXBound",
    "DosBound",
    "StorageReport",
    "ssq_min_size",
]

_FP_TOL = 1e-12
_FP_MAX_ITER = 10_000
_FP_DAMPING = 0.5


def p_sample(c: int, w: int, r: int) -> float:
    """Probability a row appearing c times in a w-slot window is sampled at
    least once by r uniformly drawn slots: 1 - C(w-c, r) / C(w, r).

    Exact integer arithmetic for w <= 64, log-gamma otherwise.
    """
    if not (0 <= c <= w):
        raise ConfigError(f"appearances c={c} outside [0, {w}]")
    if not (1 <= r <= w):
        raise ConfigError(f"sampled slots r={r} outside [1, {w}]")
    if c == 0:
        return 0.0
    if c > w - r:
        return 1.0
    if w <= 64:
        return 1.0 - math.comb(w - c, r) / math.comb(w, r)
    log_ratio = (
        math.lgamma(w - c + 1) - math.lgamma(w - c - r + 1)
        - math.lgamma(w + 1) + math.lgamma(w - r + 1)
    )
    return -math.expm1(log_ratio)


def intersection_reach(w: int, r: int, l: int) -> float:
    """Probability a row present in every window appears at least once in the
    l-window lookback history: 1 - (1 - r/w)^l."""
    if not (1 <= r <= w):
        raise ConfigError(f"sampled slots r={r} outside [1, {w}]")
    if l < 0:
        raise ConfigError(f"lookback l={l} must be >= 0")
    if l == 0:
        return 0.0
    if r == w:
        return 1.0
    return -math.expm1(l * math.log1p(-r / w))


def _fixed_point_vec(w: int, r: int, l: int, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Damped iteration of the residency fixed point over a vector of x values.

    Returns (K, P). The map is a contraction on [0, 1) (its derivative is
    K r P^(r-1) / (w + K r) < 1), so plain iteration converges; damping of 0.5
    is kept for uniform behaviour near the high-residency end.
    """
    k = l * w / xs
    p = np.zeros_like(xs, dtype=float)
    denom = w + k * r
    for _ in range(_FP_MAX_ITER):
        f = k * (r - 1 + p**r) / denom
        new = p + _FP_DAMPING * (f - p)
        if float(np.max(np.abs(new - p))) < _FP_TOL:
            return k, new
        p = new
    residual = float(np.max(np.abs(k * (r - 1 + p**r) / denom - p)))
    raise NumericalError(
        f"residency fixed point did not converge in {_FP_MAX_ITER} iterations "
        f"(residual {residual:.3e})")


def p_shq_fixed_point(w: int, r: int, l: int, x: int) -> float:
    """Steady-state probability that a circular-x aggressor is resident in the
    history queue when it is sampled."""
    if l < 0:
        raise ConfigError(f"lookback l={l} must be >= 0")
    if l == 0:
        return 0.0
    if x < w:
        raise ConfigError(f"fixed point is defined for x >= w, got x={x} < w={w}")
    if not (1 <= r <= w):
        raise ConfigError(f"sampled slots r={r} outside [1, {w}]")
    _, p = _fixed_point_vec(w, r, l, np.asarray([float(x)]))
    return float(p[0])


def p_shq_markov(w: int, r: int, l: int) -> float:
    """Two-state occupancy approximation for a row appearing every window.

    Insertion happens when the row is sampled but not chosen as the default
    candidate, P_in = (r-1)/w; an entry leaves after l windows, so the exit
    rate is 1/l. Balancing the two rates gives P = l P_in / (1 + l P_in).
    """
    if not (1 <= r <= w):
        raise ConfigError(f"sampled slots r={r} outside [1, {w}]")
    if l < 0:
        raise ConfigError(f"lookback l={l} must be >= 0")
    p_in = (r - 1) / w
    return l * p_in / (1 + l * p_in)


def p_mitigate(w: int, r: int, l: int, x: int) -> float:
    """Per-window probability that a circular-x aggressor is selected for
    mitigation, either as the default candidate or through an intersection."""
    p = p_shq_fixed_point(w, r, l, x)
    return (1.0 - p**r) / w + (r / w) * p


# Measured worst-case extra activations a targeted row absorbs through
# chained Alerts, by pending-queue capacity. No closed form is known; values
# outside the table fall back to the nearest documented capacity.
_ABO_ACT_Q_TABLE: dict[int, int] = {4: 7, 8: 10, 16: 12, 32: 14}


def abo_act_q(q: int, abo_act_slack: int = 3) -> int:
    """Extra-activation allowance of a q-entry pending queue under chained
    Alerts. q=1 cannot chain at all, so only the single-Alert slack applies."""
    if q < 1:
        raise ConfigError(f"PMQ capacity must be >= 1, got {q}")
    if q == 1:
        return abo_act_slack
    if q in _ABO_ACT_Q_TABLE:
        return _ABO_ACT_Q_TABLE[q]
    nearest = min(_ABO_ACT_Q_TABLE, key=lambda k: (abs(k - q), k))
    warnings.warn(
        f"no documented chained-Alert allowance for PMQ capacity {q}; "
        f"using the nearest documented capacity {nearest}",
        stacklevel=2)
    return _ABO_ACT_Q_TABLE[nearest]


@dataclass(frozen=True)
class DosBound:
    c_rfm: float
    loss: float
    slowdown: float


def dos_bound(w: int, r: int, timing: TimingConstants = DEFAULT_TIMING,
              c_rfm: float | None = None) -> DosBound:
    """Worst-case throughput loss when an adversary sustains r RFMs per
    w activations: loss = c*r / (w + c*r), slowdown = 1/(1-loss).

    Pass c_rfm=7 to reproduce the rounded-cost table; by default the exact
    stall cost t_rfmab/t_rc is used.
    """
    if w < 1 or r < 0:
        raise ConfigError(f"dos_bound needs w >= 1 and r >= 0, got w={w}, r={r}")
    c = timing.c_rfm if c_rfm is None else float(c_rfm)
    loss = c * r / (w + c * r)
    return DosBound(c_rfm=c, loss=loss, slowdown=1.0 / (1.0 - loss))


@dataclass(frozen=True)
class StorageReport:
    shq_entries: int
    total_bits: int
    total_bytes: int


def storage_bytes(config: PrismConfig) -> StorageReport:
    """Per-bank SRAM cost: 18-bit entries for history and slot queues,
    21-bit entries (extra 3-bit counter) for the pending queue."""
    shq = config.shq_entries
    bits = (SHQ_ENTRY_BITS * shq + SSQ_ENTRY_BITS * config.ssq_capacity
            + PMQ_ENTRY_BITS * config.pmq_capacity)
    return StorageReport(shq_entries=shq, total_bits=bits,
                         total_bytes=round(bits / 8))


@dataclass(frozen=True)
class MttfModelOptions:
    """Named switches for the under-specified parts of the MTTF conversion.

    multiplicity: how many simultaneous escape opportunities one refresh
    window offers in the failure-probability accounting.
      "single_target"     one chosen victim (default; calibrated against the
                          published operating points),
      "per_row"           every row of the cycle counts,
      "per_row_per_bank"  every row on every attacked bank counts.

    escape_trials_per_activation: mitigation-escape trials per counted
    threshold activation. The default of 2 models a double-sided victim with
    blast radius 2: four flanking rows can each rescue the victim, and they
    take two trials per pair activation. Set 1 to count a single tracked
    aggressor dodging selection on its own appearances only.

    alert_chain_allowance: add the tardiness threshold and the chained-Alert
    allowance to the escape threshold (service-delay exposure). Disable to
    model prompt TRR service where selected rows never linger in the queue.
    """

    multiplicity: str = "single_target"
    escape_trials_per_activation: int = 2
    alert_chain_allowance: bool = True

    def __post_init__(self):
        if self.multiplicity not in ("single_target", "per_row", "per_row_per_bank"):
            raise ConfigError(f"unknown multiplicity mode {self.multiplicity!r}")
        if self.escape_trials_per_activation < 1:
            raise ConfigError("escape_trials_per_activation must be >= 1")


DEFAULT_MODEL_OPTIONS = MttfModelOptions()


@dataclass(frozen=True)
class PerXBound:
    x: int
    k: float
    p_shq: float
    p_m: float
    t_required: int
    insecure: bool = False


@dataclass(frozen=True)
class SecurityBound:
    per_x: tuple[PerXBound, ...]
    worst_x: int
    t_hat: int
    t_supported: int
    t_pmq: int
    abo_act_allowance: int
    mttf: MttfTarget
    options: MttfModelOptions = field(default=DEFAULT_MODEL_OPTIONS)


def _x_grid(lo: int, hi: int, dense_limit: int = 4096, sparse_points: int = 512) -> np.ndarray:
    """Integer x grid over [lo, hi]: exhaustive when the span is small,
    otherwise log-spaced with both endpoints pinned."""
    if hi - lo <= dense_limit:
        return np.arange(lo, hi + 1, dtype=float)
    pts = np.unique(np.round(np.geomspace(lo, hi, sparse_points)).astype(int))
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.unique(np.concatenate([[lo], pts, [hi]])).astype(float)


def min_supported_trh(config: PrismConfig,
                      timing: TimingConstants = DEFAULT_TIMING,
                      mttf: MttfTarget | None = None,
                      options: MttfModelOptions = DEFAULT_MODEL_OPTIONS) -> SecurityBound:
    """Smallest supported double-sided threshold under the circular-x sweep.

    For each x in [w, (l+1)w]:
      * P_m from the residency fixed point,
      * t_escape(x): smallest T with
            multiplicity * (1 - P_m)^(trials * T) <= failure budget per tREFW,
      * t_feasible(x) = floor(activation_budget / x): more activations than
        that cannot be delivered to any single row inside one refresh window,
      * t_required(x) = min(t_escape, t_feasible + 1).

    The bound is the maximum t_required over the sweep, plus the tardiness
    threshold and the chained-Alert allowance (service-delay exposure).
    """
    mttf = mttf or MttfTarget()
    w, r, l = config.w, config.r, config.l
    xs = _x_grid(w, (l + 1) * w)
    k, p = _fixed_point_vec(w, r, l, xs)
    p_m = (1.0 - p**r) / w + (r / w) * p

    budget_prob = mttf.failure_budget_per_refw(timing)
    if options.multiplicity == "single_target":
        mult = np.ones_like(xs)
    elif options.multiplicity == "per_row":
        mult = xs
    else:
        mult = xs * mttf.parallel_banks

    trials = options.escape_trials_per_activation
    t_feasible = np.floor(timing.activation_budget / xs)

    insecure = p_m <= 0.0
    log_q = np.log1p(-np.where(insecure, 0.5, p_m))
    t_escape = np.ceil(np.log(budget_prob / mult) / (trials * log_q))
    t_escape = np.maximum(t_escape, 1.0)
    t_escape[insecure] = np.inf

    t_required = np.minimum(t_escape, t_feasible + 1)
    unbounded = insecure & (t_feasible >= timing.activation_budget)

    per_x = tuple(
        PerXBound(x=int(xs[i]), k=float(k[i]), p_shq=float(p[i]),
                  p_m=float(p_m[i]), t_required=int(t_required[i]),
                  insecure=bool(unbounded[i]))
        for i in range(len(xs))
    )
    if bool(np.any(unbounded)):
        bad = int(xs[np.argmax(unbounded)])
        raise NumericalError(
            f"insecure at any threshold: mitigation probability is zero at "
            f"x={bad} while the activation budget is attainable")

    worst_i = int(np.argmax(t_required))
    t_hat = int(t_required[worst_i])
    allowance = abo_act_q(config.pmq_capacity, config.abo_act_slack)
    if options.alert_chain_allowance:
        t_supported = t_hat + config.t_pmq + allowance
    else:
        t_supported = t_hat
    return SecurityBound(per_x=per_x, worst_x=int(xs[worst_i]), t_hat=t_hat,
                         t_supported=t_supported, t_pmq=config.t_pmq,
                         abo_act_allowance=allowance, mttf=mttf, options=options)
