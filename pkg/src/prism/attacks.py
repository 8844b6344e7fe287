"""Adversarial and benign activation-sequence generators, plus trace input.

All generators are pure functions of (parameters, index, seed): replaying a
pattern always yields the same stream, independent of consumer behaviour.

Two scripted worst-case scenarios live here as well. Both drive the real
engine and channel end to end, using the engine's test-only sampled-slot
injection hook to reach the extremal sampling outcomes deterministically:

* run_boundary_burst: 2r consecutive intersecting samples clustered on a
  window boundary, the Sampled Slot Queue's sizing worst case.
* run_chained_alert: a full pending queue with counters parked at the
  tardiness threshold, then one targeted row ridden through chained Alert
  cycles to measure the extra activations it absorbs before service.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

from .analytic import abo_act_q
from .channel import ChannelState
from .config import ROW_SPACE, PrismConfig, ssq_min_size
from .engine import BankState
from .errors import ConfigError, TraceFormatError
from .rng import SeededRng, _mix

__all__ = [
    "circular_x_row",
    "CircularX",
    "UniformBenign",
    "EactParams",
    "TraceEvent",
    "ingest_trace",
    "ingest_trace_file",
    "row_permutation",
    "run_boundary_burst",
    "BoundaryBurstResult",
    "run_chained_alert",
    "ChainedAlertResult",
]

_U64 = (1 << 64) - 1


def circular_x_row(t: int, s: int, w: int, x: int) -> int:
    """Row activated at slot s of window t by the circular-x pattern:
    (t*w + s) mod x. One row per slot, round robin over x rows."""
    if x < 1:
        raise ConfigError(f"circular pattern needs x >= 1, got {x}")
    return (t * w + s) % x


@dataclass(frozen=True)
class CircularX:
    """Round-robin hammering of x rows, one per activation slot."""

    x: int
    horizon: int
    banks: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not (1 <= self.x <= ROW_SPACE):
            raise ConfigError(f"circular pattern needs 1 <= x <= {ROW_SPACE}, got {self.x}")

    def row(self, i: int) -> int:
        return i % self.x

    def activations(self) -> Iterator[tuple[int, int]]:
        nb = len(self.banks)
        for g in range(self.horizon):
            yield self.banks[g % nb], (g // nb) % self.x


@dataclass(frozen=True)
class UniformBenign:
    """Independent uniform row per activation; stateless hash of (seed, i)."""

    row_count: int
    horizon: int
    seed: int = 0
    banks: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not (1 <= self.row_count <= ROW_SPACE):
            raise ConfigError(f"row_count must be in [1, {ROW_SPACE}]")

    def row(self, i: int) -> int:
        return _mix((self.seed * 0x2545F4914F6CDD1D + i + 1) & _U64) % self.row_count

    def activations(self) -> Iterator[tuple[int, int]]:
        nb = len(self.banks)
        for g in range(self.horizon):
            yield self.banks[g % nb], self.row(g // nb)


# -- trace ingestion -----------------------------------------------------------


class TraceEvent(NamedTuple):
    kind: str   # "act" or "idle"
    bank: int
    row: int    # row id for act, idle slot count for idle


@dataclass(frozen=True)
class EactParams:
    """Row-open dwell-time conversion: each record contributes
    (t_on + t_pre) / t_rc equivalent activations, fractions accumulating
    across records. A record's own t_on column overrides t_on_ns."""

    t_on_ns: float = 48.0
    t_pre_ns: float = 0.0
    t_rc_ns: float = 48.0

    def __post_init__(self):
        if self.t_rc_ns <= 0 or self.t_on_ns < 0 or self.t_pre_ns < 0:
            raise ConfigError("EACT timing: t_rc must be positive, dwell times non-negative")


def row_permutation(key: int):
    """Keyed bijection of the 17-bit row space: a 4-round Feistel network on
    a 9-bit/8-bit split, round function a SplitMix-style mix of (key, round,
    other half). Same key, same mapping; distinct keys give unrelated
    permutations."""
    key &= _U64
    round_keys = [_mix((key ^ ((i + 1) * 0x9E3779B97F4A7C15)) & _U64) for i in range(4)]

    def permute(row: int) -> int:
        if not (0 <= row < ROW_SPACE):
            raise ConfigError(f"row {row} outside the 17-bit row space")
        a = row >> 8          # 9 bits
        b = row & 0xFF        # 8 bits
        for i, rk in enumerate(round_keys):
            if i % 2 == 0:
                a ^= _mix((rk + b) & _U64) & 0x1FF
            else:
                b ^= _mix((rk + a) & _U64) & 0xFF
        return (a << 8) | b

    return permute


def ingest_trace(lines: Iterable[str], eact: Optional[EactParams] = None,
                 randomize_key: Optional[int] = None) -> Iterator[TraceEvent]:
    """Parse an activation trace into a stream of engine events.

    Format, one record per line (`#` comments and blank lines ignored):

        ACT <bank> <row> [t_on_ns]
        IDLE <bank> [count]

    With eact set, each ACT contributes (t_on + t_pre)/t_rc equivalent
    activations; the fractional part carries over, and every unit crossing
    emits one activation of that record's row. With randomize_key set, rows
    pass through the keyed 17-bit permutation before being emitted.
    """
    permute = row_permutation(randomize_key) if randomize_key is not None else None
    acc = 0.0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op = parts[0].upper()
        if op == "ACT":
            if len(parts) not in (3, 4):
                raise TraceFormatError(line_no, f"expected 'ACT <bank> <row> [t_on_ns]', got {raw!r}")
            try:
                bank = int(parts[1])
                row = int(parts[2])
                t_on = float(parts[3]) if len(parts) == 4 else None
            except ValueError:
                raise TraceFormatError(line_no, f"non-numeric field in {raw!r}") from None
            if bank < 0:
                raise TraceFormatError(line_no, f"negative bank index {bank}")
            if not (0 <= row < ROW_SPACE):
                raise TraceFormatError(line_no, f"row {row} outside [0, {ROW_SPACE})")
            if permute is not None:
                row = permute(row)
            if eact is None:
                yield TraceEvent("act", bank, row)
            else:
                dwell = eact.t_on_ns if t_on is None else t_on
                acc += (dwell + eact.t_pre_ns) / eact.t_rc_ns
                units = int(acc)
                acc -= units
                for _ in range(units):
                    yield TraceEvent("act", bank, row)
        elif op == "IDLE":
            if len(parts) not in (2, 3):
                raise TraceFormatError(line_no, f"expected 'IDLE <bank> [count]', got {raw!r}")
            try:
                bank = int(parts[1])
                count = int(parts[2]) if len(parts) == 3 else 1
            except ValueError:
                raise TraceFormatError(line_no, f"non-numeric field in {raw!r}") from None
            if count < 1:
                raise TraceFormatError(line_no, f"idle count must be >= 1, got {count}")
            yield TraceEvent("idle", bank, count)
        else:
            raise TraceFormatError(line_no, f"unknown record {parts[0]!r}")


def ingest_trace_file(path: str, eact: Optional[EactParams] = None,
                      randomize_key: Optional[int] = None) -> Iterator[TraceEvent]:
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read trace file {path}: {exc}") from None
    with fh:
        yield from ingest_trace(fh, eact=eact, randomize_key=randomize_key)


# -- scripted worst-case scenarios ----------------------------------------------


class _SlotSchedule:
    """Sampled-slot injection for scripted scenarios.

    The engine draws a window's slots when the previous window ends, so
    per-window overrides must be registered ahead of that boundary. Every
    window without an override samples the last r slots of the window
    (the "tail"), which lets scenarios place controlled activity at the tail
    and keep filler activations clear of it without any pre-planning.
    """

    def __init__(self, w: int, r: int):
        self.tail = set(range(w - r, w))
        self.table: dict[int, set[int]] = {}

    def __call__(self, window_index: int) -> Optional[set[int]]:
        return self.table.get(window_index, self.tail)


def _junk_rows() -> Iterator[int]:
    """Fresh never-repeating row ids, outside any scenario's working set."""
    return itertools.count(ROW_SPACE // 2)


class _Scenario:
    """Shared plumbing for the scripted scenarios: a one-bank channel with
    TRR and proactive RFMs disabled, so Alert Back-Off is the only drain."""

    def __init__(self, config: PrismConfig, seed: int):
        self.config = config
        self.schedule = _SlotSchedule(config.w, config.r)
        self.bank = BankState(config, SeededRng(seed), sample_injector=self.schedule)
        self.serviced: list[int] = []
        self.channel = ChannelState(
            [self.bank], trr_interval_acts=0,
            abo_act_slack=config.abo_act_slack, abo_delay=config.abo_delay,
            n_mit=config.n_mit, proactive_rfm=False,
            on_mitigate=lambda _b, row: self.serviced.append(row))
        self.junk = _junk_rows()

    def act(self, row: int) -> None:
        self.channel.step(0, row)

    def seeding_window(self, rows: list[int]) -> None:
        """Run one window whose r tail samples are exactly `rows`, junk
        activations elsewhere. One of the rows becomes a pending default
        candidate, the rest enter the history."""
        bank = self.bank
        assert bank.slot_in_window == 0 and len(rows) == self.config.r
        head = self.config.w - self.config.r
        for s in range(self.config.w):
            self.act(rows[s - head] if s >= head else next(self.junk))

    def quiet_slots(self, acts: list[int], until_boundary: bool = True) -> None:
        """Deliver `acts` at non-sampled slots, idling every sampled slot so
        no new candidates appear, then coast to the next window boundary."""
        bank = self.bank
        pending = list(acts)
        while pending or (until_boundary and bank.slot_in_window != 0):
            if bank.slot_in_window in bank.sampled_slots:
                bank.on_idle_slot()
            else:
                self.act(pending.pop() if pending else next(self.junk))


class BoundaryBurstResult(NamedTuple):
    r: int
    peak_waiting: int
    bound: int
    ssq_capacity: int


def run_boundary_burst(r: int, pmq_capacity: int = 16, w: int = 0,
                       seed: int = 0) -> BoundaryBurstResult:
    """Drive the SSQ worst case and measure the peak waiting population.

    Warm-up fills the pending queue to capacity-1 and stocks the history,
    entirely through real activations (one default candidate per window).
    The burst forces the last r sampled slots of one window and the first r
    of the next onto 2r distinct history-resident rows: the first
    intersection fills the PMQ and raises the Alert, the rest must wait in
    the SSQ while Alert Back-Off drains one entry per four activations.
    """
    if r < 2:
        raise ConfigError(f"boundary burst needs r >= 2, got {r}")
    w = w or 4 * r
    prep_windows = pmq_capacity - 1
    if prep_windows * (r - 1) < 2 * r:
        raise ConfigError(
            f"pmq_capacity={pmq_capacity} stages too little history for the "
            f"burst at r={r}; needs (capacity-1)*(r-1) >= 2r")
    config = PrismConfig(w=w, r=r, l=prep_windows + 3,
                         pmq_capacity=pmq_capacity,
                         ssq_capacity=max(ssq_min_size(r), r),
                         trr_interval_acts=0)
    sc = _Scenario(config, seed)
    bank = sc.bank

    # Warm-up: distinct candidate rows each window; whichever the pick leaves
    # unselected lands in the history. The burst set is chosen afterwards from
    # rows that actually are history-resident and not pending.
    pool: list[int] = []
    for win in range(prep_windows):
        rows = list(range(win * r, win * r + r))
        pool.extend(rows)
        sc.seeding_window(rows)
    in_pmq = {e.row for e in bank.pmq}
    resident = [x for x in pool if x not in in_pmq and bank.shq_contains(x)]
    if len(resident) < 2 * r or len(bank.pmq) != pmq_capacity - 1:
        raise ConfigError("boundary-burst staging failed")
    burst_rows = resident[-2 * r:]   # youngest entries: safely inside lookback

    bank.ssq_waiting_peak = 0
    # Window b1 keeps the default tail samples; b1+1 is overridden to sample
    # its head, making the 2r sampled slots consecutive across the boundary.
    sc.schedule.table[bank.window_index + 1] = set(range(r))
    for s in range(w):       # burst window 1: junk, then r intersecting samples
        sc.act(burst_rows[s - (w - r)] if s >= w - r else next(sc.junk))
    for s in range(w):       # burst window 2: r intersecting samples, then junk
        sc.act(burst_rows[r + s] if s < r else next(sc.junk))

    burst = 2 * r - 1
    return BoundaryBurstResult(r=r, peak_waiting=bank.ssq_waiting_peak,
                               bound=burst - burst // 4,
                               ssq_capacity=config.ssq_capacity)


class ChainedAlertResult(NamedTuple):
    q: int
    measured: int
    documented: int


def run_chained_alert(q: int, t_pmq: int = 4, r: int = 5, seed: int = 0) -> ChainedAlertResult:
    """Measure the extra activations a targeted row absorbs through chained
    Alerts with a q-entry pending queue, end to end.

    Preparation uses only real activations: q-1 seeding windows park one
    default candidate each in the PMQ, then those pending rows are activated
    until their counters sit exactly at the tardiness threshold (no Alert
    yet). The target, history-resident from the warm-up, is then sampled:
    the intersection fills the queue and starts the Alert chain, and the
    attacker keeps activating the target until it is serviced. The count of
    those post-selection activations is the measured allowance.
    """
    if q < 1:
        raise ConfigError(f"PMQ capacity must be >= 1, got {q}")
    if r < 2:
        raise ConfigError(f"chained-alert scenario needs r >= 2, got {r}")
    prep_windows = max(q - 1, 1)
    config = PrismConfig(w=4 * r, r=r, l=prep_windows + 6,
                         pmq_capacity=q, t_pmq=t_pmq,
                         ssq_capacity=max(ssq_min_size(r), r),
                         trr_interval_acts=0)
    sc = _Scenario(config, seed)
    bank = sc.bank

    last_rows: list[int] = []
    for win in range(prep_windows):
        last_rows = list(range(win * r, win * r + r))
        sc.seeding_window(last_rows)
    in_pmq = {e.row for e in bank.pmq}
    target = next(x for x in last_rows
                  if x not in in_pmq and bank.shq_contains(x))

    if q == 1:
        # The single seeding default filled the queue; let its Alert drain it
        # before staging the measurement.
        while bank.pmq or not sc.channel.abo_idle:
            sc.quiet_slots([next(sc.junk)], until_boundary=False)
        sc.quiet_slots([])

    # Park every pending counter exactly at the tardiness threshold.
    pump = [row for e in bank.pmq for row in [e.row] * (t_pmq - e.count)]
    sc.quiet_slots(pump)

    # Sampled activation of the target at the window's first tail slot:
    # intersection, queue full, Alert chain.
    while bank.slot_in_window < config.w - config.r:
        sc.act(next(sc.junk))
    sc.act(target)
    if target not in {e.row for e in bank.pmq}:
        raise ConfigError("chained-alert staging failed; target not pending")
    extra = 0
    while target not in sc.serviced:
        sc.act(target)
        extra += 1
        if extra > 10_000:
            raise ConfigError("chained-alert run did not terminate")
    return ChainedAlertResult(q=q, measured=extra,
                              documented=abo_act_q(q, config.abo_act_slack))
