"""Per-bank mitigation state machines.

BankState implements the intersection-sampling defense: each w-slot window
samples r activation slots into the Sampled Slot Queue (SSQ), checks sampled
rows against the Sampled History Queue (SHQ) of the previous l windows, and
routes matches plus one default candidate per window into the Pending
Mitigation Queue (PMQ) for service at TRR/RFM opportunities. When the PMQ
fills or an entry's activation counter exceeds the tardiness threshold, the
bank requests an Alert.

MintBankState is the fixed-rate baseline: one uniformly pre-drawn slot per
window, the row activated there is queued for the next service opportunity.
No history, no intersections, no Alerts.

Both engines advance in activation slots and are driven one activation at a
time; the channel protocol decides when service opportunities occur.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, NamedTuple, Optional

from .config import PMQ_COUNTER_MAX, ROW_SPACE, PrismConfig
from .errors import ConfigError, SsqOverflowError
from .rng import SeededRng, sample_window_slots


class ActivationOutcome(NamedTuple):
    sampled: bool
    intersected: bool
    alert: bool


class MitigatedRow(NamedTuple):
    row: int
    victims: tuple[int, ...]


class WindowSummary(NamedTuple):
    default_candidate: Optional[int]
    shq_insertions: list  # row ids, None for invalid placeholders


class _SsqEntry:
    """One sampled row buffered in the SSQ.

    waiting means the entry has been selected for mitigation (intersection,
    or default candidate chosen with the PMQ full) and is parked here until a
    PMQ slot frees. Non-waiting entries only live until their window ends.
    """

    __slots__ = ("row", "intersecting", "waiting", "window")

    def __init__(self, row: int, intersecting: bool, waiting: bool, window: int):
        self.row = row
        self.intersecting = intersecting
        self.waiting = waiting
        self.window = window


class _PmqEntry:
    __slots__ = ("row", "count", "seq")

    def __init__(self, row: int, seq: int):
        self.row = row
        self.count = 0
        self.seq = seq


def _victims(row: int, blast_radius: int) -> tuple[int, ...]:
    return tuple(row + d
                 for d in range(-blast_radius, blast_radius + 1)
                 if d != 0 and 0 <= row + d < ROW_SPACE)


class BankState:
    """Live defense state of one bank.

    sample_injector is a test-only hook: called with the upcoming window
    index, it may return a fixed set of sampled slots instead of drawing
    them, which lets worst-case tests reach extremal sampling outcomes
    deterministically. Production paths leave it None.
    """

    def __init__(self, config: PrismConfig, rng: SeededRng,
                 sample_injector: Optional[Callable[[int], Optional[set[int]]]] = None,
                 log: Optional[Callable[[str], None]] = None):
        self.config = config
        self.rng = rng
        self._injector = sample_injector
        self._log = log

        self.slot_in_window = 0
        self.window_index = 0
        self.sampled_slots = self._draw_slots(0)

        self.ssq: list[_SsqEntry] = []
        self._waiting: deque[_SsqEntry] = deque()
        self.shq: deque[Optional[int]] = deque()
        self._shq_counts: dict[int, int] = {}
        self.pmq: list[_PmqEntry] = []
        self._pmq_rows: dict[int, _PmqEntry] = {}
        self._pmq_seq = 0
        self._tardy = 0
        self.alert_requested = False

        # counters
        self.activations = 0
        self.windows = 0
        self.sampled_count = 0
        self.intersections = 0
        self.default_selections = 0
        self.selections = 0           # intersections + default selections
        self.alerts_raised = 0
        self.mitigations_serviced = 0
        self.ssq_waiting_peak = 0
        self.ssq_occupancy_peak = 0

    # -- internals ---------------------------------------------------------

    def _draw_slots(self, window_index: int) -> set[int]:
        if self._injector is not None:
            forced = self._injector(window_index)
            if forced is not None:
                bad = [s for s in forced if not (0 <= s < self.config.w)]
                if bad:
                    raise ConfigError(f"injected slots {bad} outside [0, {self.config.w})")
                return set(forced)
        return sample_window_slots(self.config.w, self.config.r, self.rng)

    def _append_ssq(self, entry: _SsqEntry) -> None:
        if len(self.ssq) >= self.config.ssq_capacity:
            raise SsqOverflowError(
                f"SSQ capacity {self.config.ssq_capacity} exceeded at window "
                f"{self.window_index} slot {self.slot_in_window}; the sizing "
                f"bound has been violated")
        self.ssq.append(entry)
        if entry.waiting:
            self._waiting.append(entry)
        occ = len(self.ssq)
        if occ > self.ssq_occupancy_peak:
            self.ssq_occupancy_peak = occ
        w = len(self._waiting)
        if w > self.ssq_waiting_peak:
            self.ssq_waiting_peak = w

    def _pmq_insert(self, row: int) -> None:
        entry = _PmqEntry(row, self._pmq_seq)
        self._pmq_seq += 1
        self.pmq.append(entry)
        self._pmq_rows[row] = entry

    def _promote_waiting(self) -> None:
        while self._waiting and len(self.pmq) < self.config.pmq_capacity:
            entry = self._waiting.popleft()
            self.ssq.remove(entry)
            if entry.row not in self._pmq_rows:
                self._pmq_insert(entry.row)
            # else: the row became pending through another path; nothing to add

    def _update_alert(self) -> None:
        requested = (len(self.pmq) >= self.config.pmq_capacity) or self._tardy > 0
        if requested and not self.alert_requested:
            self.alerts_raised += 1
            if self._log:
                self._log(f"ALERT win={self.window_index} slot={self.slot_in_window}")
        self.alert_requested = requested

    def _select(self, row: int, intersecting: bool) -> None:
        """Route a selected row toward the PMQ, or park it in the SSQ."""
        self.selections += 1
        if row in self._pmq_rows:
            return  # already pending; its counter tracks further activations
        if len(self.pmq) < self.config.pmq_capacity:
            self._pmq_insert(row)
        else:
            self._append_ssq(_SsqEntry(row, intersecting, True, self.window_index))

    # -- public operations ---------------------------------------------------

    @property
    def has_pending(self) -> bool:
        return bool(self.pmq)

    def shq_contains(self, row: int) -> bool:
        return self._shq_counts.get(row, 0) > 0

    def shq_occupancy(self) -> int:
        return len(self.shq)

    def on_activation(self, row: int) -> ActivationOutcome:
        """Advance one activation slot carrying an activation of `row`."""
        cfg = self.config
        sampled = False
        intersected = False

        entry = self._pmq_rows.get(row)
        if entry is not None and entry.count < PMQ_COUNTER_MAX:
            entry.count += 1
            if entry.count == cfg.t_pmq + 1:
                self._tardy += 1

        if self.slot_in_window in self.sampled_slots:
            sampled = True
            self.sampled_count += 1
            if self._shq_counts.get(row, 0) > 0:
                intersected = True
                self.intersections += 1
                self._select(row, intersecting=True)
            else:
                self._append_ssq(_SsqEntry(row, False, False, self.window_index))

        self._update_alert()
        alert = self.alert_requested
        if self._log:
            self._log(f"ACT win={self.window_index} slot={self.slot_in_window} "
                      f"row={row} sampled={int(sampled)} hit={int(intersected)} "
                      f"alert={int(alert)}")

        self.activations += 1
        self.slot_in_window += 1
        if self.slot_in_window == cfg.w:
            self.end_window()
        return ActivationOutcome(sampled, intersected, alert)

    def on_idle_slot(self) -> None:
        """Advance one activation slot with no activation (trace idle marker).

        A sampled slot that carries no activation records nothing; the window
        bookkeeping later fills the gap with an invalid placeholder.
        """
        self.slot_in_window += 1
        if self.slot_in_window == self.config.w:
            self.end_window()

    def end_window(self) -> WindowSummary:
        """Close the current window: pick the default candidate, update the
        history FIFO with exactly r-1 entries, and clear spent SSQ entries."""
        cfg = self.config
        if self.slot_in_window != cfg.w:
            raise ConfigError(
                f"end_window called at slot {self.slot_in_window} of {cfg.w}")

        fresh_non_int = [e for e in self.ssq
                         if e.window == self.window_index and not e.intersecting
                         and not e.waiting]
        default_row: Optional[int] = None
        chosen: Optional[_SsqEntry] = None
        if fresh_non_int:
            chosen = fresh_non_int[self.rng.randint(len(fresh_non_int))]
            default_row = chosen.row
            self.default_selections += 1
            self.selections += 1
            if default_row in self._pmq_rows:
                pass  # already pending; nothing more to queue
            elif len(self.pmq) < self.config.pmq_capacity:
                self._pmq_insert(default_row)
            else:
                # No space: the candidate keeps its SSQ slot and waits like an
                # intersecting entry would.
                chosen.waiting = True
                self._waiting.append(chosen)
                if len(self._waiting) > self.ssq_waiting_peak:
                    self.ssq_waiting_peak = len(self._waiting)
            self._update_alert()

        # Exactly r-1 history insertions: sampled-but-unselected rows first
        # (in slot order), invalid placeholders for the rest.
        insertions: list[Optional[int]] = [e.row for e in fresh_non_int
                                           if e is not chosen][: cfg.r - 1]
        insertions += [None] * (cfg.r - 1 - len(insertions))
        limit = cfg.shq_entries
        for item in insertions:
            self.shq.append(item)
            if item is not None:
                self._shq_counts[item] = self._shq_counts.get(item, 0) + 1
            while len(self.shq) > limit:
                old = self.shq.popleft()
                if old is not None:
                    n = self._shq_counts[old] - 1
                    if n:
                        self._shq_counts[old] = n
                    else:
                        del self._shq_counts[old]

        # Everything except selected entries still awaiting PMQ space is spent.
        self.ssq = [e for e in self.ssq if e.waiting]

        if self._log:
            self._log(f"WIN idx={self.window_index} "
                      f"default={default_row if default_row is not None else '-'} "
                      f"real={sum(1 for i in insertions if i is not None)}")

        self.windows += 1
        self.window_index += 1
        self.slot_in_window = 0
        self.sampled_slots = self._draw_slots(self.window_index)
        return WindowSummary(default_row, insertions)

    def service_mitigation(self) -> Optional[MitigatedRow]:
        """Service one mitigation opportunity: refresh the neighbours of the
        pending entry with the highest activation count (FIFO among ties),
        free its slot, and promote a waiting SSQ entry if any."""
        if not self.pmq:
            return None
        best = self.pmq[0]
        for e in self.pmq:
            if e.count > best.count or (e.count == best.count and e.seq < best.seq):
                best = e
        self.pmq.remove(best)
        del self._pmq_rows[best.row]
        if best.count > self.config.t_pmq:
            self._tardy -= 1
        self.mitigations_serviced += 1
        self._promote_waiting()
        self._update_alert()
        if self._log:
            self._log(f"MIT win={self.window_index} row={best.row} count={best.count}")
        return MitigatedRow(best.row, _victims(best.row, self.config.blast_radius))


# -- fixed-rate baseline -----------------------------------------------------

#: Mitigation-window length of the fixed-rate baseline per target threshold.
MINT_WINDOWS: dict[int, int] = {1000: 48, 500: 24, 250: 11}


class MintBankState:
    """Fixed-rate sampling baseline with a delayed-mitigation queue.

    One slot per w_mint-slot window is pre-drawn uniformly; the row activated
    in that slot is enqueued at window end and drained FIFO at TRR/RFM
    opportunities. alert_requested is always False: the baseline has no
    Alert path.
    """

    def __init__(self, w_mint: int, rng: SeededRng, blast_radius: int = 2):
        if w_mint < 1:
            raise ConfigError(f"mint window must be >= 1, got {w_mint}")
        self.w = w_mint
        self.rng = rng
        self.blast_radius = blast_radius
        self.slot_in_window = 0
        self.window_index = 0
        self.chosen_slot = rng.randint(w_mint)
        self._pending_row: Optional[int] = None
        self.queue: deque[int] = deque()
        self.alert_requested = False

        self.activations = 0
        self.windows = 0
        self.selections = 0
        self.mitigations_serviced = 0

    @property
    def has_pending(self) -> bool:
        return bool(self.queue)

    def on_activation(self, row: int) -> ActivationOutcome:
        sampled = self.slot_in_window == self.chosen_slot
        if sampled:
            self._pending_row = row
        self.activations += 1
        self.slot_in_window += 1
        if self.slot_in_window == self.w:
            self.end_window()
        return ActivationOutcome(sampled, False, False)

    def on_idle_slot(self) -> None:
        self.slot_in_window += 1
        if self.slot_in_window == self.w:
            self.end_window()

    def end_window(self) -> WindowSummary:
        row = self._pending_row
        if row is not None:
            self.queue.append(row)
            self.selections += 1
        self._pending_row = None
        self.windows += 1
        self.window_index += 1
        self.slot_in_window = 0
        self.chosen_slot = self.rng.randint(self.w)
        return WindowSummary(row, [])

    def service_mitigation(self) -> Optional[MitigatedRow]:
        if not self.queue:
            return None
        row = self.queue.popleft()
        self.mitigations_serviced += 1
        return MitigatedRow(row, _victims(row, self.blast_radius))
