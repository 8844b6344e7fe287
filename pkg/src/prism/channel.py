"""Channel-level service path: Alert Back-Off, RFM issuance, TRR cadence.

The channel serves one activation per step. When any bank requests an Alert
and the protocol is idle, the channel enters the back-off phase: up to
abo_act_slack further activations are served, then n_mit all-bank RFMs issue
(each bank services its top pending entry) and the channel must serve
abo_delay activations before honouring another Alert. With the default
slack of 3 and delay of 1 this drains at most one pending entry per four
served activations.

TRR opportunities piggyback on refresh at zero throughput cost. When TRR is
disabled, a proactive same-bank RFM fires at each completed window of a bank
whose pending queue is non-empty, reproducing the one-RFM-per-window default
mitigation rate without issuing anything while idle.

RFM stalls are accounted as a real-valued cost of c_rfm activation slots per
RFM; activations themselves are never dropped or reordered, so the stall
ledger is the only throughput effect.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional, Sequence

from .config import DEFAULT_TIMING, PrismConfig, TimingConstants
from .engine import BankState, MintBankState
from .errors import ConfigError
from .rng import SeededRng

_IDLE, _PENDING, _DELAY = 0, 1, 2


class StepReport(NamedTuple):
    served: bool
    rfms_issued: int
    trr_fired: bool


class ChannelState:
    """Single-channel protocol state over a list of bank engines."""

    def __init__(self, banks: Sequence, timing: TimingConstants = DEFAULT_TIMING,
                 trr_interval_acts: int = DEFAULT_TIMING.default_trr_interval_acts,
                 abo_act_slack: int = 3, abo_delay: int = 1, n_mit: int = 1,
                 proactive_rfm: Optional[bool] = None,
                 on_mitigate: Optional[Callable[[int, int], None]] = None,
                 log: Optional[Callable[[str], None]] = None):
        if not banks:
            raise ConfigError("channel needs at least one bank")
        self.banks = list(banks)
        self.timing = timing
        self.trr_interval_acts = trr_interval_acts
        self.abo_act_slack = abo_act_slack
        self.abo_delay = abo_delay
        self.n_mit = n_mit
        # Default policy: proactive RFMs stand in for TRR when TRR is off.
        self.proactive_rfm = (trr_interval_acts == 0) if proactive_rfm is None \
            else proactive_rfm
        self._on_mitigate = on_mitigate
        self._log = log

        self._phase = _IDLE
        self._slack_left = 0
        self._delay_left = 0
        self._windows_seen = [b.window_index for b in self.banks]

        self.total_acts = 0
        self.alerts_honored = 0
        self.rfm_count_alert = 0
        self.rfm_count_proactive = 0
        self.trr_count = 0
        self.stall_slots = 0.0
        self.alert_rfm_acts: list[int] = []  # total_acts at each Alert-RFM issue

    # -- service primitives --------------------------------------------------

    def _service_bank(self, index: int) -> bool:
        mit = self.banks[index].service_mitigation()
        if mit is not None and self._on_mitigate is not None:
            self._on_mitigate(index, mit.row)
        return mit is not None

    def _all_bank_rfm(self) -> None:
        for i in range(len(self.banks)):
            self._service_bank(i)

    def _issue_alert_rfms(self) -> int:
        issued = 0
        for _ in range(self.n_mit):
            self._all_bank_rfm()
            self.rfm_count_alert += 1
            self.stall_slots += self.timing.c_rfm
            self.alert_rfm_acts.append(self.total_acts)
            issued += 1
            if self._log:
                self._log(f"RFM kind=alert act={self.total_acts}")
        self._phase = _DELAY if self.abo_delay > 0 else _IDLE
        self._delay_left = self.abo_delay
        return issued

    def _enter_backoff_if_alerted(self) -> int:
        if self._phase != _IDLE:
            return 0
        if not any(b.alert_requested for b in self.banks):
            return 0
        self.alerts_honored += 1
        if self.abo_act_slack == 0:
            return self._issue_alert_rfms()
        self._phase = _PENDING
        self._slack_left = self.abo_act_slack
        return 0

    # -- main entry ------------------------------------------------------------

    def step(self, bank_index: int, row: int) -> StepReport:
        """Serve one activation and run the protocol bookkeeping it triggers."""
        bank = self.banks[bank_index]
        bank.on_activation(row)
        self.total_acts += 1
        rfms = 0
        trr_fired = False

        # Proactive same-bank RFM at each completed window with pending work.
        if self.proactive_rfm and bank.window_index != self._windows_seen[bank_index]:
            self._windows_seen[bank_index] = bank.window_index
            if bank.has_pending:
                self._service_bank(bank_index)
                self.rfm_count_proactive += 1
                self.stall_slots += self.timing.c_rfm
                rfms += 1
                if self._log:
                    self._log(f"RFM kind=proactive bank={bank_index} act={self.total_acts}")

        # TRR cadence: free service slot for every bank.
        if self.trr_interval_acts > 0 and self.total_acts % self.trr_interval_acts == 0:
            self._all_bank_rfm()
            self.trr_count += 1
            trr_fired = True
            if self._log:
                self._log(f"TRR act={self.total_acts}")

        # Alert Back-Off progression for the activation just served.
        if self._phase == _PENDING:
            self._slack_left -= 1
            if self._slack_left <= 0:
                rfms += self._issue_alert_rfms()
        elif self._phase == _DELAY:
            self._delay_left -= 1
            if self._delay_left <= 0:
                self._phase = _IDLE

        rfms += self._enter_backoff_if_alerted()
        return StepReport(True, rfms, trr_fired)

    # -- reporting ---------------------------------------------------------------

    @property
    def abo_idle(self) -> bool:
        return self._phase == _IDLE

    @property
    def rfm_total(self) -> int:
        return self.rfm_count_alert + self.rfm_count_proactive

    def throughput_loss(self) -> float:
        """Fraction of channel time lost to RFM stalls; TRR costs nothing."""
        stalled = self.rfm_total * self.timing.c_rfm
        if self.total_acts == 0 and stalled == 0:
            return 0.0
        return stalled / (self.total_acts + stalled)

    def slowdown(self) -> float:
        return 1.0 / (1.0 - self.throughput_loss())

    COUNTER_FIELDS = ("total_acts", "alerts", "rfm_alert", "rfm_proactive",
                      "trr", "stall_slots", "loss")

    def counters_csv(self) -> str:
        header = ",".join(self.COUNTER_FIELDS)
        row = (f"{self.total_acts},{self.alerts_honored},{self.rfm_count_alert},"
               f"{self.rfm_count_proactive},{self.trr_count},"
               f"{self.stall_slots:.6f},{self.throughput_loss():.9f}")
        return f"{header}\n{row}\n"


def build_channel(config: PrismConfig, n_banks: int = 1, seed: int = 0,
                  timing: TimingConstants = DEFAULT_TIMING,
                  engine: str = "prism", mint_window: Optional[int] = None,
                  proactive_rfm: Optional[bool] = None,
                  sample_injector=None,
                  on_mitigate: Optional[Callable[[int, int], None]] = None,
                  log: Optional[Callable[[str], None]] = None) -> ChannelState:
    """Wire bank engines and a channel from one config and one master seed.

    Bank b draws from the sub-stream seed/derive(b), so adding banks never
    perturbs existing ones.
    """
    rng = SeededRng(seed)
    if engine == "prism":
        banks = [BankState(config, rng.derive(b), sample_injector=sample_injector,
                           log=log)
                 for b in range(n_banks)]
    elif engine == "mint":
        if mint_window is None:
            raise ConfigError("mint engine needs mint_window")
        banks = [MintBankState(mint_window, rng.derive(b),
                               blast_radius=config.blast_radius)
                 for b in range(n_banks)]
    else:
        raise ConfigError(f"unknown engine {engine!r}; choose prism or mint")
    return ChannelState(
        banks, timing=timing, trr_interval_acts=config.trr_interval_acts,
        abo_act_slack=config.abo_act_slack, abo_delay=config.abo_delay,
        n_mit=config.n_mit, proactive_rfm=proactive_rfm,
        on_mitigate=on_mitigate, log=log)
