"""Configuration types, timing constants, presets, and key=value file I/O.

Vocabulary used throughout the package:

    w   mitigation-window length in activation slots
    r   sampled activation slots per window
    l   lookback depth of the Sampled History Queue (SHQ), in windows
    x   number of distinct rows cycled by an attack pattern

Time is measured in activation slots. Nanosecond constants exist only to
derive the RFM stall cost, the TRR cadence, and the per-refresh-window
activation budget; there is no electrical timing model beyond that.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, fields, replace

from .errors import ConfigError

#: Row addresses are 17 bits wide; all row indices live in [0, ROW_SPACE).
ROW_SPACE = 1 << 17

#: Bits per queue entry in storage accounting: 17-bit row address + valid bit,
#: and the pending-mitigation queue adds a 3-bit saturating counter.
SHQ_ENTRY_BITS = 18
SSQ_ENTRY_BITS = 18
PMQ_ENTRY_BITS = 21

#: Saturation ceiling of the 3-bit per-entry activation counter.
PMQ_COUNTER_MAX = 7

NS_PER_YEAR = 365.25 * 86400 * 1e9


def ssq_min_size(r: int) -> int:
    """Minimum Sampled Slot Queue capacity for r sampled slots per window.

    Two adjacent windows can place all 2r sampled slots back to back, every
    one intersecting. The first intersection occupies the pending queue and
    raises an Alert; the rest wait in the SSQ while Alert Back-Off drains one
    pending entry per four activations, retiring floor((2r-1)/4) of them
    before the burst ends. The peak waiting population is therefore
    (2r-1) - floor((2r-1)/4).
    """
    if r < 1:
        raise ConfigError(f"sampled slot count must be >= 1, got {r}")
    burst = 2 * r - 1
    return burst - burst // 4


@dataclass(frozen=True)
class TimingConstants:
    """The four nanosecond constants the slot-denominated model needs."""

    t_rc_ns: float = 48.0          # one activation cycle
    t_rfmab_ns: float = 350.0      # one all-bank RFM stall
    t_refi_ns: float = 3900.0      # refresh interval
    t_refw_ns: float = 32_000_000.0  # refresh window

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ConfigError(f"{f.name} must be positive")

    @property
    def c_rfm(self) -> float:
        """RFM stall cost in activation slots (~7.29 with defaults)."""
        return self.t_rfmab_ns / self.t_rc_ns

    @property
    def activation_budget(self) -> int:
        """Activations one bank can issue inside one refresh window (666,666)."""
        return int(self.t_refw_ns // self.t_rc_ns)

    @property
    def default_trr_interval_acts(self) -> int:
        """Slot-domain cadence of one TRR opportunity per two refresh intervals."""
        return round(2 * self.t_refi_ns / self.t_rc_ns)


DEFAULT_TIMING = TimingConstants()


@dataclass(frozen=True)
class PrismConfig:
    """All tunables of one defense instance.

    ssq_capacity defaults to the sizing bound for this r; the built-in presets
    pin it at 13, the bound for the largest supported r of 9, matching how the
    hardware structure would be provisioned once for all configurations.
    """

    w: int
    r: int
    l: int
    pmq_capacity: int = 16
    t_pmq: int = 4
    ssq_capacity: int = 0          # 0 means "derive from ssq_min_size(r)"
    abo_act_slack: int = 3         # activations served between Alert and its RFM
    abo_delay: int = 1             # activations before Alert may be reasserted
    n_mit: int = 1                 # RFMs issued per Alert
    trr_interval_acts: int = DEFAULT_TIMING.default_trr_interval_acts  # 0 disables TRR
    blast_radius: int = 2          # victim rows refreshed on each side

    def __post_init__(self):
        if self.r < 2:
            raise ConfigError(
                f"intersection-based mitigation needs r >= 2 (one history "
                f"insertion per window), got r={self.r}")
        if self.w < 4 * self.r:
            raise ConfigError(
                f"w={self.w} violates w >= 4r (r={self.r}); the long-run "
                f"intersection rate would exceed the Alert drain rate")
        if self.l < 0:
            raise ConfigError(f"lookback l must be >= 0, got {self.l}")
        if self.pmq_capacity < 1:
            raise ConfigError("pmq_capacity must be >= 1")
        if self.t_pmq < 0:
            raise ConfigError("t_pmq must be >= 0")
        if self.abo_act_slack < 0 or self.abo_delay < 0:
            raise ConfigError("ABO slack/delay must be >= 0")
        if self.n_mit < 1:
            raise ConfigError("n_mit must be >= 1")
        if self.trr_interval_acts < 0:
            raise ConfigError("trr_interval_acts must be >= 0")
        if self.blast_radius < 1:
            raise ConfigError("blast_radius must be >= 1")
        if self.ssq_capacity == 0:
            object.__setattr__(self, "ssq_capacity", ssq_min_size(self.r))
        if self.ssq_capacity < ssq_min_size(self.r):
            raise ConfigError(
                f"ssq_capacity={self.ssq_capacity} below the sizing bound "
                f"{ssq_min_size(self.r)} for r={self.r}")

    @property
    def shq_entries(self) -> int:
        """Total SHQ slots once warmed: l windows times r-1 insertions each."""
        return self.l * (self.r - 1)


@dataclass(frozen=True)
class MttfTarget:
    """Mean-time-to-failure target for the analytical security bound."""

    per_bank_years: float = 10_000.0
    parallel_banks: int = 24   # banks an attacker hammers in parallel (of 32)

    def __post_init__(self):
        if self.per_bank_years <= 0:
            raise ConfigError("per_bank_years must be positive")
        if self.parallel_banks < 1:
            raise ConfigError("parallel_banks must be >= 1")

    def failure_budget_per_refw(self, timing: TimingConstants = DEFAULT_TIMING) -> float:
        """Largest tolerable failure probability per refresh window."""
        return timing.t_refw_ns / (self.per_bank_years * NS_PER_YEAR)

    @property
    def system_years(self) -> float:
        """System-level MTTF when parallel_banks banks are attacked at once."""
        return self.per_bank_years / self.parallel_banks


# (w, r, l) per supported double-sided RowHammer threshold. The l values for
# 1000 and 250 are reconstructed from the published storage figures (36-entry
# and 632-entry history queues); 500 is quoted directly.
_PRESETS: dict[int, tuple[int, int, int]] = {
    1000: (72, 4, 12),
    500: (72, 7, 41),
    250: (48, 9, 79),
}

#: SSQ provisioning shared by every preset (sizing bound at r=9).
_PRESET_SSQ = 13


def preset_config(target_threshold: int) -> PrismConfig:
    """Built-in configuration for a supported threshold of 1000, 500, or 250."""
    try:
        w, r, l = _PRESETS[target_threshold]
    except KeyError:
        known = ", ".join(str(k) for k in sorted(_PRESETS))
        raise ConfigError(
            f"unknown preset threshold {target_threshold!r}; choose one of {known}"
        ) from None
    return PrismConfig(w=w, r=r, l=l, pmq_capacity=16, t_pmq=4,
                       ssq_capacity=_PRESET_SSQ)


def preset_names() -> list[int]:
    return sorted(_PRESETS)


_INT_FIELDS = {f.name for f in fields(PrismConfig)}


def parse_config_text(text: str) -> PrismConfig:
    """Parse the key = value configuration format.

    One `key = value` pair per line; `#` starts a comment; every key is a
    PrismConfig field; w, r and l are required. Unknown keys are rejected so
    typos cannot silently fall back to defaults.
    """
    values: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _INT_FIELDS:
            raise ConfigError(f"config line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"config line {line_no}: duplicate key {key!r}")
        try:
            values[key] = int(value.strip())
        except ValueError:
            raise ConfigError(
                f"config line {line_no}: {key} needs an integer, got {value.strip()!r}"
            ) from None
    missing = [k for k in ("w", "r", "l") if k not in values]
    if missing:
        raise ConfigError(f"config is missing required keys: {', '.join(missing)}")
    return PrismConfig(**values)


def load_config_file(path: str) -> PrismConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None


def dump_config(config: PrismConfig) -> str:
    """Render a config in the same key = value format parse_config_text reads."""
    buf = io.StringIO()
    for f in fields(PrismConfig):
        buf.write(f"{f.name} = {getattr(config, f.name)}\n")
    return buf.getvalue()


def with_overrides(config: PrismConfig, **overrides) -> PrismConfig:
    """Copy a config with some fields replaced (validation re-runs)."""
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
