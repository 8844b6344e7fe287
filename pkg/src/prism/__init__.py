"""Desk-scale laboratory for an intersection-based probabilistic RowHammer
mitigation: activation-level simulator, adversarial pattern generators,
analytical security bounds, and a Monte Carlo cross-validator."""

from .analytic import (
    MttfModelOptions,
    SecurityBound,
    abo_act_q,
    dos_bound,
    intersection_reach,
    min_supported_trh,
    p_mitigate,
    p_sample,
    p_shq_fixed_point,
    p_shq_markov,
    ssq_min_size,
    storage_bytes,
)
from .attacks import (
    CircularX,
    EactParams,
    UniformBenign,
    circular_x_row,
    ingest_trace,
    row_permutation,
    run_boundary_burst,
    run_chained_alert,
)
from .channel import ChannelState, build_channel
from .config import (
    MttfTarget,
    PrismConfig,
    TimingConstants,
    load_config_file,
    preset_config,
)
from .engine import BankState, MintBankState
from .errors import ConfigError, NumericalError, PrismError, SsqOverflowError, TraceFormatError
from .montecarlo import EpochStats, empirical_escape, run_epochs, selection_mc, sweep
from .rng import SeededRng, sample_window_slots

__version__ = "0.1.0"
