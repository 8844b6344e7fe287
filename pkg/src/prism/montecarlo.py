"""Empirical security estimation and the parameter-sweep engine.

Two simulation fidelities:

* run_epochs drives the full engine and channel, tracking per-row
  unmitigated-activation counters (reset when that row is serviced, and all
  reset at epoch end, modelling the periodic-refresh reset). It yields
  escape statistics and protocol counters.

* selection_mc replays only the per-window selection layer (sampling,
  history intersection, default choice, history FIFO) for circular attacks.
  Selection outcomes do not depend on when pending entries get serviced, so
  this path measures the per-window mitigation-selection probability and the
  history-residency probability at a fraction of the cost. It consumes the
  random stream in exactly the same order as the engine, which the test
  suite exploits for an exact differential check.

The sweep engine evaluates the analytic bound (and optionally epochs) over a
parameter grid and emits one CSV row per point; output is byte-identical for
a fixed master seed at any parallelism level because every point derives its
own sub-stream from its grid index.
"""

from __future__ import annotations

import itertools
import math
import sys
from collections import Counter, deque
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Optional, Sequence

from .analytic import MttfModelOptions, DEFAULT_MODEL_OPTIONS, min_supported_trh
from .channel import build_channel
from .config import (
    DEFAULT_TIMING,
    MttfTarget,
    PrismConfig,
    TimingConstants,
    with_overrides,
)
from .errors import ConfigError
from .rng import SeededRng, sample_window_slots

__all__ = [
    "EpochStats",
    "run_epochs",
    "empirical_escape",
    "SelectionEstimate",
    "selection_mc",
    "SweepGrid",
    "sweep",
    "sweep_csv",
]


@dataclass
class EpochStats:
    """Aggregated results of repeated fresh-state attack epochs."""

    epochs: int = 0
    horizon: int = 0
    total_acts: int = 0
    total_selections: int = 0
    total_intersections: int = 0
    total_windows: int = 0
    max_unmitigated_hist: Counter = field(default_factory=Counter)
    alerts_sum: float = 0.0
    alerts_sumsq: float = 0.0
    rfm_sum: float = 0.0
    rfm_sumsq: float = 0.0
    intersections_sum: float = 0.0
    intersections_sumsq: float = 0.0

    def add_epoch(self, max_unmitigated: int, alerts: int, rfms: int,
                  intersections: int) -> None:
        self.epochs += 1
        self.max_unmitigated_hist[max_unmitigated] += 1
        self.alerts_sum += alerts
        self.alerts_sumsq += alerts * alerts
        self.rfm_sum += rfms
        self.rfm_sumsq += rfms * rfms
        self.intersections_sum += intersections
        self.intersections_sumsq += intersections * intersections

    def escape_count(self, t: int) -> int:
        """Epochs in which some row accumulated >= t unmitigated activations."""
        return sum(n for m, n in self.max_unmitigated_hist.items() if m >= t)

    def _mean_var(self, s: float, sq: float) -> tuple[float, float]:
        if self.epochs == 0:
            return 0.0, 0.0
        mean = s / self.epochs
        return mean, max(sq / self.epochs - mean * mean, 0.0)

    @property
    def alerts_mean_var(self) -> tuple[float, float]:
        return self._mean_var(self.alerts_sum, self.alerts_sumsq)

    @property
    def rfm_mean_var(self) -> tuple[float, float]:
        return self._mean_var(self.rfm_sum, self.rfm_sumsq)

    @property
    def intersections_mean_var(self) -> tuple[float, float]:
        return self._mean_var(self.intersections_sum, self.intersections_sumsq)

    @property
    def selection_rate(self) -> float:
        """Per-window mitigation-selection frequency per appearing row:
        selection events divided by activations served."""
        return self.total_selections / self.total_acts if self.total_acts else 0.0


def run_epochs(config: PrismConfig, attack, n_epochs: int, seed: int,
               horizon: Optional[int] = None,
               timing: TimingConstants = DEFAULT_TIMING) -> EpochStats:
    """Run n_epochs independent epochs of `attack` against fresh state.

    Each epoch gets a fresh channel and a sub-seed derived from (seed, epoch).
    The per-row unmitigated counter increments on that row's activations and
    resets when the row itself is serviced; every counter resets at epoch end.
    The default horizon is the attack's own, usually one refresh window's
    activation budget.
    """
    horizon = horizon if horizon is not None else attack.horizon
    stats = EpochStats(horizon=horizon)
    master = SeededRng(seed)
    for epoch in range(n_epochs):
        unmit: dict[int, int] = {}
        peak = 0

        def on_mitigate(_bank: int, row: int) -> None:
            nonlocal peak
            n = unmit.pop(row, 0)
            if n > peak:
                peak = n

        channel = build_channel(config, n_banks=max(attack.banks) + 1,
                                seed=master.derive(epoch).seed, timing=timing,
                                on_mitigate=on_mitigate)
        stream = attack.activations()
        for _ in range(horizon):
            bank, row = next(stream)
            unmit[row] = unmit.get(row, 0) + 1
            channel.step(bank, row)
        if unmit:
            peak = max(peak, max(unmit.values()))
        bank_sel = sum(b.selections for b in channel.banks)
        bank_int = sum(b.intersections for b in channel.banks)
        stats.total_acts += channel.total_acts
        stats.total_selections += bank_sel
        stats.total_intersections += bank_int
        stats.total_windows += sum(b.windows for b in channel.banks)
        stats.add_epoch(peak, channel.alerts_honored, channel.rfm_total, bank_int)
    return stats


def empirical_escape(stats: EpochStats, t: int, z: float = 1.959964) -> dict:
    """Escape-probability estimate at threshold t with a Wilson 95% interval.

    With zero observed escapes the estimate is flagged below_resolution: the
    data only upper-bounds the probability.
    """
    n = stats.epochs
    if n == 0:
        raise ConfigError("no epochs accumulated")
    k = stats.escape_count(t)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return {
        "probability": p,
        "low": max(0.0, centre - half),
        "high": min(1.0, centre + half),
        "escapes": k,
        "epochs": n,
        "below_resolution": k == 0,
    }


@dataclass(frozen=True)
class SelectionEstimate:
    windows: int
    acts: int
    samples: int
    intersecting_samples: int
    selections: int

    @property
    def p_shq_hat(self) -> float:
        """History residency measured at sampling time."""
        return self.intersecting_samples / self.samples if self.samples else 0.0

    @property
    def p_m_hat(self) -> float:
        """Per-window mitigation-selection probability per appearing row."""
        return self.selections / self.acts if self.acts else 0.0


def selection_mc(w: int, r: int, l: int, x: int, windows: int,
                 seed: int = 0) -> SelectionEstimate:
    """Window-level simulation of the selection layer under circular-x.

    Requires x >= w so every window holds w distinct rows, each appearing
    once; the selection probability per appearing row is then the selection
    count over the activation count. Draw order per window matches the
    engine: default pick (when one exists) before the next window's slots.
    """
    if x < w:
        raise ConfigError(f"selection_mc needs x >= w, got x={x} < w={w}")
    rng = SeededRng(seed)
    shq: deque[Optional[int]] = deque()
    counts: dict[int, int] = {}
    limit = l * (r - 1)
    samples = 0
    hits = 0
    selections = 0
    slots = sorted(sample_window_slots(w, r, rng))
    for t in range(windows):
        base = t * w
        rows = [(base + s) % x for s in slots]
        resident = [counts.get(row, 0) > 0 for row in rows]
        n_hit = sum(resident)
        samples += r
        hits += n_hit
        selections += n_hit
        non_int = [row for row, res in zip(rows, resident) if not res]
        chosen = -1
        if non_int:
            chosen = non_int[rng.randint(len(non_int))]
            selections += 1
        insertions = [row for row in non_int if row != chosen][: r - 1]
        insertions += [None] * (r - 1 - len(insertions))
        for item in insertions:
            shq.append(item)
            if item is not None:
                counts[item] = counts.get(item, 0) + 1
            while len(shq) > limit:
                old = shq.popleft()
                if old is not None:
                    n = counts[old] - 1
                    if n:
                        counts[old] = n
                    else:
                        del counts[old]
        slots = sorted(sample_window_slots(w, r, rng))
    return SelectionEstimate(windows=windows, acts=windows * w, samples=samples,
                             intersecting_samples=hits, selections=selections)


# -- parameter sweep -------------------------------------------------------------

_GRID_AXES = ("w", "r", "l", "x", "pmq_capacity", "t_pmq", "mttf_years")


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid over any subset of the supported axes.

    Fixed values are one-element axes. Points are enumerated in row-major
    order of the axes tuple, which fixes both sub-seed assignment and output
    order.
    """

    axes: tuple[tuple[str, tuple[float, ...]], ...]

    @classmethod
    def from_dict(cls, axes: dict[str, Sequence[float]]) -> "SweepGrid":
        unknown = set(axes) - set(_GRID_AXES)
        if unknown:
            raise ConfigError(f"unknown sweep axes: {sorted(unknown)}")
        ordered = tuple((name, tuple(axes[name])) for name in _GRID_AXES if name in axes)
        if not ordered:
            raise ConfigError("sweep grid has no axes")
        for name, values in ordered:
            if not values:
                raise ConfigError(f"sweep axis {name} is empty")
        return cls(ordered)

    def points(self) -> list[dict[str, float]]:
        names = [name for name, _ in self.axes]
        return [dict(zip(names, combo))
                for combo in itertools.product(*(vals for _, vals in self.axes))]


def parse_grid_text(text: str) -> SweepGrid:
    """Parse the grid-file format: `key = v` or `key = v1, v2, ...` per line."""
    axes: dict[str, list[float]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"grid line {line_no}: expected 'key = values', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key in axes:
            raise ConfigError(f"grid line {line_no}: duplicate axis {key!r}")
        try:
            axes[key] = [float(v) for v in value.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"grid line {line_no}: non-numeric value in {raw!r}") from None
    return SweepGrid.from_dict(axes)


_SWEEP_COLUMNS = [
    "w", "r", "l", "pmq_capacity", "t_pmq", "mttf_years",
    "worst_x", "k_at_worst", "p_shq_at_worst", "p_m_at_worst",
    "t_hat", "t_supported",
    "x", "p_shq_at_x", "p_m_at_x",
    "mc_windows", "mc_p_shq", "mc_p_m",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _eval_point(args) -> str:
    (index, point, base, timing, banks, options, mc_windows, master_seed) = args
    overrides = {k: int(point[k]) for k in ("w", "r", "l", "pmq_capacity", "t_pmq")
                 if k in point}
    config = with_overrides(base, **overrides)
    mttf = MttfTarget(per_bank_years=point.get("mttf_years", 10_000.0),
                      parallel_banks=banks)
    bound = min_supported_trh(config, timing=timing, mttf=mttf, options=options)
    worst = next(p for p in bound.per_x if p.x == bound.worst_x)
    row = {
        "w": config.w, "r": config.r, "l": config.l,
        "pmq_capacity": config.pmq_capacity, "t_pmq": config.t_pmq,
        "mttf_years": mttf.per_bank_years,
        "worst_x": bound.worst_x, "k_at_worst": worst.k,
        "p_shq_at_worst": worst.p_shq, "p_m_at_worst": worst.p_m,
        "t_hat": bound.t_hat, "t_supported": bound.t_supported,
        "x": None, "p_shq_at_x": None, "p_m_at_x": None,
        "mc_windows": None, "mc_p_shq": None, "mc_p_m": None,
    }
    if "x" in point:
        from .analytic import p_mitigate, p_shq_fixed_point
        x = int(point["x"])
        row["x"] = x
        row["p_shq_at_x"] = p_shq_fixed_point(config.w, config.r, config.l, x)
        row["p_m_at_x"] = p_mitigate(config.w, config.r, config.l, x)
        if mc_windows:
            est = selection_mc(config.w, config.r, config.l, x, mc_windows,
                               seed=SeededRng(master_seed).derive(index).seed)
            row["mc_windows"] = est.windows
            row["mc_p_shq"] = est.p_shq_hat
            row["mc_p_m"] = est.p_m_hat
    return ",".join(_fmt(row[c]) for c in _SWEEP_COLUMNS)


def sweep(grid: SweepGrid, seed: int = 0, jobs: int = 1,
          base: Optional[PrismConfig] = None,
          timing: TimingConstants = DEFAULT_TIMING,
          banks: int = 24,
          options: MttfModelOptions = DEFAULT_MODEL_OPTIONS,
          mc_windows: int = 0,
          progress: bool = False) -> list[str]:
    """Evaluate the grid and return CSV body rows in grid order.

    Every point derives its Monte Carlo sub-seed from (seed, point index), so
    the output is byte-identical for a fixed seed at any jobs level.
    """
    base = base or PrismConfig(w=72, r=4, l=12, ssq_capacity=13)
    points = grid.points()
    tasks = [(i, p, base, timing, banks, options, mc_windows, seed)
             for i, p in enumerate(points)]
    if jobs > 1:
        with Pool(jobs) as pool:
            rows = pool.map(_eval_point, tasks)
    else:
        rows = []
        for t in tasks:
            rows.append(_eval_point(t))
            if progress:
                print(f"sweep point {t[0] + 1}/{len(tasks)}", file=sys.stderr)
    return rows


def sweep_csv(rows: list[str]) -> str:
    return ",".join(_SWEEP_COLUMNS) + "\n" + "".join(r + "\n" for r in rows)
