"""Command-line entry point.

Subcommands:

    analyze    analytical security bound (per-x CSV + human summary)
    mc         epoch-based Monte Carlo of an attack against the full engine
    sweep      parameter-grid sweep to CSV
    dos        worst-case denial-of-service bound for a configuration
    simulate   trace- or generator-driven simulation with protocol counters
    storage    per-bank SRAM accounting

Every run is a pure function of its flags, input files, and seed: rerunning
produces identical bytes. Machine output is CSV on --out (default stdout),
prefixed with `# key = value` lines echoing the fully resolved
configuration; human summaries go to stderr.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from typing import Optional

from . import analytic, montecarlo
from .attacks import CircularX, EactParams, UniformBenign, ingest_trace_file
from .channel import build_channel
from .config import (
    DEFAULT_TIMING,
    MttfTarget,
    PrismConfig,
    load_config_file,
    preset_config,
    preset_names,
    with_overrides,
)
from .engine import MINT_WINDOWS
from .errors import ConfigError, NumericalError, PrismError


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", type=int, default=None,
                   help=f"built-in configuration by target threshold {preset_names()}")
    p.add_argument("--config", type=str, default=None,
                   help="configuration file (key = value per line)")
    p.add_argument("--trr-interval", type=int, default=None,
                   help="override activation slots between TRR opportunities (0 disables)")
    p.add_argument("--out", type=str, default=None, help="output path (default stdout)")
    p.add_argument("--seed", type=int, default=0, help="master seed")


def _resolve_config(args) -> PrismConfig:
    if args.preset is not None and args.config is not None:
        raise ConfigError("give either --preset or --config, not both")
    if args.preset is not None:
        config = preset_config(args.preset)
    elif args.config is not None:
        config = load_config_file(args.config)
    else:
        raise ConfigError("a configuration is required: --preset or --config")
    return with_overrides(config, trr_interval_acts=args.trr_interval)


def _header(config: PrismConfig, extra: dict) -> str:
    lines = [f"# {f.name} = {getattr(config, f.name)}" for f in fields(PrismConfig)]
    lines += [f"# {k} = {v}" for k, v in extra.items()]
    return "".join(line + "\n" for line in lines)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _mttf_from_args(args) -> MttfTarget:
    return MttfTarget(per_bank_years=args.mttf_years, parallel_banks=args.banks)


def _options_from_args(args) -> analytic.MttfModelOptions:
    return analytic.MttfModelOptions(
        multiplicity=args.multiplicity,
        escape_trials_per_activation=args.escape_trials,
        alert_chain_allowance=not args.no_alert_chain_allowance)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mttf-years", type=float, default=10_000.0,
                   help="per-bank mean-time-to-failure target in years")
    p.add_argument("--banks", type=int, default=24,
                   help="banks attacked in parallel (system-level conversion)")
    p.add_argument("--multiplicity", type=str, default="single_target",
                   choices=["single_target", "per_row", "per_row_per_bank"],
                   help="escape opportunities counted per refresh window")
    p.add_argument("--escape-trials", type=int, default=2,
                   help="mitigation-escape trials per counted threshold activation")
    p.add_argument("--no-alert-chain-allowance", action="store_true",
                   help="drop the tardiness + chained-Alert service-delay allowance")


def _cmd_analyze(args) -> int:
    config = _resolve_config(args)
    mttf = _mttf_from_args(args)
    options = _options_from_args(args)
    bound = analytic.min_supported_trh(config, mttf=mttf, options=options)
    header = _header(config, {
        "subcommand": "analyze", "mttf_years": mttf.per_bank_years,
        "parallel_banks": mttf.parallel_banks,
        "system_mttf_years": f"{mttf.system_years:.6g}",
        "multiplicity": options.multiplicity,
        "escape_trials_per_activation": options.escape_trials_per_activation,
        "alert_chain_allowance": options.alert_chain_allowance,
        "worst_x": bound.worst_x, "t_hat": bound.t_hat,
        "t_supported": bound.t_supported,
    })
    body = ["x,k,p_shq,p_m,t_required"]
    body += [f"{p.x},{p.k:.10g},{p.p_shq:.10g},{p.p_m:.10g},{p.t_required}"
             for p in bound.per_x]
    _emit(args, header + "\n".join(body) + "\n")
    print(f"analyze: worst x = {bound.worst_x}, base threshold = {bound.t_hat}, "
          f"supported threshold = {bound.t_supported} "
          f"(+{bound.t_pmq} tardiness, +{bound.abo_act_allowance} chained-Alert)",
          file=sys.stderr)
    return 0


def _attack_from_args(args, config: PrismConfig, horizon: int):
    if args.attack == "circular-x":
        if args.x is None:
            raise ConfigError("--attack circular-x needs --x")
        return CircularX(x=args.x, horizon=horizon)
    if args.attack == "uniform":
        return UniformBenign(row_count=args.rows, horizon=horizon, seed=args.seed)
    raise ConfigError(f"unknown attack {args.attack!r}")


def _cmd_mc(args) -> int:
    config = _resolve_config(args)
    horizon = args.horizon or DEFAULT_TIMING.activation_budget
    attack = _attack_from_args(args, config, horizon)
    stats = montecarlo.run_epochs(config, attack, args.epochs, args.seed,
                                  horizon=horizon)
    am, av = stats.alerts_mean_var
    rm, rv = stats.rfm_mean_var
    im, iv = stats.intersections_mean_var
    header = _header(config, {
        "schema": "mc-v1",
        "subcommand": "mc", "attack": args.attack, "x": args.x,
        "rows": args.rows, "epochs": stats.epochs, "horizon": stats.horizon,
        "seed": args.seed,
    })
    lines = ["epochs,horizon,acts,selections,selection_rate,"
             "alerts_mean,alerts_var,rfm_mean,rfm_var,"
             "intersections_mean,intersections_var"]
    lines.append(f"{stats.epochs},{stats.horizon},{stats.total_acts},"
                 f"{stats.total_selections},{stats.selection_rate:.10g},"
                 f"{am:.10g},{av:.10g},{rm:.10g},{rv:.10g},{im:.10g},{iv:.10g}")
    lines.append("# per-epoch maximum unmitigated activations histogram")
    lines.append("max_unmitigated,epochs")
    for value in sorted(stats.max_unmitigated_hist):
        lines.append(f"{value},{stats.max_unmitigated_hist[value]}")
    _emit(args, header + "\n".join(lines) + "\n")
    return 0


def _cmd_sweep(args) -> int:
    try:
        with open(args.grid, "r", encoding="utf-8") as fh:
            grid = montecarlo.parse_grid_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read grid file {args.grid}: {exc}") from None
    options = _options_from_args(args)
    rows = montecarlo.sweep(grid, seed=args.seed, jobs=args.jobs,
                            banks=args.banks, options=options,
                            mc_windows=args.mc_windows,
                            progress=args.out is not None)
    header = "".join(f"# {name} = {','.join(f'{v:g}' for v in values)}\n"
                     for name, values in grid.axes)
    header += (f"# schema = sweep-v1\n"
               f"# subcommand = sweep\n# seed = {args.seed}\n"
               f"# multiplicity = {options.multiplicity}\n"
               f"# escape_trials_per_activation = {options.escape_trials_per_activation}\n")
    _emit(args, header + montecarlo.sweep_csv(rows))
    return 0


def _cmd_dos(args) -> int:
    config = _resolve_config(args)
    exact = analytic.dos_bound(config.w, config.r)
    rounded = analytic.dos_bound(config.w, config.r, c_rfm=7)
    header = _header(config, {"subcommand": "dos"})
    body = ("w,r,c_rfm,loss,slowdown,slowdown_c7\n"
            f"{config.w},{config.r},{exact.c_rfm:.10g},{exact.loss:.10g},"
            f"{exact.slowdown:.10g},{rounded.slowdown:.10g}\n")
    _emit(args, header + body)
    print(f"dos: W={config.w} R={config.r} worst-case slowdown "
          f"{rounded.slowdown:.2f}x (rounded stall cost), "
          f"{exact.slowdown:.4f}x (exact)", file=sys.stderr)
    return 0


def _parse_eact(spec: Optional[str]) -> Optional[EactParams]:
    if spec is None:
        return None
    parts = spec.split(",")
    if len(parts) != 3:
        raise ConfigError("--eact needs t_on,t_pre,t_rc in nanoseconds")
    try:
        t_on, t_pre, t_rc = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"non-numeric --eact value {spec!r}") from None
    return EactParams(t_on_ns=t_on, t_pre_ns=t_pre, t_rc_ns=t_rc)


def _cmd_simulate(args) -> int:
    config = _resolve_config(args)
    mint_window = args.mint_window
    if args.engine == "mint" and mint_window is None:
        if args.preset in MINT_WINDOWS:
            mint_window = MINT_WINDOWS[args.preset]
        else:
            raise ConfigError("mint engine needs --mint-window (or a preset with "
                              "a documented baseline window)")
    channel = build_channel(config, n_banks=args.banks, seed=args.seed,
                            engine=args.engine, mint_window=mint_window)
    horizon = args.acts or DEFAULT_TIMING.activation_budget
    if args.attack == "trace":
        if not args.trace:
            raise ConfigError("--attack trace needs --trace PATH")
        events = ingest_trace_file(args.trace, eact=_parse_eact(args.eact),
                                   randomize_key=args.randomize_key)
        served = 0
        for ev in events:
            if ev.bank >= args.banks:
                raise ConfigError(
                    f"trace references bank {ev.bank}; rerun with --banks > {ev.bank}")
            if ev.kind == "act":
                channel.step(ev.bank, ev.row)
                served += 1
                if served >= horizon:
                    break
            else:
                for _ in range(ev.row):   # idle count
                    channel.banks[ev.bank].on_idle_slot()
    else:
        attack = _attack_from_args(args, config, horizon)
        stream = attack.activations()
        for _ in range(horizon):
            bank, row = next(stream)
            channel.step(bank, row)
    header = _header(config, {
        "subcommand": "simulate", "engine": args.engine, "attack": args.attack,
        "x": args.x, "rows": args.rows, "trace": args.trace,
        "acts": channel.total_acts, "seed": args.seed,
        "slowdown": f"{channel.slowdown():.10g}",
    })
    _emit(args, header + channel.counters_csv())
    print(f"simulate: {channel.total_acts} activations, "
          f"loss {channel.throughput_loss():.4f}, "
          f"slowdown {channel.slowdown():.4f}x", file=sys.stderr)
    return 0


def _cmd_storage(args) -> int:
    config = _resolve_config(args)
    report = analytic.storage_bytes(config)
    header = _header(config, {"subcommand": "storage"})
    body = ("shq_entries,ssq_entries,pmq_entries,total_bits,total_bytes\n"
            f"{report.shq_entries},{config.ssq_capacity},{config.pmq_capacity},"
            f"{report.total_bits},{report.total_bytes}\n")
    _emit(args, header + body)
    print(f"storage: {report.total_bytes} bytes per bank "
          f"({report.shq_entries}-entry history queue)", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prism",
        description="Simulator and analytical toolkit for an intersection-based "
                    "probabilistic RowHammer mitigation.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("analyze", help="analytical security bound")
    _add_config_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("mc", help="epoch-based Monte Carlo estimation")
    _add_config_flags(p)
    p.add_argument("--attack", type=str, default="circular-x",
                   choices=["circular-x", "uniform"])
    p.add_argument("--x", type=int, default=None, help="circular pattern row count")
    p.add_argument("--rows", type=int, default=1 << 16,
                   help="row space for the uniform pattern")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--horizon", type=int, default=None,
                   help="activations per epoch (default: one refresh window budget)")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("sweep", help="parameter-grid sweep to CSV")
    p.add_argument("--grid", type=str, required=True, help="grid file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--mc-windows", type=int, default=0,
                   help="selection Monte Carlo windows per point (0 disables)")
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_model_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("dos", help="worst-case DoS bound")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_dos)

    p = sub.add_parser("simulate", help="trace- or generator-driven simulation")
    _add_config_flags(p)
    p.add_argument("--attack", type=str, default="circular-x",
                   choices=["circular-x", "uniform", "trace"])
    p.add_argument("--x", type=int, default=None, help="circular pattern row count")
    p.add_argument("--rows", type=int, default=1 << 16,
                   help="row space for the uniform pattern")
    p.add_argument("--trace", type=str, default=None, help="trace file path")
    p.add_argument("--eact", type=str, default=None,
                   help="row-open dwell conversion 't_on,t_pre,t_rc' in ns")
    p.add_argument("--randomize-key", type=lambda v: int(v, 0), default=None,
                   help="keyed row-permutation key (decimal or 0x hex)")
    p.add_argument("--engine", type=str, default="prism", choices=["prism", "mint"])
    p.add_argument("--mint-window", type=int, default=None,
                   help="baseline mitigation window (defaults from preset)")
    p.add_argument("--acts", type=int, default=None,
                   help="activations to serve (default: one refresh window budget)")
    p.add_argument("--banks", type=int, default=1, help="banks in the channel")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("storage", help="per-bank SRAM accounting")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_storage)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PrismError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
