#!/usr/bin/env python3
"""Worst-case denial-of-service table for the three built-in presets:
the closed-form bound next to a measured full-engine circular attack.

Usage: python scripts/dos_table.py [--acts N]
"""

import argparse

from prism.analytic import dos_bound
from prism.channel import ChannelState
from prism.config import preset_config, with_overrides
from prism.engine import BankState
from prism.rng import SeededRng

# Strongest cycle lengths found by offline scans (see tests/test_acceptance.py).
WORST_X = {1000: 8, 500: 6, 250: 128}


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--acts", type=int, default=300_000)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    print(f"{'threshold':>9} {'w':>3} {'r':>2} {'bound_c7':>9} {'measured':>9} {'ratio':>7}")
    for threshold in (1000, 500, 250):
        cfg = with_overrides(preset_config(threshold), trr_interval_acts=0)
        bound = dos_bound(cfg.w, cfg.r, c_rfm=7).slowdown
        channel = ChannelState([BankState(cfg, SeededRng(args.seed))],
                               trr_interval_acts=0)
        x = WORST_X[threshold]
        for i in range(args.acts):
            channel.step(0, i % x)
        s = channel.slowdown()
        print(f"{threshold:>9} {cfg.w:>3} {cfg.r:>2} {bound:>9.4f} {s:>9.4f} "
              f"{s / bound:>7.1%}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
