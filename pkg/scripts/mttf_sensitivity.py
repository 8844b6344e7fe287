#!/usr/bin/env python3
"""Supported threshold of each preset across per-bank MTTF targets,
with the system-level conversion for banks attacked in parallel.

Usage: python scripts/mttf_sensitivity.py
"""

from prism.analytic import min_supported_trh
from prism.config import MttfTarget, preset_config


def main() -> int:
    years_axis = [1e3, 1e4, 1e5, 1e6]
    print(f"{'threshold':>9} {'shq':>5} " +
          " ".join(f"{y:>10.0e}" for y in years_axis) + f" {'system@1e4':>11}")
    for threshold in (1000, 500, 250):
        cfg = preset_config(threshold)
        row = []
        for years in years_axis:
            bound = min_supported_trh(cfg, mttf=MttfTarget(per_bank_years=years))
            row.append(bound.t_supported)
        system = MttfTarget(per_bank_years=1e4).system_years
        print(f"{threshold:>9} {cfg.shq_entries:>5} " +
              " ".join(f"{t:>10}" for t in row) + f" {system:>10.0f}y")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
