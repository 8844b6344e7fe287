#!/usr/bin/env python3
"""Supported-threshold surface over sampled slots (r) and lookback depth (l)
at a fixed 72-slot window, written as CSV for external plotting.

Usage: python scripts/supported_threshold_grid.py [out.csv]
"""

import sys

from prism.analytic import min_supported_trh
from prism.config import PrismConfig


def main() -> int:
    out = open(sys.argv[1], "w") if len(sys.argv) > 1 else sys.stdout
    print("w,r,l,worst_x,t_hat,t_supported", file=out)
    for r in range(3, 10):
        for l in range(5, 46):
            bound = min_supported_trh(PrismConfig(w=72, r=r, l=l, ssq_capacity=13))
            print(f"72,{r},{l},{bound.worst_x},{bound.t_hat},{bound.t_supported}",
                  file=out)
    if out is not sys.stdout:
        out.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
