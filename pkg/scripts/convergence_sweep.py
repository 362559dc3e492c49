#!/usr/bin/env python3
"""Print the normalized-sum convergence table for one config.

Usage: python3 scripts/convergence_sweep.py configs/clt_corner.json
"""

import sys

from nlstable import config as config_mod
from nlstable.cli import run_clt

if __name__ == "__main__":
    cfg = config_mod.load(sys.argv[1])
    for line in run_clt(cfg, "out/sweep"):
        print(line)
