#!/usr/bin/env python3
"""Run every bundled experiment config through the CLI.

Usage: python3 scripts/run_all_experiments.py [out_root]
"""

import sys
import pathlib

from nlstable.cli import main

ROOT = pathlib.Path(__file__).resolve().parents[1]

RUNS = [
    ("solve", "solve_default"),
    ("solve", "solve_asymmetric"),
    ("clt", "clt_corner"),
    ("hypothesis", "hypothesis_condition_iii"),
    ("hypothesis", "hypothesis_example_41"),
    ("regularity", "regularity_clipped_linear"),
]

if __name__ == "__main__":
    out_root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out")
    worst = 0
    for command, name in RUNS:
        cfg = ROOT / "configs" / f"{name}.json"
        print(f"== {command} {name} ==")
        code = main([command, "--config", str(cfg),
                     "--out", str(out_root / name)])
        worst = max(worst, code)
    sys.exit(worst)
