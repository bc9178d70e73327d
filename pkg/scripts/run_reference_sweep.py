#!/usr/bin/env python3
"""Run the full reference experiment grid and write every CSV to one directory.

Seven SNR points at 10^6 frames each, then the system model for five
production coefficients and both control mechanisms. Takes roughly half an
hour on one core; ``--frames`` trades accuracy for time.

    python3 scripts/run_reference_sweep.py --out results/reference
    python3 scripts/plot_figures.py results/reference
"""

import argparse
import sys

from scfbuf.cli import main


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/reference")
    ap.add_argument("--frames", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=0, help="0 uses every core")
    return ap.parse_args()


if __name__ == "__main__":
    a = parse_args()
    sys.exit(main([
        "sweep", "--preset", "paper", "--out", a.out,
        "--set", f"frames={a.frames}", "--set", f"seed={a.seed}", "--set", f"workers={a.workers}",
    ]))
