#!/usr/bin/env python3
"""Plot average trials, FER curves and buffer occupancy from a sweep directory.

Reads fig2_tav.csv, sweep_summary.csv and the occupancy_*.csv files written
by ``scfbuf sweep`` and saves PNGs next to them. Needs matplotlib.
"""

import argparse
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from scfbuf.harness import read_header  # noqa: E402


def table(path):
    _, lines = read_header(path)
    cols = lines[0].split(",")
    return [dict(zip(cols, ln.split(","))) for ln in lines[1:]]


def plot_tav(d: Path, snr: float):
    rows = [r for r in table(d / "fig2_tav.csv") if float(r["snr"]) == snr]
    tmax = [int(r["tmax"]) for r in rows]
    tav = [float(r["t_av"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(tmax, tav, color="tab:blue", edgecolor="black")
    for u, style in ((12 / 11, "-"), (9 / 8, "--")):
        ax.axhline(u, ls=style, color="gray", label=f"upsilon={u:.3f}")
    ax.set(xlabel="T_max", ylabel="average trials", ylim=(0.98, max(tav) + 0.02), title=f"{snr:g} dB")
    ax.legend()
    fig.tight_layout()
    fig.savefig(d / "avg_trials.png", dpi=150)


def plot_fer_vs_snr(d: Path, upsilon: Fraction):
    rows = [r for r in table(d / "sweep_summary.csv") if Fraction(r["upsilon"]) == upsilon]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    multi = sorted((float(r["snr"]), float(r["fer"])) for r in rows if r["mechanism"] == "multi")
    drop = sorted((float(r["snr"]), float(r["fer"])) for r in rows if r["mechanism"] == "drop")
    ideal = sorted({(float(r["snr"]), float(r["fer_ideal"])) for r in rows if r["mechanism"] == "multi"})
    for pts, label, mk in ((ideal, "ideal", "o"), (multi, "multi-threshold", "D"), (drop, "codeword dropping", "^")):
        if pts:
            x, y = zip(*pts)
            ax.semilogy(x, y, marker=mk, label=label)
    ax.axhline(1e-2, color="gray", lw=0.5)
    ax.set(xlabel="Eb/N0 [dB]", ylabel="FER", title=f"upsilon={upsilon}")
    ax.grid(True, which="both", lw=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(d / "fer_vs_snr.png", dpi=150)


def plot_fer_vs_rate(d: Path, snr: float):
    rows = [r for r in table(d / "sweep_summary.csv") if float(r["snr"]) == snr]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for mech, mk in (("multi", "D"), ("drop", "^")):
        pts = sorted((float(Fraction(r["upsilon"])), float(r["fer"])) for r in rows if r["mechanism"] == mech)
        if pts:
            x, y = zip(*pts)
            ax.plot(x, y, marker=mk, label=mech)
    if rows:
        ax.axhline(float(rows[0]["fer_ideal"]), color="black", ls="--", label="ideal T_max=11")
    ax.set(xlabel="upsilon", ylabel="FER", title=f"{snr:g} dB")
    ax.legend()
    fig.tight_layout()
    fig.savefig(d / "fer_vs_rate.png", dpi=150)


def plot_occupancy(d: Path, step: int):
    files = sorted(d.glob("occupancy_*.csv"))
    if not files:
        return
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for f in files:
        _, lines = read_header(f)
        occ = np.loadtxt(lines[1:], delimiter=",", dtype=np.int64)
        ax.plot(occ[::step, 0], occ[::step, 1], lw=0.6, label=f.stem.rsplit("_", 1)[-1])
    ax.set(xlabel="time unit", ylabel="occupied slots", ylim=(0, 101))
    ax.legend()
    fig.tight_layout()
    fig.savefig(d / "occupancy.png", dpi=150)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dir", type=Path)
    ap.add_argument("--snr", type=float, default=2.25)
    ap.add_argument("--upsilon", default="9/8")
    ap.add_argument("--step", type=int, default=5000, help="occupancy subsampling")
    a = ap.parse_args()
    plot_tav(a.dir, a.snr)
    plot_fer_vs_snr(a.dir, Fraction(a.upsilon))
    plot_fer_vs_rate(a.dir, a.snr)
    plot_occupancy(a.dir, a.step)
    print(f"figures written to {a.dir}")
