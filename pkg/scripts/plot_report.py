#!/usr/bin/env python3
"""Render an analyze report as figures: e2e CCDF with the delay targets,
component contribution bars, and the frame-relative timing histograms.

Usage:
    python scripts/plot_report.py runs/a/report.json -o runs/a/report.png
"""

import argparse
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

MS = 1_000_000.0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("report")
    ap.add_argument("-o", "--output", default="report.png")
    args = ap.parse_args()
    report = json.loads(open(args.report).read())

    fig, axes = plt.subplots(2, 2, figsize=(11, 8))

    ax = axes[0][0]
    delays = [d / MS for d, _ in report["ccdf"]]
    probs = [p for _, p in report["ccdf"]]
    ax.semilogy(delays, [max(p, 1e-9) for p in probs], drawstyle="steps-post")
    for t in report["targets"]:
        ax.axvline(t["tau_ms"], color="red", ls="--", lw=0.8)
        ax.axhline(t["epsilon"], color="gray", ls=":", lw=0.8)
    ax.set_xlabel("e2e delay (ms)")
    ax.set_ylabel("P(delay > x)")
    ax.set_title("CCDF / delay violation probability")

    ax = axes[0][1]
    contrib = report["contributions"]["all_packets"]["mean_of_ratios"]
    names = list(contrib)
    ax.bar(names, [contrib[n] for n in names])
    ax.set_ylabel("mean share of e2e delay")
    ax.set_title("component contributions (all packets)")

    for ax, kind, color in ((axes[1][0], "arrival", "tab:blue"),
                            (axes[1][1], "departure", "tab:green")):
        h = report["histograms"][kind]
        xs = [i * h["bin_width_ns"] / MS for i in range(len(h["counts"]))]
        ax.bar(xs, h["counts"], width=h["bin_width_ns"] / MS, color=color)
        ax.set_xlabel("time since arrival-frame start (ms)")
        ax.set_title(f"{kind} times")

    fig.tight_layout()
    fig.savefig(args.output, dpi=130)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
