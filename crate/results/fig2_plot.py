#!/usr/bin/env python3
"""Plots fig2_bias_vs_dim results. Regenerate with `ald plot <csv> <script>`."""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV_PATH = "results/fig2.csv"
VARIANTS = ["green", "red"]
LOG_FLOOR = 1.00000000e-4
STEP_SEARCH = False


def load(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def main():
    rows = load(sys.argv[1] if len(sys.argv) > 1 else CSV_PATH)
    k_first = min(int(r["k"]) for r in rows) if rows else 0
    kl = defaultdict(list)
    steps = {}
    for r in rows:
        key = (r["variant"], int(r["d"]))
        if int(r["k"]) == k_first and r["kl"] != "diverged":
            kl[key].append(float(r["kl"]))
        steps[key] = r["steps"]
    has_search = STEP_SEARCH or any(s == "cap_exceeded" for s in steps.values())
    panels = 2 if has_search else 1
    fig, axes = plt.subplots(1, panels, figsize=(6 * panels, 4), squeeze=False)
    ax = axes[0][0]
    for v in VARIANTS:
        ds = sorted(d for (name, d) in kl if name == v)
        means = [sum(kl[(v, d)]) / len(kl[(v, d)]) for d in ds]
        ax.plot(ds, [m if m > 0 else LOG_FLOOR for m in means], marker="o", label=v)
    ax.set_yscale("log")
    ax.set_xlabel("d")
    ax.set_ylabel("KL (k = %d)" % k_first)
    ax.legend()
    if has_search:
        ax = axes[0][1]
        counts = [int(s) for s in steps.values() if s != "cap_exceeded"]
        cap = max(counts) if counts else 1
        for v in VARIANTS:
            ds = sorted(d for (name, d) in steps if name == v)
            ys = [int(steps[(v, d)]) if steps[(v, d)] != "cap_exceeded" else None for d in ds]
            ax.plot([d for d, y in zip(ds, ys) if y is not None], [y for y in ys if y is not None], marker="o", label=v)
            capped = [d for d, y in zip(ds, ys) if y is None]
            if capped:
                ax.scatter(capped, [cap * 1.1] * len(capped), marker="^", label=v + " (cap exceeded)")
        ax.set_xlabel("d")
        ax.set_ylabel("steps")
        ax.legend()
    fig.tight_layout()
    out = sys.argv[2] if len(sys.argv) > 2 else CSV_PATH.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main()
