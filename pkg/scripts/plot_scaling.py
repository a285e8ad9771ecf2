#!/usr/bin/env python3
"""Plot steps/second vs batch size from a benchmark CSV.

Usage:
    pixelctrl bench --out results.csv
    python scripts/plot_scaling.py results.csv scaling.png
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from pixelctrl.bench import read_csv


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__)
        return 2
    csv_path, out_path = sys.argv[1], sys.argv[2]
    records = read_csv(csv_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    by_series: dict[tuple[str, str], list] = {}
    for r in records:
        by_series.setdefault((r.env_name, r.distractor_mode), []).append(r)
    for (env_name, mode), rows in sorted(by_series.items()):
        rows.sort(key=lambda r: r.batch)
        label = env_name if mode == "none" else f"{env_name} ({mode})"
        ax.plot(
            [r.batch for r in rows],
            [r.steps_per_second for r in rows],
            marker="o",
            label=label,
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("parallel environments")
    ax.set_ylabel("steps / second")
    ax.set_title(f"Throughput scaling ({records[0].resolution})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
