#!/usr/bin/env python3
"""Plot the OPTICS reachability profile from a cluster-stage CSV.

Usage: python scripts/plot_reachability.py work/reachability.csv [out.png]
"""

import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else "reachability.png"

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    reach = [float(r["reachability"]) for r in rows]
    finite = [r for r in reach if math.isfinite(r)]
    ceiling = 1.2 * max(finite) if finite else 1.0
    bars = [r if math.isfinite(r) else ceiling for r in reach]

    fig, ax = plt.subplots(figsize=(10, 3.2))
    ax.bar(range(len(bars)), bars, width=1.0, color="#2a6f97")
    ax.set_xlabel("ordering index")
    ax.set_ylabel("reachability (deg)")
    ax.set_title("OPTICS reachability (run starts shown at the ceiling)")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
