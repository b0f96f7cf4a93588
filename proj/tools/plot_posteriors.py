"""Plot the posterior CSV written by `netcausal predict`.

usage: python tools/plot_posteriors.py post.csv [out.png]
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(argv):
    if len(argv) < 2:
        sys.exit(__doc__.strip())
    curves = defaultdict(lambda: ([], []))
    with open(argv[1], newline="") as f:
        for row in csv.DictReader(f):
            xs, ys = curves[(row["method"], float(row["treatment_value"]))]
            xs.append(float(row["grid_point"]))
            ys.append(float(row["density"]))

    fig, ax = plt.subplots(figsize=(7, 4))
    for (method, theta), (xs, ys) in sorted(curves.items()):
        ax.plot(xs, ys, linestyle="-" if method == "adjusted" else "--", label=f"{method} {theta:g}")
    ax.set_xlabel("outcome")
    ax.set_ylabel("density")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(argv[2] if len(argv) > 2 else "posteriors.png", dpi=120)


if __name__ == "__main__":
    main(sys.argv)
