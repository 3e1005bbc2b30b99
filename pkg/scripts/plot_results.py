"""Plot per-path delay ECDFs and error histograms from simulate outputs.

    python scripts/plot_results.py RUN_DIR [RUN_DIR ...] --out figure.png

Each RUN_DIR must contain ``ecdf.csv`` and ``peaks.csv`` (as written by
``chsplice simulate`` or ``scripts/reproduce_figures.py --out-dir``).
Needs the ``plots`` extra (matplotlib).
"""
from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("runs", nargs="+", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results.png"))
    args = ap.parse_args()

    fig, (ax_cdf, ax_err) = plt.subplots(1, 2, figsize=(11, 4))
    for run in args.runs:
        series = defaultdict(lambda: ([], [], None))
        for row in read_csv(run / "ecdf.csv"):
            xs, ps, _ = series[row["path"]]
            xs.append(float(row["delay_ns"]))
            ps.append(float(row["probability"]))
            series[row["path"]] = (xs, ps, float(row["true_delay_ns"]))
        for path, (xs, ps, true_ns) in sorted(series.items()):
            ax_cdf.step(xs, ps, where="post", label=f"{run.name} path {path} ({true_ns:g} ns)")

        errors = [float(r["error_samples"]) for r in read_csv(run / "peaks.csv") if r["error_samples"]]
        ax_err.hist(errors, bins=31, range=(-3, 3), histtype="step", label=run.name)

    ax_cdf.set_xlabel("estimated delay [ns]")
    ax_cdf.set_ylabel("empirical CDF")
    ax_cdf.legend(fontsize=7)
    ax_err.set_xlabel("delay error [wideband samples]")
    ax_err.set_ylabel("count")
    ax_err.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
