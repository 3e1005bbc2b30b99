"""Run the two-path, four-path and ECDF scenarios and print a summary table.

    python scripts/reproduce_figures.py [--seed 1] [--packets 20] [--out-dir results]

With ``--out-dir`` each scenario's report.json / peaks.csv / ecdf.csv is
written to a subdirectory, ready for ``scripts/plot_results.py``.
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from chsplice.eval_harness import ecdf_scenario, four_path_scenario, run_scenario, two_path_scenario
from chsplice.traces import write_ecdf, write_peaks


def scenarios(seed: int, packets: int):
    for sub_bw in (80e6, 40e6, 20e6):
        m = int(160e6 // sub_bw)
        yield f"2path_{m}x{sub_bw / 1e6:.0f}_full", two_path_scenario(sub_bw, 1.0, seed=seed, packets=packets)
    for sub_bw in (80e6, 40e6, 20e6):
        m = int(80e6 // sub_bw)
        yield f"2path_{m}x{sub_bw / 1e6:.0f}_half", two_path_scenario(sub_bw, 0.5, seed=seed, packets=packets)
    yield "4path_4x40_full", four_path_scenario(40e6, 1.0, seed=seed, packets=packets)
    yield "4path_2x40_half", four_path_scenario(40e6, 0.5, seed=seed, packets=packets)
    yield "ecdf_4x20_full", ecdf_scenario(1.0, seed=seed)
    yield "ecdf_2x20_half", ecdf_scenario(0.5, seed=seed)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--packets", type=int, default=20)
    ap.add_argument("--out-dir", type=Path)
    args = ap.parse_args()

    print(f"{'scenario':<20} {'bands':<26} {'pkts':>5} {'<=1 smp':>8} {'<=3 smp':>8} {'missed':>7} {'time s':>7}")
    for name, cfg in scenarios(args.seed, args.packets):
        t0 = time.perf_counter()
        rep = run_scenario(cfg)
        dt = time.perf_counter() - t0
        print(f"{name:<20} {str(rep.bands):<26} {len(rep.packets):>5} {rep.fraction_within(1):>8.0%} "
              f"{rep.fraction_within(3):>8.0%} {rep.fraction_with_miss():>7.0%} {dt:>7.2f}")
        if args.out_dir is not None:
            out = args.out_dir / name
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.json").write_text(rep.to_json())
            write_peaks(out / "peaks.csv", rep)
            write_ecdf(out / "ecdf.csv", rep)


if __name__ == "__main__":
    main()
