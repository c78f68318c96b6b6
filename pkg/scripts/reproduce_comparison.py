#!/usr/bin/env python3
"""Run the full strategy comparison and Bayesian analysis in one go.

Writes per-episode CSV/JSON logs, the aggregated sweep summary, the
analysis report, and difference-of-means histogram CSVs under --out.
"""

import argparse
from pathlib import Path

import yaml

from viewpath.cli import analyze_logs, run_one, write_sweep_summary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seeds", type=int, nargs="+",
                    default=list(range(10)))
    ap.add_argument("--strategies", nargs="+",
                    default=["focus", "no_path", "sampling"])
    ap.add_argument("--scenario", type=Path, default=None,
                    help="scenario YAML (package defaults if omitted)")
    ap.add_argument("--rope", type=Path, default=None,
                    help="YAML overriding the per-metric ROPE half-widths")
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for seed in args.seeds:
        for strategy in args.strategies:
            if (args.out / f"episode_s{seed}_{strategy}.json").exists():
                print(f"skip seed={seed} strategy={strategy} (done)")
                continue
            print(f"run  seed={seed} strategy={strategy}", flush=True)
            run_one(args.scenario, seed, strategy, args.out)
    write_sweep_summary(args.out)
    report = analyze_logs(args.out, args.rope)
    for key, comp in report["comparisons"].items():
        print(f"{key}: median={comp['median']:+.4g} "
              f"HDI=({comp['hdi_low']:.4g}, {comp['hdi_high']:.4g}) "
              f"-> {comp['verdict']}")


if __name__ == "__main__":
    main()
