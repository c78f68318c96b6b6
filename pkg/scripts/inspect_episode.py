#!/usr/bin/env python3
"""Run a single episode and print its per-NBV step table to stdout.

Handy for eyeballing a seed/strategy before committing to a sweep.
"""

import argparse

from viewpath.scenario import ScenarioConfig, run_episode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--strategy", default="focus",
                    choices=["focus", "no_path", "sampling"])
    ap.add_argument("--n-nbv", type=int, default=10)
    args = ap.parse_args()

    log = run_episode(ScenarioConfig(seed=args.seed, strategy=args.strategy,
                                     n_nbv=args.n_nbv))
    print(f"{'step':>4} {'nbv':>4} {'coverage':>9} {'entropy':>12} "
          f"{'sim_s':>8} {'minD':>8}")
    for s in log.steps:
        print(f"{s.step:>4} {s.nbv_id:>4} {s.coverage:>9.4f} "
              f"{s.entropy:>12.0f} {s.sim_time:>8.1f} "
              f"{s.min_d_tilde:>8.4f}")
    if log.visibility_checked:
        frac = log.visibility_ok / log.visibility_checked
        print(f"visibility: {log.visibility_ok}/{log.visibility_checked} "
              f"({frac:.1%}) steps within FoV margins away from the goal")
    print(f"aborted={log.aborted} infeasible_steps={log.infeasible_steps}")


if __name__ == "__main__":
    main()
