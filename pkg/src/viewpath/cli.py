"""Batch entry point: single episodes, seeded sweeps, and the Bayesian
analysis pipeline.

Outputs per episode: a deterministic CSV step log (wall-clock planner time
is deliberately kept out of it) and a JSON summary carrying the wall-clock
figures. `analyze` consumes a directory of those files.

Exit codes: 0 success, 2 config error, 3 episode abort, 4 analysis error.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import math
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import bayes
from . import voxel_world as vw
from .scenario import STRATEGIES, EpisodeLog, ScenarioConfig, run_episode

CSV_FIELDS = ("step", "nbv_id", "coverage", "entropy", "sim_time_s",
              "plan_rays", "min_d_tilde", "timed_out", "infeasible_steps")

METRICS = ("coverage", "entropy", "total_time")


def episode_csv_rows(log: EpisodeLog):
    for s in log.steps:
        yield {
            "step": s.step,
            "nbv_id": s.nbv_id,
            "coverage": f"{s.coverage:.6f}",
            "entropy": f"{s.entropy:.6f}",
            "sim_time_s": f"{s.sim_time:.6f}",
            "plan_rays": s.plan_rays,
            "min_d_tilde": f"{s.min_d_tilde:.6f}",
            "timed_out": int(s.timed_out),
            "infeasible_steps": s.infeasible_steps,
        }


def write_episode(log: EpisodeLog, config: ScenarioConfig, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"episode_s{log.seed}_{log.strategy}"
    with open(out_dir / f"{stem}.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in episode_csv_rows(log):
            writer.writerow(row)
    final = log.final()
    half = np.array(config.box_size) / 2.0
    n_box = (math.ceil(config.box_size[0] / config.resolution)
             * math.ceil(config.box_size[1] / config.resolution)
             * math.ceil(config.box_size[2] / config.resolution))
    summary = {
        "seed": log.seed,
        "strategy": log.strategy,
        "steps": len(log.steps),
        "aborted": log.aborted,
        "coverage": final.coverage,
        "entropy": final.entropy,
        "sim_time_s": final.sim_time,
        "plan_time_s": final.plan_time,
        "total_time": final.sim_time + final.plan_time,
        "plan_rays": final.plan_rays,
        "min_d_tilde": log.min_d_tilde,
        "visibility_checked": log.visibility_checked,
        "visibility_ok": log.visibility_ok,
        "infeasible_steps": log.infeasible_steps,
        "max_box_entropy": n_box * vw.voxel_entropy(0.5),
    }
    with open(out_dir / f"{stem}.json", "w") as f:
        json.dump(summary, f, indent=2)
    return summary


def run_one(scenario_path, seed, strategy, out_dir: Path):
    config = (ScenarioConfig.from_yaml(scenario_path) if scenario_path
              else ScenarioConfig())
    config = dataclasses.replace(config, seed=seed, strategy=strategy)
    log = run_episode(config)
    summary = write_episode(log, config, out_dir)
    return log, summary


@click.group()
def main():
    """Visibility-aware view path planning simulation suite."""


@main.command("run")
@click.option("--scenario", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Scenario YAML (defaults apply if omitted).")
@click.option("--seed", type=int, required=True)
@click.option("--strategy", type=click.Choice(STRATEGIES), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              required=True)
def cmd_run(scenario, seed, strategy, out_dir):
    """Run a single episode and write its CSV log + JSON summary."""
    try:
        log, _ = run_one(scenario, seed, strategy, Path(out_dir))
    except (OSError, yaml.YAMLError, TypeError, AssertionError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    if log.aborted:
        click.echo("episode aborted (controller infeasibility)", err=True)
        sys.exit(3)


@main.command("sweep")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False),
              required=True)
def cmd_sweep(manifest):
    """Run the seeds x strategies product from a manifest YAML.

    Manifest keys: scenario (path, optional), seeds (list), strategies
    (list), out_dir, jobs (optional; VIEWPATH_JOBS env var otherwise).
    Completed (seed, strategy) pairs are skipped on resume.
    """
    try:
        with open(manifest) as f:
            spec = yaml.safe_load(f)
        seeds = list(spec["seeds"])
        strategies = list(spec["strategies"])
        out_dir = Path(spec["out_dir"])
        scenario = spec.get("scenario")
        assert seeds and strategies
        for s in strategies:
            assert s in STRATEGIES, f"unknown strategy {s!r}"
    except (OSError, yaml.YAMLError, KeyError, AssertionError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    jobs = int(spec.get("jobs", os.environ.get("VIEWPATH_JOBS", "1")))
    pairs = [(seed, strat) for seed, strat
             in itertools.product(seeds, strategies)
             if not (out_dir / f"episode_s{seed}_{strat}.json").exists()]
    failures = 0
    if jobs > 1 and len(pairs) > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(run_one, scenario, seed, strat, out_dir):
                    (seed, strat) for seed, strat in pairs}
            for fut in cf.as_completed(futs):
                try:
                    fut.result()
                except Exception as exc:
                    click.echo(f"episode {futs[fut]} failed: {exc}", err=True)
                    failures += 1
    else:
        for seed, strat in pairs:
            try:
                run_one(scenario, seed, strat, out_dir)
            except Exception as exc:
                click.echo(f"episode ({seed}, {strat}) failed: {exc}",
                           err=True)
                failures += 1

    write_sweep_summary(out_dir)
    if failures:
        click.echo(f"{failures} episode(s) failed", err=True)
        sys.exit(3)


def write_sweep_summary(out_dir: Path):
    """Aggregate mean/sd per metric per strategy from the JSON summaries."""
    rows = []
    by_strategy = {}
    for path in sorted(out_dir.glob("episode_s*.json")):
        with open(path) as f:
            summary = json.load(f)
        by_strategy.setdefault(summary["strategy"], []).append(summary)
    for strat, entries in sorted(by_strategy.items()):
        row = {"strategy": strat, "episodes": len(entries)}
        for metric in METRICS:
            vals = np.array([e[metric] for e in entries])
            row[f"{metric}_mean"] = f"{vals.mean():.6f}"
            row[f"{metric}_sd"] = f"{vals.std(ddof=1) if len(vals) > 1 else 0.0:.6f}"
        rows.append(row)
    if not rows:
        return
    with open(out_dir / "sweep_summary.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def load_logs(logs_dir: Path):
    groups = {}
    for path in sorted(logs_dir.glob("episode_s*.json")):
        with open(path) as f:
            summary = json.load(f)
        groups.setdefault(summary["strategy"], []).append(summary)
    return groups


def default_ropes(groups) -> dict:
    """Coverage +-0.01; entropy +-1% of the max bounding-box entropy;
    time +-5% of the no_path mean (all recomputed at this suite's scale)."""
    ropes = {"coverage": 0.01}
    any_entries = next(iter(groups.values()))
    ropes["entropy"] = 0.01 * any_entries[0]["max_box_entropy"]
    if "no_path" in groups:
        mean_t = float(np.mean([e["total_time"]
                                for e in groups["no_path"]]))
        ropes["total_time"] = 0.05 * mean_t
    else:
        all_t = [e["total_time"] for g in groups.values() for e in g]
        ropes["total_time"] = 0.05 * float(np.mean(all_t))
    return ropes


def analyze_logs(logs_dir: Path, rope_file, out_path=None, seed: int = 0,
                 draws: int = bayes.N_DRAWS):
    groups = load_logs(logs_dir)
    if len(groups) < 2:
        raise ValueError("need at least two strategies' logs to compare")
    ropes = default_ropes(groups)
    if rope_file:
        with open(rope_file) as f:
            ropes.update(yaml.safe_load(f) or {})

    report = {"ropes": ropes, "comparisons": {}}
    hist_dir = logs_dir if out_path is None else Path(out_path).parent
    for a, b in itertools.combinations(sorted(groups), 2):
        for metric in METRICS:
            xa = [e[metric] for e in groups[a]]
            xb = [e[metric] for e in groups[b]]
            post = bayes.fit_t_model(xa, xb, seed=seed, draws=draws,
                                     burn=min(bayes.N_BURN, draws // 4))
            diff = post.mean_difference
            interval = bayes.hdi(diff)
            rope = (-ropes[metric], ropes[metric])
            verdict = bayes.rope_decision(interval, rope)
            key = f"{a}_vs_{b}.{metric}"
            report["comparisons"][key] = {
                "median": float(np.median(diff)),
                "hdi_low": interval[0],
                "hdi_high": interval[1],
                "rope": list(rope),
                "verdict": verdict.label,
                "overlap": verdict.overlap,
                "acceptance_rate": post.acceptance_rate,
            }
            counts, edges = np.histogram(diff, bins=60)
            with open(hist_dir / f"diff_{key}.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["bin_left", "bin_right", "count"])
                for i, c in enumerate(counts):
                    writer.writerow([f"{edges[i]:.8g}",
                                     f"{edges[i + 1]:.8g}", int(c)])
    out = Path(out_path) if out_path else logs_dir / "analysis.json"
    with open(out, "w") as f:
        json.dump(report, f, indent=2)
    return report


@main.command("analyze")
@click.option("--logs", "logs_dir", type=click.Path(exists=True,
              file_okay=False), required=True)
@click.option("--rope", "rope_file", type=click.Path(exists=True,
              dir_okay=False), default=None)
def cmd_analyze(logs_dir, rope_file):
    """Difference-of-means analysis over final-NBV metrics per strategy."""
    try:
        analyze_logs(Path(logs_dir), rope_file)
    except Exception as exc:
        click.echo(f"analysis error: {exc}", err=True)
        sys.exit(4)


if __name__ == "__main__":
    main()
