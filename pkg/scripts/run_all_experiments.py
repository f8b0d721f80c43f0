#!/usr/bin/env python3
"""Run the full four-experiment evaluation and write reports + traces.

Usage:
    python scripts/run_all_experiments.py [--seed 2024] [--outdir results]

Experiment 1 uses 300 scenarios, the others 100, matching the default
evaluation protocol. Expect a few minutes of wall time; the evolutionary
attack in experiment 2 dominates.
"""

import argparse
import sys
from pathlib import Path

from dfcr.experiments import (
    default_experiment_config,
    run_experiment,
    write_report,
    write_traces,
)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--outdir", type=str, default="results")
    parser.add_argument("--scenarios", type=int, default=None,
                        help="override scenario count for every experiment")
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for experiment in (1, 2, 3, 4):
        config = default_experiment_config(experiment, args.scenarios)
        report, rows = run_experiment(experiment, config, args.seed)
        write_report(report, outdir / f"experiment{experiment}_report.json")
        write_traces(rows, outdir / f"experiment{experiment}_traces.csv")
        print(f"experiment {experiment}: {report.scenario_count} scenarios, "
              f"{report.runtime_s:.1f}s")
        for name in sorted(report.systems):
            m = report.systems[name]
            print(f"  {name:>22}: mse={m.mse:.4f} rmse={m.rmse:.4f} mae={m.mae:.4f}")
        for key in sorted(report.wilcoxon):
            w = report.wilcoxon[key]
            print(f"  wilcoxon[{key}]: p={w.p_value:.3e} (n={w.n_effective}, {w.method})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
