"""Run the three-strategy harvest ablation over both fruit populations and
print the per-cell success, gentleness and failure breakdown.

Run: python3 demos/compare_strategies.py [--trials 50]
"""

import argparse
import time

from gripsense import harvest


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    t0 = time.perf_counter()
    summaries = harvest.run_experiment(trials_per_cell=args.trials,
                                       seed=args.seed)
    elapsed = time.perf_counter() - t0

    print(f"{'fruit':<14} {'strategy':<11} {'success':>8} {'attempts':>9} "
          f"{'force mean':>11} {'force var':>10}  failures")
    for s in summaries:
        fails = ", ".join(f"{k} x{v}" for k, v in sorted(
            s.failure_counts.items())) or "-"
        print(f"{s.fruit_type:<14} {s.strategy:<11} "
              f"{s.success_rate:>8.2f} {s.mean_attempts:>9.2f} "
              f"{s.force_mean:>11.2f} {s.force_var:>10.2f}  {fails}")
    print(f"{args.trials} paired trials per cell, {elapsed:.1f} s")


if __name__ == "__main__":
    main()
