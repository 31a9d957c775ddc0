"""Fit the motor-current to normal-force line on noisy samples and report
held-in accuracy plus the recovered calibration.

Run: python3 demos/estimate_normal_force.py [--samples 10000]
"""

import argparse

import numpy as np

from gripsense import force, sim


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    currents, truths = sim.make_force_samples(
        args.samples, rng=np.random.default_rng(args.seed))
    model = force.fit_normal_force(np.column_stack([currents, truths]))
    preds = force.predict_normal_force(currents, model)

    ss_res = float(np.sum((preds - truths) ** 2))
    ss_tot = float(np.sum((truths - truths.mean()) ** 2))
    mape = float(np.mean(np.abs(preds - truths) / truths))
    print(f"fitted force = {model.slope:.4f} * current + {model.intercept:.4f}"
          f"  (simulator line inverts to {1.0 / sim.CURRENT_GAIN:.4f} and "
          f"{-sim.CURRENT_OFFSET / sim.CURRENT_GAIN:.4f})")
    print(f"{args.samples} samples: r2 {1.0 - ss_res / ss_tot:.4f}, "
          f"mape {100.0 * mape:.2f}%")


if __name__ == "__main__":
    main()
