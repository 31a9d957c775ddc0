"""Regress shear force from decomposed marker fields and score the model on
held-out presses.

Run: python3 demos/estimate_shear.py [--samples 300]
"""

import argparse
import time

import numpy as np

from gripsense import force, sim


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=300)
    parser.add_argument("--holdout", type=int, default=90)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    t0 = time.perf_counter()
    pairs, labels = sim.make_shear_dataset(
        args.samples, rng=np.random.default_rng(args.seed))
    feats = force.build_shear_features(pairs)
    split = args.samples - args.holdout
    model = force.fit_shear_model(feats[:split], labels[:split])
    preds = np.array([force.predict_shear(f, model) for f in feats[split:]])
    truth = labels[split:]

    ss_res = float(np.sum((preds - truth) ** 2))
    ss_tot = float(np.sum((truth - truth.mean(axis=0)) ** 2))
    mag_p = np.hypot(preds[:, 0], preds[:, 1])
    mag_t = np.hypot(truth[:, 0], truth[:, 1])
    mape = float(np.mean(np.abs(mag_p - mag_t) / mag_t))
    print(f"trained on {split} presses, held out {args.holdout}: "
          f"r2 {1.0 - ss_res / ss_tot:.4f}, magnitude mape "
          f"{100.0 * mape:.2f}%, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
