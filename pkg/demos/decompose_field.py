"""Split a marker displacement field into curl-free, divergence-free and
harmonic parts and verify the decomposition properties numerically.

Run: python3 demos/decompose_field.py [--size 24]
"""

import argparse

import numpy as np

from gripsense import force
from gripsense.core import DisplacementField


def _stats(name, field):
    v = field.values
    curl_rms = float(np.sqrt(np.mean(force.curl(field) ** 2)))
    div_rms = float(np.sqrt(np.mean(force.divergence(field) ** 2)))
    print(f"  {name}: energy {float(np.sum(v ** 2)):8.2f}   "
          f"curl rms {curl_rms:.2e}   div rms {div_rms:.2e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=24)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    v = DisplacementField(rng.normal(0.0, 1.0, (args.size, args.size, 2)))
    out = force.hhd_decompose(v)
    resid = np.abs(out.P.values + out.S.values + out.H.values - v.values).max()

    print(f"random field on a {args.size}x{args.size} grid:")
    _stats("curl-free  P", out.P)
    _stats("div-free   S", out.S)
    _stats("harmonic   H", out.H)
    print(f"  reassembly residual {resid:.2e}")

    # a pure stretch (gradient of a bump) should land almost entirely in P
    xs = np.linspace(-1.0, 1.0, args.size)
    xm, ym = np.meshgrid(xs, xs)
    bump = np.exp(-4.0 * (xm ** 2 + ym ** 2))
    grad = DisplacementField(np.stack(
        [-8.0 * xm * bump, -8.0 * ym * bump], axis=-1))
    parts = force.hhd_decompose(grad)
    total = float(np.sum(grad.values ** 2))
    print("pure gradient field: "
          f"{100.0 * np.sum(parts.P.values ** 2) / total:.1f}% in P, "
          f"{100.0 * np.sum(parts.S.values ** 2) / total:.2f}% in S")


if __name__ == "__main__":
    main()
