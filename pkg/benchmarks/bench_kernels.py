"""Throughput comparison of the accelerated kernels against pure numpy.

The homography warp and the scattered-marker interpolation each ship in two
arithmetically identical implementations; this script times both on
representative workloads and reports the speedup. When numba is unavailable
(or disabled via ``GRIPSENSE_DISABLE_NUMBA=1``) the accelerated alias resolves
to the numpy path, which the script detects and reports.

Run: python3 benchmarks/bench_kernels.py [--repeats 30]
"""

import argparse
import time

import numpy as np

from gripsense import _kernels


def _median_ms(func, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times)) * 1000.0


def _warp_case(h, w, rng):
    img = rng.random((h, w, 3))
    # mild projective tilt, representative of the rectification step
    hmat = np.array([[1.02, 0.01, -3.0],
                     [-0.008, 0.99, 2.0],
                     [1e-5, -2e-5, 1.0]])
    return img, hmat, h, w


def _idw_case(n_markers, grid, rng):
    px = rng.uniform(0.0, 480.0, n_markers)
    py = rng.uniform(0.0, 480.0, n_markers)
    vals = rng.normal(0.0, 1.0, (n_markers, 2))
    node_x = np.linspace(0.0, 480.0, grid)
    node_y = np.linspace(0.0, 480.0, grid)
    return px, py, vals, node_x, node_y


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=30,
                        help="timed runs per case (median reported)")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = []
    for h, w in ((240, 320), (480, 640)):
        cases.append((f"warp {h}x{w}", _kernels.warp_bilinear,
                      _kernels.warp_bilinear_numpy, _warp_case(h, w, rng)))
    for n, grid in ((81, 24), (225, 48)):
        cases.append((f"idw {n} markers -> {grid}x{grid}",
                      _kernels.idw_interpolate,
                      _kernels.idw_interpolate_numpy, _idw_case(n, grid, rng)))

    if not _kernels.USING_NUMBA:
        print("accelerated path unavailable or disabled; "
              "both columns run pure numpy")
    print(f"{'case':<28} {'numpy ms':>10} {'accel ms':>10} {'speedup':>9}")
    for name, fast, plain, case_args in cases:
        fast(*case_args)                      # warm (jit compile, caches)
        plain(*case_args)
        t_plain = _median_ms(plain, case_args, args.repeats)
        t_fast = _median_ms(fast, case_args, args.repeats)
        print(f"{name:<28} {t_plain:>10.3f} {t_fast:>10.3f} "
              f"{t_plain / max(t_fast, 1e-9):>8.1f}x")


if __name__ == "__main__":
    main()
