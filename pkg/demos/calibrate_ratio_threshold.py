"""Pilot calibration of the thresholds used by two "positive stable fraction" statistics.

Both are drawn on pilot seed batches that the test suite never uses:

* birth-death, s = 0 weights: median over runs of min_{1<=k<K} N(k,k+1)/k;
* spiral walk: 0.7-quantile over runs of min_{k<=32} D(k)/g_2(k), where D(k)
  counts moves from S(k+1) to S(k) before the walk reaches radius 128.

The test suite freezes the printed values.
"""
import argparse

import numpy as np

from tracelab.bd_chain import g, kozma_weights, sample_counts_infinite
from tracelab.planar_spiral import SpiralConfig, simulate


def min_ratio(crossings: np.ndarray, K: int) -> np.ndarray:
    return (crossings[:, 1:K] / np.arange(1, K)).min(axis=1)


def min_down_ratio(cov, k_max: int = 32) -> float:
    ks = np.arange(1, k_max + 1)
    return float((cov.down_transitions[:k_max] / g(2, ks)).min())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=2000)
    ap.add_argument("--spiral-runs", type=int, default=300)
    ap.add_argument("--seed", type=int, default=990_001)
    ap.add_argument("--K", type=int, default=1 << 10)
    args = ap.parse_args()

    sample = sample_counts_infinite(kozma_weights(0), args.K, args.runs, args.seed)
    r = min_ratio(sample.crossings, args.K)
    c = float(np.median(r))
    print(f"birth-death pilot: runs={args.runs} seed={args.seed} K={args.K}")
    print(f"  quantiles 10/25/50/75%: {np.quantile(r, [0.1, 0.25, 0.5, 0.75]).round(4).tolist()}")
    print(f"  threshold (median) = {c:.6g}, fraction at or above: {(r >= c).mean():.3f}")

    d = np.array([min_down_ratio(simulate(SpiralConfig(horizon=128, seed=args.seed + s)))
                  for s in range(args.spiral_runs)])
    c2 = float(np.quantile(d, 0.7))
    print(f"spiral pilot: runs={args.spiral_runs} seeds from {args.seed}, horizon 128")
    print(f"  threshold (0.7-quantile) = {c2:.6g}, fraction at or above: {(d >= c2).mean():.3f}")


if __name__ == "__main__":
    main()
