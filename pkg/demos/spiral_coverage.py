"""Why full box coverage is out of reach for the spiral walk at small radii.

For each sphere k the walk makes only a handful of radial moves, while
there are 8k radial edges to cover; on S(1) the side points never step
sideways, so the corners of S(1) are never entered.
"""
import numpy as np

from tracelab.planar_spiral import SpiralConfig, coverage_report, simulate

runs = [simulate(SpiralConfig(horizon=64, seed=s)) for s in range(50)]
reports = [coverage_report(c, 16) for c in runs]
print("uncovered edges in the radius-16 box (first 10 runs):", [r.n_uncovered for r in reports[:10]])
print(f"{'k':>3} {'radial edges':>12} {'mean radial crossings k<->k+1':>32} {'mean uncrossed':>15}")
for k in (1, 2, 4, 8, 15):
    moves = np.mean([c.n_up[k] + c.n_down[k + 1] for c in runs])
    unc = np.mean([r.radial_uncrossed[k] for r in reports])
    print(f"{k:>3} {8 * (k + 1) - 4:>12} {moves:>32.1f} {unc:>15.1f}")
corners = [c.count((1, 0), (1, 1)) for c in runs]
print("crossings of the edge (1,0)-(1,1) over all runs:", sum(corners))
