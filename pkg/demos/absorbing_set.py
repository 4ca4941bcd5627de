"""Absorbing ball and sup-norm bound for a forced cubic/cubic problem.

Data of very different size end up in the same ball; only the entry time
depends on the data. The Moser ladder of the final state converges to its
sup-norm.
"""

import numpy as np

from dynbc import (FluxSpec, Nonlinearity, SolverConfig, StateField, build_interval_grid, detect_absorbing_set,
                   linf_bound, norm_ladder, simulate, x_norm)

grid = build_interval_grid(101)
cubic = Nonlinearity.cubic()
cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, h1=1.0, h2=1.0, dt=1e-4, dt_max=0.05)
x = grid.coords[:, 0]
records = [simulate(StateField.from_bulk(s * np.cos(np.pi * x), grid), 10.0, cfg, grid) for s in (1, 10, 100)]

ab = detect_absorbing_set(records)
print(f"radius C0 = {ab.C0:.4f}, plateau spread {ab.spread:.1e}")
for s, t in zip((1, 10, 100), ab.entry_times):
    print(f"  scale {s:3d}: enters at t = {t:.4f}")
lb = linf_bound(records)
print(f"sup-norm plateau C1 = {lb.C1:.4f}, spread {lb.spread:.1e}")

U = records[-1].snapshots[-1]
L = norm_ladder(U, 2.0, 12, grid)
print("ladder roots:", np.round(L.roots[::3], 5), "sup-norm:", round(x_norm(U, np.inf, np.inf, grid), 5))
