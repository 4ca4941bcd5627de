"""Which reaction pairs stay bounded?

Classifies a handful of bulk/boundary pairs and then integrates the
competing case f = u^3, g = -u: the boundary pumps energy in, the bulk
takes it out, and the sup-norm settles on a plateau.
"""

import numpy as np

from dynbc import FluxSpec, Nonlinearity, SolverConfig, StateField, build_interval_grid, classify_regime, simulate

grid = build_interval_grid(101)
flux = FluxSpec.constant(1.0)
pairs = {
    "u^3 vs -u": (Nonlinearity.cubic(), Nonlinearity.linear(-1.0)),
    "u^3 vs u^3": (Nonlinearity.cubic(), Nonlinearity.cubic()),
    "-u^3 vs u^5": (Nonlinearity.cubic(-1.0), Nonlinearity.power(5, 1.0)),
    "-u vs 5u": (Nonlinearity.linear(-1.0), Nonlinearity.linear(5.0)),
}
for label, (f, g) in pairs.items():
    r = classify_regime(f, g, flux, grid)
    print(f"{label:12s} -> {r.verdict:28s} ({r.fired})")

f, g = pairs["u^3 vs -u"]
cfg = SolverConfig(flux, f, g, dt=1e-3, dt_max=0.1)
x = grid.coords[:, 0]
for amp in (1.0, 10.0, 30.0):
    rec = simulate(StateField.from_bulk(amp * np.cos(2 * np.pi * x), grid), 20.0, cfg, grid)
    late = rec.norm_xinf[rec.times >= 10.0]
    print(f"amplitude {amp:5.1f}: {rec.termination}, late sup-norm {late.min():.4f} .. {late.max():.4f}")
