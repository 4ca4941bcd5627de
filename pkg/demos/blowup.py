"""Blow-up through the boundary.

The bulk term -u^3 is anti-dissipative and the boundary adds u^5. The
recipe builds the stationary subsolution w0 = delta phi_1 + A, the Dirichlet
companion starting from v0 blows up, and the full problem started above
w0 + v0 blows up no later.
"""

import numpy as np

from dynbc import Nonlinearity, blowup_experiment, build_interval_grid, detect_blowup, ode_compare

grid = build_interval_grid(201)
f, g = Nonlinearity.cubic(-1.0), Nonlinearity.power(5, 1.0)
rep = blowup_experiment(f, g, grid)
r = rep.recipe
print(f"lambda_1 = {r.lam:.5f} (pi^2 = {np.pi ** 2:.5f}), A = {r.A:.4f}, delta = {r.delta:.4f}")
print(f"closed form 2 g(A) / pi^2 = {2 * float(g(np.array(r.A))) / np.pi ** 2:.4f}")
print(f"companion T* ~ {rep.companion_fit.T_star:.5f}, solution T* ~ {rep.solution_fit.T_star:.5f}")
print(f"ordering worst violation {rep.comparison.worst_violation:.2e} (tolerance {rep.comparison.tol:.1e})")
print("checks:", rep.checks)

# the rate fit on an exactly solvable ODE
ode = ode_compare(f, 2.0, 1.0)
fit = detect_blowup(ode.record)
print(f"u' = u^3, u(0) = 2: T* = {fit.T_star:.6f} (exact 0.125), exponent {fit.exponent:.4f} (exact -0.5)")
