"""Kaplan-Yorke dimension against the diffusion coefficient.

A reduced version of the acceptance sweep (coarser grid, shorter windows).
The log-log slope comes out near -1/2 in one dimension.
"""

from dynbc import DimensionScenario, expected_dimension, sweep_nu, upper_bound_dim

scenario = DimensionScenario(n=101, dt=0.01, T_transient=5.0, T_average=20.0)
nus = [0.02, 0.01, 0.005, 0.0025]
res = sweep_nu(nus, scenario)
for nu, d in zip(res.nus, res.dims):
    print(f"nu = {nu:<7g} KY dimension {d:6.2f}   linearisation at zero {expected_dimension(scenario, nu):6.2f}")
print(f"slope {res.slope:.3f}, 95% CI [{res.ci[0]:.3f}, {res.ci[1]:.3f}], target {res.target}")
print("closed-form bound at nu = 0.01, C* = 4, c1 C_W = 1:", upper_bound_dim(4.0, 0.01, 1.0, 1))
