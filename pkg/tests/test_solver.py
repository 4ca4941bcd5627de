import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynbc.grid import StateField, build_interval_grid, build_rectangle_grid, x_inner, x_norm
from dynbc.nonlinear import FluxSpec, Nonlinearity
from dynbc.solver import (
    NewtonFailure,
    SolverConfig,
    assemble_bp,
    coercivity_probe,
    discrete_form,
    energy,
    energy_identity_residual,
    linearized_matrix,
    monotonicity_check,
    pairing,
    simulate,
    solve_stationary,
    step_implicit,
)

cubic = Nonlinearity.cubic()


@pytest.fixture(scope="module")
def g1():
    return build_interval_grid(41)


@pytest.fixture(scope="module")
def g2():
    return build_rectangle_grid(9, 7, (1.0, 0.8))


def _rand(grid, rng, scale=1.0):
    return StateField.from_bulk(scale * rng.standard_normal(grid.n), grid)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
@pytest.mark.parametrize("which", ["g1", "g2"])
def test_pairing_reproduces_discrete_form(p, which, request, rng):
    grid = request.getfixturevalue(which)
    flux = FluxSpec.power(p, 1.0, 0.0 if p == 2 else 1e-8)
    for _ in range(5):
        U, W = _rand(grid, rng), _rand(grid, rng)
        lhs = pairing(assemble_bp(U, flux, grid), W, grid)
        rhs = discrete_form(U, W, flux, grid)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_monotonicity_random_pairs(p, g2, rng):
    flux = FluxSpec.power(p, 1.0, 0.0 if p == 2 else 1e-8)
    worst = min(monotonicity_check(_rand(g2, rng, 10 ** rng.uniform(-2, 1)), _rand(g2, rng), flux, g2) for _ in range(200))
    assert worst >= -1e-12


def test_coercivity_superlinear_for_p3(g1):
    U = StateField.from_bulk(np.cos(np.pi * g1.coords[:, 0]) + 0.3, g1)
    r = coercivity_probe(U, FluxSpec.power(3.0, 1.0, 1e-8), g1, [1.0, 10.0, 100.0])
    assert np.all(r[1:] / r[:-1] >= 10.0)
    with pytest.raises(ValueError):
        coercivity_probe(g1.zeros(), FluxSpec.power(3.0), g1, [1.0])


def test_assemble_linear_laplacian_on_quadratic():
    # u = x^2 on (0,1): -u'' + u = -2 + x^2 at interior nodes, d_n u = (0, 2) at the ends
    g = build_interval_grid(21)
    x = g.coords[:, 0]
    R = assemble_bp(StateField.from_bulk(x**2, g), FluxSpec.constant(1.0), g)
    inner = g.interior
    assert np.allclose(R.u[inner], -2.0 + x[inner] ** 2, atol=1e-9)
    assert np.allclose(R.v, [0.0, 2.0], atol=1e-9)


def test_one_step_matches_dense_linear_solve(g2, rng):
    cfg = SolverConfig(FluxSpec.constant(0.7), Nonlinearity.linear(1.5), Nonlinearity.linear(-0.5), h1=0.3, h2=-0.2,
                       dt=0.01)
    U0 = _rand(g2, rng)
    U1 = step_implicit(U0, cfg.dt, cfg, g2)
    M = g2.lumped_mass
    L = linearized_matrix(g2.zeros(), cfg, g2).toarray()
    rhs = M * U0.u / cfg.dt
    rhs += g2.weights * 0.3
    rhs[g2.boundary] += g2.boundary_measure * -0.2
    u = np.linalg.solve(np.diag(M / cfg.dt) + L, rhs)
    assert np.allclose(U1.u, u, atol=1e-10)
    assert np.allclose(U1.v, u[g2.boundary])


def test_zero_is_fixed_point(g2):
    cfg = SolverConfig(FluxSpec.power(3.0, 1.0, 1e-8), cubic, cubic)
    U = step_implicit(g2.zeros(), 0.1, cfg, g2)
    assert np.max(np.abs(U.u)) < 1e-12


def test_stationary_state_is_fixed_point(g1):
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, h1=lambda x, t: 1 + x[:, 0], h2=0.5)
    S = solve_stationary(cfg, g1, np.ones(g1.n))
    U = step_implicit(S, 0.5, cfg, g1)
    assert np.max(np.abs(U.u - S.u)) < 1e-9


def test_proximal_energy_inequality(g2, rng):
    cfg = SolverConfig(FluxSpec.power(3.0, 1.0, 1e-8), cubic, Nonlinearity.polynomial([0, -1, 0, 1]), h1=0.5, dt=0.01)
    U = _rand(g2, rng)
    for _ in range(20):
        V = step_implicit(U, cfg.dt, cfg, g2)
        D = V - U
        slack = energy(V, cfg, g2) + x_inner(D, D, g2) / cfg.dt - energy(U, cfg, g2)
        assert slack <= 1e-9
        U = V


def test_energy_identity_residual_is_exact_shadow(g1, rng):
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, dt=0.01)
    U0 = _rand(g1, rng)
    U1 = step_implicit(U0, cfg.dt, cfg, g1)
    D = U1 - U0
    assert energy_identity_residual(U0, U1, cfg.dt, cfg, g1) == pytest.approx(-x_inner(D, D, g1) / (2 * cfg.dt), rel=1e-8)


def test_energy_residual_halves_with_dt(g1):
    x = g1.coords[:, 0]
    U0 = StateField.from_bulk(np.cos(np.pi * x) + 0.5, g1)
    out = []
    for dt in (2e-3, 1e-3):
        cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, dt=dt, adaptive=False)
        rec = simulate(U0, 0.2, cfg, g1)
        out.append(np.abs(np.interp(0.1, rec.times[1:], rec.energy_residual[1:])))
    assert 0.4 <= out[1] / out[0] <= 0.6


def test_nonnegative_data_stay_nonnegative(g1):
    cfg = SolverConfig(FluxSpec.power(3.0, 1.0, 1e-8), cubic, cubic, dt=0.01)
    x = g1.coords[:, 0]
    rec = simulate(StateField.from_bulk(np.maximum(0.0, np.sin(3 * np.pi * x)), g1), 0.5, cfg, g1)
    assert rec.termination == "horizon"
    assert min(float(np.min(S.u)) for S in rec.snapshots) >= -1e-10


def test_dirichlet_mode_pins_boundary(g1):
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, dt=0.01, boundary="dirichlet")
    U = step_implicit(StateField.from_bulk(np.ones(g1.n), g1), 0.01, cfg, g1)
    assert np.all(U.v == 0.0) and np.all(U.u[g1.boundary] == 0.0)
    assert U.u[g1.n // 2] > 0.5


def test_simulate_record_shapes_and_csv(g1, tmp_path):
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, dt=0.01, snapshot_stride=5)
    rec = simulate(StateField.from_bulk(np.ones(g1.n), g1), 0.5, cfg, g1)
    assert rec.termination == "horizon" and rec.t_end == pytest.approx(0.5)
    n = rec.times.size
    assert all(v.size == n for v in rec.columns().values())
    assert np.all(np.diff(rec.norm_x2) <= 1e-12)  # h = 0, dissipative: the norm decays
    rec.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].split(",") == list(rec.CSV_COLUMNS) and len(lines) == n + 1


def test_blowup_abort_recorded(g1):
    cfg = SolverConfig(FluxSpec.constant(1.0), Nonlinearity.cubic(-1.0), Nonlinearity.cubic(-1.0), dt=1e-3, dt_max=1e-2)
    rec = simulate(StateField.from_bulk(2 * np.ones(g1.n), g1), 1.0, cfg, g1)
    assert rec.blew_up and rec.norm_xinf[-1] > 1e6
    assert 0.1 < rec.t_end < 0.13


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(FluxSpec.constant(1.0), cubic, cubic, dt=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(FluxSpec.constant(1.0), cubic, cubic, boundary="robin")


def test_nonfinite_state_rejected(g1):
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic)
    u = np.ones(g1.n)
    u[3] = np.nan
    with pytest.raises(ValueError):
        step_implicit(StateField.from_bulk(u, g1), 0.1, cfg, g1)


@settings(max_examples=25)
@given(st.floats(2.0, 5.0), st.integers(0, 2**31 - 1))
def test_monotone_property(p, seed):
    g = build_interval_grid(17)
    rng = np.random.default_rng(seed)
    flux = FluxSpec.power(p, 1.0, 1e-8)
    assert monotonicity_check(_rand(g, rng, 3.0), _rand(g, rng), flux, g) >= -1e-12


@settings(max_examples=20)
@given(st.floats(0.01, 0.5), st.integers(0, 2**31 - 1))
def test_x2_contraction_for_monotone_reaction(dt, seed):
    # with f, g nondecreasing and p = 2 one step is a contraction in X^2
    g = build_interval_grid(17)
    rng = np.random.default_rng(seed)
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic)
    U, V = _rand(g, rng), _rand(g, rng)
    A, B = step_implicit(U, dt, cfg, g), step_implicit(V, dt, cfg, g)
    assert x_norm(A - B, 2, 2, g) <= x_norm(U - V, 2, 2, g) * (1 + 1e-10)
