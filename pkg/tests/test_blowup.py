import numpy as np
import pytest

from dynbc.blowup import (
    blowup_experiment,
    check_h_criterion,
    construct_subsolution,
    dirichlet_eigenpair,
    ode_compare,
    verify_comparison,
)
from dynbc.grid import build_interval_grid, build_rectangle_grid
from dynbc.nonlinear import Nonlinearity

f_bu, g_bu = Nonlinearity.cubic(-1.0), Nonlinearity.power(5, 1.0)


@pytest.fixture(scope="module")
def g():
    return build_interval_grid(101)


@pytest.mark.parametrize("n", [101, 401, 801])
def test_eigenpair_interval(n):
    e = dirichlet_eigenpair(build_interval_grid(n))
    assert e.lam == pytest.approx(np.pi**2, rel=1e-3)
    assert np.all(e.dn_phi < 0)
    # phi = (pi/2) sin(pi x) has unit integral and d_n phi = -pi^2/2 at both ends
    assert np.allclose(e.dn_phi, -np.pi**2 / 2, rtol=2e-3)


def test_eigenpair_scales_with_nu_and_length():
    e = dirichlet_eigenpair(build_interval_grid(201, 2.0), nu=0.5)
    assert e.lam == pytest.approx(0.5 * np.pi**2 / 4, rel=1e-3)


def test_eigenpair_square():
    e = dirichlet_eigenpair(build_rectangle_grid(31, 31))
    assert e.lam == pytest.approx(2 * np.pi**2, rel=5e-3)
    g = build_rectangle_grid(31, 31)
    assert np.all(e.phi[g.boundary] == 0) and np.all(e.phi[g.interior] > 0)
    assert np.dot(g.weights, e.phi) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "h,ok",
    [
        (lambda s: -s, False),
        (lambda s: -s * np.log(s + 2) ** 2, True),
        (lambda s: -s * np.log(s + 2), False),
        (lambda s: -(s**2), True),
        (lambda s: -(s**3) - s, True),
    ],
)
def test_h_criterion_examples(h, ok):
    assert check_h_criterion(h, 0.0, 1.0).passed is ok


def test_h_criterion_rejects_nonmonotone():
    with pytest.raises(ValueError):
        check_h_criterion(lambda s: -s**2 * (2 + np.sin(s)), 0.0, 1.0)


def test_recipe_delta_matches_closed_form():
    gr = build_interval_grid(201)
    r = construct_subsolution(f_bu, g_bu, gr)
    assert r.delta == pytest.approx(2 * float(g_bu(np.array(r.A))) / np.pi**2, rel=1e-2)
    assert r.A >= r.s0_prime >= r.s0
    assert np.allclose(r.w0, r.delta * r.phi + r.A)


def test_recipe_needs_dominating_h(g):
    with pytest.raises(ValueError):
        construct_subsolution(Nonlinearity.cubic(1.0), g_bu, g)


def test_recipe_dissipative_boundary(g):
    r = construct_subsolution(f_bu, Nonlinearity.linear(-1.0), g)
    assert r.delta == 1.0 and any("every delta" in n for n in r.notes)


@pytest.mark.parametrize("r,u0,T", [(3, 1.0, 1.0), (4, 2.0, 0.125), (5, 1.0, 1.0 / 3.0)])
def test_ode_blowup_time_closed_form(r, u0, T):
    # u' = u^(r-1) blows up at u0^(2-r) / (r-2)
    o = ode_compare(Nonlinearity.power(r, -1.0), u0, 2.0)
    assert o.blew_up and o.T_star == pytest.approx(T, rel=1e-6)


def test_ode_decay():
    o = ode_compare(lambda u: u, 1.0, 5.0)
    assert not o.blew_up and o.T_star is None
    assert o.u[-1] == pytest.approx(np.exp(-5.0), rel=1e-5)


def test_comparison_synthetic():
    t = np.linspace(0, 1, 11)
    base = np.outer(1 + t, np.ones(5))
    rep = verify_comparison((t, base - 0.1), (t, base), sup=(t, base + 0.1))
    assert rep.passed and rep.margin == pytest.approx(0.1)
    bad = base.copy()
    bad[4, 2] -= 0.5
    rep = verify_comparison((t, base - 0.1), (t, bad), tol=1e-3)
    assert not rep.passed and rep.where == (2, pytest.approx(0.4))
    with pytest.raises(ValueError):
        verify_comparison((t, base[:, :3]), (t, base))


def test_comparison_resamples_coarser_sub():
    ts = np.linspace(0, 1, 101)
    tb = np.linspace(0, 1, 6)
    sol = np.outer(ts**2, np.ones(3))
    sub = np.outer(tb**2 - 0.05, np.ones(3))
    assert verify_comparison((tb, sub), (ts, sol)).passed


def test_blowup_experiment(g):
    rep = blowup_experiment(f_bu, g_bu, g)
    assert rep.passed, rep.checks
    assert rep.solution_fit.T_star <= rep.companion_fit.T_star + 1e-3
    assert rep.comparison.worst_violation <= rep.comparison.tol


def test_blowup_experiment_log_entropy(g):
    rep = blowup_experiment(Nonlinearity.log_entropy(), Nonlinearity.linear(1.0), g)
    assert rep.passed, rep.checks
