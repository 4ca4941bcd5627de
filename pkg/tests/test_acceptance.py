"""Acceptance criteria, one test per criterion.

Every test records a single ``PASS``/``FAIL`` line; the lines are printed as
they happen (visible with ``-s``) and again in the terminal summary. Run
``python tests/test_acceptance.py`` to get only the twelve lines.
"""

import functools
import time

import numpy as np
import pytest

from dynbc.attractor import DimensionScenario, expected_dimension, sweep_nu, upper_bound_dim
from dynbc.blowup import blowup_experiment, construct_subsolution, dirichlet_eigenpair, ode_compare
from dynbc.diagnostics import detect_absorbing_set, detect_blowup, linf_bound, norm_ladder
from dynbc.grid import StateField, build_interval_grid, build_rectangle_grid, x2_norm_sq, x_inner, x_norm
from dynbc.hypotheses import classify_regime
from dynbc.nonlinear import FluxSpec, Nonlinearity
from dynbc.solver import SolverConfig, coercivity_probe, energy, monotonicity_check, simulate

RESULTS = {}

cubic = Nonlinearity.cubic()


def criterion(k, name):
    """Record one PASS/FAIL line for criterion ``k``; exceptions count as FAIL."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*a, **kw):
            t0 = time.perf_counter()
            try:
                ok, detail = fn(*a, **kw)
            except Exception as exc:
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            line = f"{'PASS' if ok else 'FAIL'} {k:2d} {name}: {detail} [{time.perf_counter() - t0:.1f} s]"
            RESULTS[k] = line
            print(line)
            assert ok, line

        return wrapper

    return deco


# --- 1 ----------------------------------------------------------------------


def _exact(x, t):
    return np.exp(-t) * np.cos(np.pi * x)


def _mms_h1(X, t):
    u = _exact(X[:, 0], t)
    return -u + np.pi**2 * u + u**3


def _mms_h2(X, t):
    x = X[:, 0]
    out = np.where(x < 0.5, -1.0, 1.0)
    dn = out * (-np.pi * np.exp(-t) * np.sin(np.pi * x))
    u = _exact(x, t)
    return -u + dn + u**3


def _mms_error(n, dt, T):
    g = build_interval_grid(n)
    x = g.coords[:, 0]
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, h1=_mms_h1, h2=_mms_h2, dt=dt, adaptive=False,
                       record_energy=False, snapshot_stride=10**9)
    rec = simulate(StateField.from_bulk(_exact(x, 0.0), g), T, cfg, g)
    return float(np.max(np.abs(rec.snapshots[-1].u - _exact(x, rec.t_end))))


@criterion(1, "manufactured solution orders")
def test_c01_mms():
    t0 = time.perf_counter()
    et = [_mms_error(801, dt, 1.0) for dt in (1e-2, 5e-3, 2.5e-3)]
    ex = [_mms_error(n, 2e-5, 0.05) for n in (51, 101, 201)]
    ot = np.log2(np.array(et[:-1]) / et[1:])
    ox = np.log2(np.array(ex[:-1]) / ex[1:])
    wall = time.perf_counter() - t0
    ok = bool(np.all(np.abs(ot - 1.0) <= 0.3) and np.all(np.abs(ox - 2.0) <= 0.3) and wall < 60)
    return ok, f"temporal {np.round(ot, 3).tolist()}, spatial {np.round(ox, 3).tolist()}"


# --- 2 ----------------------------------------------------------------------


@criterion(2, "operator monotonicity and coercivity")
def test_c02_operator():
    g = build_rectangle_grid(11, 11)
    rng = np.random.default_rng(2)
    worst = {}
    for p in (2.0, 3.0, 4.0):
        flux = FluxSpec.power(p, 1.0, 0.0 if p == 2 else 1e-8)
        vals = []
        for _ in range(1000):
            a, b = 10 ** rng.uniform(-2, 1, size=2)
            U = StateField.from_bulk(a * rng.standard_normal(g.n), g)
            V = StateField.from_bulk(b * rng.standard_normal(g.n), g)
            vals.append(monotonicity_check(U, V, flux, g))
        worst[p] = min(vals)
    U = StateField.from_bulk(np.cos(np.pi * g.coords[:, 0]) * g.coords[:, 1] + 0.2, g)
    r = coercivity_probe(U, FluxSpec.power(3.0, 1.0, 1e-8), g, [1.0, 10.0, 100.0])
    growth = r[1:] / r[:-1]
    ok = all(v >= -1e-12 for v in worst.values()) and bool(np.all(growth >= 10.0))
    return ok, f"min pairing {min(worst.values()):.3e}, coercivity growth per x10 {np.round(growth, 1).tolist()}"


# --- 3 ----------------------------------------------------------------------


def _energy_run(dt, T=1.0):
    g = build_interval_grid(101)
    x = g.coords[:, 0]
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, dt=dt, adaptive=False, snapshot_stride=1)
    return g, cfg, simulate(StateField.from_bulk(np.cos(np.pi * x) + 0.5, g), T, cfg, g)


@criterion(3, "proximal energy inequality and residual halving")
def test_c03_energy():
    g, cfg, rec = _energy_run(2e-3)
    S = rec.snapshots
    worst = max(energy(b, cfg, g) + x_inner(b - a, b - a, g) / cfg.dt - energy(a, cfg, g) for a, b in zip(S[:-1], S[1:]))
    _, _, fine = _energy_run(1e-3)
    probe = np.array([0.25, 0.5, 1.0])
    coarse_r = np.abs(np.interp(probe, rec.times[1:], rec.energy_residual[1:]))
    fine_r = np.abs(np.interp(probe, fine.times[1:], fine.energy_residual[1:]))
    ratio = fine_r / coarse_r
    ok = worst <= 1e-9 and bool(np.all((ratio >= 0.4) & (ratio <= 0.6)))
    return ok, f"worst violation {worst:.2e}, residual ratios {np.round(ratio, 3).tolist()}"


# --- 4 and 5 ----------------------------------------------------------------


def _ensemble():
    g = build_interval_grid(101)
    x = g.coords[:, 0]
    cfg = SolverConfig(FluxSpec.constant(1.0), cubic, cubic, h1=1.0, h2=1.0, dt=1e-4, dt_max=0.05)
    recs = [simulate(StateField.from_bulk(s * np.cos(np.pi * x), g), 10.0, cfg, g) for s in (1, 10, 100)]
    return g, cfg, recs


@pytest.fixture(scope="module")
def ensemble():
    return _ensemble()


@criterion(4, "absorbing set independent of the data")
def test_c04_absorbing(ensemble):
    _, _, recs = ensemble
    rep = detect_absorbing_set(recs)
    te = rep.entry_times
    ok = all(rep.absorbed) and rep.spread <= 0.05 and te[0] < te[1] < te[2]
    return ok, f"C0 {rep.C0:.4f}, spread {rep.spread:.2e}, entry times {np.round(te, 4).tolist()}"


@criterion(5, "sup-norm plateau and Moser ladder")
def test_c05_linf(ensemble):
    g, cfg, recs = ensemble
    rep = linf_bound(recs)
    gaps = []
    for rec in recs:
        for S in rec.snapshots:
            L = norm_ladder(S, cfg.flux.p, 12, g)
            sup = x_norm(S, np.inf, np.inf, g)
            gaps.append(abs(L.roots[12] - sup) / sup)
    ok = rep.spread <= 0.05 and max(gaps) <= 0.02
    return ok, f"plateau spread {rep.spread:.2e}, worst ladder gap {max(gaps):.2e} over {len(gaps)} snapshots"


# --- 6 ----------------------------------------------------------------------


@criterion(6, "competing regime stays bounded")
def test_c06_competing():
    g = build_interval_grid(101)
    flux = FluxSpec.constant(1.0)
    f, gg = cubic, Nonlinearity.linear(-1.0)
    verdict = classify_regime(f, gg, flux, g)
    cfg = SolverConfig(flux, f, gg, dt=1e-3, dt_max=0.1, snapshot_stride=10**9)
    rng = np.random.default_rng(6)
    x = g.coords[:, 0]
    sups, aborts = [], 0
    for _ in range(20):
        k = np.arange(1, 7)
        u0 = 10 ** rng.uniform(0, 1.5) * (rng.standard_normal() + np.cos(np.pi * np.outer(x, k)) @ (rng.standard_normal(6) / k))
        rec = simulate(StateField.from_bulk(u0, g), 50.0, cfg, g)
        aborts += rec.termination != "horizon"
        sups.append(float(np.max(rec.norm_xinf[rec.times >= 25.0])) if rec.termination == "horizon" else np.inf)
    ok = verdict.fired.startswith("maxi") and verdict.margin > 0 and aborts == 0 and bool(np.all(np.isfinite(sups)))
    return ok, (f"{verdict.verdict} via {verdict.fired.split(':')[0]} margin {verdict.margin:.3g}; "
                f"{20 - aborts}/20 reached T=50, late sup-norm <= {max(sups):.4f}")


# --- 7 ----------------------------------------------------------------------


@criterion(7, "stability of nearby trajectories")
def test_c07_stability():
    g = build_interval_grid(101)
    x = g.coords[:, 0]
    ci = Nonlinearity.polynomial([0, -1, 0, 1])  # f' = 3u^2 - 1 >= -1
    cfg = SolverConfig(FluxSpec.constant(1.0), ci, ci, dt=1e-3, adaptive=False, snapshot_stride=1, record_energy=False)
    U0 = StateField.from_bulk(np.cos(2 * np.pi * x) + 0.3, g)
    rng = np.random.default_rng(7)
    d = StateField.from_bulk(np.sin(np.pi * x) + 0.1 * rng.standard_normal(g.n), g)
    d = d * (1e-3 / np.sqrt(x2_norm_sq(d, g)))
    a = simulate(U0, 2.0, cfg, g)
    b = simulate(U0 + d, 2.0, cfg, g)
    d0 = x2_norm_sq(d, g)
    t = a.snapshot_times
    dd = np.array([x2_norm_sq(p - q, g) for p, q in zip(a.snapshots, b.snapshots)])
    ratio = dd / (np.exp(4.5 * t) * d0)
    # t = 0 is equality by construction, so only round-off is allowed there
    ok = bool(np.allclose(a.snapshot_times, b.snapshot_times)) and abs(ratio[0] - 1.0) <= 1e-12
    ok = ok and bool(np.all(ratio[1:] <= 1.0))
    return ok, f"max ||dU||^2 / (e^(4.5t) ||dU0||^2) = {ratio[1:].max():.3e} on 0 < t <= 2"


# --- 8 ----------------------------------------------------------------------


@criterion(8, "regularisation Cauchy decrease at p = 3")
def test_c08_eps():
    g = build_interval_grid(101)
    x = g.coords[:, 0]
    U0 = StateField.from_bulk(np.cos(np.pi * x) + 0.5 * np.cos(3 * np.pi * x), g)
    finals = {}
    for eps in (1e-4, 1e-6, 1e-8):
        cfg = SolverConfig(FluxSpec.power(3.0, 1.0, eps), cubic, cubic, dt=1e-3, adaptive=False, record_energy=False,
                           snapshot_stride=10**9)
        finals[eps] = simulate(U0, 1.0, cfg, g).snapshots[-1]
    gap1 = x_norm(finals[1e-4] - finals[1e-6], 2, 2, g)
    gap2 = x_norm(finals[1e-6] - finals[1e-8], 2, 2, g)
    return gap2 <= gap1, f"gaps {gap1:.3e} then {gap2:.3e}"


# --- 9 ----------------------------------------------------------------------


@criterion(9, "blow-up lab and ODE oracle")
def test_c09_blowup():
    g = build_interval_grid(201)
    f, gg = Nonlinearity.cubic(-1.0), Nonlinearity.power(5, 1.0)
    recipe = construct_subsolution(f, gg, g)
    delta_ref = 2.0 * float(gg(np.array(recipe.A))) / np.pi**2
    rel = recipe.delta / delta_ref - 1.0
    rep = blowup_experiment(f, gg, g)
    ode = ode_compare(f, 2.0, 1.0)
    fit = detect_blowup(ode.record)
    ok = (abs(rel) <= 0.01 and rep.solution.blew_up and rep.comparison.passed
          and abs(fit.T_star - 0.125) <= 1e-3 and abs(fit.exponent + 0.5) <= 0.1)
    return ok, (f"delta rel err {rel:.2e}; PDE abort at t={rep.solution.t_end:.4f}; comparison worst "
                f"{rep.comparison.worst_violation:.2e} (tol {rep.comparison.tol:.1e}); ODE T* {fit.T_star:.6f} "
                f"exponent {fit.exponent:.4f}")


# --- 10 ---------------------------------------------------------------------


@criterion(10, "Dirichlet eigenpair")
def test_c10_eigenpair():
    e = dirichlet_eigenpair(build_interval_grid(401), nu=1.0)
    rel = e.lam / np.pi**2 - 1.0
    ok = abs(rel) <= 1e-3 and bool(np.all(e.dn_phi < 0))
    return ok, f"lambda/pi^2 - 1 = {rel:.2e}, d_n phi = {np.round(e.dn_phi, 4).tolist()}"


# --- 11 ---------------------------------------------------------------------


@pytest.mark.slow
@criterion(11, "dimension scaling in nu")
def test_c11_sweep():
    t0 = time.perf_counter()
    res = sweep_nu([0.02, 0.01, 0.005, 0.0025], DimensionScenario())
    wall = time.perf_counter() - t0
    ok = (not res.partial) and -0.7 <= res.slope <= -0.3 and wall <= 1800
    detail = (f"N=1 dims {np.round(res.dims, 2).tolist()}, slope {res.slope:.3f} "
              f"CI [{res.ci[0]:.3f}, {res.ci[1]:.3f}]")
    try:  # two-dimensional trend, reported only
        r2 = sweep_nu([0.32, 0.16, 0.08, 0.04], DimensionScenario(dim=2, n=17, dt=0.01, T_transient=5.0, T_average=20.0))
        detail += f"; N=2 slope {r2.slope:.3f} (not gating, target -1)"
    except Exception as exc:  # pragma: no cover
        detail += f"; N=2 not run ({exc})"
    return ok, detail


# --- 12 ---------------------------------------------------------------------


@criterion(12, "upper-bound calculator")
def test_c12_upper_bound():
    exact = upper_bound_dim(1, 1, 1, 2) == 2.0 and upper_bound_dim(3, 1, 1, 3) == 16.0
    mono = True
    for C in np.linspace(0.5, 5.0, 5):
        for nu in np.geomspace(0.01, 1.0, 5):
            for N in (1, 2, 3):
                mono &= upper_bound_dim(C, nu * 1.001, 1.0, N) < upper_bound_dim(C, nu, 1.0, N)
    return bool(exact and mono), "N=2 -> 2, N=3 with C*=3 -> 16, decreasing in nu on 5x5 grid (N = 1, 2, 3)"


if __name__ == "__main__":
    import inspect
    import sys

    tests = [(n, fn) for n, fn in sorted(globals().items()) if n.startswith("test_c")]
    ens = None
    for name, fn in tests:
        kwargs = {}
        if "ensemble" in inspect.signature(fn).parameters:
            ens = ens or _ensemble()
            kwargs["ensemble"] = ens
        try:
            fn(**kwargs)
        except AssertionError:
            pass
    sys.exit(0 if all(line.startswith("PASS") for line in RESULTS.values()) else 1)
