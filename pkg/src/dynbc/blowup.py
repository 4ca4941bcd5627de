"""Finite-time blow-up by comparison with a Dirichlet companion problem.

The construction: take the first Dirichlet eigenpair ``(lambda_1, phi_1)``
of ``-nu Laplace``, a level ``A`` beyond which the dominating concave ``h``
decays faster than ``-lambda_1 s``, and a scale ``delta`` making the
boundary row of ``w0 = delta phi_1 + A`` nonpositive. Then ``w0 + v`` is a
subsolution of the dynamic-boundary problem whenever ``v`` solves the
reaction-diffusion equation with ``v = 0`` on the boundary, so blow-up of
``v`` forces blow-up of every solution starting above ``w0 + v(0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate, optimize

from .diagnostics import BlowupFit, detect_blowup
from .grid import GridDomain, StateField
from .nonlinear import FluxSpec, Nonlinearity
from .solver import SolverConfig, TrajectoryRecord, simulate

__all__ = [
    "EigenPair",
    "HCriterion",
    "SubsolutionRecipe",
    "OdeResult",
    "ComparisonReport",
    "BlowupReport",
    "dirichlet_eigenpair",
    "check_h_criterion",
    "construct_subsolution",
    "ode_compare",
    "verify_comparison",
    "blowup_experiment",
]


@dataclass
class EigenPair:
    lam: float
    phi: np.ndarray
    dn_phi: np.ndarray


def dirichlet_eigenpair(grid: GridDomain, nu: float = 1.0) -> EigenPair:
    """Smallest eigenpair of ``-nu Laplace`` with zero boundary values.

    Uses the grid's stiffness matrix with lumped mass (the standard
    finite-difference Laplacian on these grids). ``phi`` is
    normalised to unit integral and vanishes on the boundary.
    """
    I = grid.interior
    D = grid.grad_op
    K = (D.T @ sp.diags(np.repeat(grid.cell_volumes, grid.dim)) @ D).tocsr()[I][:, I]
    m = grid.weights[I]
    s = 1.0 / np.sqrt(m)
    S = (sp.diags(s) @ K @ sp.diags(s)).tocsc()
    if S.shape[0] <= 400:
        w, v = np.linalg.eigh(S.toarray())
        mu, vec = w[0], v[:, 0]
    else:
        try:
            w, v = spla.eigsh(S, k=1, sigma=0.0, which="LM", tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise RuntimeError("Dirichlet eigensolve did not converge") from exc
        mu, vec = w[0], v[:, 0]
    phi = np.zeros(grid.n)
    phi[I] = s * vec
    if phi[I].sum() < 0:
        phi = -phi
    phi /= np.dot(grid.weights, phi)
    return EigenPair(float(nu * mu), phi, grid.normal_op @ phi)


@dataclass
class HCriterion:
    passed: bool
    s0_prime: float
    integral: float
    integral_converged: bool
    tail_slope_ok: bool
    concave: bool
    notes: list = field(default_factory=list)


def _num_deriv(h, s):
    e = 1e-6 * np.maximum(1.0, np.abs(s))
    return (h(s + e) - h(s - e)) / (2 * e)


def check_h_criterion(h: Callable, s0: float, lam: float, dh: Optional[Callable] = None, smax: float = 1e6) -> HCriterion:
    """Tail slope ``h' < -lam`` and integrability of ``1/|h|`` at infinity.

    The integral is accumulated over blocks of ``x = log s`` whose lengths
    double; it is declared convergent when the block contributions shrink
    geometrically (ratio at most 0.9 over the last three blocks) or become
    negligible. The lower limit is moved to ``max(2 s0, s0 + 1)`` so that a
    zero of ``h`` at ``s0`` does not count as divergence.
    """
    dh = dh or (lambda s: _num_deriv(h, s))
    s = s0 + np.geomspace(1e-3, smax, 600)
    hv = np.asarray(h(s), dtype=float)
    if np.any(np.diff(hv) > 1e-9 * np.maximum(1.0, np.abs(hv[1:]))):
        raise ValueError("h is not monotone nonincreasing on the sampled range")
    notes = []
    d = np.asarray(dh(s), dtype=float)
    bad = np.flatnonzero(d >= -lam)
    if bad.size == 0:
        s0p = float(s0)
    elif bad[-1] == s.size - 1:
        s0p = float("inf")
    else:
        i = bad[-1]
        try:
            s0p = float(optimize.brentq(lambda z: float(dh(np.array(z))) + lam, s[i], s[i + 1], xtol=1e-14, rtol=1e-14))
        except ValueError:
            s0p = float(s[i + 1])
    top = s >= smax / 10
    tail_ok = bool(np.all(d[top] < -lam))
    second = np.diff(d)
    concave = bool(np.all(second <= 1e-8 * np.maximum(1.0, np.abs(d[1:]))))
    if not concave:
        notes.append("h is not concave on the sampled range")

    start = max(2.0 * s0, s0 + 1.0)
    x0 = np.log(start)
    blocks = []
    k = 0
    while True:
        a, b = x0 + (2.0**k - 1.0), x0 + (2.0 ** (k + 1) - 1.0)
        if a > 700:
            break
        b = min(b, 700.0)

        def integrand(x):
            with np.errstate(over="ignore"):
                hv_ = abs(float(h(np.array(np.exp(x)))))
            return 0.0 if not np.isfinite(hv_) or hv_ == np.inf else np.exp(x) / hv_

        blocks.append(integrate.quad(integrand, a, b, limit=200)[0])
        k += 1
    blocks = np.array(blocks)
    total = float(blocks.sum())
    tail = blocks[-4:]
    ratios = tail[1:] / np.where(tail[:-1] > 0, tail[:-1], np.inf)
    converged = bool(np.all(ratios <= 0.9) or tail[-1] <= 1e-12 * max(total, 1e-300))
    passed = bool(converged and tail_ok and np.isfinite(s0p))
    return HCriterion(passed, s0p, total if converged else float("inf"), converged, tail_ok, concave, notes)


@dataclass
class SubsolutionRecipe:
    A: float
    delta: float
    phi: np.ndarray
    lam: float
    dn_phi: np.ndarray
    w0: np.ndarray
    s0: float
    s0_prime: float
    notes: list = field(default_factory=list)


def _find_s0(h: Callable, smax: float = 1e6) -> float:
    s = np.concatenate([[0.0], np.geomspace(1e-6, smax, 800)])
    hv = np.asarray(h(s), dtype=float)
    if hv[-1] >= 0:
        raise ValueError("no dominating h: the bulk term is not eventually negative")
    nonneg = np.flatnonzero(hv >= 0)
    return float(s[nonneg[-1]]) if nonneg.size else 0.0


def construct_subsolution(f: Nonlinearity, g: Nonlinearity, grid: GridDomain, nu: float = 1.0,
                          h: Optional[Callable] = None, dh: Optional[Callable] = None, s0: Optional[float] = None) -> SubsolutionRecipe:
    """Level ``A`` and scale ``delta`` of the stationary part ``w0 = delta phi_1 + A``.

    ``h`` defaults to ``f`` itself. ``delta`` is the smallest value meeting
    the boundary inequality at every boundary node, times ``1 + 1e-6``.
    """
    if h is None:
        h, dh = f, f.d
    s_check = np.geomspace(1e-6, 1e6, 400)
    if np.any(f(s_check) > h(s_check) + 1e-12 * np.abs(h(s_check))):
        raise ValueError("h does not dominate f on the sampled range")
    if s0 is None:
        s0 = _find_s0(h)
    eig = dirichlet_eigenpair(grid, nu)
    crit = check_h_criterion(h, s0, eig.lam, dh=dh)
    if not crit.passed:
        raise ValueError("dominating h fails the slope or integrability criterion")
    notes = list(crit.notes)
    A = max(s0, crit.s0_prime, 0.0)
    gA = float(g(np.array(A)))
    if gA <= 0:
        delta = 1.0
        notes.append("g(A) <= 0: boundary inequality holds for every delta")
    else:
        dn = eig.dn_phi
        if np.any(dn >= 0):
            raise ValueError("discrete normal derivative of phi_1 is not negative on the whole boundary")
        delta = float(np.max(gA / (nu * grid.b * np.abs(dn)))) * (1.0 + 1e-6)
    return SubsolutionRecipe(A, delta, eig.phi, eig.lam, eig.dn_phi, delta * eig.phi + A, s0, crit.s0_prime, notes)


@dataclass
class OdeResult:
    times: np.ndarray
    u: np.ndarray
    T_star: Optional[float]
    blew_up: bool
    record: TrajectoryRecord


def _scalar_record(t, u, dt, termination) -> TrajectoryRecord:
    nan = np.full(t.size, np.nan)
    return TrajectoryRecord(
        times=t, dt=dt, norm_x2=np.abs(u), norm_xinf=np.abs(u), grad_lp=np.zeros(t.size), energy=nan,
        energy_residual=nan, newton_iters=np.zeros(t.size, dtype=int), flux_energy=np.zeros(t.size),
        lr1=nan, snapshot_times=t, snapshots=[], termination=termination,
    )


def ode_compare(h: Callable, u0: float, T: float, threshold: float = 1e8, npts: int = 400) -> OdeResult:
    """Spatially homogeneous run of ``u' = -h(u)`` with the solver's abort rule.

    While ``-h`` keeps one sign the solution is monotone and time is the
    integral of ``1/|h|`` along the state; that form is integrated directly,
    which keeps full precision in the time to go near a singularity. Other
    cases fall back to an adaptive Runge-Kutta integration.
    """
    rhs = lambda z: -float(h(np.array(z)))
    u0 = float(u0)
    sgn = np.sign(rhs(u0)) * np.sign(u0) if u0 != 0 else 0.0
    if sgn > 0:
        target = np.sign(u0) * threshold
        grid_u = np.sign(u0) * np.geomspace(abs(u0), threshold, npts)
        if np.all(np.array([rhs(z) for z in grid_u]) * np.sign(u0) > 0):
            pieces = np.array([integrate.quad(lambda z: 1.0 / abs(rhs(z)), min(a, b), max(a, b), limit=200)[0]
                               for a, b in zip(grid_u[:-1], grid_u[1:])])
            t = np.concatenate([[0.0], np.cumsum(pieces)])
            if t[-1] <= T:
                # tail beyond the threshold with w = 1/s, which quad resolves far better than [a, inf)
                sg = np.sign(u0)
                rest = integrate.quad(lambda w: 1.0 / (w * w * abs(rhs(sg / w))) if w > 0 else 0.0,
                                      0.0, 1.0 / threshold, limit=200)[0]
                dt = np.concatenate([[0.0], pieces])
                rec = _scalar_record(t, grid_u, dt, "blow-up-abort")
                return OdeResult(t, grid_u, float(t[-1] + rest), True, rec)

    def ev(t, y):
        return abs(y[0]) - threshold

    ev.terminal = True
    sol = integrate.solve_ivp(lambda t, y: [rhs(y[0])], (0.0, T), [u0], method="LSODA", rtol=1e-10, atol=1e-12,
                              events=ev, dense_output=False)
    t, u = sol.t, sol.y[0]
    blew = bool(sol.status == 1)
    rec = _scalar_record(t, u, np.concatenate([[0.0], np.diff(t)]), "blow-up-abort" if blew else "horizon")
    return OdeResult(t, u, float(t[-1]) if blew else None, blew, rec)


@dataclass
class ComparisonReport:
    passed: bool
    worst_violation: float
    where: tuple
    margin: float
    tol: float


def _as_nodal(traj):
    if isinstance(traj, TrajectoryRecord):
        return traj.nodal()
    t, V = traj
    return np.asarray(t, dtype=float), np.asarray(V, dtype=float)


def _resample(t_src, V_src, t_dst):
    idx = np.clip(np.searchsorted(t_src, t_dst, side="right") - 1, 0, len(t_src) - 2)
    t0, t1 = t_src[idx], t_src[idx + 1]
    w = np.where(t1 > t0, (t_dst - t0) / np.where(t1 > t0, t1 - t0, 1.0), 0.0)
    w = np.clip(w, 0.0, 1.0)[:, None]
    return (1 - w) * V_src[idx] + w * V_src[idx + 1]


def verify_comparison(sub, sol, sup=None, tol: Optional[float] = None, h: Optional[float] = None,
                      dt: Optional[float] = None) -> ComparisonReport:
    """Nodewise ordering ``sub <= sol (<= sup)`` on the common time span.

    Trajectories are records or ``(times, values[nt, n])`` pairs; ``sub``
    (and ``sup``) are linearly resampled onto the times of ``sol``. The
    default tolerance is ``10 h^2 + 10 dt``.
    """
    ts, Vs = _as_nodal(sol)
    tb, Vb = _as_nodal(sub)
    if Vs.shape[1] != Vb.shape[1]:
        raise ValueError("trajectories live on different grids")
    if tol is None:
        tol = 10.0 * (h or 0.0) ** 2 + 10.0 * (dt or 0.0)
    t_hi = min(ts[-1], tb[-1])
    t_lo = max(ts[0], tb[0])
    keep = (ts >= t_lo) & (ts <= t_hi)
    tt, VV = ts[keep], Vs[keep]
    diffs = [(_resample(tb, Vb, tt) if tb.size > 1 else np.broadcast_to(Vb[0], VV.shape)) - VV]
    if sup is not None:
        tp, Vp = _as_nodal(sup)
        if Vp.shape[1] != Vs.shape[1]:
            raise ValueError("trajectories live on different grids")
        diffs.append(VV - (_resample(tp, Vp, tt) if tp.size > 1 else np.broadcast_to(Vp[0], VV.shape)))
    worst, where = -np.inf, (None, None)
    for d in diffs:
        k = np.unravel_index(int(np.argmax(d)), d.shape)
        if d[k] > worst:
            worst, where = float(d[k]), (int(k[1]), float(tt[k[0]]))
    return ComparisonReport(bool(worst <= tol), worst, where, -worst, float(tol))


@dataclass
class BlowupReport:
    recipe: SubsolutionRecipe
    v0: np.ndarray
    companion: TrajectoryRecord
    solution: TrajectoryRecord
    companion_fit: BlowupFit
    solution_fit: BlowupFit
    comparison: ComparisonReport
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _kaplan_level(h: Callable, lam: float, A: float) -> float:
    s = np.geomspace(max(A, 1e-3), 1e6, 800)
    ok = -np.asarray(h(s)) >= 2.0 * lam * s
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(s[0])
    if bad[-1] == s.size - 1:
        raise ValueError("h never dominates the eigenvalue growth")
    return float(s[bad[-1] + 1])


def blowup_experiment(f: Nonlinearity, g: Nonlinearity, grid: GridDomain, cfg: Optional[SolverConfig] = None,
                      nu: float = 1.0, T: Optional[float] = None, v0: Optional[np.ndarray] = None,
                      margin: float = 0.0) -> BlowupReport:
    """Subsolution recipe plus the two runs (Dirichlet companion and full problem), compared nodewise.

    ``v0`` defaults to a multiple of ``phi_1`` whose ``phi_1``-weighted mean
    is twice the level where ``-h(s) >= 2 lam s`` holds, which makes the
    companion blow up by the classical eigenfunction argument.
    """
    recipe = construct_subsolution(f, g, grid, nu)
    phi = recipe.phi
    if v0 is None:
        y0 = 2.0 * _kaplan_level(f, recipe.lam, recipe.A)
        v0 = y0 * phi / np.dot(grid.weights, phi * phi)
    v0 = np.asarray(v0, dtype=float)
    if cfg is None:
        cfg = SolverConfig(FluxSpec.constant(nu), f, g, dt=1e-4, dt_max=1e-2, adaptive=True, snapshot_stride=1)
    if T is None:
        T = 10.0
    comp_cfg = replace(cfg, boundary="dirichlet", record_energy=False)
    companion = simulate(StateField.from_bulk(v0, grid), T, comp_cfg, grid, snapshot_stride=1)
    u0 = recipe.w0 + v0 + margin
    solution = simulate(StateField.from_bulk(u0, grid), T, replace(cfg, record_energy=False), grid, snapshot_stride=1)
    cf = detect_blowup(companion)
    sf = detect_blowup(solution)
    tc, Vc = companion.nodal()
    sub = (tc, Vc + recipe.w0[None, :])
    cmp_ = verify_comparison(sub, solution, h=grid.h, dt=cfg.dt)
    checks = {
        "solution blew up": solution.blew_up,
        "companion blew up": companion.blew_up,
        "T* ordering": bool(solution.blew_up and (not companion.blew_up or sf.T_star <= cf.T_star + 10 * cfg.dt)),
        "comparison ordering": cmp_.passed,
    }
    return BlowupReport(recipe, v0, companion, solution, cf, sf, cmp_, checks)
