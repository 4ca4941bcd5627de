"""Lyapunov spectra from tangent dynamics, and how the attractor dimension scales with the diffusion.

Only the semilinear case (constant flux) is linearised. Tangent vectors are
nodal fields whose boundary values are the trace, and all orthogonalisation
is done in the X^2 inner product, i.e. with the lumped mass weights.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats

from .grid import GridDomain, StateField, build_interval_grid, build_rectangle_grid
from .nonlinear import FluxSpec, Nonlinearity
from .solver import SolverConfig, TrajectoryRecord, linearized_matrix, step_implicit

__all__ = [
    "TangentBundle",
    "LyapunovResult",
    "DimensionScenario",
    "SweepResult",
    "tangent_step",
    "lyapunov_spectrum",
    "kaplan_yorke",
    "sweep_nu",
    "upper_bound_dim",
    "estimate_c_star",
    "expected_dimension",
]

MAX_DIRECTIONS = 32


def _require_semilinear(cfg: SolverConfig) -> None:
    if not cfg.flux.is_linear:
        raise NotImplementedError("tangent dynamics are only implemented for p = 2")
    if cfg.boundary != "dynamic":
        raise NotImplementedError("tangent dynamics need the dynamic boundary condition")


def _tangent_factor(U_t: StateField, dt: float, cfg: SolverConfig, grid: GridDomain):
    mass = grid.lumped_mass
    A = (sp.diags(mass / dt) + linearized_matrix(U_t, cfg, grid)).tocsc()
    return spla.splu(A), mass


def _as_matrix(Phi, grid):
    if isinstance(Phi, StateField):
        return Phi.u[:, None]
    return np.asarray(Phi, dtype=float).reshape(grid.n, -1)


def tangent_step(Phi, U_t: StateField, dt: float, cfg: SolverConfig, grid: GridDomain):
    """One backward-Euler step of the variational equation frozen at ``U_t``.

    Solves ``(M/dt + L(U_t)) Phi_new = M Phi / dt`` where ``M`` is the lumped
    X^2 mass and ``L`` the linearised operator. ``Phi`` is a
    :class:`StateField` (returned as one) or an ``(n, m)`` array of nodal
    columns.
    """
    _require_semilinear(cfg)
    lu, mass = _tangent_factor(U_t, dt, cfg, grid)
    X = _as_matrix(Phi, grid)
    out = lu.solve(mass[:, None] * X / dt)
    if isinstance(Phi, StateField):
        return StateField.from_bulk(out[:, 0], grid)
    return out


def _x2_qr(X: np.ndarray, sqm: np.ndarray):
    Q, R = np.linalg.qr(sqm[:, None] * X)
    return Q / sqm[:, None], R


@dataclass
class TangentBundle:
    """Orthonormal tangent frame carried along a base trajectory."""

    base: StateField
    Phi: np.ndarray
    log_growth: np.ndarray
    stride: int
    refills: int = 0

    @classmethod
    def random(cls, base: StateField, m: int, grid: GridDomain, stride: int = 1, seed: int = 0) -> "TangentBundle":
        rng = np.random.default_rng(seed)
        b = cls(base, rng.standard_normal((grid.n, m)), np.zeros(m), stride)
        b.reorthonormalize(grid, rng, accumulate=False)
        return b

    def reorthonormalize(self, grid: GridDomain, rng=None, accumulate: bool = True) -> None:
        """X^2 QR of the frame; degenerate directions are refilled at random."""
        sqm = np.sqrt(grid.lumped_mass)
        Q, R = _x2_qr(self.Phi, sqm)
        d = np.abs(np.diag(R))
        scale = max(float(d.max(initial=0.0)), 1e-300)
        bad = ~np.isfinite(d) | (d <= 1e-12 * scale)
        if np.any(bad):
            rng = rng or np.random.default_rng(self.refills)
            X = np.where(np.isfinite(Q), Q, 0.0)
            X[:, bad] = rng.standard_normal((grid.n, int(bad.sum())))
            Q, _ = _x2_qr(X, sqm)
            self.refills += int(bad.sum())
            d = np.where(bad, np.nan, d)
        sign = np.sign(np.diag(R))
        sign[sign == 0] = 1.0
        self.Phi = Q * np.where(bad, 1.0, sign)[None, :]
        if accumulate:
            with np.errstate(divide="ignore"):
                self.log_growth += np.where(bad, np.log(np.finfo(float).tiny), np.log(np.where(bad, 1.0, d)))

    def gram(self, grid: GridDomain) -> np.ndarray:
        m = grid.lumped_mass
        return self.Phi.T @ (m[:, None] * self.Phi)


@dataclass
class LyapunovResult:
    exponents: np.ndarray
    kaplan_yorke: float
    converged: bool
    halves: tuple
    drift: float
    T_average: float
    refills: int
    final_state: StateField = field(repr=False, default=None)


def lyapunov_spectrum(U0: StateField, cfg: SolverConfig, grid: GridDomain, m: int, T_transient: float,
                      T_average: float, dt: Optional[float] = None, stride: int = 1, seed: int = 0) -> LyapunovResult:
    """Leading ``m`` Lyapunov exponents of the backward-Euler flow.

    The base state and ``m`` tangents are advanced with fixed steps; growth
    is discarded during ``T_transient`` (which aligns the frame) and
    averaged over ``T_average``. The frame is reorthonormalised every
    ``stride`` steps. The result is flagged as not
    converged when the Kaplan-Yorke dimensions (or, if both vanish, the
    leading exponents) from the two halves of the window differ by more
    than 10%.
    """
    _require_semilinear(cfg)
    if not 1 <= m <= MAX_DIRECTIONS:
        raise ValueError(f"m must be in [1, {MAX_DIRECTIONS}]")
    dt = float(cfg.dt if dt is None else dt)
    stride = max(1, int(stride))
    U = U0.copy()
    t = 0.0
    rng = np.random.default_rng(seed)
    bundle = TangentBundle.random(U, m, grid, stride, seed)
    # the frame rides along the transient so that it is aligned when averaging starts
    for k in range(1, int(round(T_transient / dt)) + 1):
        t += dt
        U = step_implicit(U, dt, cfg, grid, t=t)
        bundle.Phi = tangent_step(bundle.Phi, U, dt, cfg, grid)
        if k % stride == 0:
            bundle.reorthonormalize(grid, rng, accumulate=False)
    bundle.reorthonormalize(grid, rng, accumulate=False)
    bundle.refills = 0
    n_avg = int(round(T_average / dt))
    n_avg -= n_avg % stride
    n_avg = max(n_avg, 2 * stride)
    half_mark = (n_avg // (2 * stride)) * stride
    first_half = None
    for k in range(1, n_avg + 1):
        t += dt
        U = step_implicit(U, dt, cfg, grid, t=t)
        bundle.Phi = tangent_step(bundle.Phi, U, dt, cfg, grid)
        if k % stride == 0:
            bundle.reorthonormalize(grid, rng)
        if k == half_mark:
            first_half = bundle.log_growth.copy()
    bundle.base = U
    T_avg = n_avg * dt
    exps = np.sort(bundle.log_growth / T_avg)[::-1]
    e1 = np.sort(first_half / (half_mark * dt))[::-1]
    e2 = np.sort((bundle.log_growth - first_half) / ((n_avg - half_mark) * dt))[::-1]
    d1, d2 = kaplan_yorke(e1), kaplan_yorke(e2)
    if max(d1, d2) > 0:
        drift = abs(d1 - d2) / max(d1, d2)
    else:
        drift = abs(e1[0] - e2[0]) / max(abs(e1[0]), abs(e2[0]), 1e-300)
    return LyapunovResult(exps, kaplan_yorke(exps), bool(drift <= 0.1), (e1, e2), float(drift), T_avg,
                          bundle.refills, U)


def kaplan_yorke(exponents: Sequence[float]) -> float:
    """Kaplan-Yorke (Lyapunov) dimension of a descending exponent list.

    When every partial sum is nonnegative the list is too short to resolve
    the dimension and its length is returned as a lower bound.
    """
    lam = np.asarray(exponents, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("need a nonempty 1-D list of exponents")
    if np.any(np.diff(lam) > 0):
        raise ValueError("exponents must be sorted in descending order")
    if lam[0] < 0:
        return 0.0
    S = np.cumsum(lam)
    j = int(np.flatnonzero(S >= 0)[-1]) + 1
    if j == lam.size:
        return float(j)
    return float(j + S[j - 1] / abs(lam[j]))


@dataclass(frozen=True)
class DimensionScenario:
    """Chafee-Infante benchmark ``f = u^3 - beta u``, ``g = c_g u`` around the zero equilibrium.

    The zero state lies on the global attractor and carries its largest
    local Lyapunov dimension, so the sweep measures the number of
    unstable directions there. ``base = "random"`` starts from small noise
    instead.
    """

    dim: int = 1
    beta: float = 4.0
    c_g: float = 1.0
    length: float = 1.0
    n: int = 201
    dt: float = 0.005
    T_transient: float = 10.0
    T_average: float = 40.0
    m: Optional[int] = None
    stride: int = 1
    base: str = "zero"
    seed: int = 0

    def grid(self) -> GridDomain:
        if self.dim == 1:
            return build_interval_grid(self.n, self.length)
        return build_rectangle_grid(self.n, self.n, (self.length, self.length))

    def config(self, nu: float) -> SolverConfig:
        return SolverConfig(FluxSpec.constant(nu), Nonlinearity.chafee(self.beta), Nonlinearity.linear(self.c_g),
                            dt=self.dt, adaptive=False)

    def initial(self, grid: GridDomain) -> StateField:
        if self.base == "zero":
            return grid.zeros()
        rng = np.random.default_rng(self.seed)
        return StateField.from_bulk(1e-2 * rng.standard_normal(grid.n), grid)


def expected_dimension(scenario: DimensionScenario, nu: float) -> float:
    """Kaplan-Yorke dimension of the frozen linearisation at zero (dense eigensolve).

    The backward-Euler map has exponents ``-log(1 + dt mu)/dt`` for the
    generalised eigenvalues ``mu`` of ``(L, M)``.
    """
    grid = scenario.grid()
    cfg = scenario.config(nu)
    L = linearized_matrix(grid.zeros(), cfg, grid).toarray()
    s = 1.0 / np.sqrt(grid.lumped_mass)
    mu = np.linalg.eigvalsh(s[:, None] * L * s[None, :])
    lam = np.sort(-np.log1p(scenario.dt * mu) / scenario.dt)[::-1]
    return kaplan_yorke(lam[:MAX_DIRECTIONS])


def _run_one(args):
    scenario, nu = args
    grid = scenario.grid()
    cfg = scenario.config(nu)
    m = scenario.m
    if m is None:
        m = min(MAX_DIRECTIONS, 2 + int(math.ceil(expected_dimension(scenario, nu))))
    try:
        res = lyapunov_spectrum(scenario.initial(grid), cfg, grid, m, scenario.T_transient, scenario.T_average,
                                stride=scenario.stride, seed=scenario.seed)
    except Exception as exc:  # a failed job is reported, not raised
        return nu, None, f"{type(exc).__name__}: {exc}"
    res.final_state = None
    return nu, res, ""


@dataclass
class SweepResult:
    nus: np.ndarray
    dims: np.ndarray
    slope: float
    ci: tuple
    target: float
    degenerate: bool
    partial: bool
    results: list
    messages: list

    def summary(self) -> dict:
        return {
            "nu": [float(x) for x in self.nus],
            "dimension": [float(x) for x in self.dims],
            "slope": float(self.slope),
            "ci": [float(x) for x in self.ci],
            "target": self.target,
            "degenerate": self.degenerate,
            "partial": self.partial,
            "messages": list(self.messages),
        }


def sweep_nu(nu_list: Sequence[float], scenario: DimensionScenario = DimensionScenario(), jobs: int = 1,
             level: float = 0.95) -> SweepResult:
    """Kaplan-Yorke dimension per ``nu`` and the log-log slope with a t-interval.

    At least four values are required; a span narrower than a decade is
    accepted with a note, since the slope interval already reflects it.

    Jobs run in separate processes when ``jobs > 1``. A failed or
    non-converged spectrum marks the report partial and is left out of the
    fit; if every dimension is zero the report is degenerate and the slope
    is NaN.
    """
    nus = np.sort(np.asarray(nu_list, dtype=float))[::-1]
    if nus.size < 4:
        raise ValueError("need at least four nu values")
    if np.any(nus <= 0):
        raise ValueError("nu must be positive")
    messages = []
    if nus.max() / nus.min() < 10.0 - 1e-12:
        messages.append(f"nu values span a factor {nus.max() / nus.min():g}, less than a decade")
    work = [(scenario, float(nu)) for nu in nus]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work), os.cpu_count() or 1)) as ex:
            out = list(ex.map(_run_one, work))
    else:
        out = [_run_one(w) for w in work]
    dims, results = [], []
    ok = np.ones(nus.size, dtype=bool)
    for i, (nu, res, msg) in enumerate(out):
        results.append(res)
        if res is None:
            ok[i] = False
            dims.append(np.nan)
            messages.append(f"nu={nu:g}: {msg}")
            continue
        dims.append(res.kaplan_yorke)
        if not res.converged:
            ok[i] = False
            messages.append(f"nu={nu:g}: averages drift by {100 * res.drift:.1f}% across halves")
    dims = np.asarray(dims)
    target = -0.5 if scenario.dim == 1 else -(scenario.dim - 1.0)
    degenerate = bool(np.all(dims[np.isfinite(dims)] == 0.0))
    use = ok & np.isfinite(dims) & (dims > 0)
    slope, ci = float("nan"), (float("nan"), float("nan"))
    if degenerate:
        messages.append("trivial attractor: dimension zero at every nu, slope undefined")
    elif use.sum() >= 3:
        fit = stats.linregress(np.log(nus[use]), np.log(dims[use]))
        tq = stats.t.ppf(0.5 + level / 2, use.sum() - 2)
        slope = float(fit.slope)
        ci = (slope - tq * fit.stderr, slope + tq * fit.stderr)
    else:
        messages.append("fewer than three usable points, no slope")
    partial = bool(not np.all(ok))
    return SweepResult(nus, dims, slope, ci, target, degenerate, partial, results, messages)


def upper_bound_dim(C_star: float, nu: float, c1CW: float, N: int) -> float:
    """Closed-form dimension bound ``(1 + C*/(nu c1 C_W))^(N-1)``; exponent 1/2 when ``N = 1``."""
    if C_star <= 0 or nu <= 0 or c1CW <= 0:
        raise ValueError("C_star, nu and c1*C_W must be positive")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    expo = 0.5 if N == 1 else N - 1.0
    return float((1.0 + C_star / (nu * c1CW)) ** expo)


def estimate_c_star(record, f: Nonlinearity, g: Nonlinearity, tail_fraction: float = 0.2) -> float:
    """``max(sup |f'(u)|, sup |g'(v)|)`` over stored snapshots in the tail of a record.

    ``record`` is a :class:`TrajectoryRecord` or a list of states.
    """
    if isinstance(record, TrajectoryRecord):
        t = np.asarray(record.snapshot_times)
        if t.size == 0:
            raise ValueError("empty tail")
        t_cut = t[0] + (1.0 - tail_fraction) * (t[-1] - t[0])
        states = [s for s, ti in zip(record.snapshots, t) if ti >= t_cut]
    else:
        states = list(record)
    if not states:
        raise ValueError("empty tail")
    c = 0.0
    for S in states:
        c = max(c, float(np.max(np.abs(f.d(S.u)))), float(np.max(np.abs(g.d(S.v)))))
    return c
