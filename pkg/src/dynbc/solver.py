"""Implicit solver for the bulk/boundary evolution with a dynamic boundary condition.

Semi-discretisation
-------------------
Nodal unknowns with P1 gradients per cell. The flux part of the operator is
the exact gradient of the discrete Dirichlet-type energy
``1/2 sum_cells |T| A(|grad u_T|^2)``, so one backward-Euler step is a
proximal step of the discrete energy in the lumped ``X^2`` metric. The
boundary unknown is identified with the trace inside each step; the lumped
mass at a boundary node is its volume weight plus its ``dS/b`` weight.

For reporting, the operator is split into a bulk row and a boundary row
``b a(|grad u|^2) d_n u`` (one-sided second-order normal derivative), with the
split arranged so that the weighted pairing reproduces the discrete form
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GridDomain, StateField, grad_lp, x_inner, x_norm
from .nonlinear import FluxSpec, Nonlinearity

__all__ = [
    "SolverConfig",
    "TrajectoryRecord",
    "NewtonFailure",
    "NewtonInfo",
    "assemble_bp",
    "discrete_form",
    "pairing",
    "monotonicity_check",
    "coercivity_probe",
    "step_implicit",
    "simulate",
    "solve_stationary",
    "energy",
    "energy_identity_residual",
    "linearized_matrix",
]

Source = Union[float, np.ndarray, Callable]


@dataclass
class SolverConfig:
    """Everything a run needs besides the grid and the initial state.

    Sources ``h1`` (bulk) and ``h2`` (boundary) are constants, nodal arrays,
    or callables ``h(x, t)`` with ``x`` the node coordinates.
    ``boundary="dirichlet"`` replaces the dynamic condition by ``u = 0`` on
    the boundary (used for comparison companions).
    """

    flux: FluxSpec
    f: Nonlinearity
    g: Nonlinearity
    h1: Source = 0.0
    h2: Source = 0.0
    dt: float = 1e-3
    adaptive: bool = True
    dt_max: float = 0.1
    dt_min: float = 1e-12
    growth: float = 1.2
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    blowup_threshold: float = 1e8
    max_rel_change: float = 0.1
    growth_watch: float = 1.0
    boundary: str = "dynamic"
    snapshot_stride: int = 10
    record_energy: bool = True

    def __post_init__(self):
        bad = []
        if not self.dt > 0:
            bad.append("dt must be positive")
        if not self.dt_min > 0 or not self.dt_max > 0:
            bad.append("dt bounds must be positive")
        if not self.newton_tol > 0:
            bad.append("newton_tol must be positive")
        if int(self.newton_max_iter) < 1:
            bad.append("newton_max_iter must be at least 1")
        if self.flux.eps < 0:
            bad.append("eps must be nonnegative")
        if self.boundary not in ("dynamic", "dirichlet"):
            bad.append("boundary must be 'dynamic' or 'dirichlet'")
        if bad:
            raise ValueError("; ".join(bad))

    @property
    def autonomous(self) -> bool:
        return not (callable(self.h1) or callable(self.h2))


class NewtonFailure(RuntimeError):
    def __init__(self, msg, residual=float("nan")):
        super().__init__(msg)
        self.residual = residual


@dataclass
class NewtonInfo:
    iterations: int
    residual: float


@dataclass
class TrajectoryRecord:
    """Per-step diagnostics and sparse snapshots, with the reason the run stopped."""

    times: np.ndarray
    dt: np.ndarray
    norm_x2: np.ndarray
    norm_xinf: np.ndarray
    grad_lp: np.ndarray
    energy: np.ndarray
    energy_residual: np.ndarray
    newton_iters: np.ndarray
    flux_energy: np.ndarray
    lr1: np.ndarray
    snapshot_times: np.ndarray
    snapshots: list
    termination: str
    message: str = ""
    p: float = 2.0
    r1: float = 2.0
    grid: Optional[GridDomain] = field(default=None, repr=False)

    CSV_COLUMNS = ("t", "dt", "norm_x2", "norm_xinf", "grad_lp", "energy", "energy_residual", "newton_iters")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def blew_up(self) -> bool:
        return self.termination == "blow-up-abort"

    def columns(self) -> dict:
        return {
            "t": self.times,
            "dt": self.dt,
            "norm_x2": self.norm_x2,
            "norm_xinf": self.norm_xinf,
            "grad_lp": self.grad_lp,
            "energy": self.energy,
            "energy_residual": self.energy_residual,
            "newton_iters": self.newton_iters,
        }

    def to_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for i in range(self.times.size):
                row = []
                for k in self.CSV_COLUMNS:
                    v = cols[k][i]
                    row.append(str(int(v)) if k == "newton_iters" else repr(float(v)))
                fh.write(",".join(row) + "\n")

    def nodal(self):
        """Bulk snapshots as ``(times, array of shape (nt, n))``."""
        return np.asarray(self.snapshot_times), np.array([s.u for s in self.snapshots])


# --- discrete operator ------------------------------------------------------


@dataclass(frozen=True)
class _Pattern:
    indptr: np.ndarray
    indices: np.ndarray
    pos: np.ndarray  # target nonzero for each triplet
    coef: np.ndarray  # D[ci] * D[cj] for each triplet
    blk: np.ndarray  # flat block-entry index for each triplet
    diag: np.ndarray  # nonzero index of each diagonal entry
    nnz: int


@lru_cache(maxsize=64)
def _pattern(grid: GridDomain) -> _Pattern:
    D = grid.grad_op.tocsr()
    D.sort_indices()
    dim, nc, n = grid.dim, grid.n_cells, grid.n
    counts = np.diff(D.indptr)
    if not np.all(counts == 2):
        raise ValueError("gradient operator must have two entries per row")
    cols = D.indices.reshape(-1, 2).reshape(nc, dim, 2)
    vals = D.data.reshape(-1, 2).reshape(nc, dim, 2)
    I, J, C, B = [], [], [], []
    cell = np.arange(nc)
    for k in range(dim):
        for l in range(dim):
            for a in range(2):
                for b in range(2):
                    I.append(cols[:, k, a])
                    J.append(cols[:, l, b])
                    C.append(vals[:, k, a] * vals[:, l, b])
                    B.append(cell * dim * dim + k * dim + l)
    I = np.concatenate(I + [np.arange(n)])
    J = np.concatenate(J + [np.arange(n)])
    C = np.concatenate(C + [np.zeros(n)])
    B = np.concatenate(B + [np.zeros(n, dtype=int)])
    keys = I.astype(np.int64) * n + J
    uniq, inv = np.unique(keys, return_inverse=True)
    rows = uniq // n
    indices = (uniq % n).astype(np.int32)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))]).astype(np.int32)
    diag = inv[-n:]
    return _Pattern(indptr, indices, inv[:-n], C[:-n], B[:-n], diag, uniq.size)


def _flux_terms(u: np.ndarray, flux: FluxSpec, grid: GridDomain):
    y = (grid.grad_op @ u).reshape(grid.n_cells, grid.dim)
    s = np.sum(y * y, axis=1)
    a = flux.a(s)
    K = grid.grad_op.T @ ((grid.cell_volumes * a)[:, None] * y).ravel()
    return y, s, a, K


def _flux_jacobian(y, s, a, flux: FluxSpec, grid: GridDomain, diag: np.ndarray) -> sp.csr_matrix:
    pat = _pattern(grid)
    dim = grid.dim
    da = flux.da(s)
    vol = grid.cell_volumes
    blocks = vol[:, None, None] * (
        a[:, None, None] * np.eye(dim)[None] + 2.0 * da[:, None, None] * y[:, :, None] * y[:, None, :]
    )
    data = np.bincount(pat.pos, weights=pat.coef * blocks.ravel()[pat.blk], minlength=pat.nnz)
    data[pat.diag] += diag
    return sp.csr_matrix((data, pat.indices, pat.indptr), shape=(grid.n, grid.n))


def _lower_order(u: np.ndarray, p: float) -> np.ndarray:
    if p == 2:
        return u.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(u) ** (p - 2) * u
    return np.where(u == 0, 0.0, out)


def assemble_bp(U: StateField, flux: FluxSpec, grid: GridDomain) -> StateField:
    """Discrete action of the principal operator on ``U``.

    Bulk rows carry ``-div(a grad u) + |u|^(p-2) u``; boundary rows carry
    ``b a(|grad u|^2) d_n u``. The operator acts on ``u`` (the boundary
    argument is its trace), so ``U.v`` is ignored.
    """
    U.check(grid)
    u = U.u
    _, _, _, K = _flux_terms(u, flux, grid)
    dn = grid.normal_op @ u
    dt_ = grid.tangent_op @ u
    ab = flux.a(dn * dn + dt_ * dt_)
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(ab))):
        raise ValueError("flux undefined at the sampled gradients (p < 2 needs eps > 0)")
    Rv = grid.b * ab * dn
    Ru = K.copy()
    Ru[grid.boundary] -= grid.surface * ab * dn
    Ru = Ru / grid.weights + _lower_order(u, flux.p)
    return StateField(Ru, Rv)


def pairing(R: StateField, W: StateField, grid: GridDomain) -> float:
    """Weighted pairing ``sum w R_u W_u + sum (dS/b) R_v W_v``."""
    return x_inner(R, W, grid)


def discrete_form(U: StateField, W: StateField, flux: FluxSpec, grid: GridDomain) -> float:
    """``sum_cells |T| a(|grad u|^2) grad u . grad w + sum w |u|^(p-2) u w``."""
    y, _, a, _ = _flux_terms(U.u, flux, grid)
    z = (grid.grad_op @ W.u).reshape(grid.n_cells, grid.dim)
    return float(np.sum(grid.cell_volumes * a * np.sum(y * z, axis=1)) + np.dot(grid.weights, _lower_order(U.u, flux.p) * W.u))


def monotonicity_check(U: StateField, V: StateField, flux: FluxSpec, grid: GridDomain) -> float:
    """``<B U - B V, U - V>`` with ``U - V`` taken trace-consistent from the bulk parts."""
    W = StateField.from_bulk(U.u - V.u, grid)
    return pairing(assemble_bp(U, flux, grid) - assemble_bp(V, flux, grid), W, grid)


def coercivity_probe(U: StateField, flux: FluxSpec, grid: GridDomain, scales) -> np.ndarray:
    """Ratios ``B(cU, cU) / ||cU||_{W^{1,p}}`` for each scale ``c``."""
    from .grid import w1p_norm

    if not np.any(U.u):
        raise ValueError("coercivity probe needs a nonzero state")
    out = []
    for c in scales:
        W = StateField.from_bulk(c * U.u, grid)
        out.append(discrete_form(W, W, flux, grid) / w1p_norm(W.u, flux.p, grid))
    return np.array(out)


# --- time stepping ----------------------------------------------------------


def _source(h: Source, pts: np.ndarray, t: float) -> np.ndarray:
    if callable(h):
        return np.broadcast_to(np.asarray(h(pts, t), dtype=float), (pts.shape[0],))
    return np.broadcast_to(np.asarray(h, dtype=float), (pts.shape[0],))


def _norm_star(R: np.ndarray, mass: np.ndarray) -> float:
    return float(np.sqrt(np.sum(R * R / mass)))


class _System:
    """Residual and Jacobian of one implicit step (or of the steady problem when ``dt`` is infinite)."""

    def __init__(self, cfg: SolverConfig, grid: GridDomain, U_n: Optional[StateField], dt: float, t: float):
        self.cfg, self.grid, self.dt = cfg, grid, dt
        self.dirichlet = cfg.boundary == "dirichlet"
        bnd = grid.boundary
        self.bm = grid.boundary_measure
        if self.dirichlet:
            self.mass = grid.weights.copy()
        else:
            self.mass = grid.lumped_mass
        self.h1 = _source(cfg.h1, grid.coords, t)
        self.h2 = _source(cfg.h2, grid.coords[bnd], t)
        self.inv_dt = 0.0 if not np.isfinite(dt) else 1.0 / dt
        if U_n is not None:
            rhs = grid.weights * U_n.u
            if not self.dirichlet:
                rhs = rhs.copy()
                rhs[bnd] += self.bm * U_n.v
            self.rhs = rhs
        else:
            self.rhs = np.zeros(grid.n)

    def residual(self, u):
        cfg, grid = self.cfg, self.grid
        bnd = grid.boundary
        _, _, _, K = _flux_terms(u, cfg.flux, grid)
        R = self.inv_dt * (self.mass * u - self.rhs) + K + grid.weights * (cfg.f(u) - self.h1)
        if self.dirichlet:
            R[bnd] = u[bnd]
        else:
            R[bnd] += self.bm * (cfg.g(u[bnd]) - self.h2)
        return R

    def jacobian(self, u):
        cfg, grid = self.cfg, self.grid
        bnd = grid.boundary
        y, s, a, _ = _flux_terms(u, cfg.flux, grid)
        diag = self.inv_dt * self.mass + grid.weights * cfg.f.d(u)
        if not self.dirichlet:
            diag[bnd] += self.bm * cfg.g.d(u[bnd])
        J = _flux_jacobian(y, s, a, cfg.flux, grid, diag)
        if self.dirichlet:
            pat = _pattern(grid)
            rows = np.repeat(np.arange(grid.n), np.diff(pat.indptr))
            J.data[np.isin(rows, bnd)] = 0.0
            J.data[pat.diag[bnd]] = 1.0
        return J

    def norm(self, R):
        return _norm_star(R, self.mass)


def _newton(system: _System, u0: np.ndarray, cfg: SolverConfig):
    u = u0.copy()
    if system.dirichlet:
        u[system.grid.boundary] = 0.0
    R = system.residual(u)
    res = system.norm(R)
    ref = math.sqrt(float(np.dot(system.mass, u0 * u0))) * (system.inv_dt if system.inv_dt else 1.0)
    tol = cfg.newton_tol * (1.0 + ref)
    if not np.isfinite(res):
        raise NewtonFailure("non-finite initial residual", res)
    it = 0
    while res > tol:
        if it >= cfg.newton_max_iter:
            raise NewtonFailure(f"no convergence in {it} iterations", res)
        J = system.jacobian(u)
        try:
            du = spla.spsolve(J.tocsc(), -R)
        except Exception as exc:  # singular factorisation
            raise NewtonFailure(f"linear solve failed: {exc}", res) from None
        if not np.all(np.isfinite(du)):
            raise NewtonFailure("non-finite Newton update", res)
        it += 1
        alpha = 1.0
        while True:
            u_try = u + alpha * du
            with np.errstate(over="ignore", invalid="ignore"):
                R_try = system.residual(u_try)
                res_try = system.norm(R_try)
            if np.isfinite(res_try) and res_try <= (1 - 1e-4 * alpha) * res:
                break
            alpha *= 0.5
            if alpha < 1e-4:
                if np.isfinite(res_try) and np.max(np.abs(du)) <= 1e-13 * (1 + np.max(np.abs(u))):
                    return u_try, it, res_try  # stagnation at round-off level
                raise NewtonFailure("line search failed", res)
        u, R, res = u_try, R_try, res_try
        if np.max(np.abs(alpha * du)) <= 1e-15 * (1 + np.max(np.abs(u))):
            break
    return u, it, res


def step_implicit(U_n: StateField, dt: float, cfg: SolverConfig, grid: GridDomain, t: Optional[float] = None,
                  return_info: bool = False):
    """One backward-Euler step; sources are evaluated at the new time ``t`` (default ``dt``).

    Raises :class:`NewtonFailure` when Newton with backtracking does not converge.
    """
    U_n.check(grid)
    if not U_n.isfinite():
        raise ValueError("non-finite state")
    t = dt if t is None else t
    system = _System(cfg, grid, U_n, dt, t)
    guess = U_n.u.copy()
    u, it, res = _newton(system, guess, cfg)
    if system.dirichlet:
        u[grid.boundary] = 0.0  # drop round-off left by Newton
    U = StateField.from_bulk(u, grid)
    if return_info:
        return U, NewtonInfo(it, res)
    return U


def solve_stationary(cfg: SolverConfig, grid: GridDomain, u_guess: np.ndarray, t: float = 0.0) -> StateField:
    """Equilibrium of the autonomous problem by damped Newton from ``u_guess``."""
    system = _System(cfg, grid, None, np.inf, t)
    u, _, _ = _newton(system, np.asarray(u_guess, dtype=float), cfg)
    return StateField.from_bulk(u, grid)


def energy(U: StateField, cfg: SolverConfig, grid: GridDomain, t: float = 0.0) -> float:
    """Discrete energy without the additive constant.

    ``sum |T| A(|grad u|^2) + 2 sum w F(u) + 2 sum (dS/b) G(v) - 2<h1,u> - 2<h2,v>_(dS/b)``.
    """
    y = (grid.grad_op @ U.u).reshape(grid.n_cells, grid.dim)
    s = np.sum(y * y, axis=1)
    h1 = _source(cfg.h1, grid.coords, t)
    val = float(np.sum(grid.cell_volumes * cfg.flux.A(s)))
    val += 2.0 * float(np.dot(grid.weights, cfg.f.primitive(U.u) - h1 * U.u))
    if cfg.boundary == "dynamic":
        h2 = _source(cfg.h2, grid.coords[grid.boundary], t)
        val += 2.0 * float(np.dot(grid.boundary_measure, cfg.g.primitive(U.v) - h2 * U.v))
    return val


def energy_identity_residual(U_n: StateField, U_np1: StateField, dt: float, cfg: SolverConfig, grid: GridDomain,
                             t: Optional[float] = None) -> float:
    """Discrete shadow of the energy identity after one step.

    ``(|U_{n+1}|^2 - |U_n|^2)/(2 dt) + <B U_{n+1}, U_{n+1}> + <F(U_{n+1}) - G, U_{n+1}>``;
    for an exact backward-Euler step it equals ``-|U_{n+1} - U_n|^2 / (2 dt)``.
    """
    t = dt if t is None else t
    W = U_np1
    h1 = _source(cfg.h1, grid.coords, t)
    h2 = _source(cfg.h2, grid.coords[grid.boundary], t)
    dnorm = (x_inner(W, W, grid) - x_inner(U_n, U_n, grid)) / (2.0 * dt)
    Wc = StateField.from_bulk(W.u, grid)
    bterm = discrete_form(Wc, Wc, cfg.flux, grid)
    fterm = float(np.dot(grid.weights, (cfg.f(W.u) - _lower_order(W.u, cfg.flux.p) - h1) * W.u))
    gterm = float(np.dot(grid.boundary_measure, (cfg.g(W.v) - h2) * W.v))
    return dnorm + bterm + fterm + gterm


def _diagnostics(U: StateField, cfg: SolverConfig, grid: GridDomain, t: float):
    y = (grid.grad_op @ U.u).reshape(grid.n_cells, grid.dim)
    s = np.sum(y * y, axis=1)
    fe = float(np.sum(grid.cell_volumes * cfg.flux.a(s) * s))
    lr = float(np.dot(grid.weights, np.abs(U.u) ** cfg.f.r))
    return (
        x_norm(U, 2, 2, grid),
        x_norm(U, np.inf, np.inf, grid),
        grad_lp(U.u, cfg.flux.p, grid),
        energy(U, cfg, grid, t) if cfg.record_energy else float("nan"),
        fe,
        lr,
    )


def simulate(U0: StateField, T: float, cfg: SolverConfig, grid: GridDomain, t0: float = 0.0,
             snapshot_stride: Optional[int] = None) -> TrajectoryRecord:
    """Integrate from ``t0`` to ``T`` or until an abort.

    Termination is one of ``"horizon"``, ``"blow-up-abort"`` or
    ``"solver-failure"``. In adaptive mode the step grows by ``cfg.growth``
    after easy steps (at most three Newton iterations), halves after a
    Newton failure, and while the sup-norm grows beyond ``cfg.growth_watch``
    each step may change the state by at most ``cfg.max_rel_change`` of its
    sup-norm.
    """
    U0.check(grid)
    if not U0.isfinite():
        raise ValueError("non-finite initial state")
    stride = cfg.snapshot_stride if snapshot_stride is None else snapshot_stride
    stride = max(1, int(stride))
    cols = {k: [] for k in ("t", "dt", "x2", "xinf", "glp", "E", "res", "it", "fe", "lr")}

    def push(U, t, dt, res, it):
        d = _diagnostics(U, cfg, grid, t)
        for k, v in zip(("t", "dt", "res", "it"), (t, dt, res, it)):
            cols[k].append(v)
        for k, v in zip(("x2", "xinf", "glp", "E", "fe", "lr"), d):
            cols[k].append(v)

    U = U0.copy()
    t = float(t0)
    push(U, t, 0.0, float("nan"), 0)
    snap_t, snaps = [t], [U.copy()]
    dt = float(cfg.dt)
    nominal = dt
    termination, message = "horizon", ""
    nstep = 0
    t_eps = 1e-12 * max(1.0, abs(T))
    while t < T - t_eps:
        dt_try = min(dt, T - t)
        if t + dt_try == t:
            termination = "blow-up-abort" if cols["xinf"][-1] > cfg.growth_watch else "solver-failure"
            message = "time step below the resolution of t"
            break
        try:
            U_new, info = step_implicit(U, dt_try, cfg, grid, t=t + dt_try, return_info=True)
        except NewtonFailure as exc:
            dt = 0.5 * dt_try
            if dt < cfg.dt_min:
                termination, message = "solver-failure", f"dt below floor after Newton failure: {exc}"
                break
            continue
        sup_old = cols["xinf"][-1]
        sup_new = x_norm(U_new, np.inf, np.inf, grid)
        rel = None
        if cfg.adaptive and sup_new > sup_old and sup_old >= cfg.growth_watch:
            change = max(np.max(np.abs(U_new.u - U.u)), np.max(np.abs(U_new.v - U.v)))
            rel = change / sup_old
            if sup_new > 2.0 * sup_old or rel > cfg.max_rel_change:
                dt = dt_try * max(0.1, 0.5 * cfg.max_rel_change / rel)
                continue
        res = energy_identity_residual(U, U_new, dt_try, cfg, grid, t + dt_try)
        t = t + dt_try
        U = U_new
        nstep += 1
        push(U, t, dt_try, res, info.iterations)
        if nstep % stride == 0:
            snap_t.append(t)
            snaps.append(U.copy())
        if sup_new >= cfg.blowup_threshold:
            termination = "blow-up-abort"
            message = f"sup-norm {sup_new:.3e} reached the threshold"
            break
        if cfg.adaptive:
            if info.iterations <= 3:
                dt = min(dt * cfg.growth, cfg.dt_max)
            if rel is not None and rel > 0:
                dt = min(dt, dt_try * 0.9 * cfg.max_rel_change / rel)
        else:
            dt = nominal
    if snap_t[-1] != t:
        snap_t.append(t)
        snaps.append(U.copy())
    arr = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
    return TrajectoryRecord(
        times=arr["t"],
        dt=arr["dt"],
        norm_x2=arr["x2"],
        norm_xinf=arr["xinf"],
        grad_lp=arr["glp"],
        energy=arr["E"],
        energy_residual=arr["res"],
        newton_iters=arr["it"].astype(int),
        flux_energy=arr["fe"],
        lr1=arr["lr"],
        snapshot_times=np.asarray(snap_t),
        snapshots=snaps,
        termination=termination,
        message=message,
        p=cfg.flux.p,
        r1=cfg.f.r,
        grid=grid,
    )


def linearized_matrix(U: StateField, cfg: SolverConfig, grid: GridDomain) -> sp.csr_matrix:
    """Jacobian of the stiffness-plus-reaction part at ``U`` (no mass term)."""
    system = _System(cfg, grid, None, np.inf, 0.0)
    return system.jacobian(U.u)
