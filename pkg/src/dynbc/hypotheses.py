"""Sampled verification of structural hypotheses and the regime classifier.

Every check here is numeric: tail conditions "as |y| -> infinity" are read
off samples up to ``Y_MAX = 1e6``, and existence statements ("for some
eps") are searched over a finite grid. Reports carry the witnesses so a
failed check can be inspected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy import optimize

from .grid import GridDomain
from .nonlinear import FluxSpec, Nonlinearity

__all__ = [
    "H1Report",
    "H2Report",
    "H3Report",
    "NBReport",
    "WeakerReport",
    "RegimeReport",
    "check_h1",
    "check_h2",
    "check_h3",
    "estimate_poincare_constant",
    "poincare_ratio",
    "estimate_trace_constant",
    "check_balance_nb",
    "check_weaker_condition",
    "maxi_holds",
    "classify_regime",
    "tilde_constant",
]

Y_MAX = 1e6
SAFETY = 1.1


@dataclass
class H1Report:
    passed: bool
    worst_margin: float
    witness: dict
    c1: float
    margins: dict = field(default_factory=dict)


def check_h1(flux: FluxSpec, sample_count: int = 200, nu: Optional[float] = None, dim: int = 2, seed: int = 0) -> H1Report:
    """Growth and coercivity of ``y -> a(|y|^2) y`` on samples, plus its monotonicity.

    The unregularised law is tested; ``nu`` defaults to the flux's own.
    Margins are relative: coercivity is divided by ``|y|^p`` and the
    monotonicity inner product by ``(|y1|+|y2|)^(p-2) |y1-y2|^2``.
    """
    rng = np.random.default_rng(seed)
    fl = flux.regularized(0.0) if flux.kind == "power" else flux
    p = fl.p
    nu = fl.nu if nu is None else nu

    def unit(k):
        d = rng.standard_normal((k, dim))
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    mags = np.logspace(-3, 3, sample_count)
    y = mags[:, None] * unit(sample_count)
    s = mags**2
    a = np.asarray(fl.a(s), dtype=float)

    growth = a / (1.0 + mags ** (p - 2))
    c1 = float(np.max(growth)) if np.all(np.isfinite(growth)) else np.inf
    nonneg = a >= 0
    coerc = (a * s - nu * mags**p) / mags**p

    m1 = 10 ** rng.uniform(-3, 3, sample_count)
    m2 = 10 ** rng.uniform(-3, 3, sample_count)
    y1 = m1[:, None] * unit(sample_count)
    y2 = m2[:, None] * unit(sample_count)
    b1 = np.asarray(fl.a(m1**2))[:, None] * y1
    b2 = np.asarray(fl.a(m2**2))[:, None] * y2
    d = y1 - y2
    inner = np.sum((b1 - b2) * d, axis=1)
    mono = inner / ((m1 + m2) ** (p - 2) * np.sum(d * d, axis=1))

    margins = {
        "nonnegative": float(np.min(a)),
        "coercivity": float(np.min(coerc)),
        "monotonicity": float(np.min(mono)),
    }
    tol = -1e-10
    checks = {
        "growth": np.isfinite(c1),
        "nonnegative": bool(np.all(nonneg)),
        "coercivity": margins["coercivity"] >= tol,
        "monotonicity": margins["monotonicity"] >= tol,
    }
    worst_key = min(margins, key=margins.get)
    witness = {}
    if not checks["nonnegative"] or not checks["coercivity"]:
        i = int(np.argmin(coerc))
        witness = {"check": "coercivity", "y": y[i].tolist(), "a": float(a[i])}
    elif not checks["monotonicity"]:
        i = int(np.argmin(mono))
        witness = {"check": "monotonicity", "y1": y1[i].tolist(), "y2": y2[i].tolist()}
    elif not checks["growth"]:
        witness = {"check": "growth"}
    else:
        witness = {"check": worst_key}
    return H1Report(all(checks.values()), margins[worst_key], witness, c1, margins)


def _samples(ymax: float = Y_MAX, count: int = 400, ymin: float = 1e-3) -> np.ndarray:
    pos = np.logspace(np.log10(ymin), np.log10(ymax), count // 2)
    return np.concatenate([-pos[::-1], [0.0], pos])


def _last_sign_change(y: np.ndarray, vals: np.ndarray) -> float:
    """Largest ``|y|`` at which ``vals`` is nonpositive (0 if none)."""
    bad = np.abs(y)[vals <= 0]
    return float(bad.max()) if bad.size else 0.0


@dataclass
class H2Report:
    passed: bool
    inf_f: float
    inf_g: float
    threshold_f: float
    threshold_g: float

    @property
    def c_star(self) -> float:
        """Constant with ``f', g' >= -c_star``."""
        return max(0.0, -self.inf_f, -self.inf_g)


def check_h2(f: Nonlinearity, g: Nonlinearity, sample_count: int = 400, ymax: float = Y_MAX) -> H2Report:
    """Lower bounds of ``f'`` and ``g'`` and positivity of both in the tail."""
    y = _samples(ymax, sample_count)
    out = []
    for fn in (f, g):
        d = np.asarray(fn.d(y), dtype=float)
        thr = _last_sign_change(y, d)
        ok = bool(np.all(np.isfinite(d))) and thr <= ymax / 10
        out.append((ok, float(np.min(d)), thr))
    return H2Report(out[0][0] and out[1][0], out[0][1], out[1][1], out[0][2], out[1][2])


@dataclass
class H3Report:
    r1: float
    r2: float
    c_f: float
    c_g: float
    f_envelope: bool
    g_h3a: bool
    g_h3b: bool
    f_sandwich: tuple
    g_sandwich: tuple


def _envelope(fn: Nonlinearity, y: np.ndarray):
    ratio = np.abs(fn(y)) / (1.0 + np.abs(y) ** (fn.r - 1))
    ay = np.abs(y)
    top = ratio[ay >= Y_MAX / 10].max()
    below = ratio[(ay >= Y_MAX / 100) & (ay < Y_MAX / 10)].max()
    stable = bool(np.isfinite(top) and top <= 1.5 * below + 1e-12)
    return float(ratio.max()), stable


def _sandwich(fn: Nonlinearity, y: np.ndarray):
    tail = y[np.abs(y) >= Y_MAX / 100]
    ratio = fn(tail) * tail / np.abs(tail) ** fn.r
    return float(ratio.min()), float(ratio.max())


def check_h3(f: Nonlinearity, g: Nonlinearity) -> H3Report:
    """Growth envelopes ``|f| <= c(1+|y|^(r-1))`` and the sandwich for ``g``."""
    y = _samples()
    cf, f_ok = _envelope(f, y)
    cg, g_ok = _envelope(g, y)
    fs = _sandwich(f, y)
    gs = _sandwich(g, y)
    h3b = bool(gs[0] > 0 and np.isfinite(gs[1]))
    return H3Report(f.r, g.r, cf, cg, f_ok, g_ok, h3b, fs, gs)


# --- Poincare-type constant -------------------------------------------------


def _consistent_mass(grid: GridDomain) -> sp.csr_matrix:
    cells = grid.cells
    k = cells.shape[1]
    if k == 2:
        local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    rows = np.repeat(cells, k, axis=1).ravel()
    cols = np.tile(cells, (1, k)).ravel()
    vals = (grid.cell_volumes[:, None] * local.ravel()[None, :]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.n, grid.n))


def _stiffness(grid: GridDomain) -> sp.csr_matrix:
    D = grid.grad_op
    vol = np.repeat(grid.cell_volumes, grid.dim)
    return (D.T @ sp.diags(vol) @ D).tocsr()


def _boundary_functional(grid: GridDomain) -> np.ndarray:
    c = np.zeros(grid.n)
    c[grid.boundary] = grid.boundary_measure
    return c


def poincare_ratio(phi: np.ndarray, grid: GridDomain, s: float = 2.0) -> float:
    """``||phi - mean_b(phi)||_{L^s} / ||grad phi||_{L^s}`` with lumped quadrature.

    ``mean_b`` is the ``dS/b``-weighted boundary mean. Returns ``nan`` for
    fields with zero gradient.
    """
    phi = np.asarray(phi, dtype=float)
    c = _boundary_functional(grid)
    centred = phi - c @ phi / c.sum()
    g = (grid.grad_op @ phi).reshape(grid.n_cells, grid.dim)
    gn = np.sum(grid.cell_volumes * np.sqrt(np.sum(g * g, axis=1)) ** s) ** (1 / s)
    if gn == 0:
        return float("nan")
    return float(np.sum(grid.weights * np.abs(centred) ** s) ** (1 / s) / gn)


def _poincare_l2(grid: GridDomain):
    K = _stiffness(grid).toarray()
    M = _consistent_mass(grid).toarray()
    c = _boundary_functional(grid)
    k = grid.boundary[0]
    rest = np.delete(np.arange(grid.n), k)
    Z = np.zeros((grid.n, grid.n - 1))
    Z[rest, np.arange(grid.n - 1)] = 1.0
    Z[k, :] = -c[rest] / c[k]
    Kz, Mz = Z.T @ K @ Z, Z.T @ M @ Z
    w, v = sla.eigh(Mz, Kz, subset_by_index=[grid.n - 2, grid.n - 2])
    return float(np.sqrt(w[0])), Z @ v[:, 0]


def _starts(grid: GridDomain, rng, count: int):
    x = grid.coords / np.asarray(grid.lengths)
    fields = []
    # steps across the middle and near the boundary
    for frac in (0.5, 0.1):
        fields.append((x[:, 0] > frac).astype(float))
    for _ in range(count):
        u = np.zeros(grid.n)
        for _ in range(4):
            k = rng.integers(1, 6, size=grid.dim)
            ph = rng.uniform(0, 2 * np.pi, size=grid.dim)
            u += rng.standard_normal() * np.prod(np.cos(np.pi * k * x + ph), axis=1)
        fields.append(u)
    return fields


def estimate_poincare_constant(grid: GridDomain, s: float = 2.0, n_starts: int = 6, seed: int = 0) -> float:
    """Best constant in ``||phi - mean_b phi||_{L^s} <= C ||grad phi||_{L^s}`` on the grid.

    For ``s = 2`` this is an exact generalised eigenproblem on the P1 space
    with exact (consistent) mass, so it is a lower bound for the continuous
    constant and nondecreasing under nested refinement. Other exponents use
    quasi-Newton ascent of the ratio from several starts; that value is a
    lower bound only in the sense of "best found".
    """
    if not s >= 1:
        raise ValueError("s must be at least 1")
    if grid.n < 3:
        raise ValueError("degenerate grid")
    C2, phi2 = _poincare_l2(grid)
    if s == 2:
        return C2

    c = _boundary_functional(grid)
    csum = c.sum()
    D = grid.grad_op
    vol = grid.cell_volumes
    w = grid.weights
    eta = 1e-9

    def neg_log_ratio(phi):
        cen = phi - (c @ phi) / csum
        sq = np.sqrt(cen * cen + eta * eta)
        num = np.sum(w * sq**s)
        dnum = s * w * sq ** (s - 2) * cen
        dnum = dnum - c * dnum.sum() / csum
        g = (D @ phi).reshape(-1, grid.dim)
        mag = np.sqrt(np.sum(g * g, axis=1) + eta * eta)
        den = np.sum(vol * mag**s)
        dden = D.T @ ((s * vol * mag ** (s - 2))[:, None] * g).ravel()
        val = -(np.log(num) - np.log(den)) / s
        grad = -(dnum / num - dden / den) / s
        return val, grad

    rng = np.random.default_rng(seed)
    best = 0.0
    for phi0 in [phi2] + _starts(grid, rng, n_starts):
        if np.ptp(phi0) == 0:
            continue
        best = max(best, poincare_ratio(phi0, grid, s))
        res = optimize.minimize(neg_log_ratio, phi0 / np.max(np.abs(phi0)), jac=True, method="L-BFGS-B",
                                options={"maxiter": 400})
        r = poincare_ratio(res.x, grid, s)
        if np.isfinite(r):
            best = max(best, r)
    return best


@dataclass
class TraceConstant:
    value: float
    binding: str
    gamma: float


def _boundary_distance(grid: GridDomain) -> np.ndarray:
    x = grid.coords
    L = np.asarray(grid.lengths)
    return np.min(np.concatenate([x, L - x], axis=1), axis=1)


def estimate_trace_constant(grid: GridDomain, s: float, p: float, eps: float, n_random: int = 32, seed: int = 0) -> TraceConstant:
    """Smallest ``C`` with ``||u||^s_{L^s(Gamma)} <= eps ||grad u||^p_p + C (||u||^gamma_gamma + 1)``
    over a stress ensemble mixing constants and boundary layers with random smooth fields.

    Here ``gamma = max(s, p (s-1)/(p-1))`` and the boundary norm uses ``dS``.
    """
    gamma = max(s, p * (s - 1) / (p - 1))
    rng = np.random.default_rng(seed)
    amps = np.logspace(-2, 3, 11)
    fields = [(f"constant {a:.3g}", a * np.ones(grid.n)) for a in np.logspace(-3, 3, 25)]
    dist = _boundary_distance(grid)
    for delta in np.logspace(np.log10(grid.h), 0, 12):
        shape = np.exp(-dist / delta)
        fields += [(f"layer delta={delta:.3g} amp={a:.3g}", a * shape) for a in amps]
    x = grid.coords / np.asarray(grid.lengths)
    for j in range(n_random):
        u = np.zeros(grid.n)
        for _ in range(3):
            k = rng.integers(0, 5, size=grid.dim)
            u += rng.standard_normal() * np.prod(np.cos(np.pi * k * x), axis=1)
        fields += [(f"random #{j} amp={a:.3g}", a * u) for a in amps]

    best, label = 0.0, "none"
    for name, u in fields:
        bnd = np.sum(grid.surface * np.abs(u[grid.boundary]) ** s)
        g = (grid.grad_op @ u).reshape(-1, grid.dim)
        grad = np.sum(grid.cell_volumes * np.sqrt(np.sum(g * g, axis=1)) ** p)
        vol = np.sum(grid.weights * np.abs(u) ** gamma) + 1.0
        val = (bnd - eps * grad) / vol
        if val > best:
            best, label = float(val), name
    return TraceConstant(best, label, gamma)


# --- balance conditions -----------------------------------------------------


def tilde_constant(C_poincare: float, grid: GridDomain, h3b: bool = False, safety: float = SAFETY) -> float:
    """Scaled Poincare constant ``C_{Omega,b} / (lambda |Omega|)`` with a safety factor, halved under the sandwich hypothesis on ``g``."""
    val = safety * C_poincare * grid.inv_lambda / grid.volume
    return 0.5 * val if h3b else val


@dataclass
class NBReport:
    passed: bool
    best_eps: float
    margin: float
    y0: float
    C_tilde: float
    branch: str
    closed_form_margin: Optional[float]
    margins_by_eps: np.ndarray = field(repr=False, default=None)


def _branch(r1: float, r2: float, q: float) -> str:
    gam = max(r2, q * (r2 - 1))
    if r1 > gam:
        return "leading c_f"
    if np.isclose(q * (r2 - 1), r1) and r2 < r1:
        return "ccoef"
    if np.isclose(r1, r2):
        return "ccoef2"
    return "dominated by boundary"


def check_balance_nb(
    f: Nonlinearity,
    g: Nonlinearity,
    flux: FluxSpec,
    C_poincare: float,
    grid: GridDomain,
    eps_grid: Optional[Sequence[float]] = None,
    h3b: Optional[bool] = None,
    ymax: float = Y_MAX,
) -> NBReport:
    """Tail balance between bulk dissipation and boundary anti-dissipation.

    For each ``eps`` in ``(0, nu/q)`` the expression
    ``f y + (|Omega| lambda)^{-1} g y - K |g' y + g|^q`` with
    ``K = C~^q / ((eps p)^(q/p) q)`` is divided by ``|y|^r1`` and its
    minimum over the top decade of samples is the margin. The check passes
    if some ``eps`` gives a positive margin. ``C_poincare`` is the raw grid
    constant; scaling and the safety factor are applied here.
    """
    p, q, nu = flux.p, flux.q, flux.nu
    if h3b is None:
        h3b = check_h3(f, g).g_h3b
    Ct = tilde_constant(C_poincare, grid, h3b)
    if eps_grid is None:
        eps_grid = (nu / q) * np.logspace(-6, 0, 33)[:-1]
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(eps_grid <= 0) or np.any(eps_grid >= nu / q):
        raise ValueError("eps values must lie in (0, nu/q)")
    y = _samples(ymax)
    y = y[y != 0]
    ol = 1.0 / (grid.volume * grid.lam)
    base = f(y) * y + ol * g(y) * y
    deriv_term = np.abs(g.d(y) * y + g(y)) ** q
    tail = np.abs(y) >= ymax / 10
    margins, y0s = [], []
    for eps in eps_grid:
        K = Ct**q / ((eps * p) ** (q / p) * q)
        expr = (base - K * deriv_term) / np.abs(y) ** f.r
        margins.append(float(np.min(expr[tail])))
        y0s.append(_last_sign_change(y, expr))
    margins = np.array(margins)
    i = int(np.argmax(margins))
    branch = _branch(f.r, g.r, q)
    cg = abs(g.c)
    lhs_common = nu * p ** (-q) * q
    rhs = Ct**q * cg**q * g.r**q
    closed = None
    if branch == "ccoef":
        closed = f.c * lhs_common - rhs
    elif branch == "ccoef2":
        closed = (f.c + ol * g.c) * lhs_common - rhs
    return NBReport(bool(margins[i] > 0), float(eps_grid[i]), float(margins[i]), y0s[i], Ct, branch, closed, margins)


@dataclass
class WeakerReport:
    passed: dict
    Q: dict
    tau: Optional[float]

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


def check_weaker_condition(
    f: Nonlinearity,
    g: Nonlinearity,
    flux: FluxSpec,
    C_tilde: float,
    m_list: Sequence[float],
    grid: GridDomain,
    y_range=(1.0, Y_MAX),
    eps: Optional[float] = None,
) -> WeakerReport:
    """Power-weighted balance needed along the Moser iteration.

    For each ``m`` the smallest ``Q(m) >= 0`` with
    ``LHS_m(y) >= -Q(m)(|y|^(m+1) + 1)`` on the sampled range is found;
    when ``Q`` keeps growing across the top decade the bound is reported as
    failing. ``tau`` is the slope of ``log Q`` against ``log m``. When
    ``g`` is dissipative (``c_g > 0``) the boundary term needs no
    compensation and the gradient-absorbed term is dropped.
    """
    p, q = flux.p, flux.q
    absorb = 0.0 if g.c > 0 else 1.0
    eps = flux.nu / (2 * q) if eps is None else eps
    ol = 1.0 / (grid.volume * grid.lam)
    pos = np.logspace(np.log10(y_range[0]), np.log10(y_range[1]), 300)
    y = np.concatenate([-pos[::-1], pos])
    ay = np.abs(y)
    top = ay >= y_range[1] / 10
    prev = (ay >= y_range[1] / 100) & ~top
    passed, Q = {}, {}
    for m in m_list:
        K = absorb * C_tilde**q * m ** (-q / p) / ((eps * p) ** (q / p) * q)
        # LHS carries the weight |y|^(m-1); dividing by |y|^(m+1) + 1 leaves norm * damp, with no overflow
        norm = (f(y) * y + ol * g(y) * y - K * np.abs(g.d(y) * y + m * g(y)) ** q) / ay**2
        with np.errstate(over="ignore"):
            damp = 1.0 / (1.0 + ay ** (-(m + 1.0)))
        rho = -norm * damp
        qm = max(0.0, float(np.max(rho)))
        q_top = max(0.0, float(np.max(rho[top])))
        q_prev = max(0.0, float(np.max(rho[prev])))
        unbounded = q_top > 1.0 and q_top > 2.0 * q_prev
        passed[m] = bool(np.isfinite(qm) and not unbounded)
        Q[m] = qm
    ms = np.array([m for m in m_list if Q[m] > 0 and passed[m]], dtype=float)
    tau = None
    if ms.size >= 2:
        tau = float(np.polyfit(np.log(ms), np.log([Q[m] for m in ms]), 1)[0])
    return WeakerReport(passed, Q, tau)


# --- classifier -------------------------------------------------------------


def maxi_holds(r1: float, r2: float, p: float, h2_zero: bool = False) -> bool:
    """``max(r2, q(r2-1)) < r1``; equality allowed when the boundary source vanishes."""
    q = p / (p - 1)
    gam = max(r2, q * (r2 - 1))
    return bool(gam < r1 - 1e-12 or (h2_zero and np.isclose(gam, r1)))


@dataclass
class RegimeReport:
    verdict: str
    fired: str
    margin: float
    notes: list = field(default_factory=list)


VERDICTS = (
    "dissipative-classical",
    "dissipative-trajectory",
    "competing-bounded",
    "competing-bounded-boundary",
    "blow-up-prone",
    "indeterminate",
)


def classify_regime(
    f: Nonlinearity,
    g: Nonlinearity,
    flux: FluxSpec,
    grid: GridDomain,
    h2_zero: bool = True,
    C_poincare: Optional[float] = None,
    poincare_s: float = 1.0,
) -> RegimeReport:
    """Decide which well-posedness / blow-up mechanism applies.

    The margin is positive exactly when a sufficient condition fired;
    an ``indeterminate`` verdict carries the (nonpositive) margin of the
    condition that came closest.
    """
    for fn, nm in ((f, "f"), (g, "g")):
        if fn.r is None or fn.c is None or not np.isfinite(fn.r):
            raise ValueError(f"growth metadata of {nm} unspecified")
    p, q = flux.p, flux.q
    r1, r2, cf, cg = f.r, g.r, f.c, g.c
    notes = []

    def ctilde():
        C = C_poincare
        if C is None:
            C = estimate_poincare_constant(grid, s=poincare_s)
            if poincare_s != 2:
                notes.append(f"Poincare constant for s={poincare_s:g} is a best-found value, not certified")
        return tilde_constant(C, grid, h3b=cg > 0)

    if cf > 0 and cg > 0:
        h2 = check_h2(f, g)
        if h2.passed:
            return RegimeReport("dissipative-classical", "H2: lim inf f', g' > 0 with the arbp growth sandwich",
                                float(min(cf, cg)), notes)
        notes.append("derivative lower bound fails; uniqueness not available")
        return RegimeReport("dissipative-trajectory", "arbp growth sandwich without H2", float(min(cf, cg)), notes)

    if cf > 0 and cg <= 0:
        gam = max(r2, q * (r2 - 1))
        if gam < r1 - 1e-12:
            return RegimeReport("competing-bounded", f"maxi: max(r2, q(r2-1)) = {gam:g} < r1 = {r1:g}",
                                float(r1 - gam), notes)
        if np.isclose(gam, r1):
            if not h2_zero:
                notes.append("equality in maxi requires h2 = 0")
                return RegimeReport("indeterminate", "maxi equality with nonzero h2", 0.0, notes)
            Ct = ctilde()
            if np.isclose(q * (r2 - 1), r1) and p < r2:
                m = cf * flux.nu * p ** (-q) * q - Ct**q * abs(cg) ** q * r2**q
                if m > 0:
                    return RegimeReport("competing-bounded", "ccoef: c_f nu p^-q q > C~^q c_g^q r2^q with h2 = 0",
                                        float(m), notes)
                return RegimeReport("indeterminate", "ccoef fails", float(m), notes)
            m = cf + (1.0 / (grid.volume * grid.lam)) * cg
            if m > 0:
                return RegimeReport("competing-bounded", "maxi equality with h2 = 0, positive leading coefficient",
                                    float(m), notes)
            return RegimeReport("indeterminate", "leading coefficient nonpositive", float(m), notes)
        return RegimeReport("indeterminate", f"maxi fails: {gam:g} > r1 = {r1:g}", float(r1 - gam), notes)

    superlinear = r1 > 2 or (r1 == 2 and np.isneginf(cf))
    if cf < 0 and superlinear:
        return RegimeReport("blow-up-prone", "superlinear non-dissipative bulk term: blow-up of some solutions",
                            float(r1 - 2) if np.isfinite(cf) else float("inf"), notes)

    if cf < 0 and r1 <= 2 and cg > 0:
        if not h2_zero:
            notes.append("dom requires h2 = 0")
        Ct = ctilde()
        ol = 1.0 / (grid.volume * grid.lam)
        m = (cf + ol * cg) * flux.nu * p ** (-q) * q - Ct**q * cg**q * r2**q
        if m > 0 and h2_zero:
            return RegimeReport("competing-bounded-boundary", "ccoef2 with dom: boundary dissipation dominates",
                                float(m), notes)
        return RegimeReport("indeterminate", "ccoef2 with dom fails", float(min(m, 0.0)), notes)

    return RegimeReport("indeterminate", "no sufficient condition applies", 0.0, notes)
