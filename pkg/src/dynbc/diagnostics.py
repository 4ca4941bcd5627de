"""Post-processing of trajectory records.

Absorbing-set radii, sup-norm plateaus, the Moser norm ladder, energy
bookkeeping, exponential decay fits and blow-up rate fits. Everything here
reads :class:`~dynbc.solver.TrajectoryRecord` objects and never re-runs a
simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .grid import GridDomain, StateField
from .solver import SolverConfig, TrajectoryRecord, energy

__all__ = [
    "LadderTable",
    "AbsorbingSetReport",
    "LinfReport",
    "DecayFit",
    "BlowupFit",
    "DiagnosticsReport",
    "norm_ladder",
    "detect_absorbing_set",
    "linf_bound",
    "energy_functional",
    "energy_constant",
    "fit_dissipative_decay",
    "detect_blowup",
    "golden_section",
]


@dataclass
class LadderTable:
    k: np.ndarray
    m: np.ndarray
    log_Y: np.ndarray
    roots: np.ndarray
    normalized_roots: np.ndarray

    @property
    def Y(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_Y)


def norm_ladder(U: StateField, p: float, k_max: int, grid: GridDomain) -> LadderTable:
    """``Y_k = ||U||^(m_k+1)_{X^(m_k+1)}`` with ``m_k = p^k``, evaluated in log space.

    ``roots[k] = Y_k^(1/(1+m_k))`` tends to the sup-norm. Because the
    measure of the closure has total mass ``mu = |Omega| + 1/lambda``, the
    raw roots approach it from above when ``mu > 1``; the normalised roots
    ``(Y_k/mu)^(1/(1+m_k))`` are the monotone (nondecreasing) version.
    """
    U.check(grid)
    vals = np.concatenate([np.abs(U.u), np.abs(U.v)])
    w = np.concatenate([grid.weights, grid.boundary_measure])
    keep = (vals > 0) & (w > 0)
    lv, lw = np.log(vals[keep]), np.log(w[keep])
    log_mu = np.log(w.sum())
    ks = np.arange(k_max + 1)
    ms = float(p) ** ks
    logY = np.array([logsumexp(lw + (1.0 + m) * lv) if lv.size else -np.inf for m in ms])
    roots = np.exp(logY / (1.0 + ms))
    norm_roots = np.exp((logY - log_mu) / (1.0 + ms))
    return LadderTable(ks, ms, logY, roots, norm_roots)


# --- windows and plateaus ---------------------------------------------------


def _tail_max(t: np.ndarray, y: np.ndarray, tail_fraction: float) -> float:
    t_start = t[-1] - tail_fraction * (t[-1] - t[0])
    return float(np.max(y[t >= t_start]))


def _entry_time(t: np.ndarray, y: np.ndarray, level: float) -> Optional[float]:
    """First time after which ``y`` stays at or below ``level`` (linear interpolation)."""
    sup_after = np.maximum.accumulate(y[::-1])[::-1]
    ok = np.flatnonzero(sup_after <= level)
    if ok.size == 0:
        return None
    i = ok[0]
    if i == 0:
        return float(t[0])
    y0, y1 = y[i - 1], y[i]
    frac = (y0 - level) / (y0 - y1) if y0 != y1 else 1.0
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def _window_functional(rec: TrajectoryRecord, window: float):
    """``||U(t)||_X2 + int_t^{t+window} (flux energy + L^r1 norm)`` on the valid part of the record."""
    t = rec.times
    integrand = rec.flux_energy + rec.lr1
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))])
    valid = t <= t[-1] - window + 1e-12
    tv = t[valid]
    S = rec.norm_x2[valid] + np.interp(tv + window, t, cum) - cum[valid]
    return tv, S


@dataclass
class AbsorbingSetReport:
    C0: Optional[float]
    entry_times: list
    plateaus: list
    spread: Optional[float]
    absorbed: list


def detect_absorbing_set(records: Sequence[TrajectoryRecord], tail_fraction: float = 0.2, window: float = 1.0,
                         factor: float = 1.1) -> AbsorbingSetReport:
    """Common absorbing radius of the window functional across an ensemble.

    Each record's plateau is the maximum over the trailing ``tail_fraction``
    of its valid span; the radius is ``factor`` times the largest plateau;
    entry times are first times after which the functional stays below it.
    Records that blew up, or that are shorter than one window, are not absorbed.
    """
    plateaus, series = [], []
    for rec in records:
        if rec.blew_up or rec.times[-1] - rec.times[0] <= window:
            plateaus.append(None)
            series.append(None)
            continue
        tv, S = _window_functional(rec, window)
        series.append((tv, S))
        plateaus.append(_tail_max(tv, S, tail_fraction))
    good = [p for p in plateaus if p is not None]
    if not good:
        return AbsorbingSetReport(None, [None] * len(records), plateaus, None, [False] * len(records))
    C0 = factor * max(good)
    entries, absorbed = [], []
    for s in series:
        if s is None:
            entries.append(None)
            absorbed.append(False)
            continue
        te = _entry_time(s[0], s[1], C0)
        entries.append(te)
        absorbed.append(te is not None)
    mean = float(np.mean(good))
    spread = float((max(good) - min(good)) / mean) if mean > 0 else 0.0
    return AbsorbingSetReport(C0, entries, plateaus, spread, absorbed)


@dataclass
class LinfReport:
    C1: Optional[float]
    entry_times: list
    plateaus: list
    spread: Optional[float]
    sup_all: list


def linf_bound(records: Sequence[TrajectoryRecord], tail_fraction: float = 0.2, factor: float = 1.1) -> LinfReport:
    """Post-transient plateau of the sup-norm and its spread across the ensemble."""
    plateaus, entries, sups = [], [], []
    for rec in records:
        sups.append(float(np.max(rec.norm_xinf)) if not rec.blew_up else float("inf"))
        plateaus.append(None if rec.blew_up else _tail_max(rec.times, rec.norm_xinf, tail_fraction))
    good = [p for p in plateaus if p is not None]
    if not good:
        return LinfReport(None, [None] * len(records), plateaus, None, sups)
    C1 = factor * max(good)
    for rec, pl in zip(records, plateaus):
        entries.append(None if pl is None else _entry_time(rec.times, rec.norm_xinf, C1))
    mean = float(np.mean(good))
    spread = float((max(good) - min(good)) / mean) if mean > 0 else 0.0
    return LinfReport(C1, entries, plateaus, spread, sups)


# --- energy -----------------------------------------------------------------


def energy_functional(U: StateField, cfg: SolverConfig, grid: GridDomain, C_FG: float = 0.0, t: float = 0.0) -> float:
    """Discrete energy (gradient term plus primitives) shifted by the additive constant ``C_FG``."""
    return energy(U, cfg, grid, t) + C_FG


def energy_constant(states: Sequence[StateField], cfg: SolverConfig, grid: GridDomain) -> float:
    """``1 + |min E|`` over the sampled states, so the shifted energy is at least 1 there."""
    vals = [energy(U, cfg, grid) for U in states]
    return 1.0 + abs(min(0.0, min(vals)))


# --- decay and blow-up fits -------------------------------------------------


@dataclass
class DecayFit:
    c: Optional[float]
    rhs_constant: float
    quality: float
    regime: bool
    message: str = ""


def fit_dissipative_decay(record: TrajectoryRecord, tail_fraction: float = 0.2, min_quality: float = 0.9,
                          floor: float = 1e-10) -> DecayFit:
    """Exponential rate of ``||U||^2 - plateau`` along the transient.

    The plateau is the smallest value over the trailing ``tail_fraction``;
    the fit uses the later half of the points whose excess lies above
    ``floor`` times the initial excess, excluding the tail itself.
    """
    t = record.times
    y = record.norm_x2**2
    t_tail = t[-1] - tail_fraction * (t[-1] - t[0])
    plateau = float(np.min(y[t >= t_tail]))
    ex = y - plateau
    scale = max(abs(ex[0]), 0.0)
    if scale <= 1e-12 * (1.0 + abs(plateau)):
        return DecayFit(None, plateau, 0.0, False, "no exponential regime: trajectory is stationary")
    sel = np.flatnonzero((ex > floor * scale) & (t < t_tail))
    if sel.size < 6:
        return DecayFit(None, plateau, 0.0, False, "no exponential regime: transient too short")
    sel = sel[sel.size // 2:]
    tt, ly = t[sel], np.log(ex[sel])
    A = np.vstack([tt, np.ones_like(tt)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    quality = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    quality = float(min(max(quality, 0.0), 1.0))
    c = -float(coef[0])
    if quality >= min_quality and c > 0:
        return DecayFit(c, plateau, quality, True)
    return DecayFit(None, plateau, quality, False, "no exponential regime")


def golden_section(fun, lo: float, hi: float, iters: int = 80) -> float:
    """Minimiser of a unimodal function on ``[lo, hi]``."""
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


@dataclass
class BlowupFit:
    blew_up: bool
    T_star: Optional[float] = None
    exponent: Optional[float] = None
    quality: Optional[float] = None
    n_points: int = 0
    message: str = ""


def _loglog_fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    tot = np.sum((y - y.mean()) ** 2)
    return coef, (1.0 - np.sum(r * r) / tot) if tot > 0 else 0.0


def detect_blowup(record: TrajectoryRecord, decade: float = 10.0, min_points: int = 6) -> BlowupFit:
    """Blow-up time and rate from the last decade of sup-norm growth.

    Near the singularity the absolute time loses resolution, so the time to
    go is rebuilt from the recorded step sizes, ``tau_i = sum_{k>i} dt_k``.
    The remaining offset ``theta = T* - t_end`` is chosen by golden-section
    search (in ``log theta``) to maximise the quality of a straight-line fit
    of ``log ||U||`` against ``log(tau + theta)``.
    """
    if not record.blew_up:
        return BlowupFit(False, message="no blow-up: record ended with " + record.termination)
    N = record.norm_xinf
    dt = np.asarray(record.dt, dtype=float)
    tau = np.concatenate([np.cumsum(dt[::-1])[::-1][1:], [0.0]])
    sel = np.flatnonzero(N >= N[-1] / decade)
    if sel.size < min_points:
        sel = np.arange(max(0, N.size - min_points), N.size)
    sel = sel[sel > 0] if sel.size > min_points else sel
    span = tau[sel[0]]
    if span <= 0:
        return BlowupFit(True, float(record.times[-1]), None, None, sel.size, "degenerate window")
    ly = np.log(N[sel])

    def bad(log_theta):
        _, q = _loglog_fit(np.log(tau[sel] + np.exp(log_theta)), ly)
        return -q

    lo, hi = np.log(span * 1e-8), np.log(span * 10.0)
    lt = golden_section(bad, lo, hi)
    theta = float(np.exp(lt))
    coef, q = _loglog_fit(np.log(tau[sel] + theta), ly)
    return BlowupFit(True, float(record.times[-1] + theta), float(coef[0]), float(max(0.0, min(1.0, q))), int(sel.size))


@dataclass
class DiagnosticsReport:
    absorbing: Optional[AbsorbingSetReport] = None
    linf: Optional[LinfReport] = None
    decay: Optional[DecayFit] = None
    energy_violations: int = 0
    blowup: Optional[BlowupFit] = None
    ladder: Optional[LadderTable] = None
    notes: list = field(default_factory=list)
