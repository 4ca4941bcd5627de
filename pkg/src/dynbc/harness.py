"""Config-driven scenario runner and the ``dynbc`` command line.

A scenario file is YAML with a fixed schema (see ``SCHEMA_HELP``). Every
run writes its time series as CSV next to a YAML report, and
``manifest.json`` lists each emitted file with its SHA-256 hash. Parallelism is only across
independent runs; workers rebuild everything from the plain config so no
live objects cross process boundaries.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy
import yaml

from . import __version__
from .attractor import DimensionScenario, sweep_nu
from .blowup import blowup_experiment
from .diagnostics import detect_absorbing_set, detect_blowup, fit_dissipative_decay, linf_bound, norm_ladder
from .grid import GridDomain, StateField, build_grid, x_norm
from .hypotheses import (
    check_balance_nb,
    check_h1,
    check_h2,
    check_h3,
    classify_regime,
    estimate_poincare_constant,
    estimate_trace_constant,
)
from .nonlinear import PRESET_HELP, parse_flux, parse_nonlinearity
from .solver import SolverConfig, simulate

__all__ = ["KINDS", "ConfigError", "ScenarioConfig", "RunResult", "parse_config", "run_scenario", "cli_entry", "main"]

KINDS = ("simulate", "classify", "check-hypotheses", "poincare", "sweep-nu", "blowup-lab", "ladder")
OUTPUT_ENV = "DYNBC_OUTPUT"


class ConfigError(ValueError):
    """Raised with the full list of schema violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config:\n  " + "\n  ".join(self.violations))


# --- schema -----------------------------------------------------------------
# each entry: key -> (default, checker); a checker returns an error string or None


def _num(lo=None, hi=None, strict_lo=False, integer=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "must be a number"
        if integer and int(v) != v:
            return "must be an integer"
        if lo is not None and (v <= lo if strict_lo else v < lo):
            return f"must be {'>' if strict_lo else '>='} {lo}"
        if hi is not None and v > hi:
            return f"must be <= {hi}"
        return None

    return check


def _choice(*opts):
    return lambda v: None if v in opts else f"must be one of {', '.join(map(str, opts))}"


def _boolean(v):
    return None if isinstance(v, bool) else "must be true or false"


def _text(v):
    return None if isinstance(v, str) and v.strip() else "must be a nonempty string"


def _optional(check):
    return lambda v: None if v is None else check(v)


def _num_list(lo=None, strict_lo=False):
    inner = _num(lo, strict_lo=strict_lo)

    def check(v):
        vals = v if isinstance(v, list) else [v]
        if not vals:
            return "must not be empty"
        for x in vals:
            err = inner(x)
            if err:
                return f"entries {err}"
        return None

    return check


def _preset(parser):
    def check(v):
        try:
            parser(v)
        except ValueError as exc:
            return str(exc)
        return None

    return check


def _grid_nodes(v):
    if isinstance(v, list):
        if len(v) != 2:
            return "must be an integer or a pair"
        return _num(3, integer=True)(v[0]) or _num(3, integer=True)(v[1])
    return _num(3, integer=True)(v)


SECTIONS = {
    "grid": {
        "dimension": (1, _choice(1, 2)),
        "nodes": (101, _grid_nodes),
        "length": (1.0, _num(0, strict_lo=True)),
        "lengths": ([1.0, 1.0], _num_list(0, strict_lo=True)),
        "b": (1.0, _num(0, strict_lo=True)),
    },
    "solver": {
        "T": (1.0, _num(0, strict_lo=True)),
        "dt": (1e-3, _num(0, strict_lo=True)),
        "adaptive": (True, _boolean),
        "dt_max": (0.1, _num(0, strict_lo=True)),
        "dt_min": (1e-12, _num(0, strict_lo=True)),
        "newton_tol": (1e-10, _num(0, strict_lo=True)),
        "newton_max_iter": (50, _num(1, integer=True)),
        "blowup_threshold": (1e8, _num(0, strict_lo=True)),
        "boundary": ("dynamic", _choice("dynamic", "dirichlet")),
        "snapshot_stride": (10, _num(1, integer=True)),
    },
    "initial": {
        "kind": ("random", _choice("random", "cosine", "constant", "zero", "eigen")),
        "amplitude": (1.0, _num_list(0)),
        "count": (1, _num(1, integer=True)),
        "modes": (6, _num(1, integer=True)),
    },
    "classify": {
        "poincare_s": (1.0, _num(1)),
        "poincare_constant": (None, _optional(_num(0, strict_lo=True))),
    },
    "poincare": {
        "s": (2.0, _num(1)),
        "n_starts": (6, _num(1, integer=True)),
        "trace_p": (None, _optional(_num(1, strict_lo=True))),
    },
    "sweep": {
        "nu": ([0.02, 0.01, 0.005, 0.0025], _num_list(0, strict_lo=True)),
        "beta": (4.0, _num(0)),
        "c_g": (1.0, _num()),
        "dt": (0.005, _num(0, strict_lo=True)),
        "T_transient": (10.0, _num(0)),
        "T_average": (40.0, _num(0, strict_lo=True)),
        "m": (None, _optional(_num(1, 32, integer=True))),
        "stride": (1, _num(1, integer=True)),
        "base": ("zero", _choice("zero", "random")),
    },
    "blowup": {
        "margin": (0.0, _num(0)),
        "T": (10.0, _num(0, strict_lo=True)),
    },
    "ladder": {
        "k_max": (12, _num(0, 60, integer=True)),
        "p": (None, _optional(_num(1, strict_lo=True))),
    },
}

TOP = {
    "kind": (None, _choice(*KINDS)),
    "flux": ("const 1", _preset(parse_flux)),
    "f": ("cubic", _preset(parse_nonlinearity)),
    "g": ("cubic", _preset(parse_nonlinearity)),
    "h1": (0.0, _num()),
    "h2": (0.0, _num()),
    "seed": (0, _num(0, integer=True)),
    "out": (None, _optional(_text)),
    "save_snapshots": (False, _boolean),
}

SCHEMA_HELP = """config keys (YAML):
  kind: simulate | classify | check-hypotheses | poincare | sweep-nu | blowup-lab | ladder
  flux, f, g: preset strings (below); h1, h2: constant sources; seed; out; save_snapshots
  grid:    dimension, nodes, length (1-D) or lengths (2-D), b
  solver:  T, dt, adaptive, dt_max, dt_min, newton_tol, newton_max_iter,
           blowup_threshold, boundary (dynamic|dirichlet), snapshot_stride
  initial: kind (random|cosine|constant|zero|eigen), amplitude (number or list), count, modes
  classify: poincare_s, poincare_constant
  poincare: s, n_starts, trace_p
  sweep:   nu (list), beta, c_g, dt, T_transient, T_average, m, stride, base (zero|random)
  blowup:  margin, T
  ladder:  k_max, p
"""


@dataclass
class ScenarioConfig:
    kind: str
    flux: str
    f: str
    g: str
    h1: float
    h2: float
    seed: int
    out: Optional[str]
    save_snapshots: bool
    sections: dict
    source: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)

    def section(self, name: str) -> dict:
        return self.sections[name]

    def build_grid(self) -> GridDomain:
        return build_grid(self.sections["grid"])

    def solver_config(self) -> SolverConfig:
        s = self.sections["solver"]
        return SolverConfig(
            parse_flux(self.flux), parse_nonlinearity(self.f), parse_nonlinearity(self.g), h1=self.h1, h2=self.h2,
            dt=s["dt"], adaptive=s["adaptive"], dt_max=s["dt_max"], dt_min=s["dt_min"], newton_tol=s["newton_tol"],
            newton_max_iter=int(s["newton_max_iter"]), blowup_threshold=s["blowup_threshold"],
            boundary=s["boundary"], snapshot_stride=int(s["snapshot_stride"]),
        )

    def canonical(self) -> dict:
        d = {k: getattr(self, k) for k in ("kind", "flux", "f", "g", "h1", "h2", "seed", "save_snapshots")}
        d.update(copy.deepcopy(self.sections))
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()


def parse_config(source, kind: Optional[str] = None, seed: Optional[int] = None) -> ScenarioConfig:
    """Validate a scenario file (path) or mapping.

    All violations are collected and raised together as
    :class:`ConfigError`; unknown keys are violations. ``kind`` and
    ``seed`` override the file (a conflicting ``kind`` is a violation).
    """
    path = None
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        path = str(source)
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
        except yaml.YAMLError as exc:
            raise ConfigError([f"{path}: not valid YAML ({exc})"]) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a mapping"])
    errors = []
    top = {}
    for key, val in raw.items():
        if key in SECTIONS:
            continue
        if key not in TOP:
            errors.append(f"unknown key {key!r}")
            continue
        err = TOP[key][1](val)
        if err:
            errors.append(f"{key}: {err}")
        top[key] = val
    if kind is not None:
        if "kind" in top and top["kind"] != kind:
            errors.append(f"kind: config says {top['kind']!r} but the command is {kind!r}")
        top["kind"] = kind
    if top.get("kind") is None and not any(e.startswith("kind:") for e in errors):
        errors.append("kind: missing")
    if seed is not None:
        top["seed"] = seed
    sections = {}
    for name, schema in SECTIONS.items():
        given = raw.get(name) or {}
        if not isinstance(given, dict):
            errors.append(f"{name}: must be a mapping")
            given = {}
        sec = {k: copy.deepcopy(d) for k, (d, _) in schema.items()}
        for key, val in given.items():
            if key not in schema:
                errors.append(f"unknown key {name}.{key!r}")
                continue
            err = schema[key][1](val)
            if err:
                errors.append(f"{name}.{key}: {err}")
            sec[key] = val
        sections[name] = sec
    solver = sections["solver"]
    if not errors and solver["dt_min"] > solver["dt"]:
        errors.append("solver.dt_min: must not exceed solver.dt")
    sweep = sections["sweep"]
    if isinstance(sweep["nu"], list) and len(sweep["nu"]) < 4 and top.get("kind") == "sweep-nu":
        errors.append("sweep.nu: need at least four values")
    if errors:
        raise ConfigError(errors)
    vals = {k: top.get(k, d) for k, (d, _) in TOP.items()}
    return ScenarioConfig(
        kind=vals["kind"], flux=str(vals["flux"]), f=str(vals["f"]), g=str(vals["g"]), h1=float(vals["h1"]),
        h2=float(vals["h2"]), seed=int(vals["seed"]), out=vals["out"], save_snapshots=bool(vals["save_snapshots"]),
        sections=sections, source=path, raw=raw,
    )


# --- initial data -----------------------------------------------------------


def initial_states(cfg: ScenarioConfig, grid: GridDomain) -> list:
    """Deterministic ensemble: ``count`` fields for each amplitude, in that order."""
    ini = cfg.section("initial")
    amps = ini["amplitude"] if isinstance(ini["amplitude"], list) else [ini["amplitude"]]
    rng = np.random.default_rng(cfg.seed)
    x = grid.coords / np.asarray(grid.lengths)[None, :]
    out = []
    for amp in amps:
        for _ in range(int(ini["count"])):
            kind = ini["kind"]
            if kind == "zero":
                u = np.zeros(grid.n)
            elif kind == "constant":
                u = np.full(grid.n, float(amp))
            elif kind == "cosine":
                u = np.prod(np.cos(np.pi * x), axis=1)
            elif kind == "eigen":
                u = np.prod(np.sin(np.pi * x), axis=1)
            else:
                u = np.zeros(grid.n)
                for k in range(int(ini["modes"]) + 1):
                    ks = rng.integers(0, k + 1, size=grid.dim) if grid.dim > 1 else np.array([k])
                    u += rng.standard_normal() / (1.0 + k) * np.prod(np.cos(np.pi * ks[None, :] * x), axis=1)
            if kind not in ("zero", "constant"):
                peak = np.max(np.abs(u))
                u = float(amp) * u / peak if peak > 0 else u
            out.append(u)
    return out


# --- runners ----------------------------------------------------------------


@dataclass
class RunResult:
    status: int
    out_dir: Path
    files: list
    manifest: Path
    report: dict


def _plain(obj):
    """Numpy-free structure for YAML/JSON output."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _simulate_job(args):
    raw_cfg, index, u0 = args
    cfg = parse_config(raw_cfg)
    grid = cfg.build_grid()
    scfg = cfg.solver_config()
    try:
        rec = simulate(StateField.from_bulk(u0, grid), cfg.section("solver")["T"], scfg, grid)
    except Exception as exc:
        return index, None, f"{type(exc).__name__}: {exc}"
    rec.grid = None
    return index, rec, ""


def _run_simulations(cfg: ScenarioConfig, jobs: int):
    grid = cfg.build_grid()
    raw = cfg.canonical()
    work = [(raw, i, u0) for i, u0 in enumerate(initial_states(cfg, grid))]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as ex:
            out = list(ex.map(_simulate_job, work))
    else:
        out = [_simulate_job(w) for w in work]
    out.sort(key=lambda r: r[0])
    return grid, out


def _kind_simulate(cfg, out_dir, jobs, files):
    grid, results = _run_simulations(cfg, jobs)
    runs, recs, status = [], [], 0
    for i, rec, msg in results:
        key = f"run{i:03d}"
        if rec is None:
            runs.append({"key": key, "termination": "solver-failure", "message": msg})
            status = 1
            continue
        path = out_dir / f"{key}.csv"
        rec.to_csv(path)
        files.append(path)
        if cfg.save_snapshots:
            t, V = rec.nodal()
            snap = out_dir / f"{key}_snapshots.npz"
            np.savez(snap, t=t, u=V)
            files.append(snap)
        if rec.termination == "solver-failure":
            status = 1
        runs.append({"key": key, "termination": rec.termination, "message": rec.message, "t_end": rec.t_end,
                     "steps": int(rec.times.size - 1), "max_sup": float(np.max(rec.norm_xinf))})
        recs.append(rec)
    report = {"runs": runs}
    horizon = [r for r in recs if r.termination == "horizon"]
    if horizon:
        ab = detect_absorbing_set(horizon)
        li = linf_bound(horizon)
        report["absorbing_set"] = {"C0": ab.C0, "entry_times": ab.entry_times, "plateaus": ab.plateaus,
                                   "spread": ab.spread}
        report["linf"] = {"C1": li.C1, "entry_times": li.entry_times, "plateaus": li.plateaus, "spread": li.spread}
        fits = []
        for r in horizon:
            d = fit_dissipative_decay(r)
            fits.append({"rate": d.c, "constant": d.rhs_constant, "quality": d.quality, "message": d.message})
        report["decay_fits"] = fits
    blown = [r for r in recs if r.blew_up]
    if blown:
        report["blowup_fits"] = []
        for r in blown:
            b = detect_blowup(r)
            report["blowup_fits"].append({"T_star": b.T_star, "exponent": b.exponent, "quality": b.quality})
    return status, report


def _kind_classify(cfg, out_dir, jobs, files):
    grid = cfg.build_grid()
    f, g, flux = parse_nonlinearity(cfg.f), parse_nonlinearity(cfg.g), parse_flux(cfg.flux)
    c = cfg.section("classify")
    rep = classify_regime(f, g, flux, grid, h2_zero=cfg.h2 == 0, C_poincare=c["poincare_constant"],
                          poincare_s=c["poincare_s"])
    return 0, {"verdict": rep.verdict, "fired": rep.fired, "margin": rep.margin, "notes": rep.notes}


def _kind_hypotheses(cfg, out_dir, jobs, files):
    grid = cfg.build_grid()
    f, g, flux = parse_nonlinearity(cfg.f), parse_nonlinearity(cfg.g), parse_flux(cfg.flux)
    h1 = check_h1(flux, dim=grid.dim, seed=cfg.seed)
    h2 = check_h2(f, g)
    h3 = check_h3(f, g)
    report = {
        "H1": {"passed": h1.passed, "worst_margin": h1.worst_margin, "c1": h1.c1},
        "H2": {"passed": h2.passed, "inf_f": h2.inf_f, "inf_g": h2.inf_g},
        "H3": {"r1": h3.r1, "r2": h3.r2, "f_envelope_constant": h3.c_f, "g_envelope_constant": h3.c_g,
               "f_envelope": h3.f_envelope, "g_h3a": h3.g_h3a, "g_h3b": h3.g_h3b,
               "f_sandwich": list(h3.f_sandwich), "g_sandwich": list(h3.g_sandwich)},
        "leading_coefficients": {"f": f.c, "g": g.c},
    }
    if f.c > 0 and g.c <= 0:
        C = estimate_poincare_constant(grid, s=cfg.section("classify")["poincare_s"], seed=cfg.seed)
        nb = check_balance_nb(f, g, flux, C, grid)
        report["NB"] = {"passed": nb.passed, "margin": nb.margin, "best_eps": nb.best_eps, "y0": nb.y0,
                        "C_tilde": nb.C_tilde, "branch": nb.branch, "closed_form_margin": nb.closed_form_margin}
    return 0, report


def _kind_poincare(cfg, out_dir, jobs, files):
    grid = cfg.build_grid()
    p = cfg.section("poincare")
    C = estimate_poincare_constant(grid, s=p["s"], n_starts=int(p["n_starts"]), seed=cfg.seed)
    report = {"s": p["s"], "C_poincare": C, "inv_lambda": grid.inv_lambda, "volume": grid.volume}
    if p["trace_p"] is not None:
        tc = estimate_trace_constant(grid, p["s"], p["trace_p"], 1.0, seed=cfg.seed)
        report["trace_constant"] = {"value": tc.value, "gamma": tc.gamma}
    return 0, report


def _kind_sweep(cfg, out_dir, jobs, files):
    s = cfg.section("sweep")
    gspec = cfg.section("grid")
    nodes = gspec["nodes"][0] if isinstance(gspec["nodes"], list) else gspec["nodes"]
    scenario = DimensionScenario(
        dim=int(gspec["dimension"]), beta=s["beta"], c_g=s["c_g"], length=gspec["length"], n=int(nodes),
        dt=s["dt"], T_transient=s["T_transient"], T_average=s["T_average"],
        m=None if s["m"] is None else int(s["m"]), stride=int(s["stride"]), base=s["base"], seed=cfg.seed,
    )
    res = sweep_nu(s["nu"], scenario, jobs=jobs)
    path = out_dir / "sweep.csv"
    with open(path, "w") as fh:
        fh.write("nu,kaplan_yorke,converged,leading_exponent\n")
        for nu, d, r in zip(res.nus, res.dims, res.results):
            conv = "" if r is None else str(bool(r.converged)).lower()
            lead = float("nan") if r is None else float(r.exponents[0])
            fh.write(f"{float(nu)!r},{float(d)!r},{conv},{lead!r}\n")
    files.append(path)
    return (1 if res.partial else 0), res.summary()


def _kind_blowup(cfg, out_dir, jobs, files):
    grid = cfg.build_grid()
    scfg = cfg.solver_config()
    b = cfg.section("blowup")
    flux = parse_flux(cfg.flux)
    if not flux.is_linear:
        raise ValueError("blow-up lab needs a constant flux")
    rep = blowup_experiment(scfg.f, scfg.g, grid, cfg=scfg, nu=flux.nu, T=b["T"], margin=b["margin"])
    for name, rec in (("solution", rep.solution), ("companion", rep.companion)):
        path = out_dir / f"{name}.csv"
        rec.to_csv(path)
        files.append(path)
    r = rep.recipe
    report = {
        "recipe": {"A": r.A, "delta": r.delta, "lambda_1": r.lam, "s0": r.s0, "s0_prime": r.s0_prime,
                   "dn_phi": r.dn_phi, "notes": r.notes},
        "solution": {"termination": rep.solution.termination, "T_star": rep.solution_fit.T_star,
                     "exponent": rep.solution_fit.exponent},
        "companion": {"termination": rep.companion.termination, "T_star": rep.companion_fit.T_star,
                      "exponent": rep.companion_fit.exponent},
        "comparison": {"passed": rep.comparison.passed, "worst_violation": rep.comparison.worst_violation,
                       "where": list(rep.comparison.where), "tol": rep.comparison.tol},
        "checks": rep.checks,
    }
    return (0 if rep.passed else 1), report


def _kind_ladder(cfg, out_dir, jobs, files):
    grid, results = _run_simulations(cfg, jobs)
    k_max = int(cfg.section("ladder")["k_max"])
    p_cfg = cfg.section("ladder")["p"]
    p = parse_flux(cfg.flux).p if p_cfg is None else p_cfg
    tables, status = [], 0
    for i, rec, msg in results:
        if rec is None:
            tables.append({"key": f"run{i:03d}", "message": msg})
            status = 1
            continue
        U = rec.snapshots[-1]
        L = norm_ladder(U, p, k_max, grid)
        sup = x_norm(U, np.inf, np.inf, grid)
        path = out_dir / f"ladder{i:03d}.csv"
        with open(path, "w") as fh:
            fh.write("k,m,log_Y,root,normalized_root\n")
            for row in zip(L.k, L.m, L.log_Y, L.roots, L.normalized_roots):
                fh.write(f"{int(row[0])},{float(row[1])!r},{float(row[2])!r},{float(row[3])!r},{float(row[4])!r}\n")
        files.append(path)
        tables.append({"key": f"run{i:03d}", "t": rec.t_end, "sup": sup, "top_root": float(L.roots[-1]),
                       "relative_gap": float(abs(L.roots[-1] - sup) / max(sup, 1e-300))})
    return status, {"p": p, "k_max": k_max, "runs": tables}


RUNNERS = {
    "simulate": _kind_simulate,
    "classify": _kind_classify,
    "check-hypotheses": _kind_hypotheses,
    "poincare": _kind_poincare,
    "sweep-nu": _kind_sweep,
    "blowup-lab": _kind_blowup,
    "ladder": _kind_ladder,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def default_out_dir(cfg: ScenarioConfig) -> Path:
    if cfg.out:
        return Path(cfg.out)
    stem = Path(cfg.source).stem if cfg.source else cfg.kind
    return Path(os.environ.get(OUTPUT_ENV, "dynbc_output")) / stem


def run_scenario(cfg: ScenarioConfig, out_dir=None, jobs: int = 1) -> RunResult:
    """Dispatch to the owning module and persist its outputs next to a manifest.

    Exceptions inside a run are caught, recorded in the manifest and
    turned into status 1.
    """
    out_dir = Path(out_dir) if out_dir is not None else default_out_dir(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: list = []
    t0 = time.perf_counter()
    error = ""
    try:
        status, report = RUNNERS[cfg.kind](cfg, out_dir, max(1, int(jobs)), files)
    except Exception as exc:
        status, report, error = 1, {}, f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - t0
    report = _plain({"kind": cfg.kind, "status": status, "error": error, **report})
    rpath = out_dir / "report.yaml"
    with open(rpath, "w") as fh:
        yaml.safe_dump(report, fh, sort_keys=False)
    files.append(rpath)
    manifest = {
        "kind": cfg.kind,
        "config_sha256": cfg.digest(),
        "config": _plain(cfg.canonical()),
        "seed": cfg.seed,
        "jobs": int(jobs),
        "status": status,
        "error": error,
        "wall_time_s": wall,
        "versions": {"dynbc": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "pyyaml": yaml.__version__},
        "files": [{"path": p.name, "sha256": _sha256(p)} for p in files],
    }
    mpath = out_dir / "manifest.json"
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return RunResult(status, out_dir, files, mpath, report)


# --- command line -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _positive_int(v):
    try:
        k = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {v!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return k


def _seed(v):
    try:
        k = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {v!r}") from None
    if k < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return k


def build_parser() -> argparse.ArgumentParser:
    epilog = SCHEMA_HELP + "\n" + PRESET_HELP + f"\nDefault output root: ${OUTPUT_ENV} (else ./dynbc_output).\n"
    parser = _Parser(prog="dynbc", description="Reaction-diffusion with dynamic boundary conditions: scenario runner.",
                     epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "simulate": "integrate an initial-data ensemble and write CSV time series",
        "classify": "decide the dissipativity regime of (f, g, flux)",
        "check-hypotheses": "check the structural hypotheses on flux and reactions",
        "poincare": "estimate the Poincare constant of the grid",
        "sweep-nu": "Lyapunov dimension versus diffusion coefficient",
        "blowup-lab": "subsolution construction and comparison blow-up run",
        "ladder": "Moser norm ladder on the final state of a run",
    }
    for name in KINDS:
        sp_ = sub.add_parser(name, help=helps[name], description=helps[name], epilog=epilog,
                             formatter_class=argparse.RawDescriptionHelpFormatter)
        sp_.add_argument("--config", required=True, metavar="PATH", help="scenario YAML file")
        sp_.add_argument("--out", metavar="DIR", help="output directory")
        sp_.add_argument("--jobs", type=_positive_int, default=1, metavar="N", help="parallel independent runs")
        sp_.add_argument("--seed", type=_seed, default=None, metavar="S", help="override the config seed")
    return parser


def cli_entry(argv=None) -> int:
    """Run the command line; returns 0 on success, 1 on run failure, 2 on usage errors."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("dynbc: error: a command is required", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config, kind=args.command, seed=args.seed)
    except ConfigError as exc:
        print(f"dynbc: error: {exc}", file=sys.stderr)
        return 2
    res = run_scenario(cfg, args.out, jobs=args.jobs)
    summary = {k: v for k, v in res.report.items() if k in ("kind", "status", "error", "verdict", "fired", "margin",
                                                            "slope", "ci", "C_poincare", "checks")}
    print(json.dumps(summary))
    print(f"outputs in {res.out_dir}")
    if res.status and res.report.get("error"):
        print(f"dynbc: run failed: {res.report['error']}", file=sys.stderr)
    return res.status


def main() -> None:
    sys.exit(cli_entry())
