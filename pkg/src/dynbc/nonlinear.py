"""Flux laws ``a`` and reaction terms ``f``, ``g`` with their parametric presets.

The diffusion flux enters as ``a(|grad u|^2) grad u``. Two families are
provided: the power law ``a(s) = nu * s^((p-2)/2)`` and the constant law
``a = nu``. A positive ``eps`` shifts the argument, ``a_eps(s) = a(s + eps)``,
which keeps the power law finite and positive at zero gradient.

Reaction terms are described by :class:`Nonlinearity`, which stores the
function, its derivative, a primitive, and the declared tail behaviour
``f(y) ~ c |y|^(r-2) y``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

__all__ = ["FluxSpec", "Nonlinearity", "parse_flux", "parse_nonlinearity", "PRESET_HELP"]


@dataclass(frozen=True)
class FluxSpec:
    """Diffusion law.

    Parameters
    ----------
    kind : {"power", "const", "custom"}
    p : float
        Growth exponent (2 for the constant law).
    nu : float
        Diffusion coefficient (prefactor of the power law).
    eps : float
        Regularisation shift, ``a_eps(s) = a(s + eps)``.
    func, dfunc : callable, optional
        Only for ``kind="custom"``: ``a(s)`` and ``a'(s)``.
    """

    kind: str = "const"
    p: float = 2.0
    nu: float = 1.0
    eps: float = 0.0
    func: Optional[Callable] = field(default=None, compare=False, repr=False)
    dfunc: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("power", "const", "custom"):
            raise ValueError(f"unknown flux kind {self.kind!r}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.kind == "const":
            object.__setattr__(self, "p", 2.0)
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.kind != "custom" and not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom flux needs a callable")

    @classmethod
    def power(cls, p: float, nu: float = 1.0, eps: float = 0.0) -> "FluxSpec":
        return cls("power", float(p), float(nu), float(eps))

    @classmethod
    def constant(cls, nu: float = 1.0) -> "FluxSpec":
        return cls("const", 2.0, float(nu), 0.0)

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def is_linear(self) -> bool:
        return self.kind == "const" or (self.kind == "power" and self.p == 2.0)

    def regularized(self, eps: float) -> "FluxSpec":
        return replace(self, eps=float(eps))

    def a(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "const":
            return np.full_like(s, self.nu)
        if self.kind == "custom":
            return np.asarray(self.func(s + self.eps), dtype=float) * np.ones_like(s)
        if self.p == 2.0:
            return np.full_like(s, self.nu)
        with np.errstate(divide="ignore"):
            return self.nu * (s + self.eps) ** ((self.p - 2.0) / 2.0)

    def da(self, s):
        """Derivative ``a'(s)``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "const" or (self.kind == "power" and self.p == 2.0):
            return np.zeros_like(s)
        if self.kind == "custom":
            if self.dfunc is None:
                h = 1e-7 * np.maximum(1.0, np.abs(s))
                return (self.a(s + h) - self.a(np.maximum(s - h, 0.0))) / (s + h - np.maximum(s - h, 0.0))
            return np.asarray(self.dfunc(s + self.eps), dtype=float) * np.ones_like(s)
        e = (self.p - 2.0) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.nu * e * (s + self.eps) ** (e - 1.0)
        return np.where(np.isfinite(out), out, 0.0) if self.p > 2 else out

    def A(self, s):
        """``A(s) = integral of a over [0, s]``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "const" or (self.kind == "power" and self.p == 2.0):
            return self.nu * s
        if self.kind == "custom":
            vals = [integrate.quad(lambda t: float(self.a(t)), 0.0, float(x))[0] for x in np.ravel(s)]
            return np.reshape(vals, s.shape)
        k = self.p / 2.0
        return self.nu / k * ((s + self.eps) ** k - self.eps**k)

    def describe(self) -> str:
        if self.kind == "const":
            return f"const {self.nu:g}"
        if self.kind == "power":
            tail = f", eps={self.eps:g}" if self.eps else ""
            return f"plaplace {self.p:g} (nu={self.nu:g}{tail})"
        return "custom flux"


def _poly_derivative(coeffs: np.ndarray) -> np.ndarray:
    return coeffs[1:] * np.arange(1, coeffs.size) if coeffs.size > 1 else np.zeros(1)


def _poly_primitive(coeffs: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], coeffs / np.arange(1, coeffs.size + 1)])


@dataclass(frozen=True)
class Nonlinearity:
    """A scalar reaction term with declared tail behaviour.

    ``r`` and ``c`` describe the tail ``f'(y) / |y|^(r-2) -> (r-1) c``; the
    sign of ``c`` separates dissipative (``c > 0``) from anti-dissipative
    terms. Use the constructors rather than the raw fields.
    """

    func: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    r: float
    c: float
    name: str = "custom"
    prim: Optional[Callable] = field(default=None, repr=False, compare=False)
    coeffs: Optional[tuple] = None

    def __call__(self, y):
        return self.func(np.asarray(y, dtype=float))

    def d(self, y):
        return self.deriv(np.asarray(y, dtype=float))

    def primitive(self, y):
        """``F(y)`` with ``F(0) = 0``; exact for presets, adaptive quadrature otherwise."""
        y = np.asarray(y, dtype=float)
        if self.prim is not None:
            return self.prim(y)
        vals = [integrate.quad(lambda t: float(self.func(np.float64(t))), 0.0, float(x), limit=200)[0] for x in np.ravel(y)]
        return np.reshape(vals, y.shape)

    @property
    def dissipative(self) -> bool:
        return self.c > 0

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], name: str = None) -> "Nonlinearity":
        """``sum_k coeffs[k] y^k``; growth ``r = degree + 1``, ``c`` the leading coefficient."""
        cf = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if cf.size == 0:
            cf = np.zeros(1)
        dcf = _poly_derivative(cf)
        pcf = _poly_primitive(cf)
        deg = cf.size - 1
        r = float(max(deg, 0) + 1)
        c = float(cf[-1]) if deg >= 1 else 0.0
        if deg == 0:
            r, c = 1.0, 0.0
        label = name or "poly[" + ", ".join(f"{v:g}" for v in cf) + "]"
        return cls(
            func=lambda y: np.polynomial.polynomial.polyval(y, cf),
            deriv=lambda y: np.polynomial.polynomial.polyval(y, dcf),
            r=r,
            c=c,
            name=label,
            prim=lambda y: np.polynomial.polynomial.polyval(y, pcf),
            coeffs=tuple(cf),
        )

    @classmethod
    def cubic(cls, c: float = 1.0) -> "Nonlinearity":
        return cls.polynomial([0.0, 0.0, 0.0, c], name=f"{c:g} u^3" if c != 1 else "u^3")

    @classmethod
    def linear(cls, c: float = 1.0) -> "Nonlinearity":
        return cls.polynomial([0.0, c], name=f"{c:g} u")

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls.polynomial([0.0], name="0")

    @classmethod
    def power(cls, r: float, c: float = 1.0) -> "Nonlinearity":
        """``c |y|^(r-2) y``, odd and homogeneous of degree ``r - 1``."""
        r, c = float(r), float(c)
        if r < 1:
            raise ValueError("growth exponent r must be at least 1")
        if r == 1:
            return cls(lambda y: c * np.sign(y), lambda y: np.zeros_like(y), 1.0, c, f"{c:g} sign(u)",
                       prim=lambda y: c * np.abs(y))
        if float(r).is_integer() and int(r) % 2 == 0:
            # y^(r-1) is odd already for even r
            cf = np.zeros(int(r))
            cf[-1] = c
            return cls.polynomial(cf, name=f"{c:g} u^{int(r) - 1}")
        return cls(
            func=lambda y: c * np.abs(y) ** (r - 2) * y,
            deriv=lambda y: c * (r - 1) * np.abs(y) ** (r - 2),
            r=r,
            c=c,
            name=f"{c:g} |u|^{r - 2:g} u",
            prim=lambda y: c * np.abs(y) ** r / r,
        )

    @classmethod
    def chafee(cls, beta: float) -> "Nonlinearity":
        """``u^3 - beta u``; the minus sign destabilises the zero state."""
        return cls.polynomial([0.0, -float(beta), 0.0, 1.0], name=f"u^3 - {beta:g} u")

    @classmethod
    def log_entropy(cls) -> "Nonlinearity":
        """``-u (log(1 + |u|))^2``: superlinear but only logarithmically so."""

        def f(y):
            return -y * np.log1p(np.abs(y)) ** 2

        def df(y):
            L = np.log1p(np.abs(y))
            return -(L**2) - 2.0 * np.abs(y) * L / (1.0 + np.abs(y))

        return cls(f, df, 2.0, -np.inf, "-u log(1+|u|)^2")

    def shifted(self, const: float) -> "Nonlinearity":
        """``f - const``; same tail."""
        base = self
        return Nonlinearity(
            func=lambda y: base.func(y) - const,
            deriv=base.deriv,
            r=base.r,
            c=base.c,
            name=f"{base.name} - {const:g}",
            prim=None if base.prim is None else (lambda y: base.prim(y) - const * y),
        )

    def check_asymptotics(self, ymax: float = 1e6, rtol: float = 1e-2) -> bool:
        """Sampled check of ``f'(y)/|y|^(r-2) -> (r-1) c`` at the tail."""
        if not np.isfinite(self.c):
            return False
        y = np.array([ymax / 3, ymax, -ymax / 3, -ymax])
        ratio = self.d(y) / np.abs(y) ** (self.r - 2)
        target = (self.r - 1) * self.c
        return bool(np.all(np.abs(ratio - target) <= rtol * max(1.0, abs(target))))


PRESET_HELP = """\
reaction presets (f, g):
  cubic [c]             c*u^3 (c defaults to 1)
  linear c              c*u
  power r c             c*|u|^(r-2)*u  (growth r, leading coefficient c)
  chafee beta           u^3 - beta*u
  custom c0 c1 c2 ...   polynomial c0 + c1*u + c2*u^2 + ...
  logentropy            -u*log(1+|u|)^2
  zero                  0
flux presets:
  const nu              a(s) = nu
  plaplace p [nu] [eps] a(s) = nu*(s+eps)^((p-2)/2)
"""


def _numbers(tokens, name, lo=None, hi=None):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise ValueError(f"preset {name!r}: non-numeric argument ({exc})") from None
    if lo is not None and len(vals) < lo or hi is not None and len(vals) > hi:
        raise ValueError(f"preset {name!r}: wrong number of arguments")
    return vals


def _tokens(spec) -> list:
    if isinstance(spec, (list, tuple)):
        return [str(t) for t in spec]
    return re.split(r"[\s,\[\]]+", str(spec).strip())


def parse_nonlinearity(spec) -> Nonlinearity:
    """Resolve a reaction preset string such as ``"power 4 -1"``."""
    tok = [t for t in _tokens(spec) if t]
    if not tok:
        raise ValueError("empty nonlinearity preset")
    head, args = tok[0].lower(), tok[1:]
    if head == "cubic":
        vals = _numbers(args, head, 0, 1)
        return Nonlinearity.cubic(vals[0] if vals else 1.0)
    if head == "linear":
        (c,) = _numbers(args, head, 1, 1)
        return Nonlinearity.linear(c)
    if head == "power":
        r, c = _numbers(args, head, 2, 2)
        return Nonlinearity.power(r, c)
    if head == "chafee":
        (beta,) = _numbers(args, head, 1, 1)
        return Nonlinearity.chafee(beta)
    if head == "custom":
        cf = _numbers(args, head, 1)
        return Nonlinearity.polynomial(cf)
    if head == "logentropy":
        _numbers(args, head, 0, 0)
        return Nonlinearity.log_entropy()
    if head == "zero":
        return Nonlinearity.zero()
    raise ValueError(f"unknown reaction preset {tok[0]!r}")


def parse_flux(spec) -> FluxSpec:
    """Resolve a flux preset string such as ``"plaplace 3"`` or ``"const 0.5"``."""
    tok = [t for t in _tokens(spec) if t]
    if not tok:
        raise ValueError("empty flux preset")
    head, args = tok[0].lower(), tok[1:]
    if head == "const":
        (nu,) = _numbers(args, head, 1, 1)
        return FluxSpec.constant(nu)
    if head == "plaplace":
        vals = _numbers(args, head, 1, 3)
        p = vals[0]
        nu = vals[1] if len(vals) > 1 else 1.0
        eps = vals[2] if len(vals) > 2 else (1e-8 if p != 2 else 0.0)
        return FluxSpec.power(p, nu, eps)
    raise ValueError(f"unknown flux preset {tok[0]!r}")
