"""Structured grids for a bulk domain coupled to its boundary.

A grid carries everything needed to integrate against the product measure
``dx`` on the domain and ``dS/b`` on the boundary: nodal volume weights,
boundary surface weights, the boundary coefficient ``b``, a per-cell
gradient operator and a second-order one-sided normal-derivative stencil.

Nodal fields are plain ``numpy`` arrays indexed by node id. The boundary
part of a state lives on ``grid.boundary`` (an index array into the nodes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

BProfile = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]

__all__ = [
    "GridDomain",
    "StateField",
    "build_interval_grid",
    "build_rectangle_grid",
    "build_grid",
    "x_norm",
    "w1p_norm",
    "trace",
    "gradient",
    "normal_derivative",
]


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Discretised closure of the domain together with its boundary measure.

    Attributes
    ----------
    dim : int
        Space dimension (1 or 2).
    shape : tuple of int
        Node counts per axis.
    lengths : tuple of float
        Extents of the box ``(0, L_1) x ... ``.
    coords : ndarray, shape (n, dim)
        Node coordinates.
    weights : ndarray, shape (n,)
        Volume quadrature weights (trapezoid rule); they sum to ``|Omega|``.
    boundary : ndarray of int, shape (nb,)
        Node ids on the boundary.
    surface : ndarray, shape (nb,)
        Surface weights ``dS`` at boundary nodes; they sum to ``|Gamma|``.
    b : ndarray, shape (nb,)
        Positive boundary coefficient.
    grad_op : scipy.sparse.csr_matrix, shape (ncell*dim, n)
        Row ``c*dim + k`` gives the k-th gradient component on cell ``c``.
    cell_volumes : ndarray, shape (ncell,)
    normal_op : scipy.sparse.csr_matrix, shape (nb, n)
        Outward normal derivative at boundary nodes.
    tangent_op : scipy.sparse.csr_matrix, shape (nb, n)
        Tangential derivative along the boundary (zero rows in 1D and at corners).
    """

    dim: int
    shape: tuple
    lengths: tuple
    coords: np.ndarray
    weights: np.ndarray
    boundary: np.ndarray
    surface: np.ndarray
    b: np.ndarray
    grad_op: sp.csr_matrix
    cell_volumes: np.ndarray
    normal_op: sp.csr_matrix
    tangent_op: sp.csr_matrix
    cells: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary.size

    @property
    def n_cells(self) -> int:
        return self.cell_volumes.size

    @property
    def spacing(self) -> tuple:
        return tuple(L / (m - 1) for L, m in zip(self.lengths, self.shape))

    @property
    def h(self) -> float:
        return max(self.spacing)

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @property
    def boundary_measure(self) -> np.ndarray:
        """Weights of ``dS/b`` at boundary nodes."""
        return self.surface / self.b

    @property
    def inv_lambda(self) -> float:
        """The integral of ``1/b`` over the boundary."""
        return float(self.boundary_measure.sum())

    @property
    def lam(self) -> float:
        return 1.0 / self.inv_lambda

    @property
    def lumped_mass(self) -> np.ndarray:
        """Nodal mass with the boundary measure folded onto boundary nodes."""
        m = self.weights.copy()
        m[self.boundary] += self.boundary_measure
        return m

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    def zeros(self) -> "StateField":
        return StateField(np.zeros(self.n), np.zeros(self.n_boundary))


@dataclass
class StateField:
    """Paired bulk/boundary state ``U = (u, v)``.

    ``v`` is an independent unknown; it agrees with the trace of ``u`` once
    the evolution has started but may differ in initial data.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    @classmethod
    def from_bulk(cls, u, grid: GridDomain) -> "StateField":
        u = np.asarray(u, dtype=float)
        return cls(u.copy(), u[grid.boundary].copy())

    def copy(self) -> "StateField":
        return StateField(self.u.copy(), self.v.copy())

    def check(self, grid: GridDomain) -> None:
        if self.u.shape != (grid.n,) or self.v.shape != (grid.n_boundary,):
            raise ValueError(
                f"state shapes {self.u.shape}/{self.v.shape} do not match grid "
                f"({grid.n}, {grid.n_boundary})"
            )

    def isfinite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    def __add__(self, other):
        return StateField(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return StateField(self.u - other.u, self.v - other.v)

    def __mul__(self, c):
        return StateField(c * self.u, c * self.v)

    __rmul__ = __mul__

    def __neg__(self):
        return StateField(-self.u, -self.v)


def _b_values(b_profile: BProfile, pts: np.ndarray) -> np.ndarray:
    if callable(b_profile):
        b = np.asarray(b_profile(pts), dtype=float)
    else:
        b = np.asarray(b_profile, dtype=float)
    b = np.broadcast_to(b, (pts.shape[0],)).astype(float)
    if not np.all(np.isfinite(b)) or np.any(b <= 0.0):
        raise ValueError("boundary coefficient b must be finite and bounded below by a positive constant")
    return b


def _trapezoid(m: int, h: float) -> np.ndarray:
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    return w


def build_interval_grid(n: int, length: float = 1.0, b_profile: BProfile = 1.0) -> GridDomain:
    """Uniform grid on ``(0, length)`` with boundary nodes at both endpoints.

    >>> g = build_interval_grid(11, 2.0)
    >>> round(g.volume, 12), g.inv_lambda
    (2.0, 2.0)
    """
    if int(n) != n or n < 3:
        raise ValueError("interval grid needs at least 3 nodes")
    if not length > 0:
        raise ValueError("length must be positive")
    n = int(n)
    h = length / (n - 1)
    x = np.linspace(0.0, length, n)
    coords = x[:, None]
    weights = _trapezoid(n, h)
    boundary = np.array([0, n - 1])
    surface = np.ones(2)
    b = _b_values(b_profile, coords[boundary])

    rows = np.repeat(np.arange(n - 1), 2)
    cols = np.column_stack([np.arange(n - 1), np.arange(1, n)]).ravel()
    vals = np.tile([-1.0 / h, 1.0 / h], n - 1)
    grad_op = sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))

    # outward derivative: -u'(0) and +u'(L), second-order one-sided
    c = np.array([3.0, -4.0, 1.0]) / (2 * h)
    nrow = [0, 0, 0, 1, 1, 1]
    ncol = [0, 1, 2, n - 1, n - 2, n - 3]
    normal_op = sp.csr_matrix((np.concatenate([c, c]), (nrow, ncol)), shape=(2, n))
    tangent_op = sp.csr_matrix((2, n))
    cells = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return GridDomain(
        dim=1,
        shape=(n,),
        lengths=(float(length),),
        coords=coords,
        weights=weights,
        boundary=boundary,
        surface=surface,
        b=b,
        grad_op=grad_op,
        cell_volumes=np.full(n - 1, h),
        normal_op=normal_op,
        tangent_op=tangent_op,
        cells=cells,
    )


def build_rectangle_grid(nx: int, ny: int, lengths=(1.0, 1.0), b_profile: BProfile = 1.0) -> GridDomain:
    """Tensor grid on a rectangle, each square split into two P1 triangles.

    Boundary nodes are the perimeter, listed counter-clockwise from the
    origin. Corner surface weights take half a spacing from each adjacent
    edge. At a corner the outward normal derivative is the mean of the two
    edge derivatives.
    """
    if int(nx) != nx or int(ny) != ny or nx < 3 or ny < 3:
        raise ValueError("rectangle grid needs at least 3 nodes per axis")
    Lx, Ly = (float(v) for v in lengths)
    if not (Lx > 0 and Ly > 0):
        raise ValueError("degenerate rectangle extents")
    nx, ny = int(nx), int(ny)
    hx, hy = Lx / (nx - 1), Ly / (ny - 1)
    n = nx * ny

    def idx(i, j):
        return i + nx * j

    X, Y = np.meshgrid(np.linspace(0, Lx, nx), np.linspace(0, Ly, ny))
    coords = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.outer(_trapezoid(ny, hy), _trapezoid(nx, hx)).ravel()

    # perimeter, counter-clockwise
    bnd = [idx(i, 0) for i in range(nx)]
    bnd += [idx(nx - 1, j) for j in range(1, ny)]
    bnd += [idx(i, ny - 1) for i in range(nx - 2, -1, -1)]
    bnd += [idx(0, j) for j in range(ny - 2, 0, -1)]
    boundary = np.array(bnd)
    bi = boundary % nx
    bj = boundary // nx
    on_x = (bj == 0) | (bj == ny - 1)  # bottom/top edges
    on_y = (bi == 0) | (bi == nx - 1)  # left/right edges
    surface = np.where(on_x, hx, 0.0) + np.where(on_y, hy, 0.0)
    corner = on_x & on_y
    surface[corner] = 0.5 * hx + 0.5 * hy
    b = _b_values(b_profile, coords[boundary])

    # two triangles per square; gradient is constant on each
    tri, rows, cols, vals = [], [], [], []
    c = 0
    for j in range(ny - 1):
        for i in range(nx - 1):
            p00, p10, p01, p11 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
            tri.append((p00, p10, p01))
            rows += [2 * c, 2 * c, 2 * c + 1, 2 * c + 1]
            cols += [p00, p10, p00, p01]
            vals += [-1 / hx, 1 / hx, -1 / hy, 1 / hy]
            c += 1
            tri.append((p11, p01, p10))
            rows += [2 * c, 2 * c, 2 * c + 1, 2 * c + 1]
            cols += [p01, p11, p10, p11]
            vals += [-1 / hx, 1 / hx, -1 / hy, 1 / hy]
            c += 1
    grad_op = sp.csr_matrix((vals, (rows, cols)), shape=(2 * c, n))
    cell_volumes = np.full(c, 0.5 * hx * hy)

    nr, nc, nv = [], [], []
    tr, tc, tv = [], [], []
    for k, (i, j) in enumerate(zip(bi, bj)):
        parts = []
        if i == 0:
            parts.append([(idx(0, j), 3 / (2 * hx)), (idx(1, j), -4 / (2 * hx)), (idx(2, j), 1 / (2 * hx))])
        if i == nx - 1:
            parts.append([(idx(nx - 1, j), 3 / (2 * hx)), (idx(nx - 2, j), -4 / (2 * hx)), (idx(nx - 3, j), 1 / (2 * hx))])
        if j == 0:
            parts.append([(idx(i, 0), 3 / (2 * hy)), (idx(i, 1), -4 / (2 * hy)), (idx(i, 2), 1 / (2 * hy))])
        if j == ny - 1:
            parts.append([(idx(i, ny - 1), 3 / (2 * hy)), (idx(i, ny - 2), -4 / (2 * hy)), (idx(i, ny - 3), 1 / (2 * hy))])
        for part in parts:
            for col, val in part:
                nr.append(k)
                nc.append(col)
                nv.append(val / len(parts))
        if len(parts) == 1:
            if i in (0, nx - 1):  # vertical edge, tangent along y
                tr += [k, k]
                tc += [idx(i, j + 1), idx(i, j - 1)]
                tv += [1 / (2 * hy), -1 / (2 * hy)]
            else:
                tr += [k, k]
                tc += [idx(i + 1, j), idx(i - 1, j)]
                tv += [1 / (2 * hx), -1 / (2 * hx)]
    nb = boundary.size
    normal_op = sp.csr_matrix((nv, (nr, nc)), shape=(nb, n))
    tangent_op = sp.csr_matrix((tv, (tr, tc)), shape=(nb, n))
    return GridDomain(
        dim=2,
        shape=(nx, ny),
        lengths=(Lx, Ly),
        coords=coords,
        weights=weights,
        boundary=boundary,
        surface=surface,
        b=b,
        grad_op=grad_op,
        cell_volumes=cell_volumes,
        normal_op=normal_op,
        tangent_op=tangent_op,
        cells=np.array(tri),
    )


def build_grid(spec: dict) -> GridDomain:
    """Build a grid from a plain mapping (as read from a config file).

    Keys: ``dimension`` (1 or 2), ``nodes`` (int or pair), ``length`` or
    ``lengths``, and ``b`` (positive float).
    """
    dim = int(spec.get("dimension", 1))
    b = spec.get("b", 1.0)
    if dim == 1:
        return build_interval_grid(int(spec["nodes"]), float(spec.get("length", 1.0)), b)
    if dim == 2:
        nodes = spec["nodes"]
        if np.isscalar(nodes):
            nodes = (nodes, nodes)
        lengths = spec.get("lengths", (1.0, 1.0))
        return build_rectangle_grid(int(nodes[0]), int(nodes[1]), lengths, b)
    raise ValueError(f"unsupported dimension {dim}")


def _lp(values: np.ndarray, w: np.ndarray, s: float) -> float:
    if np.isinf(s):
        return float(np.max(np.abs(values))) if values.size else 0.0
    a = np.abs(values)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0 or not np.isfinite(top):
        return top
    # scale by the max so that large s neither overflows nor underflows
    return top * float(np.sum(w * (a / top) ** s) ** (1.0 / s))


def x_norm(U: StateField, s1: float, s2: float, grid: GridDomain) -> float:
    """Norm of ``U`` in the product space ``L^s1(Omega) x L^s2(Gamma, dS/b)``.

    With both exponents infinite this is the larger of the two sup-norms.
    """
    U.check(grid)
    if np.isinf(s1) and np.isinf(s2):
        return max(_lp(U.u, grid.weights, np.inf), _lp(U.v, grid.boundary_measure, np.inf))
    return _lp(U.u, grid.weights, s1) + _lp(U.v, grid.boundary_measure, s2)


def x_inner(U: StateField, W: StateField, grid: GridDomain) -> float:
    """Inner product of the Hilbert space ``X^2``."""
    return float(np.dot(grid.weights, U.u * W.u) + np.dot(grid.boundary_measure, U.v * W.v))


def x2_norm_sq(U: StateField, grid: GridDomain) -> float:
    """Squared Hilbert norm ``||u||^2 + ||v||^2`` (not the square of ``x_norm``)."""
    return x_inner(U, U, grid)


def gradient(u: np.ndarray, grid: GridDomain) -> np.ndarray:
    """Per-cell gradient, shape ``(ncell, dim)``."""
    return (grid.grad_op @ np.asarray(u, dtype=float)).reshape(grid.n_cells, grid.dim)


def grad_lp(u: np.ndarray, p: float, grid: GridDomain) -> float:
    g = gradient(u, grid)
    mag = np.sqrt(np.sum(g * g, axis=1))
    return _lp(mag, grid.cell_volumes, p)


def w1p_norm(u: np.ndarray, p: float, grid: GridDomain, l_choice: str = "volume", s: float = None) -> float:
    """``||grad u||_{L^p}`` plus a lower-order functional ``l(u)``.

    ``l_choice="volume"`` uses ``||u||_{L^s(Omega)}``; ``"boundary"`` uses
    ``||u||_{L^s(Gamma, dS/b)}``. ``s`` defaults to ``p``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    s = p if s is None else s
    u = np.asarray(u, dtype=float)
    if l_choice == "volume":
        low = _lp(u, grid.weights, s)
    elif l_choice == "boundary":
        low = _lp(u[grid.boundary], grid.boundary_measure, s)
    else:
        raise ValueError(f"unknown l_choice {l_choice!r}")
    return grad_lp(u, p, grid) + low


def trace(u: np.ndarray, grid: GridDomain) -> np.ndarray:
    return np.asarray(u, dtype=float)[grid.boundary].copy()


def normal_derivative(u: np.ndarray, grid: GridDomain) -> np.ndarray:
    """Outward normal derivative at boundary nodes (second-order one-sided)."""
    return grid.normal_op @ np.asarray(u, dtype=float)
