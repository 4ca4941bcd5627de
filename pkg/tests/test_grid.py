import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynbc.grid import (
    StateField,
    build_grid,
    build_interval_grid,
    build_rectangle_grid,
    gradient,
    normal_derivative,
    trace,
    w1p_norm,
    x_inner,
    x_norm,
)


def test_interval_measures():
    g = build_interval_grid(5, 1.0, 1.0)
    assert g.volume == pytest.approx(1.0, rel=1e-12)
    assert g.inv_lambda == pytest.approx(2.0)
    assert g.lam == pytest.approx(0.5)
    g2 = build_interval_grid(101, 2.0)
    assert g2.weights.sum() == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("b", [0.0, -1.0, lambda x: 0.0 * x[:, 0]])
def test_interval_rejects_nonpositive_b(b):
    with pytest.raises(ValueError):
        build_interval_grid(5, 1.0, b)


def test_interval_rejects_small_n():
    with pytest.raises(ValueError):
        build_interval_grid(2)


def test_rectangle_measures():
    g = build_rectangle_grid(3, 3)
    assert g.inv_lambda == pytest.approx(4.0)
    g = build_rectangle_grid(9, 5, (2.0, 1.0))
    assert g.volume == pytest.approx(2.0, rel=1e-12)
    assert g.inv_lambda == pytest.approx(6.0)
    with pytest.raises(ValueError):
        build_rectangle_grid(2, 3)
    with pytest.raises(ValueError):
        build_rectangle_grid(5, 5, (1.0, 0.0))


def test_build_grid_from_mapping():
    g = build_grid({"dimension": 2, "nodes": [9, 5], "lengths": [2.0, 1.0]})
    assert g.dim == 2 and g.n == 45
    assert build_grid({"nodes": 11}).n == 11


def test_variable_b_profile():
    g = build_interval_grid(11, 1.0, lambda x: 1.0 + x[:, 0])
    # 1/b(0) + 1/b(1) = 1 + 1/2
    assert g.inv_lambda == pytest.approx(1.5)


def test_x_norm_constants():
    g = build_interval_grid(21)
    U = StateField(2 * np.ones(g.n), 2 * np.ones(2))
    assert x_norm(U, 2, 2, g) == pytest.approx(2 + 2 * math.sqrt(2))
    U1 = StateField(np.ones(g.n), np.ones(2))
    assert x_norm(U1, np.inf, np.inf, g) == 1.0


def test_x_norm_naive_oracle(rng):
    g = build_interval_grid(201)
    U = StateField(rng.standard_normal(g.n), rng.standard_normal(2))
    bulk = 0.0
    for w, u in zip(g.weights, U.u):
        bulk += w * u * u
    bnd = 0.0
    for s, b, v in zip(g.surface, g.b, U.v):
        bnd += s / b * v * v
    assert x_norm(U, 2, 2, g) == pytest.approx(math.sqrt(bulk) + math.sqrt(bnd), rel=1e-12)


@given(st.floats(-1e3, 1e3), st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.sampled_from([1.0, 2.0, 4.0]))
def test_x_norm_homogeneity(c, s1, s2):
    g = build_rectangle_grid(6, 5)
    r = np.random.default_rng(0)
    U = StateField(r.standard_normal(g.n), r.standard_normal(g.n_boundary))
    assert x_norm(U * c, s1, s2, g) == pytest.approx(abs(c) * x_norm(U, s1, s2, g), rel=1e-12, abs=1e-300)


@given(st.integers(0, 10_000))
def test_x_norm_triangle(seed):
    g = build_interval_grid(31)
    r = np.random.default_rng(seed)
    U = StateField(r.standard_normal(g.n), r.standard_normal(2))
    W = StateField(r.standard_normal(g.n), r.standard_normal(2))
    assert x_norm(U + W, 2, 2, g) <= x_norm(U, 2, 2, g) + x_norm(W, 2, 2, g) + 1e-12


def test_x_inner_matches_norm(rng):
    g = build_rectangle_grid(7, 4)
    U = StateField(rng.standard_normal(g.n), rng.standard_normal(g.n_boundary))
    z = StateField(np.zeros(g.n), np.zeros(g.n_boundary))
    ub = StateField(U.u, np.zeros(g.n_boundary))
    vb = StateField(np.zeros(g.n), U.v)
    assert x_inner(U, U, g) == pytest.approx(x_norm(ub, 2, 2, g) ** 2 + x_norm(vb, 2, 2, g) ** 2, rel=1e-12)
    assert x_inner(U, z, g) == 0.0


def test_w1p_norm_examples():
    g = build_interval_grid(101)
    x = g.coords[:, 0]
    # constant: only the lower-order part survives
    assert w1p_norm(3.0 * np.ones(g.n), 2, g, "volume") == pytest.approx(3.0)
    assert w1p_norm(x, 2, g, "volume") == pytest.approx(1 + (1 / 3) ** 0.5, rel=1e-4)
    assert w1p_norm(x, 3, g, "boundary", s=1) == pytest.approx(2.0, rel=1e-12)


def test_trace_and_gradient():
    g = build_interval_grid(11)
    x = g.coords[:, 0]
    assert np.allclose(trace(x, g), [0.0, 1.0])
    assert np.allclose(trace(np.full(g.n, 4.0), g), 4.0)
    assert np.allclose(gradient(3 * x + 1, g), 3.0, atol=1e-12)
    assert np.allclose(gradient(np.full(g.n, 2.0), g), 0.0)
    g2 = build_rectangle_grid(6, 5)
    xy = g2.coords[:, 0] * g2.coords[:, 1]
    assert np.allclose(trace(xy, g2), xy[g2.boundary])


def test_gradient_sine_accuracy():
    g = build_interval_grid(401)
    x = g.coords[:, 0]
    grad = gradient(np.sin(np.pi * x), g)[:, 0]
    mid = 0.5 * (x[1:] + x[:-1])
    assert np.max(np.abs(grad - np.pi * np.cos(np.pi * mid))) < 1e-4


def test_normal_derivative_affine_exact():
    g = build_interval_grid(9, 2.0)
    x = g.coords[:, 0]
    assert np.allclose(normal_derivative(5 * x - 2, g), [-5.0, 5.0], atol=1e-12)


def test_normal_derivative_affine_2d():
    g = build_rectangle_grid(9, 7, (2.0, 1.0))
    x, y = g.coords[:, 0], g.coords[:, 1]
    dn = normal_derivative(2 * x + 3 * y, g)
    pts = g.coords[g.boundary]
    exact = np.zeros(len(pts))
    nrm = np.zeros((len(pts), 2))
    tol = 1e-12
    nrm[np.isclose(pts[:, 0], 0.0), 0] -= 1
    nrm[np.isclose(pts[:, 0], 2.0), 0] += 1
    nrm[np.isclose(pts[:, 1], 0.0), 1] -= 1
    nrm[np.isclose(pts[:, 1], 1.0), 1] += 1
    corner = np.sum(nrm != 0, axis=1) == 2
    exact = 2 * nrm[:, 0] + 3 * nrm[:, 1]
    # edge nodes are exact; corners average the two edge derivatives
    assert np.allclose(dn[~corner], exact[~corner], atol=tol)
    assert np.allclose(dn[corner], 0.5 * exact[corner], atol=tol)


def test_quadrature_exact_for_affine():
    g = build_rectangle_grid(9, 5, (2.0, 1.0))
    x, y = g.coords[:, 0], g.coords[:, 1]
    assert np.dot(g.weights, 1 + x + 2 * y) == pytest.approx(2 + 2 + 2, rel=1e-12)
    # boundary integral of x over the perimeter: bottom+top 2*2, right side 2*1
    assert np.dot(g.surface, x[g.boundary]) == pytest.approx(6.0, rel=1e-12)


def test_state_field_checks():
    g = build_interval_grid(5)
    with pytest.raises(ValueError):
        StateField(np.zeros(4), np.zeros(2)).check(g)
    U = StateField.from_bulk(np.arange(5.0), g)
    assert np.array_equal(U.v, [0.0, 4.0])
