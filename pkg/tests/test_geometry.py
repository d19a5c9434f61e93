import math

import numpy as np
import pytest

from hypflow.geometry import (
    ManifoldModel,
    christoffel_symbols,
    geodesic_ball_volume,
    inverse_metric_components,
    metric_components,
    ricci_eigenvalue,
    riemann_lowered,
    volume_weight,
)


def test_dimension_two_constants():
    m = ManifoldModel(2)
    assert m.c0 == 1.0
    assert m.delta_lower == 0.25
    assert m.delta_sharp == 0.25
    assert m.curvature_norm_bound == pytest.approx(2.0)
    assert m.alpha1 == pytest.approx(-(11.0 + 8.0 * math.sqrt(2.0)))
    assert m.ricci_eigenvalue == -1.0


def test_dimension_three_constants():
    m = ManifoldModel(3)
    assert m.c0 == 2.0
    assert m.delta_lower == pytest.approx(1.0)
    assert m.delta_sharp == pytest.approx(1.0)
    assert m.curvature_norm_bound == pytest.approx(math.sqrt(12.0))
    assert m.ricci_eigenvalue == -2.0


def test_alpha1_formula_general_dimension():
    for n in (2, 3, 4, 7):
        m = ManifoldModel(n)
        K = math.sqrt(2.0 * n * (n - 1))
        c0 = n - 1.0
        expected = -(max(c0, 1.0 / c0) + 2 * K * n + 2 * K * n ** 1.5 + 2)
        assert m.alpha1 == pytest.approx(expected)


def test_dimension_below_two_rejected():
    with pytest.raises(ValueError):
        ManifoldModel(1)


def test_metric_and_inverse_are_reciprocal():
    r = np.linspace(0.1, 5.0, 40)
    g_rr, g_tt = metric_components(r)
    gi_rr, gi_tt = inverse_metric_components(r)
    assert np.allclose(g_rr * gi_rr, 1.0)
    assert np.allclose(g_tt * gi_tt, 1.0)


def test_christoffel_matches_metric_derivative():
    # Gamma^r_tt = -(1/2) d_r g_tt and Gamma^t_rt = (1/2) g^tt d_r g_tt.
    r = np.linspace(0.2, 4.0, 30)
    h = 1e-6
    _, g_plus = metric_components(r + h)
    _, g_minus = metric_components(r - h)
    dg = (g_plus - g_minus) / (2 * h)
    sym = christoffel_symbols(r)
    assert np.allclose(sym["r_tt"], -0.5 * dg, rtol=1e-7)
    assert np.allclose(sym["t_rt"], 0.5 * dg / np.sinh(r) ** 2, rtol=1e-7)


def test_sectional_curvature_is_minus_one():
    # K(X, Y) = Riem(X,Y,X,Y) / (|X|^2 |Y|^2 - g(X,Y)^2) for any frame.
    rng = np.random.default_rng(7)
    for _ in range(20):
        gxx, gyy = rng.uniform(0.5, 2.0, size=2)
        gxy = rng.uniform(-0.4, 0.4)
        num = riemann_lowered(gxx, gyy, gxy, gxy)
        den = gxx * gyy - gxy ** 2
        assert num / den == pytest.approx(-1.0)


def test_ricci_eigenvalue_free_function():
    assert ricci_eigenvalue(2) == -1.0
    assert ricci_eigenvalue(5) == -4.0


def test_ball_volume_matches_quadrature():
    # Sphere area: 2 pi sinh(r) in dimension 2, 4 pi sinh(r)^2 in 3.
    for n, sphere in ((2, 2.0 * math.pi), (3, 4.0 * math.pi)):
        r = np.linspace(0.0, 3.0, 20001)
        vol = np.trapezoid(sphere * volume_weight(r, n), r)
        assert vol == pytest.approx(geodesic_ball_volume(3.0, n), rel=1e-6)


def test_ball_volume_other_dimension_not_implemented():
    with pytest.raises(NotImplementedError):
        geodesic_ball_volume(1.0, 5)
