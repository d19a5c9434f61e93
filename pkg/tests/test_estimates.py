"""Tests for the decay-fitting helpers, manufactured data and rate bookkeeping."""

import dataclasses
import json

import numpy as np
import pytest

from hypflow.estimates import (
    DecayFit,
    RateReport,
    annulus_window,
    fit_decay,
    gamma_pq,
    manufactured_vector_field,
    marginal_gradient_bump,
)
from hypflow.fields import Grid, lp_norm
from hypflow.geometry import ManifoldModel


def test_fit_decay_recovers_synthetic_power_and_rate():
    t = np.concatenate([np.geomspace(1e-3, 0.05, 120), np.linspace(0.1, 7.0, 400)])
    v = 3.0 * t ** (-0.5) * np.exp(-1.25 * t)
    fit = fit_decay(t, v)
    assert fit.small_time_power == pytest.approx(-0.5, abs=0.02)
    # The residual power law inflates the tail slope by ~0.5/t on the window.
    assert fit.large_time_rate == pytest.approx(1.25, abs=0.2)
    assert fit.small_residual <= 1e-2
    assert fit.tail_residual <= 5e-2


def test_fit_decay_pure_exponential_tail():
    t = np.linspace(0.0, 8.0, 600)
    v = np.exp(-0.25 * t)
    fit = fit_decay(t, v, small_window=None)
    assert np.isnan(fit.small_time_power)
    assert fit.large_time_rate == pytest.approx(0.25, abs=1e-10)


def test_fit_decay_window_guards():
    t = np.linspace(0.0, 8.0, 600)
    v = np.exp(-t)
    with pytest.raises(ValueError):
        fit_decay(t, v, small_window=(0.01, 3.0), tail_window=(2.0, 6.0))
    with pytest.raises(ValueError):
        fit_decay(t[:4], v[:4], small_window=None, tail_window=(0.0, 8.0))
    with pytest.raises(ValueError):
        fit_decay(t, v - 1.0, small_window=None)


def test_gamma_pq_interpolation_exponent():
    model = ManifoldModel(2)
    # (delta/2)[(1/p - 1/q) + (8/q)(1 - 1/p)] with delta = 1/4.
    assert gamma_pq(model, 1.0, np.inf) == pytest.approx(0.125)
    assert gamma_pq(model, 2.0, 2.0) == pytest.approx(0.125 * (4.0 * 0.5))
    assert gamma_pq(model, 2.0, np.inf) == pytest.approx(0.125 * 0.5)
    assert gamma_pq(model, 1.0, 1.0) == pytest.approx(0.0)


def test_manufactured_field_deterministic_and_annulus_supported():
    grid = Grid(12.0, 192, 128)
    params = (3.0, 1.2, 0.7, -0.4, 0.9)
    u1 = manufactured_vector_field(grid, params)
    u2 = manufactured_vector_field(grid, params)
    np.testing.assert_array_equal(u1.hat(), u2.hat())
    assert lp_norm(u1, 2) > 0.0
    # Support is confined to the window annulus, away from pole and boundary.
    outside = lp_norm(u1, np.inf, radius=0.9)
    assert outside == 0.0


def test_annulus_window_profile():
    grid = Grid(12.0, 192, 8)
    win = annulus_window(grid, 1.0, 10.5)
    assert np.all(win.data[grid.r <= 1.0] == 0.0)
    assert np.all(win.data[grid.r >= 10.5] == 0.0)
    inside = (grid.r > 1.0) & (grid.r < 10.5)
    assert np.all(win.data[inside] > 0.0)
    # Smooth bump peaks at the midpoint of the annulus.
    peak = grid.r[np.argmax(win.data[:, 0])]
    assert peak == pytest.approx(0.5 * (1.0 + 10.5), abs=grid.h_r)


def test_marginal_gradient_bump_has_mollified_core():
    grid = Grid(12.0, 1536, 8)
    eps = 0.01
    f = marginal_gradient_bump(grid, eps=eps, r_out=4.0)
    # Mollified 1/r core: the peak saturates at the 1/eps scale.
    peak = lp_norm(f, np.inf)
    assert 0.2 / eps <= peak <= 1.0 / eps
    # 1/r profile outside the core, cut off beyond r_out.
    idx = np.argmin(np.abs(grid.r - 1.0))
    assert f.data[idx, 0] * grid.r[idx] == pytest.approx(
        np.exp(-(grid.r[idx] / 4.0) ** 4), rel=1e-3)
    assert lp_norm(f, np.inf, radius=(8.0, 12.0)) <= 1e-6 * peak


def test_rate_report_serializes():
    report = RateReport(p=1.0, q=np.inf, measured_power=-1.0,
                        predicted_power=-1.0, measured_rate=1.2,
                        predicted_rate=1.125, power_pass=True, rate_pass=True)
    doc = dataclasses.asdict(report)
    text = json.dumps(doc, default=float)
    assert json.loads(text)["rate_pass"] is True
