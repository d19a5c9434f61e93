"""Tests for the closed-form family of solutions carried by a harmonic
potential: profiles, pressures, residuals and the selection mechanism."""

import math

import numpy as np
import pytest

from hypflow.fields import Grid, lp_norm
from hypflow.geometry import ManifoldModel
from hypflow.nonuniqueness import (
    build_harmonic_potential,
    energy_balance_report,
    exponential_profile,
    khesin_residual,
    khesin_velocity,
    polynomial_profile,
    pressure_selection_scan,
    selected_profile,
)

GRID = Grid(12.0, 384, 256)
MODEL = ManifoldModel(2)


@pytest.fixture(scope="module")
def potential():
    return build_harmonic_potential(GRID)


def test_profiles_and_derivatives_consistent():
    for profile in (
        exponential_profile(-1.3, scale=2.0),
        polynomial_profile([1.0, -0.5, 0.25]),
        selected_profile(MODEL),
    ):
        h = 1e-6
        for t in (0.0, 0.4, 1.1):
            numeric = (profile.f(t + h) - profile.f(t - h)) / (2.0 * h)
            assert profile.fprime(t) == pytest.approx(numeric, rel=1e-6, abs=1e-9)


def test_selected_profile_decays_at_twice_ricci_rate():
    profile = selected_profile(MODEL, scale=3.0)
    rho = MODEL.ricci_eigenvalue
    assert rho == -1.0
    assert profile(0.0) == pytest.approx(3.0)
    assert profile(1.0) == pytest.approx(3.0 * math.exp(2.0 * rho))
    # Selection condition: f' = 2 rho f at every time.
    for t in (0.0, 0.7):
        assert profile.fprime(t) == pytest.approx(2.0 * rho * profile.f(t))


def test_potential_is_discretely_harmonic(potential):
    assert potential.harmonic_residual <= 1e-8
    assert potential.dphi_l2 > 0.0
    assert potential.dphi_sq_l2 > 0.0
    # The potential itself leaves L^2: truncated norms grow along the ladder.
    ladder = sorted(potential.phi_l2_ladder)
    values = [potential.phi_l2_ladder[R] for R in ladder]
    assert all(b > 1.2 * a for a, b in zip(values, values[1:]))


def test_all_profiles_solve_the_equations(potential):
    for profile in (
        selected_profile(MODEL),
        polynomial_profile([1.0], name="const1"),
        exponential_profile(-0.5),
    ):
        for t in (0.0, 0.25, 0.5):
            assert khesin_residual(potential, profile, t) <= 1e-3


def test_selection_scan_separates_profiles(potential):
    _, selected_ratio = pressure_selection_scan(potential, selected_profile(MODEL))
    constant = polynomial_profile([1.0], name="const1")
    table, constant_ratio = pressure_selection_scan(potential, constant)
    # Square-integrable pressure: the selected ratio saturates; every
    # other profile inherits the potential's own truncated-norm growth.
    assert abs(selected_ratio - 1.0) <= 1e-6
    assert constant_ratio >= 2.0
    radii = sorted(table)
    assert all(table[a] < table[b] for a, b in zip(radii, radii[1:]))


def test_distinct_members_share_initial_data(potential):
    selected = selected_profile(MODEL)
    constant = polynomial_profile([1.0], name="const1")
    u_sel0 = khesin_velocity(potential, selected, 0.0)
    u_con0 = khesin_velocity(potential, constant, 0.0)
    assert lp_norm(u_sel0 - u_con0, 2) <= 1e-12 * lp_norm(u_sel0, 2)
    # They separate at positive time: a genuine nonuniqueness witness.
    u_sel = khesin_velocity(potential, selected, 0.5)
    u_con = khesin_velocity(potential, constant, 0.5)
    gap = lp_norm(u_sel - u_con, 2) / lp_norm(u_con, 2)
    assert gap >= 0.1


def test_energy_balance_of_selected_member(potential):
    defect = energy_balance_report(potential, selected_profile(MODEL))
    assert abs(defect) <= 5e-3


def test_growing_member_violates_energy_inequality(potential):
    growing = exponential_profile(1.0)
    defect = energy_balance_report(potential, growing)
    assert defect > 0.1
