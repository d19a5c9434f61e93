"""Tests for the sparse elliptic toolkit: Poisson solves and the Leray projector."""

import numpy as np

from hypflow.elliptic import (
    DEFAULT_TOL,
    DiscreteComplex,
    EllipticSolveReport,
    leray_project,
    pressure_from_velocity,
    solve_poisson,
)
from hypflow.estimates import annulus_window, gaussian_bump, pole_safe_swirl
from hypflow.fields import Grid, ScalarField, VectorField, l2_inner, lp_norm
from hypflow.operators import divergence, gradient

GRID = Grid(6.0, 128, 64)


def _bump(grid):
    window = annulus_window(grid, 1.0, 5.0)
    return ScalarField(grid, gaussian_bump(grid, 1.0, 2.5).data * window.data)


def _random_vector(grid, seed):
    rng = np.random.default_rng(seed)
    window = annulus_window(grid, 0.5, 5.0).data
    hat = rng.standard_normal((2,) + grid.shape) * window
    return VectorField.from_hat(grid, hat)


def test_discrete_complex_cached_per_grid():
    assert DiscreteComplex.for_grid(GRID) is DiscreteComplex.for_grid(GRID)


def test_vector_generator_symmetric_and_negative():
    cx = DiscreteComplex.for_grid(GRID)
    u = _random_vector(GRID, 1)
    v = _random_vector(GRID, 2)

    def apply(field):
        hat = (cx.l_vec @ field.hat().reshape(-1)).reshape((2,) + GRID.shape)
        return VectorField.from_hat(GRID, hat)

    lu, lv = apply(u), apply(v)
    scale = abs(l2_inner(lu, u))
    assert abs(l2_inner(lu, v) - l2_inner(u, lv)) <= 1e-10 * scale
    assert l2_inner(lu, u) < 0.0


def test_solve_poisson_inverts_discrete_laplacian():
    f = _bump(GRID)
    p, report = solve_poisson(f)
    cx = DiscreteComplex.for_grid(GRID)
    residual = cx.lap_compact @ p.data.ravel() + f.data.ravel()
    rel = np.linalg.norm(residual) / np.linalg.norm(f.data)
    assert rel <= 1e-10
    assert isinstance(report, EllipticSolveReport)
    assert report.converged and report.residual <= report.tol


def test_leray_project_annihilates_gradients():
    grad = gradient(_bump(GRID)).sharp()
    projected = leray_project(grad)
    assert lp_norm(projected, 2) <= 1e-9 * lp_norm(grad, 2)


def test_leray_project_fixes_divergence_free_fields():
    u = pole_safe_swirl(GRID, width=0.6, center=2.5)
    projected = leray_project(u)
    assert lp_norm(projected - u, 2) <= 1e-10 * lp_norm(u, 2)


def test_leray_project_idempotent_and_divergence_free():
    u = _random_vector(GRID, 3)
    once = leray_project(u)
    twice = leray_project(once)
    assert lp_norm(divergence(once), 2) <= 1e-8 * lp_norm(u, 2)
    assert lp_norm(twice - once, 2) <= 1e-8 * lp_norm(u, 2)


def test_leray_project_report():
    _, report = leray_project(_random_vector(GRID, 4), return_report=True)
    assert isinstance(report, EllipticSolveReport)
    assert report.converged
    assert report.residual <= DEFAULT_TOL


def test_leray_project_is_orthogonal_projection():
    u = _random_vector(GRID, 5)
    projected = leray_project(u)
    remainder = u - projected
    scale = lp_norm(u, 2) ** 2
    assert abs(l2_inner(projected, remainder)) <= 1e-8 * scale
    assert lp_norm(projected, 2) <= lp_norm(u, 2) * (1.0 + 1e-12)


def test_pressure_from_velocity_returns_scalar_solution():
    u = pole_safe_swirl(GRID, width=0.6, center=2.5)
    p, report = pressure_from_velocity(u)
    assert isinstance(p, ScalarField)
    assert p.grid.compatible(GRID)
    assert report.converged
    rhs = pressure_from_velocity(u, rhs_only=True)
    cx = DiscreteComplex.for_grid(GRID)
    residual = cx.lap_compact @ p.data.ravel() + rhs.data.ravel()
    rel = np.linalg.norm(residual) / max(np.linalg.norm(rhs.data), 1e-300)
    assert rel <= 1e-9
