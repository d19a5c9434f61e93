"""Assembled sparse operators and elliptic solves.

The evolution and projection machinery is built from an assembled
discrete de Rham complex

    scalars --d0--> 1-forms --d1--> 2-forms

with centred differences and exact weighted adjoints d0*, d1*
(matrix transposes against the diagonal mass matrices).  Exactness of
the matrix identities d1 d0 = 0 and d0* d1* = 0 is what makes the
divergence of the vector heat flow decay to solver tolerance and the
Leray projection annihilate its own divergence to solver tolerance.

Two scalar Laplacians appear:

* ``laplacian_compact``: 5-point flux form, an M-matrix with a maximum
  principle; used for scalar heat flow and the pressure Poisson solve.
* ``a_wide = d0* d0``: the wide composition; it is the operator the
  Leray projection must invert so that div o P vanishes identically.
  Its kernel contains chequerboard modes; it is solved by a direct
  factorisation with a tiny Tikhonov shift (see ``wide_factor``).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import ScalarField, VectorField
from .operators import (
    divergence,
    divergence_tensor,
    ricci_operator,
    tensor_product,
)

__all__ = [
    "DiscreteComplex",
    "EllipticSolveReport",
    "solve_poisson",
    "leray_project",
    "operator_b",
    "pressure_from_velocity",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-10


@dataclass
class EllipticSolveReport:
    method: str
    iterations: int
    residual: float
    tol: float
    converged: bool


def _radial_shift_matrix(grid, step, parity):
    """Sparse matrix realisation of fields.shift_radial on flat vectors."""
    n_r, n_t = grid.n_r, grid.n_theta
    n = n_r * n_t
    rows = []
    cols = []
    vals = []
    j = np.arange(n_r)
    i = np.arange(n_t)
    jj, ii = np.meshgrid(j, i, indexing="ij")
    if step == 1:
        src_j = jj + 1
        keep = src_j < n_r
        rows.append((jj * n_t + ii)[keep])
        cols.append((src_j * n_t + ii)[keep])
        vals.append(np.ones(keep.sum()))
    else:
        src_j = jj - 1
        keep = src_j >= 0
        rows.append((jj * n_t + ii)[keep])
        cols.append((src_j * n_t + ii)[keep])
        vals.append(np.ones(keep.sum()))
        # pole reflection for the innermost ring
        ring = jj == 0
        half = n_t // 2
        rows.append((jj * n_t + ii)[ring])
        cols.append((jj * n_t + (ii + half) % n_t)[ring])
        vals.append(parity * np.ones(ring.sum()))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _angular_shift_matrix(grid, step):
    n_r, n_t = grid.n_r, grid.n_theta
    n = n_r * n_t
    j = np.arange(n_r)
    i = np.arange(n_t)
    jj, ii = np.meshgrid(j, i, indexing="ij")
    rows = (jj * n_t + ii).ravel()
    cols = (jj * n_t + (ii + step) % n_t).ravel()
    return sp.csr_matrix((np.ones(n), (rows, cols)), shape=(n, n))


class DiscreteComplex:
    """Sparse operators of the discrete complex on one grid."""

    _cache = {}

    def __init__(self, grid):
        self.grid = grid
        n_r, n_t = grid.n_r, grid.n_theta
        n = n_r * n_t
        h_r, h_t = grid.h_r, grid.h_theta

        dr_even = (
            _radial_shift_matrix(grid, 1, +1.0)
            - _radial_shift_matrix(grid, -1, +1.0)
        ) / (2.0 * h_r)
        dt = (
            _angular_shift_matrix(grid, 1) - _angular_shift_matrix(grid, -1)
        ) / (2.0 * h_t)

        w_node = np.repeat(grid.sinh, n_t)
        W = sp.diags(w_node)
        Winv = sp.diags(1.0 / w_node)
        self.w_node = w_node
        self.weight = np.repeat(grid.w, n_t)  # volume density sinh^(n-1)

        # d0: scalars -> hatted 1-forms
        self.d0 = sp.vstack([dr_even, Winv @ dt]).tocsr()
        # d1: hatted 1-forms -> normalised 2-forms
        self.d1 = sp.hstack([-Winv @ dt, Winv @ dr_even @ W]).tocsr()
        # weighted adjoints (volume density cancels against itself for
        # same-density masses; only the sinh frame factors remain when
        # dimension == 2, where weight == sinh)
        dens = sp.diags(self.weight)
        dens_inv = sp.diags(1.0 / self.weight)
        dens2 = sp.block_diag([dens, dens])
        dens2_inv = sp.block_diag([dens_inv, dens_inv])
        self.d0s = (dens_inv @ self.d0.T @ dens2).tocsr()
        self.d1s = (dens2_inv @ self.d1.T @ dens).tocsr()

        self.a_wide = (self.d0s @ self.d0).tocsr()
        ricci = grid.dimension - 1.0
        self.l_vec = (
            -(self.d0 @ self.d0s) - (self.d1s @ self.d1)
            - 2.0 * ricci * sp.identity(2 * n)
        ).tocsr()

        self.lap_compact = self._assemble_compact(grid)
        self._compact_factor = None
        self._wide_factor = None

    @staticmethod
    def _assemble_compact(grid):
        """5-point flux-form Laplace-Beltrami matrix (negative definite)."""
        n_r, n_t = grid.n_r, grid.n_theta
        n = n_r * n_t
        h_r, h_t = grid.h_r, grid.h_theta
        nu = grid.dimension - 1
        w_mid_up = np.sinh(grid.r + 0.5 * h_r) ** nu
        w_mid_dn = np.sinh(grid.r - 0.5 * h_r) ** nu
        w_mid_dn[0] = 0.0  # pole flux vanishes exactly
        w = grid.w
        up = (w_mid_up / (w * h_r ** 2)).repeat(n_t)
        dn = (w_mid_dn / (w * h_r ** 2)).repeat(n_t)
        ang = (1.0 / (np.sinh(grid.r) ** 2 * h_t ** 2)).repeat(n_t)

        j = np.arange(n_r)
        i = np.arange(n_t)
        jj, ii = np.meshgrid(j, i, indexing="ij")
        node = (jj * n_t + ii).ravel()
        rows = [node, node]
        cols = [node, node]
        vals = [-(up + dn), -2.0 * ang]
        keep = (jj + 1 < n_r).ravel()
        rows.append(node[keep])
        cols.append(node[keep] + n_t)
        vals.append(up[keep])
        keep = (jj - 1 >= 0).ravel()
        rows.append(node[keep])
        cols.append(node[keep] - n_t)
        vals.append(dn[keep])
        east = (jj * n_t + (ii + 1) % n_t).ravel()
        west = (jj * n_t + (ii - 1) % n_t).ravel()
        rows += [node, node]
        cols += [east, west]
        vals += [ang, ang]
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    @classmethod
    def for_grid(cls, grid):
        key = (grid.r_max, grid.n_r, grid.n_theta, grid.dimension)
        if key not in cls._cache:
            cls._cache[key] = cls(grid)
        return cls._cache[key]

    # -- solvers ----------------------------------------------------------

    def compact_factor(self):
        if self._compact_factor is None:
            self._compact_factor = spla.splu((-self.lap_compact).tocsc())
        return self._compact_factor

    def solve_compact(self, rhs, tol=DEFAULT_TOL):
        """Solve (-Laplacian) p = rhs by direct factorisation."""
        lu = self.compact_factor()
        x = lu.solve(rhs)
        res = rhs - (-self.lap_compact @ x)
        rel = _weighted_norm(res, self.weight) / max(
            _weighted_norm(rhs, self.weight), 1e-300
        )
        report = EllipticSolveReport("splu", 1, rel, tol, rel <= tol)
        return x, report

    def wide_factor(self):
        """Factorisation of the regularised wide operator.

        a_wide is singular on chequerboard modes, so a tiny Tikhonov
        shift is added before the LU factorisation.  The kernel of
        a_wide coincides exactly with the kernel of d0 (both follow
        from d0* d0 z = 0), so any kernel pollution of the solve is
        annihilated when the gradient d0 is applied afterwards.
        """
        if self._wide_factor is None:
            n = self.a_wide.shape[0]
            shifted = (self.a_wide + 1e-12 * sp.identity(n)).tocsc()
            self._wide_factor = spla.splu(shifted)
        return self._wide_factor

    def solve_wide(self, rhs, tol=DEFAULT_TOL):
        """Solve a_wide q = rhs (rhs in the range) to relative tol.

        Direct factorisation of the regularised operator with iterative
        refinement; the report counts refinement passes.
        """
        lu = self.wide_factor()
        wgt = self.weight
        rhs_norm = max(_weighted_norm(rhs, wgt), 1e-300)
        x = lu.solve(rhs)
        res_vec = rhs - self.a_wide @ x
        res = _weighted_norm(res_vec, wgt) / rhs_norm
        it = 1
        while res > tol and it < 5:
            x = x + lu.solve(res_vec)
            res_vec = rhs - self.a_wide @ x
            res = _weighted_norm(res_vec, wgt) / rhs_norm
            it += 1
        return x, EllipticSolveReport("splu+ir", it, res, tol, res <= tol)


def _weighted_norm(vec, weight):
    return float(np.sqrt(np.sum(weight * vec ** 2)))


def solve_poisson(f, tol=DEFAULT_TOL):
    """Solve -Laplacian p = f with homogeneous Dirichlet data.

    Returns (p, report).  Direct sparse factorisation; the report's
    residual is the relative weighted residual (effectively machine
    precision, well inside the 1e-10 contract).
    """
    cx = DiscreteComplex.for_grid(f.grid)
    x, report = cx.solve_compact(f.data.ravel(), tol)
    return ScalarField(f.grid, x.reshape(f.grid.shape)), report


def leray_project(u, tol=DEFAULT_TOL, return_report=False):
    """Leray-Helmholtz projection onto discretely divergence-free fields.

    P v = v - grad (sol), a_wide sol = d0* v; by the matrix identity
    d0* P v = 0 up to the linear-solver tolerance.
    """
    cx = DiscreteComplex.for_grid(u.grid)
    flat = u.hat().reshape(2, -1).ravel()
    rhs = cx.d0s @ flat
    q, report = cx.solve_wide(rhs, tol)
    proj = flat - cx.d0 @ q
    out = VectorField.from_hat(u.grid, proj.reshape((2,) + u.grid.shape))
    if return_report:
        return out, report
    return out


def operator_b(u, tol=DEFAULT_TOL):
    """Non-local term B u = -2 grad (-Lap)^{-1} div(r(u)).

    With r(u) = -(n-1) u this is 2(n-1) (P u - u): it vanishes on
    discretely divergence-free fields up to solver tolerance.
    """
    ricci = u.grid.dimension - 1.0
    proj = leray_project(u, tol)
    return VectorField(u.grid, 2.0 * ricci * (proj.data - u.data))


def pressure_from_velocity(u, tol=DEFAULT_TOL, rhs_only=False):
    """Recover the pressure of the momentum balance from the velocity.

    Solves -Laplacian p = div div(u (x) u) - 2 div(r(u)) with Dirichlet
    data on the truncation boundary; this is the weak-solution pressure
    up to the harmonic correction induced by the truncation.
    """
    adv = divergence(divergence_tensor(tensor_product(u, u)))
    ric = divergence(ricci_operator(u))
    rhs = ScalarField(u.grid, adv.data - 2.0 * ric.data)
    if rhs_only:
        return rhs
    p, report = solve_poisson(rhs, tol)
    return p, report
