"""Exact solution family exhibiting weak non-uniqueness in 2-d.

Velocity fields of the form u(t) = f(t) (d Phi)^sharp, with Phi a
harmonic potential whose differential is square-integrable, solve the
incompressible flow exactly for *any* time profile f, provided the
pressure is chosen as

    p = (2 rho f - f') Phi - (1/2) f^2 |d Phi|^2,

where rho = -(n-1) is the Ricci eigenvalue.  The Phi coefficient
vanishes exactly when f' = 2 rho f, and Phi itself is not square
integrable while |d Phi|^2 is: demanding p in L^2 therefore selects
the single profile f(t) = f(0) e^{2 rho t} out of the family.  The
module builds the potential, evaluates family members and their
pressures, measures how far a pair (u, p) is from solving the flow,
and runs the truncated-ball growth scan that witnesses the selection.

Note the sign: on hyperbolic 2-space rho = -1, so the selected
profile decays like e^{-2t}.  Pairing the stated momentum equation
(time derivative plus advection plus pressure gradient equals Bochner
Laplacian plus Ricci term) with the potential's eigenrelation
(Bochner + Ricci)(d Phi)^sharp = 2 rho (d Phi)^sharp forces this and
is confirmed here numerically by the residual sweep.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import DiscreteComplex
from .fields import CovectorField, ScalarField, lp_norm
from .geometry import ManifoldModel
from .operators import (
    advection,
    covariant_gradient,
    gradient,
    ricci_operator,
    vector_laplacian_hodge,
)

__all__ = [
    "HarmonicPotential",
    "TimeProfile",
    "selected_profile",
    "exponential_profile",
    "polynomial_profile",
    "build_harmonic_potential",
    "khesin_velocity",
    "khesin_pressure",
    "ns_residual",
    "khesin_residual",
    "pressure_selection_scan",
    "energy_balance_report",
]

DEFAULT_LADDER = (8.0, 9.0, 10.0, 11.0)


@dataclass
class TimeProfile:
    """Scalar time profile f with its derivative, by name."""

    name: str
    f: callable
    fprime: callable

    def __call__(self, t):
        return float(self.f(t))


def exponential_profile(a, scale=1.0, name=None):
    """f(t) = scale * e^{a t}."""
    return TimeProfile(
        name or "exp(%g t)" % a,
        lambda t: scale * math.exp(a * t),
        lambda t: a * scale * math.exp(a * t),
    )


def selected_profile(model, scale=1.0):
    """The unique profile with square-integrable pressure:
    f(t) = scale * e^{2 rho t} with rho the Ricci eigenvalue."""
    return exponential_profile(2.0 * model.ricci_eigenvalue, scale,
                               name="selected")


def polynomial_profile(coeffs, name=None):
    """f(t) = sum_k coeffs[k] t^k."""
    poly = np.polynomial.Polynomial(list(coeffs))
    dpoly = poly.deriv()
    return TimeProfile(name or "poly%s" % (tuple(coeffs),),
                       lambda t: float(poly(t)),
                       lambda t: float(dpoly(t)))


@dataclass
class HarmonicPotential:
    """Discretely harmonic potential and its cached differentials."""

    phi: ScalarField
    dphi: CovectorField
    harmonic_residual: float
    dphi_l2: float
    dphi_sq_l2: float
    phi_l2_ladder: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.phi.grid


def _first_mode_profile(grid):
    """Radial profile of the first angular harmonic, solved so the
    assembled scalar Laplacian annihilates it on interior rows.

    The angular factor cos(theta) is an exact eigenvector of the
    discrete angular second difference, so the problem reduces to a
    radial linear system; the outermost radial row is closed with the
    closed-form continuum profile tanh(r/2), whose relative truncation
    influence decays like e^{-r_max}.
    """
    cx = DiscreteComplex.for_grid(grid)
    n_r, n_t = grid.n_r, grid.n_theta
    cos = np.cos(grid.theta)
    # reduced radial operator: probe the 2-d operator column by column
    reduced = np.zeros((n_r, n_r))
    for j in range(n_r):
        vec = np.zeros((n_r, n_t))
        vec[j] = cos
        col = (cx.a_wide @ vec.ravel()).reshape(n_r, n_t)
        reduced[:, j] = col[:, 0]
    a_exact = np.tanh(0.5 * grid.r)
    # the centred radial differences couple next-nearest neighbours,
    # so the closure needs the last two rows (one per radial sublattice)
    interior = slice(0, n_r - 2)
    rhs = -(reduced[interior, n_r - 2] * a_exact[n_r - 2]
            + reduced[interior, n_r - 1] * a_exact[n_r - 1])
    prof = np.empty(n_r)
    prof[interior] = np.linalg.solve(reduced[interior, interior], rhs)
    prof[n_r - 2:] = a_exact[n_r - 2:]
    return prof


def build_harmonic_potential(grid, model=None, ladder=DEFAULT_LADDER,
                             residual_bound=1e-8):
    """Construct and validate the first-angular-mode potential.

    Validations: weighted interior harmonicity residual below
    residual_bound times the differential's norm; the differential's
    norm stable (< 1%) across the radius ladder while the potential's
    own truncated norm keeps growing (the square-integrability
    dichotomy the selection argument rests on).
    """
    if grid.dimension != 2:
        raise ValueError("the potential construction is 2-d only")
    model = model or ManifoldModel(grid.dimension)
    prof = _first_mode_profile(grid)
    phi = ScalarField(grid, prof[:, None] * np.cos(grid.theta)[None, :])
    cx = DiscreteComplex.for_grid(grid)
    res = (cx.a_wide @ phi.data.ravel()).reshape(grid.shape)
    res[-2:] = 0.0  # closure rows, not a harmonicity statement
    dphi = gradient(phi)
    # the outermost row of the centred derivative sees the zero ghost
    # beyond the truncation; close it with the seed's closed form
    a = np.tanh(0.5 * grid.r[-1])
    dh = dphi.hat()
    dh[0][-1] = 0.5 * (1.0 - a ** 2) * np.cos(grid.theta)
    dh[1][-1] = -a * np.sin(grid.theta) / grid.sinh[-1]
    dphi = CovectorField.from_hat(grid, dh)
    dphi_l2 = lp_norm(dphi, 2)
    res_norm = math.sqrt(float(np.sum(grid.quad * res ** 2)))
    if res_norm > residual_bound * dphi_l2:
        raise ValueError(
            "harmonicity residual %.3e exceeds bound" % res_norm
        )
    ladder_norms = {R: lp_norm(phi, 2, radius=R) for R in ladder}
    d_low = lp_norm(dphi, 2, radius=min(ladder))
    if abs(dphi_l2 - d_low) > 0.01 * dphi_l2:
        raise ValueError("differential is not radius-stable; "
                         "potential rejected")
    if dphi_l2 == 0.0:
        raise ValueError("trivial potential rejected")
    dphi_sq = ScalarField(grid, dphi.pointwise_norm() ** 2)
    return HarmonicPotential(
        phi=phi,
        dphi=dphi,
        harmonic_residual=res_norm / dphi_l2,
        dphi_l2=dphi_l2,
        dphi_sq_l2=lp_norm(dphi_sq, 2),
        phi_l2_ladder=ladder_norms,
    )


def khesin_velocity(pot, profile, t):
    """Family member u(t) = f(t) (d Phi)^sharp."""
    return pot.dphi.sharp() * profile(t)


def khesin_pressure(pot, profile, t, model=None):
    """Exact pressure (2 rho f - f') Phi - (1/2) f^2 |d Phi|^2."""
    model = model or ManifoldModel(pot.grid.dimension)
    f = profile(t)
    fp = profile.fprime(t)
    coeff = 2.0 * model.ricci_eigenvalue * f - fp
    data = coeff * pot.phi.data - 0.5 * f ** 2 * pot.dphi.pointwise_norm() ** 2
    return ScalarField(pot.grid, data)


def ns_residual(u, p, u_dot, radius=None):
    """Relative momentum-equation residual of a candidate (u, p).

    Norm of du/dt + grad_u u + grad p - (Bochner + Ricci) u, over the
    sum of the norms of the individual terms; radius (number or
    (r_min, r_max) pair) restricts the norms, which is how the family
    is assessed: its potential is exactly harmonic for the assembled
    complex, whose closure rows at the pole and the outer truncation
    edge disagree with the pointwise frame calculus used here on rings
    of vanishing measure.
    """
    terms = [
        u_dot,
        advection(u, u),
        gradient(p).sharp(),
        vector_laplacian_hodge(u) * (-1.0),
        ricci_operator(u) * (-1.0),
    ]
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    scale = sum(lp_norm(term, 2, radius=radius) for term in terms)
    if scale == 0.0:
        return 0.0
    return lp_norm(total, 2, radius=radius) / scale


DEFAULT_ANNULUS = (0.1, 10.0)


def khesin_residual(pot, profile, t, radius=DEFAULT_ANNULUS):
    """ns_residual evaluated on the family member at time t."""
    u = khesin_velocity(pot, profile, t)
    u_dot = pot.dphi.sharp() * profile.fprime(t)
    p = khesin_pressure(pot, profile, t)
    return ns_residual(u, p, u_dot, radius=radius)


def pressure_selection_scan(pot, profile, ladder=DEFAULT_LADDER, t=0.0):
    """Truncated-ball pressure norms |p(t)|_{L^2(r<=R)} across the
    radius ladder, plus the last/first growth ratio.

    Profiles whose Phi coefficient vanishes saturate (the remaining
    |d Phi|^2 term is square-integrable); all others keep growing with
    the potential's own truncated norm.
    """
    p = khesin_pressure(pot, profile, t)
    table = {R: lp_norm(p, 2, radius=R) for R in ladder}
    lo, hi = table[min(ladder)], table[max(ladder)]
    ratio = math.inf if lo == 0.0 and hi > 0.0 else (
        0.0 if hi == 0.0 else hi / lo
    )
    return table, ratio


def energy_balance_report(pot, profile, t_final=0.5, n_samples=101,
                          radius=None):
    """Closed-form energy balance of one family member.

    Returns the largest signed relative defect of |u(t)|^2 +
    2 int_0^t (|grad u|^2 + (n-1)|u|^2) against the initial energy;
    negative values mean the member dissipates faster than it must
    (energy inequality holds), positive values flag a violation.
    """
    radius = DEFAULT_ANNULUS if radius is None else radius
    grid = pot.grid
    u_unit = pot.dphi.sharp()
    grad_unit = lp_norm(covariant_gradient(u_unit), 2, radius=radius)
    e_unit = lp_norm(pot.dphi, 2, radius=radius) ** 2
    diss_unit = grad_unit ** 2 + (grid.dimension - 1.0) * e_unit
    ts = np.linspace(0.0, t_final, n_samples)
    fvals = np.array([profile(t) for t in ts])
    integral = np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(ts) * (fvals[1:] ** 2
                                               + fvals[:-1] ** 2))]
    )
    balance = (fvals ** 2 * e_unit + 2.0 * diss_unit * integral
               - fvals[0] ** 2 * e_unit)
    defect = balance / (fvals[0] ** 2 * e_unit)
    worst = defect[np.argmax(np.abs(defect))]
    return float(worst)
