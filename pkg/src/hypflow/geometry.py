"""Exact geometric data for hyperbolic space in geodesic polar coordinates.

The model manifold is the simply connected space of constant sectional
curvature -1.  In geodesic polar coordinates (r, theta) centred at a pole
the metric is

    g = dr^2 + sinh(r)^2 dtheta^2          (dimension 2)

and for general dimension n the volume element carries the weight
sinh(r)^(n-1).  Everything in this module is a closed-form evaluation:
no discretisation happens here.
"""

import math

import numpy as np

__all__ = [
    "ManifoldModel",
    "metric_components",
    "inverse_metric_components",
    "christoffel_symbols",
    "riemann_lowered",
    "ricci_eigenvalue",
    "volume_weight",
    "geodesic_ball_volume",
]


class ManifoldModel:
    """Curvature constants for hyperbolic n-space.

    Collects the handful of constants that the decay estimates are
    phrased in: the Ricci bound c0, the spectral constant delta_n, the
    curvature-tensor bound K and the gradient-commutation constant
    alpha1.  All are exact closed forms for constant curvature -1.
    """

    def __init__(self, dimension=2):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        self.dimension = int(dimension)
        self.curvature = -1.0

    @property
    def c0(self):
        """Ricci pinching constant: Ric = -c0 * g with c0 = n - 1."""
        return float(self.dimension - 1)

    @property
    def delta_lower(self):
        """Lower bound for the spectral constant delta_n.

        delta_n >= (c0 + (n-1)(n-2)) / 4 for curvature -1; equals 1/4
        in dimension 2.
        """
        n = self.dimension
        return (self.c0 + (n - 1) * (n - 2)) / 4.0

    @property
    def delta_sharp(self):
        """Bottom of the L^2 spectrum of -Laplacian: (n-1)^2 / 4."""
        n = self.dimension
        return (n - 1) ** 2 / 4.0

    @property
    def curvature_norm_bound(self):
        """Pointwise bound K with |R| <= K; equals sqrt(2 n (n-1))."""
        n = self.dimension
        return math.sqrt(2.0 * n * (n - 1))

    @property
    def alpha1(self):
        """Commutation constant for the gradient bound of the vector flow.

        alpha1 = -(max(c0, 1/c0) + 2Kn + 2Kn^(3/2) + 2); in dimension 2
        this is -(11 + 8 sqrt(2)).
        """
        n = self.dimension
        K = self.curvature_norm_bound
        c0 = self.c0
        return -(max(c0, 1.0 / c0) + 2.0 * K * n + 2.0 * K * n ** 1.5 + 2.0)

    @property
    def ricci_eigenvalue(self):
        """Eigenvalue of the Ricci operator: r(u) = -(n-1) u."""
        return -(self.dimension - 1.0)

    def __repr__(self):
        return "ManifoldModel(dimension=%d)" % self.dimension


def metric_components(r, dimension=2):
    """Diagonal metric components (g_rr, g_tt) at radius r.

    g_rr = 1 and g_tt = sinh(r)^2.  Valid for the 2-d polar chart; in
    higher dimension the same sinh^2 factor multiplies the round metric
    on the unit sphere.
    """
    r = np.asarray(r, dtype=float)
    return np.ones_like(r), np.sinh(r) ** 2


def inverse_metric_components(r, dimension=2):
    """Diagonal inverse metric (g^rr, g^tt) at radius r."""
    r = np.asarray(r, dtype=float)
    return np.ones_like(r), 1.0 / np.sinh(r) ** 2


def christoffel_symbols(r):
    """Nonzero Christoffel symbols of the 2-d polar chart.

    Returns a dict with keys 'r_tt' (Gamma^r_{theta theta}) and 't_rt'
    (Gamma^theta_{r theta} = Gamma^theta_{theta r}).  All other symbols
    vanish.
    """
    r = np.asarray(r, dtype=float)
    return {
        "r_tt": -np.sinh(r) * np.cosh(r),
        "t_rt": np.cosh(r) / np.sinh(r),
    }


def riemann_lowered(g_xz, g_yt, g_yz, g_xt):
    """Riem(X,Y,Z,T) for constant curvature -1.

    Riem(X,Y,Z,T) = -(g(X,Z) g(Y,T) - g(Y,Z) g(X,T)).  The arguments are
    the four pairings of the input vectors under the metric.
    """
    return -(g_xz * g_yt - g_yz * g_xt)


def ricci_eigenvalue(dimension):
    """Ricci tensor eigenvalue: Ric = -(n-1) g."""
    return -(dimension - 1.0)


def volume_weight(r, dimension=2):
    """Radial density of the volume element: sinh(r)^(n-1)."""
    r = np.asarray(r, dtype=float)
    return np.sinh(r) ** (dimension - 1)


def geodesic_ball_volume(radius, dimension=2):
    """Volume of the geodesic ball of the given radius.

    Dimension 2: 2 pi (cosh R - 1).  Dimension 3: pi (sinh(2R)/2 - R)
    times 2 (i.e. 2 pi (sinh R cosh R - R)).
    """
    R = float(radius)
    if dimension == 2:
        return 2.0 * math.pi * (math.cosh(R) - 1.0)
    if dimension == 3:
        return 2.0 * math.pi * (math.sinh(R) * math.cosh(R) - R)
    raise NotImplementedError("ball volume implemented for n = 2, 3")
