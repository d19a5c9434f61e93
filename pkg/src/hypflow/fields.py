"""Grids and discrete fields on a truncated polar chart.

The computational domain is the geodesic ball r <= R_max with a
cell-centred radial grid r_j = (j + 1/2) h_r (no node sits on the pole)
and a uniform periodic angular grid theta_i = i h_theta.  The pole is
closed by identifying (−r, theta) with (r, theta + pi); the outer
boundary is homogeneous Dirichlet (fields are extended by zero past
R_max).

Vector and covector fields store coordinate-frame components (along
d/dr and d/dtheta).  Internally most calculus runs on orthonormal-frame
("hatted") components (u^r, sinh(r) u^theta), which stay bounded and
smooth across the pole; the conversions are exact diagonal scalings.
"""

import io
import os
import struct
import tempfile

import numpy as np

from .geometry import volume_weight

_MAGIC = b"HYPF"
_VERSION = 1

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "CovectorField",
    "FrameTensor",
    "lp_norm",
    "l2_inner",
    "save_field",
    "load_field",
    "field_to_csv",
]


class Grid:
    """Truncated polar grid on hyperbolic space.

    Parameters
    ----------
    r_max : float
        Truncation radius of the geodesic ball.
    n_r, n_theta : int
        Number of radial rings and angular sectors.  n_theta must be
        even so that the antipodal identification theta -> theta + pi
        maps grid columns to grid columns.
    dimension : int
        Ambient dimension; enters only through the volume weight
        sinh(r)^(n-1).  The angular coordinate is the polar angle of
        the 2-d chart; higher-dimensional runs are restricted to
        axisymmetric (radial) data.
    """

    def __init__(self, r_max=12.0, n_r=384, n_theta=256, dimension=2):
        if n_theta % 2 != 0:
            raise ValueError("n_theta must be even (antipodal pole closure)")
        if n_r < 4:
            raise ValueError("n_r must be at least 4")
        self.r_max = float(r_max)
        self.n_r = int(n_r)
        self.n_theta = int(n_theta)
        self.dimension = int(dimension)
        self.h_r = self.r_max / self.n_r
        self.h_theta = 2.0 * np.pi / self.n_theta
        self.r = (np.arange(self.n_r) + 0.5) * self.h_r
        self.theta = np.arange(self.n_theta) * self.h_theta
        # sinh(r), cosh(r) on the rings; the volume weight sinh^(n-1).
        self.sinh = np.sinh(self.r)
        self.cosh = np.cosh(self.r)
        self.w = volume_weight(self.r, self.dimension)
        # quadrature weight per node (trapezoid-free: midpoint rule in r,
        # exact periodic rule in theta)
        self.quad = (self.w * self.h_r * self.h_theta)[:, None] * np.ones(
            (1, self.n_theta)
        )

    @property
    def shape(self):
        return (self.n_r, self.n_theta)

    def mesh(self):
        """Broadcastable (r, theta) arrays of shape (n_r, n_theta)."""
        return self.r[:, None] * np.ones((1, self.n_theta)), np.ones(
            (self.n_r, 1)
        ) * self.theta[None, :]

    def ball_mask(self, radius):
        """Boolean mask of nodes with r <= radius."""
        return (self.r <= radius)[:, None] * np.ones(
            (1, self.n_theta), dtype=bool
        )

    def refine(self, factor=2):
        """Grid with factor-times more rings and sectors, same r_max."""
        return Grid(
            self.r_max,
            self.n_r * factor,
            self.n_theta * factor,
            self.dimension,
        )

    def compatible(self, other):
        return (
            self.shape == other.shape
            and abs(self.r_max - other.r_max) < 1e-14
            and self.dimension == other.dimension
        )

    def __repr__(self):
        return "Grid(r_max=%g, n_r=%d, n_theta=%d, dimension=%d)" % (
            self.r_max,
            self.n_r,
            self.n_theta,
            self.dimension,
        )


class _Field:
    """Common behaviour of grid fields: elementwise linear algebra."""

    components = 1

    def __init__(self, grid, data):
        data = np.asarray(data, dtype=float)
        expected = (
            grid.shape if self.components == 1 else (self.components,) + grid.shape
        )
        if data.shape != expected:
            raise ValueError(
                "bad field data shape %s, expected %s" % (data.shape, expected)
            )
        self.grid = grid
        self.data = data

    def copy(self):
        return type(self)(self.grid, self.data.copy())

    def __add__(self, other):
        self._check(other)
        return type(self)(self.grid, self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.grid, self.data - other.data)

    def __mul__(self, scalar):
        return type(self)(self.grid, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, -self.data)

    def _check(self, other):
        if type(other) is not type(self) or not self.grid.compatible(other.grid):
            raise ValueError("incompatible fields")

    def pointwise_norm(self):
        raise NotImplementedError


class ScalarField(_Field):
    components = 1

    @classmethod
    def from_function(cls, grid, func):
        r, t = grid.mesh()
        return cls(grid, func(r, t))

    @property
    def values(self):
        return self.data

    def pointwise_norm(self):
        return np.abs(self.data)


class VectorField(_Field):
    """Vector field with coordinate components (u^r, u^theta)."""

    components = 2

    @classmethod
    def from_components(cls, grid, u_r, u_t):
        return cls(grid, np.stack([u_r, u_t]))

    @classmethod
    def from_hat(cls, grid, hat):
        """Build from orthonormal-frame components (u^r, sinh(r) u^th)."""
        u_r = hat[0]
        u_t = hat[1] / grid.sinh[:, None]
        return cls(grid, np.stack([u_r, u_t]))

    @property
    def u_r(self):
        return self.data[0]

    @property
    def u_t(self):
        return self.data[1]

    def hat(self):
        """Orthonormal-frame components, shape (2, n_r, n_theta)."""
        return np.stack([self.data[0], self.data[1] * self.grid.sinh[:, None]])

    def flat(self):
        """Metric-lowered covector field u^flat."""
        w2 = (self.grid.sinh ** 2)[:, None]
        return CovectorField(
            self.grid, np.stack([self.data[0], self.data[1] * w2])
        )

    def pointwise_norm(self):
        h = self.hat()
        return np.sqrt(h[0] ** 2 + h[1] ** 2)


class CovectorField(_Field):
    """Covector (1-form) field with components (omega_r, omega_theta)."""

    components = 2

    @classmethod
    def from_components(cls, grid, w_r, w_t):
        return cls(grid, np.stack([w_r, w_t]))

    @classmethod
    def from_hat(cls, grid, hat):
        w_r = hat[0]
        w_t = hat[1] * grid.sinh[:, None]
        return cls(grid, np.stack([w_r, w_t]))

    @property
    def w_r(self):
        return self.data[0]

    @property
    def w_t(self):
        return self.data[1]

    def hat(self):
        """Orthonormal-frame components (omega_r, omega_theta/sinh)."""
        return np.stack([self.data[0], self.data[1] / self.grid.sinh[:, None]])

    def sharp(self):
        """Metric-raised vector field omega^sharp."""
        w2 = (self.grid.sinh ** 2)[:, None]
        return VectorField(
            self.grid, np.stack([self.data[0], self.data[1] / w2])
        )

    def pointwise_norm(self):
        h = self.hat()
        return np.sqrt(h[0] ** 2 + h[1] ** 2)


class FrameTensor(_Field):
    """Rank-2 tensor in orthonormal-frame components, shape (4, nr, nt).

    The frame is orthonormal, so the numeric components of the (1,1),
    (2,0) and (0,2) realisations coincide; ``coordinate_components``
    produces coordinate-frame components for a requested variance.
    Component order: [rr, rt, tr, tt] with the first index the frame
    direction named first.
    """

    components = 4

    @classmethod
    def from_matrix(cls, grid, mat):
        """mat has shape (2, 2, n_r, n_theta)."""
        return cls(grid, mat.reshape((4,) + grid.shape))

    def matrix(self):
        return self.data.reshape((2, 2) + self.grid.shape)

    def coordinate_components(self, variance="11"):
        """Coordinate components for variance '11', '20' or '02'.

        For variance '11' the first index is contravariant.  Each theta
        index contributes a factor sinh(r)^(+1) for covariant and
        sinh(r)^(-1) for contravariant slots.
        """
        w = self.grid.sinh[:, None]
        m = self.matrix()
        signs = {"11": (-1, +1), "20": (-1, -1), "02": (+1, +1)}
        s0, s1 = signs[variance]
        out = np.empty_like(m)
        for a in range(2):
            for b in range(2):
                fac = np.ones_like(w)
                if a == 1:
                    fac = fac * w ** s0
                if b == 1:
                    fac = fac * w ** s1
                out[a, b] = m[a, b] * fac
        return out

    def pointwise_norm(self):
        return np.sqrt(np.sum(self.data ** 2, axis=0))


def lp_norm(field, p=2.0, radius=None):
    """Weighted L^p norm of a field over the chart.

    radius restricts the domain: a number means the ball r <= radius,
    a pair (r_min, r_max) the annulus in between.  Uses the pointwise
    metric norm of the field and the hyperbolic volume element
    sinh(r)^(n-1) dr dtheta.
    """
    vals = field.pointwise_norm()
    quad = field.grid.quad
    if radius is not None:
        if np.isscalar(radius):
            mask = field.grid.ball_mask(radius)
        else:
            r = field.grid.r[:, None]
            mask = (r >= radius[0]) & (r <= radius[1])
        vals = np.where(mask, vals, 0.0)
    if p == np.inf:
        return float(np.max(vals))
    return float(np.sum(quad * vals ** p) ** (1.0 / p))


def l2_inner(a, b):
    """Weighted L^2 pairing of two fields of the same kind."""
    if type(a) is not type(b) or not a.grid.compatible(b.grid):
        raise ValueError("incompatible fields")
    if isinstance(a, ScalarField):
        prod = a.data * b.data
    elif isinstance(a, VectorField) or isinstance(a, CovectorField):
        ah, bh = a.hat(), b.hat()
        prod = ah[0] * bh[0] + ah[1] * bh[1]
    elif isinstance(a, FrameTensor):
        prod = np.sum(a.data * b.data, axis=0)
    else:
        raise TypeError("unsupported field type")
    return float(np.sum(a.grid.quad * prod))


_KINDS = {
    ScalarField: 0,
    VectorField: 1,
    CovectorField: 2,
    FrameTensor: 3,
}
_KINDS_REV = {v: k for k, v in _KINDS.items()}


def _atomic_write(path, payload):
    """Write bytes (or UTF-8 text) atomically: temp file, then rename."""
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-hypf-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_field(field, path):
    """Binary snapshot: fixed header plus row-major little-endian f64."""
    grid = field.grid
    ncomp = field.components
    header = struct.pack(
        "<4sHHIId",
        _MAGIC,
        _VERSION,
        _KINDS[type(field)] * 256 + grid.dimension,
        grid.n_r,
        grid.n_theta,
        grid.r_max,
    )
    buf = io.BytesIO()
    buf.write(header)
    buf.write(struct.pack("<I", ncomp))
    data = field.data if ncomp > 1 else field.data[None]
    buf.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    _atomic_write(path, buf.getvalue())


def load_field(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    head = struct.calcsize("<4sHHIId")
    magic, version, kind_dim, n_r, n_theta, r_max = struct.unpack(
        "<4sHHIId", raw[:head]
    )
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not a hypflow field snapshot")
    kind, dim = divmod(kind_dim, 256)
    (ncomp,) = struct.unpack("<I", raw[head : head + 4])
    grid = Grid(r_max, n_r, n_theta, dim)
    data = np.frombuffer(raw[head + 4 :], dtype="<f8").reshape(
        (ncomp, n_r, n_theta)
    )
    cls = _KINDS_REV[kind]
    if cls is ScalarField:
        return cls(grid, data[0].copy())
    return cls(grid, data.copy())


def field_to_csv(field, path):
    """CSV export: one row per node, r, theta, then components."""
    grid = field.grid
    r, t = grid.mesh()
    ncomp = field.components
    data = field.data if ncomp > 1 else field.data[None]
    cols = [r.ravel(), t.ravel()] + [data[k].ravel() for k in range(ncomp)]
    names = ["r", "theta"] + ["c%d" % k for k in range(ncomp)]
    lines = [",".join(names)]
    arr = np.column_stack(cols)
    for row in arr:
        lines.append(",".join("%.17g" % v for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())
