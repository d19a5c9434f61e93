"""Matrix-free covariant calculus on the polar grid.

All differential operators here act on node-collocated fields and are
second-order centred finite differences.  Internally every computation
runs on orthonormal-frame components (see fields.py), for which the
frame connection has the single coefficient coth(r):

    grad_{e1} e1 = 0,  grad_{e1} e2 = 0,
    grad_{e2} e1 = coth(r) e2,  grad_{e2} e2 = -coth(r) e1,

with e1 = d/dr and e2 = (1/sinh r) d/dtheta.  Because the frame is
orthonormal the connection is antisymmetric and the same correction
applies to every tensor slot regardless of variance.

Pole closure: the radial ghost ring at -r is the ring at (r, theta+pi)
with sign (-1)^rank for hatted rank-k components.  Outer boundary:
fields are extended by zero beyond r_max (homogeneous Dirichlet).
"""

import numpy as np

from .fields import (
    CovectorField,
    FrameTensor,
    ScalarField,
    VectorField,
)

__all__ = [
    "shift_radial",
    "deriv_r",
    "deriv_theta",
    "frame_derivative",
    "gradient",
    "covariant_gradient",
    "stream_function_field",
    "divergence",
    "divergence_tensor",
    "second_covariant_derivative",
    "bochner_laplacian",
    "scalar_laplacian",
    "ricci_operator",
    "exterior_derivative_scalar",
    "codifferential_1form",
    "exterior_derivative_1form",
    "codifferential_2form",
    "hodge_laplacian_1form",
    "vector_laplacian_hodge",
    "advection",
    "kato_defect",
    "vorticity",
    "metric_compatibility_residual",
    "directional_derivative",
    "tensor_product",
]


def shift_radial(arr, grid, step, parity):
    """Shift ring index by +-1 with pole reflection and outer zero-pad.

    arr has shape (..., n_r, n_theta).  parity is the sign picked up by
    the stored component under the antipodal map (r, th) -> (-r, th+pi):
    +1 for scalars and hatted rank-2 components, -1 for hatted rank-1
    and rank-3 components.
    """
    out = np.empty_like(arr)
    half = grid.n_theta // 2
    if step == 1:
        out[..., :-1, :] = arr[..., 1:, :]
        out[..., -1, :] = 0.0
    elif step == -1:
        out[..., 1:, :] = arr[..., :-1, :]
        out[..., 0, :] = parity * np.roll(arr[..., 0, :], half, axis=-1)
    else:
        raise ValueError("step must be +1 or -1")
    return out


def deriv_r(arr, grid, parity):
    """Centred radial derivative with the stated ghost conventions."""
    return (
        shift_radial(arr, grid, 1, parity) - shift_radial(arr, grid, -1, parity)
    ) / (2.0 * grid.h_r)


def deriv_theta(arr, grid):
    """Centred periodic angular derivative."""
    return (np.roll(arr, -1, axis=-1) - np.roll(arr, 1, axis=-1)) / (
        2.0 * grid.h_theta
    )


def _connection_correction(comps, rank):
    """Sum over slots of the frame-connection index swap.

    For each tensor slot: component with that slot = 1 receives minus
    the component with the slot flipped to 2, and vice versa with plus.
    (The coth(r) coefficient is applied by the caller.)
    """
    out = np.zeros_like(comps)
    for slot in range(rank):
        swapped = np.flip(comps, axis=slot)
        sign = np.ones((2,) * rank)
        idx = [slice(None)] * rank
        idx[slot] = 0
        sign[tuple(idx)] = -1.0
        out = out + sign.reshape((2,) * rank + (1, 1)) * swapped
    return out


def frame_derivative(comps, grid, rank):
    """Frame covariant derivative of hatted components.

    comps has shape (2,)*rank + grid.shape; the result has shape
    (2,) + (2,)*rank + grid.shape with the new leading slot the
    derivative direction.  The e2 direction is grouped as
    (1/sinh r) [ d_theta + cosh(r) * connection ], which keeps all
    stored arrays bounded across the pole.
    """
    parity = 1.0 if rank % 2 == 0 else -1.0
    d1 = deriv_r(comps, grid, parity)
    dth = deriv_theta(comps, grid)
    if rank > 0:
        dth = dth + grid.cosh[:, None] * _connection_correction(comps, rank)
    d2 = dth / grid.sinh[:, None]
    return np.stack([d1, d2])


def gradient(f):
    """Metric gradient of a scalar as a covector field."""
    g = frame_derivative(f.data, f.grid, 0)
    return CovectorField.from_hat(f.grid, g)


def directional_derivative(u, f):
    """Derivative of the scalar f along the vector field u."""
    uh = u.hat()
    g = frame_derivative(f.data, f.grid, 0)
    return ScalarField(f.grid, uh[0] * g[0] + uh[1] * g[1])


def covariant_gradient(u):
    """Total covariant derivative of a vector field.

    Returns a FrameTensor whose matrix M[i, a] is the a-component of
    the covariant derivative along frame direction i.
    """
    m = frame_derivative(u.hat(), u.grid, 1)
    return FrameTensor.from_matrix(u.grid, m)


def divergence(u):
    """Divergence in conservative form: (1/w) [d_r(w u1) + d_th u2].

    This discretisation is the exact negative adjoint of ``gradient``
    under the weighted inner product, which is what the Leray projection
    and the pressure equation are built on.
    """
    grid = u.grid
    uh = u.hat()
    w = grid.sinh[:, None]
    # The ghost sign -1 on w*u1 is the transpose pattern of the scalar
    # gradient at the pole ring: it makes this operator the exact
    # negative adjoint of ``gradient`` (not just up to O(h^2)).
    dru = deriv_r(w * uh[0], grid, -1.0)
    dtu = deriv_theta(uh[1], grid)
    return ScalarField(grid, (dru + dtu) / w)


def divergence_tensor(T):
    """Divergence of a rank-2 tensor, contracting the first slot.

    (div T)^a = sum_i (grad_{e_i} T)[i, a], returned as a VectorField.
    """
    grid = T.grid
    m = frame_derivative(T.matrix(), grid, 2)
    out = m[0, 0] + m[1, 1]
    return VectorField.from_hat(grid, out)


def second_covariant_derivative(u):
    """Hessian of a vector field: shape (2, 2, 2, nr, nt) hatted.

    Index order [i, m, a]: derivative direction i of the covariant
    gradient slot m, value slot a.
    """
    m = frame_derivative(u.hat(), u.grid, 1)
    return frame_derivative(m, u.grid, 2)


def bochner_laplacian(u):
    """Rough (Bochner) Laplacian: trace of the second covariant derivative."""
    h = second_covariant_derivative(u)
    return VectorField.from_hat(u.grid, h[0, 0] + h[1, 1])


def scalar_laplacian(f):
    """Laplace-Beltrami operator, compact 5-point flux form.

    (1/w) d_r(w d_r f) + (1/sinh^2) d_th^2 f with the radial fluxes on
    half-offset rings; the flux through the pole carries weight
    sinh(0) = 0, which closes the pole without reflection.
    """
    grid = f.grid
    v = f.data
    h_r, h_t = grid.h_r, grid.h_theta
    r_up = grid.r + 0.5 * h_r
    r_dn = grid.r - 0.5 * h_r
    w_up = np.sinh(r_up) ** (grid.dimension - 1)
    w_dn = np.sinh(r_dn) ** (grid.dimension - 1)
    up = np.zeros_like(v)
    up[:-1, :] = v[1:, :] - v[:-1, :]
    up[-1, :] = 0.0 - v[-1, :]
    dn = np.zeros_like(v)
    dn[1:, :] = v[1:, :] - v[:-1, :]
    # lower flux of the innermost ring multiplies sinh(0)^(n-1) = 0
    radial = (w_up[:, None] * up - w_dn[:, None] * dn) / (
        grid.w[:, None] * h_r ** 2
    )
    ang = (
        np.roll(v, -1, axis=1) - 2.0 * v + np.roll(v, 1, axis=1)
    ) / (np.sinh(grid.r)[:, None] ** 2 * h_t ** 2)
    return ScalarField(grid, radial + ang)


def ricci_operator(u):
    """Ricci operator r(u) = -(n-1) u on hyperbolic n-space."""
    return u * (-(u.grid.dimension - 1.0))


# ---------------------------------------------------------------------------
# Hodge operators on the de Rham complex scalars -> 1-forms -> 2-forms.
# 2-forms are stored through their normalised coefficient c/sinh(r) where
# beta = c dr ^ dtheta, so that |beta|^2 is just the square of the stored
# array.


def exterior_derivative_scalar(f):
    """d of a scalar; numerically identical to ``gradient``."""
    return gradient(f)


def codifferential_1form(omega):
    """delta omega = -div(omega sharp); scalar field."""
    return ScalarField(omega.grid, -divergence(omega.sharp()).data)


def exterior_derivative_1form(omega):
    """Normalised exterior derivative (the scalar curl) of a 1-form."""
    grid = omega.grid
    oh = omega.hat()
    w = grid.sinh[:, None]
    # w * omega2_hat is even; omega1_hat is odd.
    c = deriv_r(w * oh[1], grid, +1.0) - deriv_theta(oh[0], grid)
    return ScalarField(grid, c / w)


def codifferential_2form(beta):
    """delta of a 2-form (stored normalised), returned as a 1-form."""
    grid = beta.grid
    w = grid.sinh[:, None]
    comp1 = deriv_theta(beta.data, grid) / w
    # ghost sign -1: exact adjoint of exterior_derivative_1form
    comp2 = -deriv_r(beta.data, grid, -1.0)
    return CovectorField.from_hat(grid, np.stack([comp1, comp2]))


def hodge_laplacian_1form(omega):
    """Hodge Laplacian d delta + delta d on 1-forms."""
    grid = omega.grid
    part1 = exterior_derivative_scalar(codifferential_1form(omega))
    part2 = codifferential_2form(exterior_derivative_1form(omega))
    return CovectorField(grid, part1.data + part2.data)


def vector_laplacian_hodge(u):
    """Bochner Laplacian through the Hodge identity.

    Delta u = (-Hodge(u flat) + Ric(u, .))^sharp; on hyperbolic space the
    Ricci term is -(n-1) u.  Exact commutation with the discrete
    divergence makes this the assembly route used by the evolution
    operators.
    """
    grid = u.grid
    hodge = hodge_laplacian_1form(u.flat()).sharp()
    return VectorField(
        grid, -hodge.data - (grid.dimension - 1.0) * u.data
    )


def advection(u, v):
    """Covariant advection grad_u v."""
    m = frame_derivative(v.hat(), v.grid, 1)
    uh = u.hat()
    out = uh[0] * m[0] + uh[1] * m[1]
    return VectorField.from_hat(u.grid, out)


def stream_function_field(psi):
    """Divergence-free vector field of a stream function.

    Built so the discrete conservative divergence vanishes to rounding:
    the two finite differences commute exactly.  The cancellation
    covers the pole ring only when psi is single-valued at the pole
    (no theta dependence as r -> 0); any other psi is not a smooth
    scalar there and leaves an O(psi_theta / h) divergence on the
    innermost ring.
    """
    grid = psi.grid
    h1 = -deriv_theta(psi.data, grid) / grid.sinh[:, None]
    h2 = deriv_r(psi.data, grid, 1.0)
    return VectorField.from_hat(grid, np.stack([h1, h2]))


def tensor_product(u, v):
    """Outer product u (x) v as a FrameTensor (first slot from u)."""
    uh, vh = u.hat(), v.hat()
    mat = np.einsum("a...,b...->ab...", uh, vh)
    return FrameTensor.from_matrix(u.grid, mat)


def kato_defect(u, floor=1e-12):
    """Pointwise |grad u|^2 - |grad |u||^2 (nonnegative in the limit).

    Nodes where |u| < floor are masked to zero: the norm gradient is not
    differentiable there and the discrete quotient is meaningless.
    """
    grid = u.grid
    norm = u.pointwise_norm()
    gn = frame_derivative(norm, grid, 0)
    grad_norm_sq = gn[0] ** 2 + gn[1] ** 2
    full = covariant_gradient(u).pointwise_norm() ** 2
    defect = np.where(norm >= floor, full - grad_norm_sq, 0.0)
    return ScalarField(grid, defect)


def vorticity(u):
    """Scalar vorticity of a planar field: the curl of u flat."""
    return exterior_derivative_1form(u.flat())


def metric_compatibility_residual(x, y, z):
    """X(g(Y,Z)) - g(grad_X Y, Z) - g(Y, grad_X Z); zero in the limit."""
    grid = x.grid
    yh, zh = y.hat(), z.hat()
    inner = ScalarField(grid, yh[0] * zh[0] + yh[1] * zh[1])
    lhs = directional_derivative(x, inner)
    gy = advection(x, y).hat()
    gz = advection(x, z).hat()
    rhs = gy[0] * zh[0] + gy[1] * zh[1] + yh[0] * gz[0] + yh[1] * gz[1]
    return ScalarField(grid, lhs.data - rhs)
