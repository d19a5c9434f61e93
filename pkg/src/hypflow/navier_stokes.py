"""Nonlinear incompressible flow on hyperbolic space.

Two routes to the same solution:

* a direct IMEX integrator (implicit viscous/Ricci part, explicit
  projected advection, re-projection each step), and
* a Picard iteration on the mild (Duhamel) formulation, where each
  iterate solves a linear heat problem forced by the frozen
  nonlinearity of the previous iterate.

Both advance d/dt u = (Bochner + Ricci) u - P div(u (x) u) for
divergence-free data, with P the projector onto divergence-free
fields.  The module also carries the energy ledger, the scalar
vorticity diagnostics that drive the two-dimensional global theory,
and a pure feasibility predicate for the exponent systems used by the
general fixed-point argument in higher dimensions.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .elliptic import DEFAULT_TOL, DiscreteComplex
from .fields import ScalarField, VectorField, _atomic_write, l2_inner, lp_norm
from .operators import (
    divergence_tensor,
    exterior_derivative_1form,
    tensor_product,
)
from .semigroup import (
    EvolutionConfig,
    TrajectoryLedger,
    _stepper,
    dissipation_gradient_norm,
)

__all__ = [
    "nonlinear_term",
    "evolve_ns",
    "vorticity_2d",
    "EnergyLedger",
    "PicardState",
    "picard_solve",
    "xt_norm",
    "exponents_feasible",
]


def nonlinear_term(u, tol=DEFAULT_TOL):
    """Projected advection P div(u (x) u) as a vector field.

    For divergence-free u this equals the projected directional
    derivative P (grad_u u); assembling the tensor product and taking
    its divergence keeps the conservative form.
    """
    cx = DiscreteComplex.for_grid(u.grid)
    adv = divergence_tensor(tensor_product(u, u))
    flat = adv.hat().reshape(-1)
    q, _ = cx.solve_wide(cx.d0s @ flat, tol)
    return VectorField.from_hat(
        u.grid, (flat - cx.d0 @ q).reshape((2,) + u.grid.shape)
    )


def vorticity_2d(u):
    """Scalar vorticity: the exterior derivative of the velocity
    covector divided by the area form (two dimensions only)."""
    if u.grid.dimension != 2:
        raise ValueError("scalar vorticity requires a 2-d grid")
    return exterior_derivative_1form(u.flat())


@dataclass
class EnergyLedger:
    """Kinetic energy balance of a trajectory.

    The balance compares |u(t)|_2^2 + 2 int_0^t (|grad u|_2^2 +
    (n-1)|u|_2^2) ds against the initial energy; relative_defect is
    the largest deviation over the run, signed (positive = energy
    surplus).
    """

    times: np.ndarray
    kinetic: np.ndarray
    dissipation: np.ndarray
    initial_energy: float
    relative_defect: float

    @classmethod
    def from_trajectory(cls, ledger):
        t = ledger.column("time")
        kin = ledger.column("l2") ** 2
        diss = ledger.column("energy_integral")
        e0 = kin[0]
        defect = (kin + 2.0 * diss - e0) / e0
        worst = defect[np.argmax(np.abs(defect))]
        return cls(t, kin, diss, e0, float(worst))


def _cfl_check(u, dt):
    grid = u.grid
    speed = float(np.max(u.pointwise_norm()))
    h = min(grid.h_r, grid.h_theta)
    if speed * dt / h > 0.5:
        warnings.warn(
            "advective CFL heuristic exceeded: |u|_inf dt/h = %.3g"
            % (speed * dt / h),
            RuntimeWarning,
        )


def evolve_ns(u0, t_final, config=None, snapshot_times=None,
              record_vorticity=False):
    """Direct IMEX integration of the incompressible flow.

    Implicit Euler on the vector heat generator with explicit projected
    advection.  Only the forcing is projected: the generator commutes
    exactly with the discrete divergence, so any initial divergence
    decays under a damped scalar heat flow and the state never needs a
    projection of its own.  That matters for initial data whose
    divergence-free part is a gradient with boundary flux (harmonic
    1-forms of the complete manifold): the truncated disk supports no
    discrete harmonic fields, so projecting the state would remove
    them.  Returns (final field, ledger, snapshots[, vorticity norms]).
    """
    config = config or EvolutionConfig()
    grid = u0.grid
    cx = DiscreteComplex.for_grid(grid)
    ricci = grid.dimension - 1.0
    ledger = TrajectoryLedger()
    vort = []

    def project(flat):
        q, _ = cx.solve_wide(cx.d0s @ flat, config.tol)
        return flat - cx.d0 @ q

    def wrap(x):
        return VectorField.from_hat(grid, x.reshape((2,) + grid.shape).copy())

    def record(t, x):
        fld = wrap(x)
        quad = l2_inner(wrap(cx.l_vec @ x), fld)
        gn = dissipation_gradient_norm(quad, fld, ricci)
        ledger.record(t, fld, gn, ricci)
        if record_vorticity:
            vort.append(lp_norm(vorticity_2d(fld), 2))

    snap_left = sorted(snapshot_times or [])
    snaps = {}
    x = u0.hat().reshape(-1).copy()
    t = 0.0
    record(t, x)
    if snap_left and abs(snap_left[0]) < 1e-14:
        snaps[snap_left.pop(0)] = wrap(x)
    for t_end, dt in config.phases(t_final):
        if t >= t_end - 1e-14:
            continue
        step = _stepper(cx.l_vec, dt, "implicit_euler")
        _cfl_check(wrap(x), dt)
        for _ in range(int(round((t_end - t) / dt))):
            adv = divergence_tensor(tensor_product(wrap(x), wrap(x)))
            forcing = project(-adv.hat().reshape(-1))
            x = step(x, forcing)
            t += dt
            record(t, x)
            while snap_left and t >= snap_left[0] - 0.5 * dt:
                snaps[snap_left.pop(0)] = wrap(x)
    for s in snap_left:
        snaps[s] = wrap(x)
    out = (wrap(x), ledger, snaps)
    if record_vorticity:
        out = out + (np.asarray(vort),)
    return out


def xt_norm(times, lq_norms, n, q, beta):
    """Weighted trajectory norm sup_t c(t)^{-(1/n-1/q)} e^{bt} |u|_q
    with c(t) = max(t^{-n/2}, 1); the weight vanishes at t = 0."""
    t = np.asarray(times, dtype=float)
    vals = np.asarray(lq_norms, dtype=float)
    weight = np.minimum(t ** (n / 2.0), 1.0) ** (1.0 / n - 1.0 / q)
    weight = weight * np.exp(beta * t)
    return float(np.max(weight * vals))


@dataclass
class PicardState:
    """Diagnostics of the fixed-point iteration."""

    iterate_index: int
    q: float
    beta: float
    diff_norms: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False

    def to_json(self, path=None):
        doc = {
            "beta": self.beta,
            "converged": self.converged,
            "diff_norms": list(self.diff_norms),
            "iterate_index": self.iterate_index,
            "q": self.q,
            "ratios": list(self.ratios),
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            _atomic_write(path, (text + "\n").encode())
        return text


def picard_solve(u0, t_final, config=None, q=4.0, beta=None, max_iter=40,
                 tol=1e-9):
    """Mild-solution iteration: each iterate is a full trajectory of
    the linear flow forced by the frozen nonlinearity of the previous
    one, with left-endpoint Duhamel quadrature aligned to the stepper.

    Returns (final VectorField of the converged iterate, trajectory
    times, PicardState).  Raises RuntimeError when the successive-
    difference ratio exceeds one for three consecutive iterates.
    """
    config = config or EvolutionConfig()
    if not np.isscalar(config.dt):
        raise ValueError("picard_solve requires a single uniform dt")
    grid = u0.grid
    n = grid.dimension
    if q <= n:
        raise ValueError("the trajectory norm requires q > n")
    beta = float(n - 1) if beta is None else float(beta)
    cx = DiscreteComplex.for_grid(grid)
    dt = float(config.dt)
    n_steps = int(round(t_final / dt))
    times = dt * np.arange(n_steps + 1)
    step = _stepper(cx.l_vec, dt, "implicit_euler")

    def project(flat):
        qv, _ = cx.solve_wide(cx.d0s @ flat, config.tol)
        return flat - cx.d0 @ qv

    def wrap(x):
        return VectorField.from_hat(grid, x.reshape((2,) + grid.shape))

    def run(prev_traj):
        traj = np.empty((n_steps + 1, u0.hat().size))
        traj[0] = x0
        for k in range(n_steps):
            forcing = None
            if prev_traj is not None:
                adv = divergence_tensor(
                    tensor_product(wrap(prev_traj[k]), wrap(prev_traj[k]))
                )
                forcing = project(-adv.hat().reshape(-1))
            traj[k + 1] = step(traj[k], forcing)
        return traj

    def traj_norm(traj):
        lq = [lp_norm(wrap(row), q) for row in traj]
        return xt_norm(times, lq, n, q, beta)

    x0 = u0.hat().reshape(-1).copy()
    state = PicardState(iterate_index=0, q=q, beta=beta)
    current = run(None)
    for it in range(1, max_iter + 1):
        new = run(current)
        diff = traj_norm(new - current)
        state.iterate_index = it
        state.diff_norms.append(diff)
        if len(state.diff_norms) >= 2 and state.diff_norms[-2] > 0:
            state.ratios.append(diff / state.diff_norms[-2])
        current = new
        if diff < tol:
            state.converged = True
            break
        if (
            diff > 100.0 * tol
            and len(state.ratios) >= 3
            and all(r > 1.0 for r in state.ratios[-3:])
        ):
            raise RuntimeError(
                "fixed-point iteration is not contracting: "
                + state.to_json()
            )
    return wrap(current[-1].copy()), times, state


def exponents_feasible(n, q, q_tilde, s, r, tol=1e-12):
    """Pure predicate for the exponent systems of the general
    fixed-point argument (n >= 3).

    Checks the Hoelder couplings 1/r = 1/q + 1/s and 1/2 = 1/q +
    1/q_tilde together with the three admissibility families, each of
    the form {X >= n, X >= r, 2 <= r < n, 1/r <= 1/X + 1/n} for X in
    (q, s, q_tilde), plus s > n/2 in the first family.  Returns a dict
    of booleans per family and an overall flag.
    """
    inv = lambda x: 0.0 if np.isinf(x) else 1.0 / x
    holder = (
        abs(inv(r) - inv(q) - inv(s)) <= tol
        and abs(0.5 - inv(q) - inv(q_tilde)) <= tol
    )
    common = 2.0 - tol <= r < n - tol

    def family(x, extra=True):
        return (
            x >= n - tol
            and x >= r - tol
            and common
            and inv(r) <= inv(x) + inv(n) + tol
            and extra
        )

    out = {
        "holder": holder,
        "family_q": family(q, extra=s > n / 2.0 + tol),
        "family_s": family(s),
        "family_q_tilde": family(q_tilde),
    }
    out["feasible"] = all(out.values())
    return out
