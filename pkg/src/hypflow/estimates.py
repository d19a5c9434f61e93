"""Decay-rate campaigns for the heat semigroups.

Each campaign runs a flow from engineered data, fits the small-time
power law and the large-time exponential rate of a norm history, and
compares them against closed-form predictions:

* norm transfer |u(t)|_q <~ c(t)^(1/p-1/q) e^{-(gamma_pq + c0) t}
  |u0|_p with c(t) = max(t^{-n/2}, 1) and
  gamma_pq = (delta/2) [(1/p - 1/q) + (8/q)(1 - 1/p)];
* same-exponent decay |u(t)|_p <~ e^{-(4 delta (p-1)/p^2 + c0) t};
* gradient smoothing |grad u(t)|_p <~ max(1/sqrt(t), 1)
  e^{-(c0 + (4 delta/p)(1 - 1/p)) t} |u0|_p;
* the pointwise domination of the vector flow by the damped scalar
  flow of the pointwise norm; and
* the pointwise gradient bound for the damped vector flow Q_t,
  |grad Q_t u0|^2 + |Q_t u0|^2 <= (1/d(t)) (P_t |u0|^2 - |Q_t u0|^2)
  with 1/d(t) = alpha1 / (e^{2 alpha1 t} - 1).

delta is the conservative spectral-gap lower bound of the model; the
rates are one-sided, so faster measured decay passes.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .elliptic import DiscreteComplex
from .fields import Grid, ScalarField, VectorField, _atomic_write, lp_norm
from .geometry import ManifoldModel
from .operators import (
    bochner_laplacian,
    covariant_gradient,
    gradient,
    hodge_laplacian_1form,
    kato_defect,
    metric_compatibility_residual,
    scalar_laplacian,
    stream_function_field,
)
from .semigroup import (
    EvolutionConfig,
    TrajectoryLedger,
    _stepper,
    evolve_bochner_heat,
    evolve_scalar_heat,
)

__all__ = [
    "DecayFit",
    "RateReport",
    "fit_decay",
    "gamma_pq",
    "dispersive_campaign",
    "lp_decay_campaign",
    "smoothing_campaign",
    "comparison_check",
    "pole_safe_swirl",
    "bakry_check",
    "gaussian_bump",
    "marginal_gradient_bump",
    "annulus_window",
    "manufactured_vector_field",
    "identity_refinement_suite",
    "kato_suite",
]

SMALL_WINDOW = (0.002, 0.02)
TAIL_WINDOW = (2.0, 6.0)


# ----------------------------------------------------------------- data

def gaussian_bump(grid, width, center=0.0):
    """Radial Gaussian bump exp(-((r-center)/width)^2) as a scalar."""
    return ScalarField.from_function(
        grid, lambda r, th: np.exp(-(((r - center) / width) ** 2))
    )


def marginal_gradient_bump(grid, eps=0.01, r_out=4.0):
    """Scalar data at the edge of square integrability.

    A mollified 1/r core (cut off at the scale eps and damped beyond
    r_out): its Fourier content is spread evenly enough across scales
    that the gradient of the flow realises the full 1/sqrt(t)
    small-time blow-up, which smooth data never does.
    """

    def shape(r, th):
        return np.exp(-((r / r_out) ** 4)) / np.sqrt(r ** 2 + eps ** 2)

    return ScalarField.from_function(grid, shape)


def pole_safe_swirl(grid, width=1.0, center=3.0):
    """Divergence-free data from an annulus-windowed stream bump.

    The window keeps the support away from the pole, where frame
    components of a smooth vector field must vanish, and away from the
    truncation ring.
    """
    psi = ScalarField(
        grid, gaussian_bump(grid, width, center).data
        * annulus_window(grid).data)
    return stream_function_field(psi)


def annulus_window(grid, r0=1.0, r1=10.5):
    """Smooth bump supported exactly inside the annulus r0 < r < r1."""

    def shape(r, th):
        x = (r - r0) / (r1 - r0)
        inside = (x > 0) & (x < 1)
        val = np.zeros_like(r)
        xx = np.clip(x * (1.0 - x), 1e-300, None)
        val[inside] = np.exp(-1.0 / xx[inside])
        return val

    return ScalarField(grid, shape(*grid.mesh()))


# ------------------------------------------------------------------ fits

@dataclass
class DecayFit:
    """Two-regime fit of a positive time series.

    small_time_power: slope of log(value) vs log(t) on the early
    window; large_time_rate: negative slope of log(value) vs t on the
    tail window; residuals are rms deviations of the fits.
    """

    small_time_power: float
    large_time_rate: float
    small_residual: float
    tail_residual: float
    small_window: tuple
    tail_window: tuple


def _window_fit(x, y, lo, hi, label):
    mask = (x >= lo) & (x <= hi)
    if int(mask.sum()) < 8:
        raise ValueError("fewer than 8 samples in the %s window" % label)
    if np.any(y[mask] <= 0.0):
        raise ValueError("nonpositive values in the %s window" % label)
    coef = np.polyfit(x[mask], np.log(y[mask]), 1)
    resid = np.log(y[mask]) - np.polyval(coef, x[mask])
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


def fit_decay(times, values, small_window=SMALL_WINDOW,
              tail_window=TAIL_WINDOW):
    """Least-squares power law and exponential rate on two windows."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    power, small_res = math.nan, math.nan
    if small_window is not None:
        if small_window[1] > tail_window[0]:
            raise ValueError("fit windows must be disjoint")
        mask = t > 0
        power, small_res = _window_fit(
            np.log(t[mask]), v[mask],
            math.log(small_window[0]), math.log(small_window[1]),
            "small-time",
        )
    slope, tail_res = _window_fit(t, v, tail_window[0], tail_window[1],
                                  "tail")
    rate = -slope
    return DecayFit(power, rate, small_res, tail_res,
                    tuple(small_window) if small_window else None,
                    tuple(tail_window))


@dataclass
class RateReport:
    """Measured vs predicted decay for one (p, q) pair."""

    p: float
    q: float
    measured_power: float
    predicted_power: float
    measured_rate: float
    predicted_rate: float
    power_pass: bool
    rate_pass: bool

    @property
    def passed(self):
        return self.power_pass and self.rate_pass

    def to_dict(self):
        return {
            "measured_power": self.measured_power,
            "measured_rate": self.measured_rate,
            "p": self.p,
            "pass": self.passed,
            "predicted_power": self.predicted_power,
            "predicted_rate": self.predicted_rate,
            "q": self.q,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            _atomic_write(path, (text + "\n").encode())
        return text


def _report(p, q, fit, predicted_power, predicted_rate,
            power_tol=0.15, rate_slack=0.05):
    power_ok = (
        math.isnan(predicted_power)
        or abs(fit.small_time_power - predicted_power) <= power_tol
    )
    rate_ok = fit.large_time_rate >= predicted_rate * (1.0 - rate_slack)
    return RateReport(
        p=float(p), q=float(q),
        measured_power=fit.small_time_power,
        predicted_power=predicted_power,
        measured_rate=fit.large_time_rate,
        predicted_rate=predicted_rate,
        power_pass=bool(power_ok), rate_pass=bool(rate_ok),
    )


def gamma_pq(model, p, q):
    """Interpolation exponent (delta/2)[(1/p-1/q) + (8/q)(1-1/p)]."""
    ip = 0.0 if np.isinf(p) else 1.0 / p
    iq = 0.0 if np.isinf(q) else 1.0 / q
    return 0.5 * model.delta_lower * ((ip - iq) + 8.0 * iq * (1.0 - ip))


# ------------------------------------------------------------- campaigns

def _default_campaign_grid():
    return Grid(r_max=12.0, n_r=768, n_theta=8)


def _default_campaign_config():
    return EvolutionConfig(dt=[(0.05, 1e-3), (6.0, 0.01)])


def dispersive_campaign(p, q, u0=None, grid=None, config=None, model=None):
    """Norm-transfer campaign for the damped scalar flow.

    Runs exp(t (Laplacian - c0)) from a narrow bump, tracks
    |u(t)|_q / |u0|_p and fits both regimes.  The small-time power is
    only predicted (and checked) for p = 1, q = inf, where the data
    acts as an approximate point source.
    """
    grid = grid or _default_campaign_grid()
    model = model or ManifoldModel(grid.dimension)
    config = config or _default_campaign_config()
    if u0 is None:
        u0 = gaussian_bump(grid, width=0.05)
    _, ledger, _ = evolve_scalar_heat(u0, TAIL_WINDOW[1], config,
                                      damping=model.c0)
    series = ledger.norm_column(q) / lp_norm(u0, p)
    fit = fit_decay(ledger.column("time"), series)
    ip = 0.0 if np.isinf(p) else 1.0 / p
    iq = 0.0 if np.isinf(q) else 1.0 / q
    predicted_power = (
        -(grid.dimension / 2.0) * (ip - iq)
        if (p == 1 and np.isinf(q)) else math.nan
    )
    return _report(p, q, fit, predicted_power,
                   gamma_pq(model, p, q) + model.c0)


def lp_decay_campaign(p, u0=None, grid=None, config=None, model=None):
    """Same-exponent decay of |u(t)|_p for the damped scalar flow;
    predicted tail rate 4 delta (p-1)/p^2 + c0."""
    grid = grid or _default_campaign_grid()
    model = model or ManifoldModel(grid.dimension)
    config = config or _default_campaign_config()
    if u0 is None:
        u0 = gaussian_bump(grid, width=1.0, center=2.0)
    _, ledger, _ = evolve_scalar_heat(u0, TAIL_WINDOW[1], config,
                                      damping=model.c0)
    series = ledger.norm_column(p) / ledger.norm_column(p)[0]
    fit = fit_decay(ledger.column("time"), series)
    rate = 4.0 * model.delta_lower * (p - 1.0) / p ** 2 + model.c0
    return _report(p, p, fit, math.nan, rate)


def smoothing_campaign(p, u0, t_final=None, config=None, model=None,
                       scalar=True):
    """Gradient-smoothing campaign |grad u(t)|_p / |u0|_p.

    scalar=True runs the damped scalar flow; otherwise the damped
    vector flow from the stream-function field of u0.  Predicted
    small-time power -1/2 (for data with marginally square-integrable
    gradient), tail rate c0 + (4 delta / p)(1 - 1/p).
    """
    if not 1.0 < p < math.inf:
        raise ValueError("smoothing requires 1 < p < inf")
    grid = u0.grid
    model = model or ManifoldModel(grid.dimension)
    config = config or _default_campaign_config()
    t_final = t_final or TAIL_WINDOW[1]
    times, grads = [], []
    if scalar:
        cx = DiscreteComplex.for_grid(grid)
        gen = (cx.lap_compact
               - model.c0 * sp.identity(grid.n_r * grid.n_theta)).tocsr()
        x = u0.data.ravel()

        def push(t, x):
            fld = ScalarField(grid, x.reshape(grid.shape))
            times.append(t)
            grads.append(lp_norm(gradient(fld), p))
    else:
        cx = DiscreteComplex.for_grid(grid)
        gen = cx.l_vec
        x = stream_function_field(u0).hat().reshape(-1)

        def push(t, x):
            fld = VectorField.from_hat(grid, x.reshape((2,) + grid.shape))
            times.append(t)
            grads.append(lp_norm(covariant_gradient(fld), p))

    scale = lp_norm(u0, p)
    t = 0.0
    push(t, x)
    for t_end, dt in config.phases(t_final):
        if t >= t_end - 1e-14:
            continue
        step = _stepper(gen, dt, config.scheme)
        for _ in range(int(round((t_end - t) / dt))):
            x = step(x)
            t += dt
            push(t, x)
    fit = fit_decay(times, np.asarray(grads) / scale)
    rate = model.c0 + (4.0 * model.delta_lower / p) * (1.0 - 1.0 / p)
    return _report(p, p, fit, -0.5, rate, power_tol=0.1)


def comparison_check(u0, snapshot_times=(0.25, 0.5, 1.0), config=None,
                     model=None, r_min=0.1):
    """Max pointwise excess of the vector flow over the damped scalar
    flow of the pointwise norm; nonpositive up to discretisation.

    Nodes with r < r_min are excluded: frame components of vector
    fields are not chart quantities at the pole, and the 1/r
    Christoffel factors amplify round-off there without bound as the
    grid is refined.
    """
    grid = u0.grid
    model = model or ManifoldModel(grid.dimension)
    config = config or EvolutionConfig(dt=2e-3)
    t_final = max(snapshot_times)
    _, _, vsnaps = evolve_bochner_heat(u0, t_final, config,
                                       snapshot_times=snapshot_times)
    _, _, ssnaps = evolve_scalar_heat(
        ScalarField(grid, u0.pointwise_norm()), t_final, config,
        damping=model.c0, snapshot_times=snapshot_times,
    )
    mask = grid.r >= r_min
    worst = -math.inf
    for t in snapshot_times:
        excess = vsnaps[t].pointwise_norm() - ssnaps[t].data
        worst = max(worst, float(np.max(excess[mask])))
    return worst


def bakry_check(u0, snapshot_times=(0.1, 0.5, 1.0), config=None,
                model=None, r_min=0.1):
    """Max pointwise violation of the damped-flow gradient bound.

    Evaluates |grad Q_t u0|^2 + |Q_t u0|^2 - (1/d(t)) (P_t |u0|^2 -
    |Q_t u0|^2) at every node with r >= r_min and every snapshot,
    where Q_t is the damped vector flow, P_t the plain scalar flow,
    and 1/d(t) = alpha1 / (e^{2 alpha1 t} - 1).  Nonpositive up to
    discretisation error; the pole neighbourhood is excluded for the
    same chart-degeneracy reason as in comparison_check.
    """
    grid = u0.grid
    model = model or ManifoldModel(grid.dimension)
    if grid.dimension != 2:
        raise ValueError("the damped vector flow coincides with the "
                         "Ricci-corrected one only in dimension 2")
    config = config or EvolutionConfig(dt=1e-3)
    t_final = max(snapshot_times)
    _, _, qsnaps = evolve_bochner_heat(u0, t_final, config,
                                       snapshot_times=snapshot_times)
    sq = ScalarField(grid, u0.pointwise_norm() ** 2)
    _, _, psnaps = evolve_scalar_heat(sq, t_final, config, damping=0.0,
                                      snapshot_times=snapshot_times)
    a1 = model.alpha1
    mask = grid.r >= r_min
    worst = -math.inf
    for t in snapshot_times:
        inv_d = a1 / (math.exp(2.0 * a1 * t) - 1.0)
        qt = qsnaps[t]
        qn2 = qt.pointwise_norm() ** 2
        gq2 = covariant_gradient(qt).pointwise_norm() ** 2
        viol = gq2 + qn2 - inv_d * (psnaps[t].data - qn2)
        worst = max(worst, float(np.max(viol[mask])))
    return worst


# --------------------------------------------------- identity campaigns

def manufactured_vector_field(grid, params):
    """Smooth annulus-supported field from an analytic parameter spec.

    params is (k, omega, a, b, phase); the same spec evaluated on finer
    grids samples the same analytic field, which is what the
    refinement studies rely on.
    """
    k, omega, a, b, phase = params
    r, th = grid.mesh()
    win = annulus_window(grid).data
    h1 = win * (a * np.cos(k * th) + b * np.sin(k * th)) * np.sin(
        omega * r + phase
    )
    h2 = win * (b * np.cos(k * th) - a * np.sin(k * th)) * np.cos(
        omega * r
    )
    return VectorField.from_hat(grid, np.stack([h1, h2]))


def _draw_params(rng):
    return (
        int(rng.integers(1, 5)),
        float(rng.uniform(0.5, 2.0)),
        float(rng.uniform(-1.0, 1.0)),
        float(rng.uniform(-1.0, 1.0)),
        float(rng.uniform(0.0, 2.0 * math.pi)),
    )


def _bochner_identity_residual(u):
    """(1/2) Lap |u|^2 - <Bochner u, u> - |grad u|^2 in L^2."""
    grid = u.grid
    sq = ScalarField(grid, u.pointwise_norm() ** 2)
    lhs = 0.5 * scalar_laplacian(sq).data
    lap = bochner_laplacian(u).hat()
    uh = u.hat()
    pairing = lap[0] * uh[0] + lap[1] * uh[1]
    grad_sq = covariant_gradient(u).pointwise_norm() ** 2
    return lp_norm(ScalarField(grid, lhs - pairing - grad_sq), 2)


def _weitzenbock_residual(u):
    """Hodge Laplacian of u flat minus (rough Laplacian + Ricci)."""
    grid = u.grid
    omega = u.flat()
    hodge = hodge_laplacian_1form(omega)
    rough = bochner_laplacian(u).flat()  # = -(grad* grad) u, lowered
    ric = grid.dimension - 1.0
    res = hodge.data + rough.data + ric * omega.data
    return lp_norm(type(omega)(grid, res), 2)


def _compatibility_residual(x, y, z):
    return lp_norm(metric_compatibility_residual(x, y, z), 2)


def identity_refinement_suite(n_fields=5, seed=20260826, levels=3,
                              base=(384, 256), r_max=12.0):
    """Refinement study of the pointwise curvature identities.

    Evaluates the Bochner identity, the Hodge/rough-Laplacian
    comparison and metric compatibility on n_fields manufactured
    analytic fields over a hierarchy of grids doubled levels-1 times,
    and returns measured convergence orders (log2 of successive
    residual ratios) per identity.
    """
    rng = np.random.default_rng(seed)
    specs = [tuple(_draw_params(rng) for _ in range(3))
             for _ in range(n_fields)]
    grids = [
        Grid(r_max, base[0] * 2 ** l, base[1] * 2 ** l)
        for l in range(levels)
    ]
    names = ("bochner", "weitzenbock", "compatibility")
    residuals = {name: np.zeros((n_fields, levels)) for name in names}
    for i, spec in enumerate(specs):
        for l, grid in enumerate(grids):
            x, y, z = (manufactured_vector_field(grid, s) for s in spec)
            residuals["bochner"][i, l] = _bochner_identity_residual(x)
            residuals["weitzenbock"][i, l] = _weitzenbock_residual(x)
            residuals["compatibility"][i, l] = _compatibility_residual(
                x, y, z)
    orders = {
        name: np.log2(res[:, :-1] / res[:, 1:])
        for name, res in residuals.items()
    }
    return {
        "residuals": {k: v.tolist() for k, v in residuals.items()},
        "orders": {k: v.tolist() for k, v in orders.items()},
        "min_order": {k: float(v.min()) for k, v in orders.items()},
    }


def kato_suite(grid=None, n_fields=20, seed=20260826):
    """Most negative pointwise defect |grad u|^2 - |grad |u||^2 over a
    corpus of manufactured smooth fields (nonnegative in the limit; a
    small O(h) negative excursion is discretisation error)."""
    grid = grid or Grid(12.0, 384, 256)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_fields):
        u = manufactured_vector_field(grid, _draw_params(rng))
        worst = min(worst, float(np.min(kato_defect(u).data)))
    return worst
