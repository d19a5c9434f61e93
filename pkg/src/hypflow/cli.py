"""Batch driver for the flow campaigns.

Subcommands mirror the campaign modules:

* ``heat``      -- damped scalar heat flow, trajectory CSV;
* ``stokes``    -- divergence-free vector heat flow, trajectory CSV;
* ``ns``        -- full nonlinear solve with energy/vorticity audit;
* ``verify``    -- property suites (identities, kato, rates,
                   comparison, bakry, oracle) with pass/fail report;
* ``nonunique`` -- exact-family growth tables, residuals, and the
                   two-profile divergence witness;
* ``fit``       -- stand-alone power/rate fit of any CSV time series.

Exit codes: 0 all asserted checks pass, 1 a campaign check fails,
2 configuration error, 3 solver failure.  All artifacts are written
atomically with sorted JSON keys; the only timestamped file is the
separate ``run_metadata.json``.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .estimates import (
    bakry_check,
    comparison_check,
    dispersive_campaign,
    fit_decay,
    gaussian_bump,
    identity_refinement_suite,
    kato_suite,
    lp_decay_campaign,
    marginal_gradient_bump,
    pole_safe_swirl,
    smoothing_campaign,
)
from .fields import Grid, _atomic_write, lp_norm
from .geometry import ManifoldModel
from .navier_stokes import evolve_ns, picard_solve
from .nonuniqueness import (
    DEFAULT_LADDER,
    build_harmonic_potential,
    energy_balance_report,
    exponential_profile,
    khesin_residual,
    khesin_velocity,
    polynomial_profile,
    pressure_selection_scan,
    selected_profile,
)
from .operators import stream_function_field
from .semigroup import (
    EvolutionConfig,
    evolve_scalar_heat,
    evolve_stokes,
    heat_convolution_h3_radial,
    heat_kernel_h3_mass,
)

EXIT_OK = 0
EXIT_CAMPAIGN = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class ConfigError(Exception):
    """Raised for unreadable, malformed, or out-of-schema configs."""


# ------------------------------------------------------------- config

_SCHEMA = {
    "manifold": {"n", "r_max", "n_r", "n_theta"},
    "evolution": {"dt", "t_final", "scheme", "tol"},
    "data": {"kind", "width", "center", "eps", "r_out"},
    "heat": {"damping", "snapshot_times"},
    "stokes": set(),
    "ns": {"energy_tol", "vorticity_tol", "picard", "picard_q",
           "picard_tol"},
    "verify": {"suites", "kato_constant", "p_list", "dispersive_pairs",
               "rate_grid_n_r", "rate_grid_n_theta"},
    "nonunique": {"profiles", "ladder", "residual_bound",
                  "witness_time", "annulus"},
    "fit": {"column", "small_window", "tail_window"},
    "output": {"directory"},
    "run": {"seed", "threads"},
}


def load_config(path):
    """Parse a TOML config and reject unknown sections or keys."""
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config parse error in %s: %s" % (path, exc))
    for section, body in cfg.items():
        if section not in _SCHEMA:
            raise ConfigError("unknown config section [%s]" % section)
        if not isinstance(body, dict):
            raise ConfigError(
                "top-level key %r must live in a section" % section)
        extra = set(body) - _SCHEMA[section]
        if extra:
            raise ConfigError(
                "unknown key(s) in [%s]: %s"
                % (section, ", ".join(sorted(extra))))
    return cfg


def _grid(cfg):
    m = cfg.get("manifold", {})
    try:
        return Grid(
            r_max=float(m.get("r_max", 12.0)),
            n_r=int(m.get("n_r", 384)),
            n_theta=int(m.get("n_theta", 256)),
            dimension=int(m.get("n", 2)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError("bad [manifold] values: %s" % exc)


def _evolution(cfg):
    e = cfg.get("evolution", {})
    dt = e.get("dt", 1e-3)
    if isinstance(dt, list):
        try:
            dt = [(float(a), float(b)) for a, b in dt]
        except (TypeError, ValueError):
            raise ConfigError(
                "[evolution] dt phases must be [t_end, dt] pairs")
    scheme = e.get("scheme", "implicit_euler")
    if scheme not in ("implicit_euler", "trapezoidal"):
        raise ConfigError("unknown scheme %r" % scheme)
    return EvolutionConfig(dt=dt, scheme=scheme,
                           tol=float(e.get("tol", 1e-10)))


def _t_final(cfg, default):
    return float(cfg.get("evolution", {}).get("t_final", default))


def _scalar_data(cfg, grid):
    d = cfg.get("data", {})
    kind = d.get("kind", "gaussian")
    if kind == "gaussian":
        return gaussian_bump(grid, width=float(d.get("width", 1.0)),
                             center=float(d.get("center", 0.0)))
    if kind == "marginal_gradient":
        return marginal_gradient_bump(grid, eps=float(d.get("eps", 0.01)),
                                      r_out=float(d.get("r_out", 4.0)))
    raise ConfigError("unknown data kind %r" % kind)


def _vector_data(cfg, grid):
    """Exactly divergence-free data from a stream-function bump."""
    psi = _scalar_data(cfg, grid)
    return stream_function_field(psi)


def _write_json(out_dir, name, payload):
    path = os.path.join(out_dir, name)
    _atomic_write(
        path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _write_metadata(out_dir, args):
    _atomic_write(
        os.path.join(out_dir, "run_metadata.json"),
        json.dumps(
            {
                "argv": sys.argv[1:],
                "command": args.command,
                "numpy": np.__version__,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                           time.gmtime()),
                "version": __version__,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )


# --------------------------------------------------------- campaigns


def cmd_heat(args, cfg, out_dir):
    grid = _grid(cfg)
    config = _evolution(cfg)
    damping = float(cfg.get("heat", {}).get("damping", 0.0))
    f0 = _scalar_data(cfg, grid)
    final, ledger, _ = evolve_scalar_heat(
        f0, _t_final(cfg, 1.0), config, damping=damping)
    ledger.to_csv(os.path.join(out_dir, "heat_trajectory.csv"))
    _write_json(out_dir, "heat_summary.json", {
        "damping": damping,
        "final_l2": lp_norm(final, 2),
        "final_linf": lp_norm(final, np.inf),
        "initial_l2": lp_norm(f0, 2),
        "steps": len(ledger.times) - 1,
    })
    return EXIT_OK


def cmd_stokes(args, cfg, out_dir):
    grid = _grid(cfg)
    config = _evolution(cfg)
    u0 = _vector_data(cfg, grid)
    final, ledger, _ = evolve_stokes(u0, _t_final(cfg, 1.0), config)
    ledger.to_csv(os.path.join(out_dir, "stokes_trajectory.csv"))
    _write_json(out_dir, "stokes_summary.json", {
        "final_l2": lp_norm(final, 2),
        "initial_l2": lp_norm(u0, 2),
        "steps": len(ledger.times) - 1,
    })
    return EXIT_OK


def cmd_ns(args, cfg, out_dir):
    from .navier_stokes import EnergyLedger

    grid = _grid(cfg)
    config = _evolution(cfg)
    section = cfg.get("ns", {})
    u0 = _vector_data(cfg, grid)
    t_final = _t_final(cfg, 1.0)
    final, ledger, _, vort = evolve_ns(
        u0, t_final, config, record_vorticity=True)
    ledger.to_csv(os.path.join(out_dir, "ns_trajectory.csv"))
    energy = EnergyLedger.from_trajectory(ledger)
    vort_tol = float(section.get("vorticity_tol", 0.01))
    energy_tol = float(section.get("energy_tol", 0.02))
    vort_increase = float(np.max(np.diff(vort) / max(vort[0], 1e-30)))
    report = {
        "energy_defect": energy.relative_defect,
        "energy_pass": abs(energy.relative_defect) <= energy_tol,
        "final_l2": lp_norm(final, 2),
        "vorticity_max_relative_increase": vort_increase,
        "vorticity_pass": vort_increase <= vort_tol,
    }
    if section.get("picard", False):
        pic_final, _, state = picard_solve(
            u0, t_final, config,
            q=float(section.get("picard_q", 4.0)),
            tol=float(section.get("picard_tol", 1e-9)))
        diff = lp_norm(pic_final - final, 2) / max(lp_norm(final, 2),
                                                   1e-30)
        report["picard_converged"] = state.converged
        report["picard_iterates"] = state.iterate_index
        report["picard_vs_imex_rel_l2"] = diff
        report["picard_pass"] = state.converged and diff <= 0.01
        state.to_json(os.path.join(out_dir, "ns_picard.json"))
    _write_json(out_dir, "ns_energy.json", report)
    passed = all(v for k, v in report.items() if k.endswith("_pass"))
    return EXIT_OK if passed else EXIT_CAMPAIGN


_ALL_SUITES = ("identities", "kato", "rates", "comparison", "bakry",
               "oracle")


def _suite_identities(cfg, out_dir, seed):
    res = identity_refinement_suite(seed=seed)
    res["pass"] = all(v >= 1.9 for v in res["min_order"].values())
    _write_json(out_dir, "verify_identities.json", res)
    return res["pass"]


def _suite_kato(cfg, out_dir, seed):
    grid = Grid(12.0, 384, 256)
    c = float(cfg.get("verify", {}).get("kato_constant", 1.0))
    worst = kato_suite(grid, seed=seed)
    res = {
        "constant": c,
        "grid_h": grid.h_r,
        "pass": worst >= -c * grid.h_r,
        "worst_defect": worst,
    }
    _write_json(out_dir, "verify_kato.json", res)
    return res["pass"]


def _suite_rates(cfg, out_dir, seed):
    section = cfg.get("verify", {})
    pairs = section.get("dispersive_pairs", [[1, "inf"], [2, 2]])
    p_list = section.get("p_list", [1, 2, 4])
    reports = []
    for p, q in pairs:
        q = np.inf if q in ("inf", "Inf") else float(q)
        reports.append(dispersive_campaign(float(p), q))
    for p in p_list:
        reports.append(lp_decay_campaign(float(p)))
    grid = Grid(12.0, 1536, 8)
    reports.append(smoothing_campaign(2.0, marginal_gradient_bump(grid)))
    rows = ["p,q,measured_power,predicted_power,measured_rate,"
            "predicted_rate,pass"]
    for rep in reports:
        rows.append("%g,%g,%.6g,%.6g,%.6g,%.6g,%d" % (
            rep.p, rep.q, rep.measured_power, rep.predicted_power,
            rep.measured_rate, rep.predicted_rate, rep.passed))
    _atomic_write(os.path.join(out_dir, "verify_rates.csv"),
                  "\n".join(rows) + "\n")
    _write_json(out_dir, "verify_rates.json",
                {"reports": [rep.to_dict() for rep in reports],
                 "pass": all(rep.passed for rep in reports)})
    return all(rep.passed for rep in reports)


def _suite_comparison(cfg, out_dir, seed):
    grid = Grid(12.0, 192, 128)
    u0 = pole_safe_swirl(grid)
    worst = comparison_check(u0, config=EvolutionConfig(dt=2e-3))
    res = {"pass": worst <= 1e-4, "worst_excess": worst}
    _write_json(out_dir, "verify_comparison.json", res)
    return res["pass"]


def _suite_bakry(cfg, out_dir, seed):
    grid = Grid(12.0, 192, 128)
    u0 = pole_safe_swirl(grid)
    worst = bakry_check(u0, config=EvolutionConfig(dt=2e-3))
    res = {"pass": worst <= 1e-2, "worst_violation": worst}
    _write_json(out_dir, "verify_bakry.json", res)
    return res["pass"]


def _suite_oracle(cfg, out_dir, seed):
    grid = Grid(12.0, 1024, 4, dimension=3)
    f0 = gaussian_bump(grid, width=0.5)
    config = EvolutionConfig(dt=[(0.05, 1e-3), (0.5, 5e-3)],
                             scheme="trapezoidal")
    final, _, _ = evolve_scalar_heat(f0, 0.5, config)
    oracle = heat_convolution_h3_radial(
        grid.r, grid.r, f0.data[:, 0], 0.5)
    num = final.data[:, 0]
    rel = float(np.sqrt(
        np.sum(grid.w * (num - oracle) ** 2)
        / np.sum(grid.w * oracle ** 2)))
    res = {
        "kernel_mass": heat_kernel_h3_mass(0.5),
        "pass": rel <= 0.02,
        "relative_l2_error": rel,
    }
    _write_json(out_dir, "verify_oracle.json", res)
    return res["pass"]


def cmd_verify(args, cfg, out_dir):
    wanted = args.suite or cfg.get("verify", {}).get("suites", ["all"])
    if isinstance(wanted, str):
        wanted = [wanted]
    if "all" in wanted:
        wanted = list(_ALL_SUITES)
    unknown = set(wanted) - set(_ALL_SUITES)
    if unknown:
        raise ConfigError("unknown verify suite(s): %s"
                          % ", ".join(sorted(unknown)))
    runners = {
        "identities": _suite_identities,
        "kato": _suite_kato,
        "rates": _suite_rates,
        "comparison": _suite_comparison,
        "bakry": _suite_bakry,
        "oracle": _suite_oracle,
    }
    results = {}
    for name in wanted:
        results[name] = bool(runners[name](cfg, out_dir, args.seed))
        print("verify %-11s %s" % (name,
                                   "PASS" if results[name] else "FAIL"))
    _write_json(out_dir, "verify_summary.json", results)
    return EXIT_OK if all(results.values()) else EXIT_CAMPAIGN


def _parse_profile(token, model):
    token = token.strip()
    if token == "selected":
        return selected_profile(model)
    if token.startswith("const"):
        return polynomial_profile([float(token[5:] or 1.0)],
                                  name=token)
    if token.startswith("exp"):
        return exponential_profile(float(token[3:]), name=token)
    raise ConfigError(
        "unknown profile %r (expected const<k>, exp<a>, selected)"
        % token)


def cmd_nonunique(args, cfg, out_dir):
    section = cfg.get("nonunique", {})
    tokens = (args.profiles.split(",") if args.profiles
              else section.get("profiles", ["const1", "selected"]))
    grid = _grid(cfg)
    model = ManifoldModel(grid.dimension)
    ladder = tuple(section.get("ladder", DEFAULT_LADDER))
    profiles = [_parse_profile(tok, model) for tok in tokens]
    if len(profiles) < 2:
        raise ConfigError("nonunique needs at least two profiles")
    pot = build_harmonic_potential(
        grid, model, ladder=ladder,
        residual_bound=float(section.get("residual_bound", 1e-8)))
    t_star = float(section.get("witness_time", 0.5))

    rows = ["profile,radius,pressure_l2,growth_ratio"]
    report = {"harmonic_residual": pot.harmonic_residual,
              "profiles": {}, "witness_time": t_star}
    for prof in profiles:
        table, ratio = pressure_selection_scan(pot, prof, ladder=ladder)
        for radius, value in sorted(table.items()):
            rows.append("%s,%g,%.9g,%.9g" % (prof.name, radius, value,
                                             ratio))
        residual = max(khesin_residual(pot, prof, t) for t in
                       (0.0, 0.25 * t_star, t_star))
        energy = energy_balance_report(pot, prof, t_final=t_star)
        report["profiles"][prof.name] = {
            "energy_defect": energy,
            "growth_ratio": ratio,
            "residual": residual,
            "residual_pass": residual <= 1e-3,
        }
    u_a = khesin_velocity(pot, profiles[0], t_star)
    u_b = khesin_velocity(pot, profiles[1], t_star)
    base = max(lp_norm(khesin_velocity(pot, profiles[0], 0.0), 2), 1e-30)
    witness = lp_norm(u_a - u_b, 2) / base
    report["witness_rel_l2_distance"] = witness
    report["witness_pass"] = witness > 0.1
    _atomic_write(os.path.join(out_dir, "nonunique_growth.csv"),
                  "\n".join(rows) + "\n")
    _write_json(out_dir, "nonunique_report.json", report)
    ok = report["witness_pass"] and all(
        p["residual_pass"] for p in report["profiles"].values())
    return EXIT_OK if ok else EXIT_CAMPAIGN


def cmd_fit(args, cfg, out_dir):
    section = cfg.get("fit", {})
    column = args.column or section.get("column", "l2")
    try:
        table = np.genfromtxt(args.csv, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigError("cannot read CSV %s: %s" % (args.csv, exc))
    if table.dtype.names is None or column not in table.dtype.names:
        raise ConfigError(
            "column %r not found in %s (have: %s)"
            % (column, args.csv, table.dtype.names))
    time_name = "time" if "time" in table.dtype.names else \
        table.dtype.names[0]
    small = section.get("small_window")
    tail = section.get("tail_window")
    kwargs = {}
    if small is not None:
        kwargs["small_window"] = tuple(small)
    if tail is not None:
        kwargs["tail_window"] = tuple(tail)
    try:
        fit = fit_decay(np.atleast_1d(table[time_name]),
                        np.atleast_1d(table[column]), **kwargs)
    except ValueError as exc:
        raise ConfigError(
            "cannot fit %r from %s: %s" % (column, args.csv, exc))
    payload = {
        "column": column,
        "small_time_power": fit.small_time_power,
        "source": os.path.basename(args.csv),
        "tail_rate": fit.large_time_rate,
    }
    _write_json(out_dir, "fit_report.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------ driver


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="TOML experiment config")
    common.add_argument("--out", metavar="DIR", default="out",
                        help="artifact directory (default: out)")
    common.add_argument("--threads", type=int, metavar="N",
                        help="cap BLAS/OpenMP thread pools")
    common.add_argument("--seed", type=lambda s: int(s) & (2 ** 64 - 1),
                        metavar="U64", default=20260826,
                        help="seed for randomized fields")
    parser = argparse.ArgumentParser(
        prog="hypflow",
        description="Heat-flow and incompressible-flow campaigns on "
                    "hyperbolic space.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("heat", parents=[common],
                   help="damped scalar heat flow")
    sub.add_parser("stokes", parents=[common],
                   help="divergence-free vector heat flow")
    sub.add_parser("ns", parents=[common],
                   help="nonlinear solve with energy audit")
    p = sub.add_parser("verify", parents=[common],
                       help="property verification suites")
    p.add_argument("--suite", action="append", choices=_ALL_SUITES +
                   ("all",), help="suite to run (repeatable)")
    p = sub.add_parser("nonunique", parents=[common],
                       help="exact-family growth and divergence witness")
    p.add_argument("--profiles", metavar="LIST",
                   help="comma-separated profiles, e.g. exp2,const1")
    p = sub.add_parser("fit", parents=[common],
                       help="fit power/rate laws to a CSV time series")
    p.add_argument("csv", help="CSV file with a header row")
    p.add_argument("--column", help="column to fit (default: l2)")
    return parser


_COMMANDS = {
    "heat": cmd_heat,
    "stokes": cmd_stokes,
    "ns": cmd_ns,
    "verify": cmd_verify,
    "nonunique": cmd_nonunique,
    "fit": cmd_fit,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        threads = args.threads or cfg.get("run", {}).get("threads")
        os.makedirs(args.out, exist_ok=True)
        _write_metadata(args.out, args)
        handler = _COMMANDS[args.command]
        if threads:
            import threadpoolctl

            with threadpoolctl.threadpool_limits(limits=int(threads)):
                code = handler(args, cfg, args.out)
        else:
            code = handler(args, cfg, args.out)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) \
            as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    print("%s: %s" % (args.command,
                      "PASS" if code == EXIT_OK else "FAIL"))
    return code


if __name__ == "__main__":
    sys.exit(main())
