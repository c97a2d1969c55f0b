"""``heatwave`` command-line front end.

Usage: ``heatwave <command> CONFIG.ini [--set section.key=value ...] [--threads N]``

Exit codes: 0 pass, 1 configuration error, 2 check failure, 3 pass at a
degraded (uncertified) tolerance.
"""

import argparse
import math
import sys

import numpy as np

from . import checks, config, experiments, kernels, solver
from ._backend import BACKEND, default_threads
from .errors import (AlignmentError, BlowUpError, CapacityError, ConfigurationError, DomainError,
                     InstabilityError, QuadratureError, TruncationError)
from .noise import make_noise
from .quadrature import integrate

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_DEGRADED = 0, 1, 2, 3

_CONFIG_ERRORS = (ConfigurationError, DomainError, AlignmentError, CapacityError, OSError)
_CHECK_ERRORS = (QuadratureError, TruncationError, InstabilityError, BlowUpError)


def _fail_config(msg):
    raise ConfigurationError(msg)


def _emit_report(lines, path, cfg, command):
    for ln in lines:
        print(ln)
    if path:
        head = [f"# heatwave {command} (backend={BACKEND})", "# resolved configuration:"]
        head += ["#   " + ln for ln in config.dump(cfg).splitlines() if ln]
        try:
            with open(path, "w") as fh:
                fh.write("\n".join(head + list(lines)) + "\n")
        except OSError as exc:
            raise ConfigurationError(f"cannot write report {path!r}: {exc}") from None


def _verdict(results):
    failed = [r for r in results if not r.informational and not r.passed]
    return failed


# --------------------------------------------------------------------------
# subcommands

def cmd_kernels_verify(cfg, threads):
    k = cfg["kernels"]
    if not k["series_tol"] > 0:
        _fail_config("series_tol must be positive")
    for key in ("n_dual", "n_identity", "n_bounds"):
        if k[key] < 1:
            _fail_config(f"{key} must be >= 1")
    for t, x, y, L in k["extra_points"]:
        if not (t > 0 and L > 0):
            _fail_config(f"precondition violated: extra point needs t > 0 and L > 0, got t={t}, L={L}")
        if abs(x) > L or abs(y) > L:
            _fail_config(f"precondition violated: |x| <= L and |y| <= L required, got x={x}, y={y}, L={L}")
    results = checks.run_kernel_suite(k["series_tol"], k["n_dual"], k["n_identity"], k["n_bounds"],
                                      k["seed"], extra_points=k["extra_points"])
    failed = _verdict(results)
    lines = [r.line() for r in results]
    lines.append(f"SUMMARY {len(results)} checks, {len(failed)} failed"
                 + (": " + ", ".join(r.name for r in failed) if failed else ""))
    _emit_report(lines, cfg["output"]["report"], cfg, "kernels-verify")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_gronwall_verify(cfg, threads):
    g = cfg["gronwall"]
    variants = [checks.G.Variant.parse(v) for v in g["variants"]]
    if any(c < 0 for c in g["C_values"]):
        _fail_config("C_values must be >= 0")
    for key in ("T", "dt", "dx", "tol", "deterministic_tol", "picard_dt", "picard_dx", "picard_tol"):
        if not g[key] > 0:
            _fail_config(f"{key} must be positive")
    if not 0 < g["t_min"] < g["t_max"] <= g["T"]:
        _fail_config("need 0 < t_min < t_max <= T")
    if g["n_terms"] < 1 or g["picard_iters"] < 1:
        _fail_config("n_terms and picard_iters must be >= 1")
    results, degraded = checks.run_gronwall_suite(
        variants, g["C_values"], g["T"], g["dt"], g["dx"], g["n_terms"], (g["t_min"], g["t_max"]),
        g["tol"], g["deterministic_tol"], g["warn_tol"], g["picard_iters"], g["picard_dt"],
        g["picard_dx"], g["picard_tol"],
    )
    failed = _verdict(results)
    hard = [r for r in failed if not r.extra.get("warned")]
    if hard:
        code, verdict = EXIT_CHECK, "FAILED"
    elif failed or degraded:
        code, verdict = EXIT_DEGRADED, "DEGRADED (grid too coarse to certify the tolerance)"
    else:
        code, verdict = EXIT_OK, "PASSED"
    lines = [r.line() for r in results]
    lines.append(f"SUMMARY {len(results)} checks, {len(failed)} failed: {verdict}")
    _emit_report(lines, cfg["output"]["report"], cfg, "gronwall-verify")
    return code


def _registry_objects(cfg, section):
    coeffs = solver.coefficients(cfg[section]["coeffs"], **cfg["coeffs"])
    u0 = solver.initial_condition(cfg[section]["u0"], **cfg["u0"])
    return coeffs, u0


def _convolution_oracle(sol, u0):
    lat = sol.lattice
    ev = kernels.GreenEvaluator(lat.L, sol.bc)
    out = np.empty_like(sol.values)
    for k, t in enumerate(sol.times):
        if t == 0:
            out[k] = u0(lat.x, lat.L)
            continue
        for j, x in enumerate(lat.x):
            f = lambda y: kernels.green(ev, t, x, y) * u0(y, lat.L)  # noqa: E731
            out[k, j] = integrate(f, -lat.L, lat.L, atol=1e-12, points=(x,)).value
    return out


def cmd_simulate(cfg, threads):
    s = cfg["simulate"]
    bc = kernels.BoundaryCondition.parse(s["bc"])
    lat = solver.LatticeSpec.make(s["L"], s["dx"], s["T"], s["dt"])
    coeffs, u0 = _registry_objects(cfg, "simulate")
    times = s["snapshot_times"]
    if times is not None:
        for t in times:
            lat.step(t)
    if s["oracle"] and not (coeffs.noise_free and coeffs.drift_free):
        _fail_config("oracle = true needs coefficients with sigma = b = 0")
    noise = None if coeffs.noise_free else make_noise(s["seed"], lat.L, lat.dx, lat.dt, lat.T)
    sol = solver.solve(bc, lat, coeffs, u0, noise, snapshot_times=times)
    extra = {}
    if s["oracle"]:
        extra["oracle"] = _convolution_oracle(sol, u0)
        gap = float(np.max(np.abs(extra["oracle"] - sol.values)))
        print(f"max |value - oracle| = {gap:.3e}")
    path = cfg["output"]["csv"]
    sol.to_csv(path, extra)
    with open(path + ".config.ini", "w") as fh:
        fh.write(config.dump(cfg))
    print(f"wrote {sol.values.size} values to {path}")
    return EXIT_OK


def _sweep_config(cfg):
    s = cfg["sweep"]
    return experiments.SweepConfig(
        bc=s["bc"], L_values=s["L_values"], t_values=s["t_values"], x_values=s["x_values"],
        p=s["p"], n_reps=s["n_reps"], dx=s["dx"], dt=s["dt"], coeffs=s["coeffs"],
        coeff_params=dict(cfg["coeffs"]), u0=s["u0"], u0_params=dict(cfg["u0"]),
        base_seed=s["base_seed"], method=s["method"], L_master=s["L_master"],
    )


def cmd_sweep(cfg, threads):
    sc = _sweep_config(cfg)
    sc.validate()
    records = experiments.sweep(sc, threads=threads)
    experiments.emit(records, cfg["output"]["csv"], "csv")
    env = experiments.fit_envelope_constant(records, sc.initial.sup_norm)
    mono = experiments.monotonicity_violations(records)
    regime = experiments.regime_for(sc.coefficient_spec)
    fits, notes = [env], []
    for t in sc.t_values:
        for x in sc.x_values:
            group = [r for r in records if r.t == t and r.x == x]
            try:
                fits.append(experiments.fit_rate(group, regime))
            except ValueError as exc:
                notes.append(f"no rate fit at t={t:g}, x={x:g}: {exc}")
    fits.append({"kind": "monotonicity", "violations": len(mono),
                 "pairs": [[a.L, b.L, a.t, a.x] for a, b in mono]})
    if notes:
        fits.append({"kind": "notes", "notes": notes})
    experiments.emit(fits, cfg["output"]["json"], "json", config=sc.as_dict())
    print(f"{len(records)} records ({sc.resolved_method}); fitted_c = {env.fitted_c:.6g}; "
          f"upward_trend = {env.upward_trend}; monotonicity violations = {len(mono)}")
    for f in fits:
        if isinstance(f, experiments.RateFit):
            print(f"rate fit t={f.t:g} x={f.x:g}: slope {f.slope:.6g} vs {f.theoretical_slope:.6g} "
                  f"({f.regime}), deviation {f.relative_deviation:+.1%}, r2 {f.r_squared:.6f}")
    for n in notes:
        print(n)
    return EXIT_OK if not env.upward_trend and not mono else EXIT_CHECK


def cmd_small_l_check(cfg, threads):
    s = cfg["small_l"]
    if not s["t"] > 0 or not s["L_values"] or min(s["L_values"]) <= 0:
        _fail_config("small-l-check needs t > 0 and positive L_values")
    reps = [experiments.neumann_smallL_check(s["t"], L) for L in s["L_values"]]
    _emit_report([r.line() for r in reps], cfg["output"]["report"], cfg, "small-l-check")
    return EXIT_OK if all(r.passed for r in reps) else EXIT_CHECK


COMMANDS = {
    "kernels-verify": cmd_kernels_verify,
    "gronwall-verify": cmd_gronwall_verify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "small-l-check": cmd_small_l_check,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="heatwave", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="INI configuration file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads; results do not depend on it (env HEATWAVE_THREADS)")
    return ap


def resolve_threads(flag, cfg):
    if flag is not None:
        n = flag
    elif cfg.get("run", {}).get("threads") is not None:
        n = cfg["run"]["threads"]
    else:
        try:
            n = default_threads()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
    if n < 1:
        raise ConfigurationError("threads must be >= 1")
    return n


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config.load(args.command, path=args.config, overrides=args.set)
        threads = resolve_threads(args.threads, cfg)
        return COMMANDS[args.command](cfg, threads)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _CHECK_ERRORS as exc:
        print(f"check failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
