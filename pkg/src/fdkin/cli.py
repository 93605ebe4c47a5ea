"""Command-line front end.

Subcommands:

- ``equilibrium``: fit the quantum equilibrium for prescribed moments and
  print its parameters, thresholds and norm bounds as JSON;
- ``simulate``: run a configured problem; writes the time-series CSV, run
  metadata JSON and requested field snapshots into the output directory;
- ``verify``: run and apply the property checks; writes a verdict JSON and
  exits 0 only if every check passes;
- ``sweep``: run the quantum-parameter sweep (uniform sup bound plus
  non-saturation) and write the sweep result JSON;
- ``report``: render figures from a completed run directory.

Exit codes: 0 success (and all-PASS for verify), 1 computational failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import traceback

import numpy as np

from . import __version__
from .collision import get_threads, set_threads
from .config import ConfigError, load_config, serialize_config
from .equilibrium import (
    SaturationError,
    eps_sat_dagger,
    fd_norm_bounds,
    fit_fermi_dirac,
    saturation_info,
)
from .snapshots import dump_json, save_field, save_series
from .solver import CSV_HEADER, run
from .verify import (
    check_lpk_decay,
    check_moment_bound,
    check_nonsaturation,
    check_linfty_uniform,
    entropy_inequality_ratio,
    fit_decay_rate,
    fit_gaussian_floor,
)

__all__ = ["main", "dispatch"]


def _cmd_equilibrium(args) -> int:
    info = saturation_info(args.rho, args.e, args.eps)
    params = fit_fermi_dirac(args.rho, [args.u[0], args.u[1], args.u[2]], args.e, args.eps)
    klist = [float(k) for k in args.k_list.split(",")] if args.k_list else [0.0, 2.0, 4.0]
    c_inf = None
    c_1k = None
    if 0 < args.eps <= eps_sat_dagger(args.rho, args.e):
        c_inf, _ = fd_norm_bounds(params, 0.0)
        c_1k = [fd_norm_bounds(params, k)[1] for k in klist]
    doc = {
        "rho": args.rho,
        "u": list(args.u),
        "e": args.e,
        "eps": args.eps,
        "a_eps": params.a_eps,
        "b_eps": params.b_eps,
        "eps_sat": info.eps_sat,
        "eps_sat_dagger": info.eps_sat_dagger,
        "fermi_temperature": info.fermi_temperature,
        "r_e": info.r_e,
        "c_inf": c_inf,
        "c_1k": c_1k,
        "k_list": klist,
    }
    import json

    print(json.dumps(doc, sort_keys=True, indent=2))
    return 0


def _write_run_outputs(res, outdir: str, rc):
    os.makedirs(outdir, exist_ok=True)
    save_series(os.path.join(outdir, "series.csv"), res.records, CSV_HEADER)
    for t, fld in sorted(res.snapshots.items()):
        save_field(os.path.join(outdir, f"snapshot_t{t:g}.csv"), fld)
    save_field(os.path.join(outdir, "snapshot_final.csv"), res.state.f)
    meta = {
        "version": __version__,
        "config": serialize_config(rc),
        "seed": rc.sim.seed,
        "threads": get_threads(),
        "steps": res.state.step_count,
        "t_final": res.state.t,
        "entropy_residual": res.entropy_residual,
        "total_limiter_l1": res.total_limiter_l1,
        "total_clamp_l1": res.total_clamp_l1,
    }
    dump_json(os.path.join(outdir, "run.json"), meta)


def _cmd_simulate(args) -> int:
    rc = load_config(args.config)
    outdir = args.output_dir or rc.output_dir
    res = run(rc.sim)
    _write_run_outputs(res, outdir, rc)
    print(f"wrote {outdir}/series.csv ({len(res.records)} records, "
          f"{res.state.step_count} steps to t = {res.state.t:g})")
    return 0


def _verify_checks(res, rc):
    """Assemble the deterministic check list for one run."""
    recs = res.records
    checks = []

    def add(name, ok, metrics):
        checks.append({"name": name, "pass": bool(ok), "metrics": metrics})

    mass = recs[0].rho
    drift = max(r.cons_drift for r in recs)
    add("conservation", drift < 1e-8, {"max_drift": drift})

    hs = [r.h_eps for r in recs]
    h_scale = max(abs(hs[0]), mass)
    worst_rise = max(
        (hs[i + 1] - hs[i] for i in range(len(hs) - 1)), default=0.0
    )
    # near the discrete fixed point H is flat only up to the resolution floor
    # (the sampled equilibrium drifts toward the discrete fixed point, whose
    # entropy differs from it by an O(1) multiple of the self-refit gap)
    rise_tol = max(1e-10 * h_scale, 10.0 * res.entropy_floor)
    add("h_monotone", worst_rise <= rise_tol,
        {"worst_rise": worst_rise, "scale": h_scale, "tol": rise_tol})

    dh = abs(hs[-1] - hs[0])
    dh_floor = max(1e-12 * h_scale, 20.0 * res.entropy_floor)
    if rc.sim.enable_dissipation and math.isfinite(res.entropy_residual) and dh > dh_floor:
        add("entropy_identity", res.entropy_residual < 5e-2 * dh,
            {"residual": res.entropy_residual, "delta_h": dh})
    else:
        add("entropy_identity", True, {"skipped": "no measurable entropy drop"})

    mb = check_moment_bound(recs, 3.0)
    add("moment_bound_s3", mb.ok, {"max": mb.max_value, "slope": mb.slope})

    gamma = rc.sim.kernel.gamma
    n_after = sum(1 for r in recs if r.t >= 1.0)
    if n_after >= 20:
        fit = fit_decay_rate(recs, gamma, t0=1.0)
        add("decay_entropy", fit.ok,
            {"alpha_fit": fit.alpha_fit, "c_fit": fit.c_fit,
             "c_envelope": fit.c_envelope, "floor": -1.0 / gamma})
        fit2 = check_lpk_decay(recs, gamma, 1.0, 2.0, t0=1.0)
        add("decay_l1k2", fit2.ok,
            {"alpha_fit": fit2.alpha_fit, "c_envelope": fit2.c_envelope,
             "floor": -1.0 / (2.0 * gamma)})
    else:
        add("decay_entropy", True, {"skipped": f"only {n_after} samples after t0"})
        add("decay_l1k2", True, {"skipped": f"only {n_after} samples after t0"})

    if rc.sim.enable_ckp:
        # snapshots with both sides at the numerical-equilibrium floor are a
        # 0/0 regime and are skipped
        floor = max(10.0 * res.dist_floor, 1e-8 * mass**2)
        margins = [
            r.ckp_margin
            for r in recs
            if math.isfinite(r.ckp_margin) and (r.ckp_rhs - r.ckp_margin) > floor
        ]
        scale = max((r.ckp_rhs for r in recs if math.isfinite(r.ckp_rhs)), default=1.0)
        worst = min(margins) if margins else 0.0
        add("ckp", worst >= -1e-8 * max(scale, 1e-30),
            {"worst_margin": worst, "n_checked": len(margins)})

    if rc.sim.enable_sandwich:
        worst_lo = min((r.sand_lo for r in recs if math.isfinite(r.sand_lo)), default=0.0)
        worst_hi = min((r.sand_hi for r in recs if math.isfinite(r.sand_hi)), default=0.0)
        worst_h = min((r.sand_entropy for r in recs if math.isfinite(r.sand_entropy)), default=0.0)
        d_scale = max((abs(r.d0_phi) for r in recs if math.isfinite(r.d0_phi)), default=1.0)
        h_tol = max(1e-8 * abs(hs[0]), 3.0 * res.entropy_floor)
        ok = (worst_lo >= -1e-8 * d_scale and worst_hi >= -1e-8 * d_scale
              and worst_h >= -h_tol)
        add("sandwich", ok, {"worst_lower": worst_lo, "worst_upper": worst_hi,
                             "worst_entropy": worst_h})
        ratio = entropy_inequality_ratio(recs, gamma)
        add("entropy_ratio_diagnostic", True, {"min_ratio": ratio["min"],
                                               "n": len(ratio["ratio"])})

    floor = fit_gaussian_floor(res.state.f)
    add("gaussian_floor", floor.ok,
        {"k0_fit": floor.k0_fit, "a0_fit": floor.a0_fit, "n_zero": floor.n_zero})

    budget = 1e-12 * mass * max(res.state.step_count, 1)
    add("pauli_clamping", res.total_clamp_l1 <= budget,
        {"total_clamp_l1": res.total_clamp_l1, "budget": budget})
    return checks


def _cmd_verify(args) -> int:
    rc = load_config(args.config)
    res = run(rc.sim)
    checks = _verify_checks(res, rc)
    all_pass = all(c["pass"] for c in checks)
    doc = {
        "all_pass": all_pass,
        "checks": checks,
        "seed": rc.sim.seed,
        "threads": get_threads(),
        "config": serialize_config(rc),
    }
    out = args.output or os.path.join(rc.output_dir, "verdict.json")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    dump_json(out, doc)
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}")
    print(f"verdict written to {out}")
    return 0 if all_pass else 1


def _cmd_sweep(args) -> int:
    rc = load_config(args.config)
    eps_list = [float(x) for x in args.eps_list.split(",")]
    sweep = check_linfty_uniform(rc.sim, eps_list)
    kappa0 = args.kappa0
    if kappa0 is None:
        kappa0 = 1.0 - max(eps_list) * max(sweep.sup_linf)
    nonsat = check_nonsaturation(sweep, kappa0)
    doc = {
        "eps_values": sweep.eps_values,
        "sup_linf": sweep.sup_linf,
        "kappa_floor": sweep.kappa_floor,
        "decay_fit": sweep.decay_fit,
        "spread": sweep.spread,
        "linfty_uniform_pass": sweep.ok,
        "kappa0": kappa0,
        "nonsaturation_checked_eps": nonsat.checked_eps,
        "nonsaturation_pass": nonsat.ok,
        "seed": rc.sim.seed,
        "threads": get_threads(),
    }
    out = args.output or os.path.join(rc.output_dir, "sweep.json")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    dump_json(out, doc)
    print(f"spread = {sweep.spread:.4f} ({'PASS' if sweep.ok else 'FAIL'}), "
          f"non-saturation {'PASS' if nonsat.ok else 'FAIL'}; wrote {out}")
    return 0 if (sweep.ok and nonsat.ok) else 1


def _cmd_report(args) -> int:
    from .report import render_report

    paths = render_report(args.run_dir)
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fdkin",
        description="Quantum (Fermi-Dirac) Boltzmann solver and verification harness",
    )
    ap.add_argument("--threads", type=int, default=None,
                    help="sweep thread count (default: FDKIN_THREADS or min(8, cores))")
    sub = ap.add_subparsers(dest="command", required=True)

    eq = sub.add_parser("equilibrium", help="fit an equilibrium for given moments")
    eq.add_argument("--rho", type=float, required=True)
    eq.add_argument("--e", type=float, required=True)
    eq.add_argument("--eps", type=float, required=True)
    eq.add_argument("--u", type=float, nargs=3, default=(0.0, 0.0, 0.0))
    eq.add_argument("--k-list", type=str, default="",
                    help="comma-separated weight orders for the L1_k bounds")
    eq.set_defaults(func=_cmd_equilibrium)

    sim = sub.add_parser("simulate", help="advance a configured problem")
    sim.add_argument("--config", required=True)
    sim.add_argument("--output-dir", default=None)
    sim.set_defaults(func=_cmd_simulate)

    ver = sub.add_parser("verify", help="run property checks; exit 0 iff all pass")
    ver.add_argument("--config", required=True)
    ver.add_argument("--output", default=None)
    ver.set_defaults(func=_cmd_verify)

    sw = sub.add_parser("sweep", help="quantum-parameter sweep checks")
    sw.add_argument("--config", required=True)
    sw.add_argument("--eps-list", required=True,
                    help="comma-separated quantum parameters")
    sw.add_argument("--kappa0", type=float, default=None)
    sw.add_argument("--output", default=None)
    sw.set_defaults(func=_cmd_sweep)

    rep = sub.add_parser("report", help="render figures from a run directory")
    rep.add_argument("--run-dir", required=True)
    rep.set_defaults(func=_cmd_report)
    return ap


def dispatch(argv) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if args.threads is not None:
        set_threads(args.threads)
    try:
        return args.func(args)
    except (ConfigError, SaturationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))
