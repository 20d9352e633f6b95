"""Command-line front end: ``quadnls {classify,simulate,verify,sweep,barrier}``.

Exit codes: 0 success, 1 a check failed or an invariant was violated, 2 bad
input (scenario or arguments) or an integrator error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    QuadratureTooCoarse,
    FactorReading,
    classify,
    derive_constants,
    monitor_smallness,
    random_regime_state,
    sum_constants_check,
    verify_decomposition,
)
from .dynamics import RegimeViolation, SystemForm
from .integrate import (
    EventKind,
    IntegratorConfig,
    InvariantViolation,
    StepUnderflow,
    integrate,
    locate_mu_zero,
)
from .lambert import (
    BarrierOverflow,
    NoZeroCrossing,
    barrier_curve,
    barrier_f,
    comparison_lower_bound,
    lambert_w0,
    verify_barrier_ode,
)
from .scenario import ScenarioError, load_scenario, pair_state

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
SERIES = ("t", "mu", "re_u0", "nu", "nu_K", "r_K", "l2_norm")


# --------------------------------------------------------------------------- output helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k.value if hasattr(k, "value") else k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "value") and not isinstance(x, (int, float, str, bool)):
        return x.value
    return x


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path, text):
    Path(path).write_text(text)


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _config(base, args, **overrides):
    if args.tol is not None:
        overrides.setdefault("rel_tol", args.tol)
    return dataclasses.replace(base, **overrides) if overrides else base


def _scenario(args, required=True):
    if args.scenario is None:
        if required:
            raise ScenarioError(f"{args.command} needs --scenario")
        return None
    return load_scenario(args.scenario)


def _event_record(ev):
    return {"kind": ev.kind.value, "time": ev.time, "detail": ev.detail,
            "bracket": list(ev.bracket) if ev.bracket else None, "nu": ev.nu}


def _table(rows):
    """Residual table: (check, value, tolerance, passed) rows as aligned text."""
    lines = [f"{'check':<40} {'value':>14} {'tolerance':>12}  result"]
    for name, value, tol, ok in rows:
        lines.append(f"{name:<40} {value:>14.6e} {tol:>12.3e}  {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines)


# --------------------------------------------------------------------------- classify

def cmd_classify(args):
    sc = _scenario(args)
    verdict = classify(sc.initial_state())
    report = {
        "scenario": sc.name,
        "regime": verdict.regime.value,
        "alpha": verdict.alpha,
        "predicted_blowup_upper": verdict.predicted_blowup_upper,
        "notes": verdict.notes,
    }
    print(f"{sc.name}: {verdict.regime.value}")
    if verdict.predicted_blowup_upper is not None:
        print(f"  blow-up no later than t = {verdict.predicted_blowup_upper:.6g} "
              f"(alpha = {verdict.alpha:.6g})")
    print(f"  {verdict.notes}")
    if args.out:
        _write(_out_dir(args) / "classify.json", dumps(report))
    return EXIT_OK


# --------------------------------------------------------------------------- simulate

def _write_trajectory(out, sc, traj, status, message=""):
    cols = np.column_stack([traj.series(name) for name in SERIES])
    _write(out / "timeseries.csv", _csv_text(SERIES, cols.tolist()))
    _write(out / "events.json", dumps([_event_record(e) for e in traj.events]))
    final = dataclasses.asdict(traj.final.diagnostics)
    summary = {
        "version": __version__,
        "scenario": sc.name,
        "K": sc.K,
        "form": traj.form.value,
        "integrator": dataclasses.asdict(sc.integrator),
        "status": status,
        "message": message,
        "accepted_steps": len(traj.samples) - 1,
        "final": final,
    }
    _write(out / "summary.json", dumps(summary))


def cmd_simulate(args):
    sc = _scenario(args)
    sc.integrator = _config(sc.integrator, args)
    state = sc.initial_state()
    form = SystemForm(sc.system_form(state))
    out = _out_dir(args)
    try:
        traj = integrate(state, form, sc.integrator)
    except (StepUnderflow, InvariantViolation) as exc:
        _write_trajectory(out, sc, exc.trajectory, type(exc).__name__, str(exc))
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL if isinstance(exc, InvariantViolation) else EXIT_INPUT
    _write_trajectory(out, sc, traj, "ok")
    last = traj.events[-1]
    print(f"{sc.name}: {len(traj.samples) - 1} steps, {last.kind.value} at t = {last.time:.10g}")
    return EXIT_OK


# --------------------------------------------------------------------------- verify

def _verify_lambert(args, sc):
    x = np.concatenate([[0.0], np.logspace(-12, 8, 401)])
    w = lambert_w0(x)
    roundtrip = float(np.max(np.abs(w * np.exp(w) - x) / np.maximum(1.0, x)))
    sigma = np.linspace(0.0, 15.0, 151)
    inverse = float(np.max(np.abs(lambert_w0(sigma * np.exp(sigma)) - sigma) / np.maximum(1, sigma)))
    at_e = abs(lambert_w0(math.e) - 1.0)
    return [
        ("W(x) exp(W(x)) = x (relative)", roundtrip, 1e-13, roundtrip <= 1e-13),
        ("W(s exp(s)) = s (relative)", inverse, 1e-13, inverse <= 1e-13),
        ("W(e) = 1", at_e, 1e-15, at_e <= 1e-15),
        ("W(0) = 0", abs(float(w[0])), 0.0, float(w[0]) == 0.0),
    ], {}


def _barrier_params(sc):
    p = dict(mu0=0.1, f0=0.01, B=1.0, n_samples=129)
    if sc is not None:
        p.update(sc.barrier)
    return float(p["mu0"]), float(p["f0"]), float(p["B"]), int(p["n_samples"])


def _verify_barrier(args, sc):
    mu0, f0, B, n = _barrier_params(sc)
    curve = barrier_curve(mu0, f0, B, max(n, 64))
    check = verify_barrier_ode(curve)
    f_start = abs(curve.f[0] - f0)
    f_end = abs(float(barrier_f(mu0, mu0, f0)) - f0 * math.exp(-mu0 * mu0 / f0))
    return [
        ("barrier ODE residual", check.ode_residual, 1e-6, check.ode_ok),
        ("g differential inequality slack", check.g_min_slack, 0.0, check.g_ok),
        ("f(0) = f0", f_start, 1e-10, f_start <= 1e-10),
        ("f(mu0) = f0 exp(-mu0^2/f0)", f_end, 1e-10, f_end <= 1e-10),
    ], {"mu0": mu0, "f0": f0, "B": B, "C1": curve.C1}


def _verify_constants(args, sc):
    K_max = int((sc.verify if sc else {}).get("K_max", 64))
    rep = sum_constants_check(K_max, trials=100, seed=args.seed)
    rows = [("pi^2/6 - partial sum", rep.tail, 1 / K_max, rep.tail_ok)]
    for name, m in zip(("trilinear (pi/sqrt3)", "shifted quadrilinear (pi^2/3)",
                        "triple quadrilinear (pi^2/3)"), rep.margins):
        rows.append((f"{name} min margin", m, 0.0, m >= 0))
    return rows, {"K_max": K_max, "trials": rep.trials}


def _regime_initial(args, sc, K, mu0, nu0):
    if sc is not None:
        return sc.initial_state()
    return random_regime_state(np.random.default_rng(args.seed), K, mu0, nu0)


def _verify_decomposition(args, sc):
    opts = sc.verify if sc else {}
    t = float(opts.get("t", 0.1))
    panels = int(opts.get("panels", 64))
    state = _regime_initial(args, sc, 2, 0.2, 0.05)
    base = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_time=t)
    traj = integrate(state, SystemForm.ROTATING, _config(base, args, max_time=t))
    reports = verify_decomposition(traj, t=t, panels=panels)
    good = reports[FactorReading.MU2_PLUS_NU]
    other = reports[FactorReading.MU2_PLUS_NU2]
    rows = [
        (f"residual [{good.variant.value}]", good.residual, 1e-6, good.residual <= 1e-6),
        ("quadrature error estimate", good.quadrature_error, 1e-6, good.quadrature_error <= 1e-6),
    ]
    extra = {"K": good.K, "t": t, "panels": panels, "lhs": good.lhs, "rhs": good.rhs,
             "alternative_reading": {"variant": other.variant.value, "residual": other.residual}}
    return rows, extra


def _verify_smallness(args, sc):
    state = _regime_initial(args, sc, 8, 1e-3, 1e-3)
    consts = derive_constants(seed=args.seed)
    horizon = sc.integrator.max_time if sc else 1000.0
    base = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14, max_time=horizon)
    traj = integrate(state, SystemForm.ROTATING, _config(base, args, stop_at_mu_zero=True))
    rep = monitor_smallness(traj, consts)
    rows = [("smallness left side (< 1/2 to apply)", rep.smallness_lhs, 0.5, True)]
    extra = {"A": consts.A, "B": consts.B, "provenance": consts.provenance,
             "mu0": rep.mu0, "nu0": rep.nu0, "satisfied": rep.satisfied,
             "delta": rep.delta, "horizon": rep.horizon}
    if rep.satisfied:
        excess = rep.running_sup_nu - 2 * rep.nu0
        rows.append(("sup nu - 2 nu0", excess, 1e-9, excess <= 1e-9))
        rows.append(("delta > 0", rep.delta, 0.0, rep.delta > 0))
        if rep.delta > 0:
            try:
                cmp = comparison_lower_bound(traj, consts, rep.delta)
            except NoZeroCrossing:
                extra["comparison"] = "mu stayed positive up to the horizon"
            else:
                rows.append(("min nu - g along trajectory", cmp.min_margin, 0.0, cmp.pointwise_ok))
                rows.append(("nu(T0) - g(mu0)", cmp.nu_T0 - cmp.g_at_mu0, 0.0, cmp.terminal_ok))
                extra.update(T0=cmp.T0, nu_T0=cmp.nu_T0, f0=cmp.f0)
    else:
        extra["note"] = "smallness condition not met; sup bound reported only"
        extra["running_sup_nu"] = rep.running_sup_nu
    return rows, extra


VERIFIERS = {
    "lambert": _verify_lambert,
    "barrier": _verify_barrier,
    "constants": _verify_constants,
    "decomposition": _verify_decomposition,
    "smallness": _verify_smallness,
}


def cmd_verify(args):
    sc = _scenario(args, required=False)
    rows, extra = VERIFIERS[args.which](args, sc)
    ok = all(r[3] for r in rows)
    print(_table(rows))
    print(f"verify {args.which}: {'PASS' if ok else 'FAIL'}")
    if args.out:
        report = {"which": args.which, "passed": ok, "details": extra,
                  "checks": [{"check": n, "value": v, "tolerance": t, "passed": p}
                             for n, v, t, p in rows]}
        _write(_out_dir(args) / f"verify_{args.which}.json", dumps(report))
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------- sweep

SWEEP_HEADER = ("mu0", "nu0", "K", "T0", "nu_T0", "blowup_lower_bound", "status")


def sweep_row(mu0, nu0, K, config):
    """One sweep grid point; errors are folded into the status field."""
    try:
        traj = integrate(pair_state(mu0, nu0, K), SystemForm.ROTATING, config)
    except (StepUnderflow, InvariantViolation, RegimeViolation, ValueError) as exc:
        return (mu0, nu0, K, None, None, None, f"error: {type(exc).__name__}: {exc}")
    if mu0 == 0 and nu0 > 0:
        # mu' = -nu < 0 from the start: the crossing is at t = 0
        T0, nu_T0 = 0.0, nu0
    else:
        hit = locate_mu_zero(traj)
        T0, nu_T0 = hit if hit is not None else (None, None)
    blow = traj.event(EventKind.BLOWUP)
    if blow is not None:
        return (mu0, nu0, K, T0, nu_T0, blow.time, "blowup")
    return (mu0, nu0, K, T0, nu_T0, None, "max_time_reached")


def _sweep_task(job):
    return sweep_row(*job)


def sweep_grid(mu0s, nu0s, Ks, config, jobs=1):
    grid = [(float(m), float(n), int(k), config) for m, n, k in product(mu0s, nu0s, Ks)]
    if not grid:
        raise ScenarioError("sweep grid is empty")
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_task, grid))
    return [_sweep_task(g) for g in grid]


def cmd_sweep(args):
    sc = _scenario(args)
    grid = sc.sweep
    missing = [k for k in ("mu0", "nu0") if not grid.get(k)]
    if missing:
        raise ScenarioError(f"sweep section needs nonempty {', '.join(missing)}")
    Ks = grid.get("K") or [sc.K]
    rows = sweep_grid(grid["mu0"], grid["nu0"], Ks, _config(sc.integrator, args), args.jobs)
    text = _csv_text(SWEEP_HEADER, rows)
    if args.out:
        _write(_out_dir(args) / "sweep.csv", text)
    else:
        sys.stdout.write(text)
    errors = sum(r[-1].startswith("error") for r in rows)
    print(f"sweep: {len(rows)} rows, {errors} errors", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------- barrier

def cmd_barrier(args):
    sc = _scenario(args, required=False)
    mu0, f0, B, n = _barrier_params(sc)
    mu0 = mu0 if args.mu0 is None else args.mu0
    f0 = f0 if args.f0 is None else args.f0
    B = B if args.B is None else args.B
    n = n if args.n_samples is None else args.n_samples
    curve = barrier_curve(mu0, f0, B, n)
    rows = np.column_stack([curve.s, curve.f, curve.g]).tolist()
    text = _csv_text(("s", "f", "g"), rows)
    if args.out:
        _write(_out_dir(args) / "barrier.csv", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------- entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario YAML file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--tol", type=float, help="override integrator rel_tol")

    p = argparse.ArgumentParser(prog="quadnls", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="report the regime of the initial data")
    sub.add_parser("simulate", parents=[common], help="integrate and write time series + events")
    v = sub.add_parser("verify", parents=[common], help="run a numerical self-check")
    v.add_argument("which", choices=sorted(VERIFIERS))
    sub.add_parser("sweep", parents=[common], help="grid over mu0, nu0, K")
    b = sub.add_parser("barrier", parents=[common], help="emit the comparison curve as CSV")
    b.add_argument("--mu0", type=float)
    b.add_argument("--f0", type=float)
    b.add_argument("--B", type=float)
    b.add_argument("--n-samples", type=int)
    return p


COMMANDS = {"classify": cmd_classify, "simulate": cmd_simulate, "verify": cmd_verify,
            "sweep": cmd_sweep, "barrier": cmd_barrier}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "simulate" and not args.out:
        args.out = "quadnls-out"
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"error: scenario: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RegimeViolation, InvariantViolation, QuadratureTooCoarse) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (BarrierOverflow, StepUnderflow, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
