"""Command-line front end: ``esgen {verify,simulate,sweep,certify,compare}``.

Exit status: 0 pass, 1 check failure, 2 configuration error, 3 numeric failure.
"""

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import scenario as scn
from .certificates import (CertificateInputs, DecayEnvelope, check_descent, check_envelope,
                           epsilon_certificate, estimate_field_constants, lemma_exponents,
                           sample_points)
from .costs import (check_a1, estimate_a2_constants, gradient_agreement, verification_grid,
                    verify_a2)
from .dithers import nu, pairs_beta
from .dynamics import EsSystem, Trajectory, VibSystem, simulate, sup_deviation
from .errors import ConfigError, EsgenError, InputError, PreconditionError
from .generators import estimate_a4_bounds, verify_pfaffian
from .lie import lie_terms

EXIT_OK, EXIT_FAIL = 0, 1


def g6(v):
    if isinstance(v, (bool, str)) or v is None:
        return str(v)
    v = float(v)
    return "unbounded" if math.isinf(v) else format(v, ".6g")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


# -- verify -----------------------------------------------------------------

def verify_scenario(sc):
    """Structural checks of a scenario: cost data, A1/A2, Pfaffian identity, averaging coefficients, A4."""
    system = scn.build_system(sc)
    cost = system.clf if isinstance(system, VibSystem) else system.cost
    checks = []
    radius = float(sc.checks.get("domain_radius", 2.0))
    grid = int(sc.checks.get("grid_points", 41))

    if cost.minimizer is not None:
        gap, gnorm = cost.check_minimizer()
        checks.append(Check("minimizer", True, f"|J(x*)-J*| = {g6(gap)}, |grad J(x*)| = {g6(gnorm)}"))
        pts = verification_grid(cost.minimizer, radius, min(grid, 21))
        if cost.grad_fn is not None:
            err = gradient_agreement(cost, pts)
            checks.append(Check("gradient_fd_agreement", err <= 1e-6, f"max rel error {g6(err)}"))
        bad = check_a1(cost, radius, grid)
        checks.append(Check("A1", not bad, f"{len(bad)} bad grid points"))
        consts = estimate_a2_constants(cost, radius, grid)
        rep = verify_a2(cost, consts, radius, grid)
        checks.append(Check("A2", rep.passed,
                            f"m1={g6(consts.m1)} gamma=[{g6(consts.gamma1)}, {g6(consts.gamma2)}] "
                            f"kappa=[{g6(consts.kappa1)}, {g6(consts.kappa2)}] mu={g6(consts.mu)}; "
                            f"{len(rep.violations)} violations"))
    gens = [system.gen] if isinstance(system, VibSystem) else [a.gen for a in system.axes]
    unique = {}
    for i, g in enumerate(gens):
        unique.setdefault(id(g), (i, g))
    for i, g in unique.values():
        rep = verify_pfaffian(g)
        where = "" if rep.passed else f" at z = {g6(rep.worst_z)}"
        checks.append(Check(f"pfaffian[{i + 1}:{g.name}]", rep.passed,
                            f"max residual {g6(rep.max_residual)} (tol {g6(rep.tol)}){where}"))

    dithers = [system.dither] if isinstance(system, VibSystem) else [a.dither for a in system.axes]
    B = pairs_beta(dithers)
    worst = 0.0
    for i, d in enumerate(dithers):
        worst = max(worst, abs(B[2 * i + 1, 2 * i] - d.expected_beta21),
                    abs(B[2 * i, 2 * i + 1] + d.expected_beta21),
                    abs(B[2 * i, 2 * i]), abs(B[2 * i + 1, 2 * i + 1]))
        for j in range(len(dithers)):
            if j != i:
                worst = max(worst, float(np.max(np.abs(B[2 * i:2 * i + 2, 2 * j:2 * j + 2]))))
    checks.append(Check("averaging_coefficients", worst <= 1e-9, f"max deviation {g6(worst)}"))

    if isinstance(system, EsSystem):
        for i, g in unique.values():
            if not g.vanishing_at_min:
                continue
            rep = estimate_a4_bounds(g, cost, consts.m1, radius, grid)
            failed = [k for k, v in rep.checks.items() if not v]
            checks.append(Check(f"A4[{i + 1}:{g.name}]", rep.passed,
                                f"m2={g6(rep.a4.m2)} M={g6(rep.a4.M)} H={g6(rep.a4.H)}"
                                + (f"; failed: {', '.join(failed)}" if failed else "")))
    return checks


# -- simulate ---------------------------------------------------------------

def run_scenario(sc, averaged=None):
    system = scn.build_system(sc)
    if averaged is None:
        averaged = sc.mode == "lie" or (sc.mode == "vib" and sc.vib.get("averaged", False))
    traj = simulate(system, sc.x0, sc.t_end, h=sc.h, sample_stride=sc.sample_stride, averaged=averaged)
    return system, traj


def summarize(sc, system, traj):
    xs = scn.x_star(sc, system)
    dist = float(np.linalg.norm(traj.final - xs))
    out = {"final_dist": dist, "final_J": float(traj.cost_values[-1])}
    if traj.controls.shape[1]:
        mag = np.abs(traj.controls).max(axis=1)
        out["min_control"] = float(mag.min())
        out["max_control"] = float(mag.max())
        early = float(sc.checks.get("amp_early", 2.0))
        late = float(sc.checks.get("amp_late", 2.0))
        out["early_amplitude"] = traj.control_amplitude(0.0, early)
        out["late_amplitude"] = traj.control_amplitude(sc.t_end - late, sc.t_end)
    return out


def simulation_checks(sc, summary):
    checks = []
    if "final_tol" in sc.checks:
        tol = float(sc.checks["final_tol"])
        checks.append(Check("final_distance", summary["final_dist"] <= tol,
                            f"{g6(summary['final_dist'])} <= {g6(tol)}"))
    if "amp_ratio" in sc.checks and "late_amplitude" in summary:
        r = float(sc.checks["amp_ratio"])
        ratio = summary["late_amplitude"] / max(summary["early_amplitude"], 1e-300)
        checks.append(Check("late/early control amplitude", ratio <= r, f"{g6(ratio)} <= {g6(r)}"))
    if "amp_floor" in sc.checks and "late_amplitude" in summary:
        r = float(sc.checks["amp_floor"])
        ratio = summary["late_amplitude"] / max(summary["early_amplitude"], 1e-300)
        checks.append(Check("control amplitude sustained", ratio >= r, f"{g6(ratio)} >= {g6(r)}"))
    return checks


# -- sweep ------------------------------------------------------------------

def parse_value(param, text):
    if param == "x0":
        return tuple(float(v) for v in text.split(",") if v.strip())
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"sweep value {text!r} is not a number") from None


def sweep_one(sc, param, value, csv_path):
    sc = sc.override(param, value)
    system, traj = run_scenario(sc)
    if csv_path:
        traj.to_csv(csv_path)
    row = {"value": value if param != "x0" else " ".join(g6(v) for v in value)}
    row.update(summarize(sc, system, traj))
    if sc.mode == "es":
        avg = simulate(system, sc.x0, sc.t_end, h=traj.meta["h"], sample_stride=sc.sample_stride,
                       averaged=True)
        row["sup_deviation"] = sup_deviation(traj, avg)
    if "descent_lambda" in sc.checks and sc.mode == "es":
        a2 = estimate_a2_constants(system.cost, float(sc.checks.get("domain_radius", 2.0)),
                                   int(sc.checks.get("grid_points", 41)))
        rep = check_descent(traj, system.eps, float(sc.checks["descent_lambda"]), a2.m1,
                            1.0 - 1.0 / a2.m1, system.cost.min_value)
        row["descent_pass"] = rep.passed
        row["descent_violations"] = len(rep.violations)
    return row


def run_sweep(sc, param, values, out_dir=None, workers=1):
    if param not in scn.SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {scn.SWEEP_PARAMS}, got {param!r}")
    for v in values:
        sc.override(param, v)  # validate before starting any run
    paths = [os.path.join(out_dir, f"{sc.name}_{param}_{i}.csv") if out_dir else None
             for i in range(len(values))]
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    if workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(sweep_one, [sc] * len(values), [param] * len(values), values, paths))
    else:
        rows = [sweep_one(sc, param, v, p) for v, p in zip(values, paths)]
    return rows


def rows_to_csv(rows, param):
    keys = [param]
    for r in rows:
        for k in r:
            if k != "value" and k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([r["value"] if k == param else _cell(r.get(k, "")) for k in keys])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# -- certify ----------------------------------------------------------------

@dataclass
class CertifyResult:
    certificate: object
    checks: list = field(default_factory=list)
    trajectory: object = None
    raw: dict = field(default_factory=dict)


def certify_scenario(sc, run=True, periods=None):
    """Estimate constants, compute the eps certificate, optionally simulate at eps_bar and check."""
    if sc.mode != "es":
        raise ConfigError("certify needs an extremum seeking scenario (mode = es)")
    system = scn.build_system(sc)
    cost = system.cost
    Delta = float(scn.cert_value(sc, "Delta", 2.0))
    delta = float(scn.cert_value(sc, "delta", 1.0))
    delta0 = float(scn.cert_value(sc, "delta0", 0.5 * (delta + min(Delta, 4 * delta))))
    radius = Delta if math.isfinite(Delta) else float(scn.cert_value(sc, "fit_radius", 2 * delta0))
    grid = int(scn.cert_value(sc, "grid_points", 41))
    a2 = estimate_a2_constants(cost, radius, grid)
    gens = [a.gen for a in system.axes]
    vanishing = all(g.vanishing_at_min for g in gens)
    a4 = None
    if vanishing:
        reps = [estimate_a4_bounds(g, cost, a2.m1, radius, grid, inflate=1.05) for g in gens]
        if all(r.passed for r in reps):
            m2s = {r.a4.m2 for r in reps}
            if len(m2s) != 1:
                raise ConfigError("all axes must share the growth exponent m2")
            a4 = reps[0].a4.__class__(m2=m2s.pop(), alpha1=min(r.a4.alpha1 for r in reps),
                                      alpha2=max(r.a4.alpha2 for r in reps),
                                      M=max(r.a4.M for r in reps), H=max(float(r.a4.H) for r in reps))
    fc_D = estimate_field_constants(system, radius, 0.0, 0.0, grid)
    fc_D0 = estimate_field_constants(system, min(delta0, radius), 0.0, 0.0, grid)
    inp = dict(constants=a2, k_list=sc.ks, Delta=Delta, delta=delta, delta0=delta0,
               L=fc_D.L, M_F=fc_D0.M_F)
    if a4 is not None:
        alpha1 = a4.alpha1
        inp["a4"] = a4
    else:
        pts = sample_points(cost.minimizer, min(delta0, radius), grid)
        z = np.array([cost.shifted(p) for p in pts])
        alpha1 = min(float(np.min(g.f0(z))) for g in gens) / 1.05
        H = max(float(lie_terms(system.channels(), p, cost.minimizer)[2].max()) for p in pts) * 1.05
        rho = float(scn.cert_value(sc, "rho", 0.1))
        inp.update(alpha=alpha1, H=H, M=fc_D.M_F, rho=rho,
                   rho0=float(scn.cert_value(sc, "rho0", 0.5 * rho)),
                   rho_min=float(scn.cert_value(sc, "rho_min", 0.25 * rho)))
    if "lambda_bar" in sc.certificate:
        lam = float(sc.certificate["lambda_bar"])
    else:
        lam = float(scn.cert_value(sc, "lambda_frac", 0.5)) * alpha1 * a2.kappa1
    cert = epsilon_certificate(CertificateInputs(lambda_bar=lam, **inp))
    cert.intermediates.update(lambda_bar=lam, L_raw=fc_D.raw["L"], M_F_raw=fc_D0.raw["M_F"],
                              gamma1=a2.gamma1, gamma2=a2.gamma2, kappa1=a2.kappa1,
                              kappa2=a2.kappa2, mu=a2.mu, m1=a2.m1)
    if a4 is not None:
        cert.intermediates.update(alpha1=a4.alpha1, alpha2=a4.alpha2, m2=a4.m2, A4_M=a4.M, A4_H=a4.H)
    result = CertifyResult(certificate=cert)
    if not run:
        return result

    eps = cert.eps_bar
    x0 = np.asarray(sc.x0, dtype=float)
    xs = cost.minimizer
    x0_dist = float(np.linalg.norm(x0 - xs))
    if x0_dist >= delta:
        raise PreconditionError(f"hypothesis violated: |x0 - x*| = {x0_dist:.6g} must be < delta = {delta:.6g}")
    periods = int(scn.cert_value(sc, "periods", 64) if periods is None else periods)
    run_sys = system.with_eps(eps)
    traj = simulate(run_sys, x0, periods * eps, h=run_sys.default_step())
    m_t = cert.intermediates["m_tilde"]
    desc = check_descent(traj, eps, lam, a2.m1, m_t, cost.min_value)
    m2 = a4.m2 if a4 is not None else 0.0
    m_env, _ = lemma_exponents(a2.m1, m2)
    fc_env = estimate_field_constants(system, radius, m_env, 0.0, grid)
    env = DecayEnvelope(m_tilde=m_t, lam=lam, rho=0.0 if a4 is not None else inp["rho"], m1=a2.m1,
                        gamma1=a2.gamma1, gamma2=a2.gamma2, x0_dist=x0_dist,
                        J0=float(cost.shifted(x0)), M=fc_env.M_tilde if a4 is not None else 0.0,
                        L=fc_D.L, delta=delta, nu=nu([a.dither for a in run_sys.axes]), eps=eps)
    envr = check_envelope(traj, env, xs)
    result.checks = [Check(r.name, r.passed, r.summary().split(": ", 1)[1]) for r in (desc, envr)]
    result.trajectory = traj
    return result


# -- compare ----------------------------------------------------------------

def compare_csv(path_a, path_b, tolerance=0.0):
    a, b = Trajectory.from_csv(path_a), Trajectory.from_csv(path_b)
    if len(a) != len(b) or a.states.shape != b.states.shape or a.controls.shape != b.controls.shape:
        return math.inf
    diffs = [np.abs(a.times - b.times), np.abs(a.states - b.states).ravel(),
             np.abs(a.cost_values - b.cost_values), np.abs(a.controls - b.controls).ravel()]
    return float(max((float(d.max()) for d in diffs if d.size), default=0.0))


# -- argument handling ------------------------------------------------------

def load_with_overrides(args):
    sc = scn.load(args.scenario)
    if getattr(args, "eps", None) is not None:
        sc = sc.override("eps", args.eps)
    if getattr(args, "t_end", None) is not None:
        sc = sc.override("t_end", args.t_end)
    if getattr(args, "h", None) is not None:
        sc = sc.override("h", args.h)
    return sc


def _emit(lines, out=None):
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text)


def cmd_verify(args):
    sc = load_with_overrides(args)
    checks = verify_scenario(sc)
    _emit([f"scenario {sc.name}"] + [c.line() for c in checks], args.out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def cmd_simulate(args):
    sc = load_with_overrides(args)
    system, traj = run_scenario(sc)
    out = args.out or f"{sc.name}.csv"
    traj.to_csv(out)
    summ = summarize(sc, system, traj)
    checks = simulation_checks(sc, summ)
    lines = [f"scenario {sc.name}: wrote {len(traj)} samples to {out}"]
    lines += [f"  {k} = {g6(v)}" for k, v in summ.items()]
    lines += [c.line() for c in checks]
    _emit(lines)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def cmd_sweep(args):
    sc = load_with_overrides(args)
    values = [parse_value(args.param, v) for v in args.values]
    rows = run_sweep(sc, args.param, values, args.out, args.workers)
    table = rows_to_csv(rows, args.param)
    if args.out:
        with open(os.path.join(args.out, f"{sc.name}_{args.param}_summary.csv"), "w") as fh:
            fh.write(table)
    sys.stdout.write(table)
    failed = any(r.get("descent_pass") is False for r in rows)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_certify(args):
    sc = load_with_overrides(args)
    res = certify_scenario(sc, run=not args.no_sim, periods=args.periods)
    lines = [f"scenario {sc.name}", res.certificate.to_text().rstrip()]
    lines += [c.line() for c in res.checks]
    _emit(lines)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(res.certificate.to_kv())
            for c in res.checks:
                fh.write(f"check.{c.name}={'pass' if c.passed else 'fail'}\n")
    return EXIT_OK if all(c.passed for c in res.checks) else EXIT_FAIL


def cmd_compare(args):
    diff = compare_csv(args.a, args.b)
    ok = diff <= args.tolerance
    _emit([f"max abs difference {g6(diff)} (tolerance {g6(args.tolerance)}): {'match' if ok else 'differ'}"])
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="esgen", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--scenario", required=True, help="bundled scenario name or path to an INI file")
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--eps", type=float, help="override the dither period")
        sp.add_argument("--t-end", dest="t_end", type=float, help="override the final time")
        sp.add_argument("--h", type=float, help="override the RK4 step")

    sp = sub.add_parser("verify", help="structural checks of a scenario")
    common(sp, "also write the report here")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="integrate a scenario and write the trajectory CSV")
    common(sp, "trajectory CSV path (default <name>.csv)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    common(sp, "directory for per-value CSVs and the summary table")
    sp.add_argument("--param", required=True, choices=scn.SWEEP_PARAMS)
    sp.add_argument("--values", nargs="*", default=[],
                    help="values; for x0 give comma-separated coordinates per value")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("certify", help="compute the eps certificate and check it by simulation")
    common(sp, "write the certificate as name=value lines")
    sp.add_argument("--no-sim", action="store_true", help="skip the follow-up simulation")
    sp.add_argument("--periods", type=int, help="number of eps periods to simulate (default 64)")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("compare", help="compare two trajectory CSVs")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--tolerance", type=float, default=0.0)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EsgenError as exc:
        print(f"esgen: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"esgen: error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
