"""Command-line front end: simulations, table reproduction, verification suites.

Commands emit plain CSV/JSON data files for external plotting plus a run
manifest listing every output with a reproducible hash of the resolved
configuration.  Verification report JSON carries no timestamps, so identical
flags and seeds reproduce it byte for byte.

Exit codes: 0 success, 1 bound violation in `verify`, 2 invalid flags or
parameters, 3 integration failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis, damping, oscint, resonance, spectral
from .damping import DampingDomainError, PinchedRandomSpec
from .modeode import (
    IntegrationError,
    IntegratorConfig,
    OutputGrid,
    integrate_mode,
    integrate_polar,
    polar_state_from_cartesian,
    trajectory_to_csv,
)

PAIR_CYCLE = ((0.5, 1.5), (1.0, 3.0), (2.0, 4.0))


def thread_count() -> int:
    """Sweep parallelism, capped by the DWL_THREADS environment variable."""
    env = os.environ.get("DWL_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    """Map preserving order; results are aggregated deterministically."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(out_dir: Path, command: str, payload: dict, outputs: list[Path],
                   started: str) -> Path:
    manifest = {
        "command": command,
        "config_hash": _config_hash(payload),
        "tool_version": __version__,
        "outputs": sorted(str(p) for p in outputs),
        "timestamps": {
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
        },
    }
    path = out_dir / "manifest.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _coefficient_from_args(args) -> damping.DampingCoefficient:
    src = args.coefficient
    if src.startswith("preset:"):
        name = src.split(":", 1)[1]
        t0 = args.t0
        if name == "mt":
            return damping.make_table1_coefficient("mt", t0, m=args.m)
        if name == "tp":
            return damping.make_table1_coefficient("tp", t0, p=args.p)
        if name in ("log", "linear", "integrable", "inverse"):
            return damping.make_table1_coefficient(name, t0)
        if name == "const":
            return damping.make_constant(args.b0, t0)
        if name == "fastosc":
            return damping.make_fast_oscillation(args.a, args.r, args.alpha, t0)
        if name == "pinched":
            spec = PinchedRandomSpec(m=args.m, M=args.M, seed=args.seed)
            return damping.make_pinched_random(spec, t0)
        if name == "resonant":
            rd = resonance.build_resonant(args.a, args.r, args.lambda_star, t0,
                                          t_end=max(args.t_end * 2.0, 2e4 * t0))
            return rd.coefficient
        raise DampingDomainError(f"unknown preset {name!r}")
    with open(src) as fh:
        return damping.from_json(json.load(fh))


def cmd_simulate(args) -> int:
    started = _now()
    coef = _coefficient_from_args(args)
    cfg = IntegratorConfig(rel_tol=args.tol, abs_tol=args.tol * 1e-2)
    if args.polar:
        rho0, theta0 = polar_state_from_cartesian(args.u0, args.v0, getattr(args, "lambda"))
        traj = integrate_polar(coef, getattr(args, "lambda"), rho0, theta0,
                               args.t0, args.t_end, cfg)
    else:
        traj = integrate_mode(coef, getattr(args, "lambda"), args.u0, args.v0,
                              args.t0, args.t_end, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    trajectory_to_csv(traj, out)
    payload = {
        "coefficient": args.coefficient, "lambda": getattr(args, "lambda"),
        "u0": args.u0, "v0": args.v0, "t0": args.t0, "t_end": args.t_end,
        "polar": args.polar, "tol": args.tol,
    }
    write_manifest(out.parent, "simulate", payload, [out], started)
    print(f"wrote {out}")
    return 0


def cmd_table1(args) -> int:
    started = _now()
    tokens = analysis.ALL_ROW_TOKENS if args.rows == "all" else tuple(
        t.strip() for t in args.rows.split(",") if t.strip()
    )
    model = spectral.SpectralModel.load(args.model) if args.model else None
    results, curves = analysis.reproduce_table1(tokens, model=model, return_curves=True)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    txt = out_dir / "table.txt"
    lines = [f"{'row':<12}{'predicted':<12}{'check':<8}{'measured':>12}  pass"]
    for r in results:
        lines.append(
            f"{r.token:<12}{r.predicted:<12}{r.check:<8}{r.measured:>12.4f}  "
            f"{'yes' if r.passed else 'NO'}"
        )
    txt.write_text("\n".join(lines) + "\n")
    outputs.append(txt)

    csvp = out_dir / "table.csv"
    with open(csvp, "w", newline="") as fh:
        fh.write("row,predicted,check,measured,expected,tolerance,pass\n")
        for r in results:
            fh.write(
                f"{r.token},{r.predicted},{r.check},{r.measured:.17g},"
                f"{'' if r.expected is None else format(r.expected, '.17g')},"
                f"{'' if r.tolerance is None else format(r.tolerance, '.17g')},"
                f"{int(r.passed)}\n"
            )
    outputs.append(csvp)

    for token, (t_grid, norm) in curves.items():
        p = out_dir / f"curve_{token.replace(':', '_')}.csv"
        spectral.energy_norm_to_csv(t_grid, norm, p)
        outputs.append(p)

    write_manifest(out_dir, "table1", {"rows": list(tokens), "model": args.model},
                   outputs, started)
    print("\n".join(lines))
    return 0


def cmd_resonance(args) -> int:
    started = _now()
    t0 = args.t0
    rd = resonance.build_resonant(args.a, args.r, args.lambda_star, t0, args.t_end)
    theta_eta = resonance.verify_theta_equals_eta(rd)
    dyads = min(args.dyads, int(math.floor(math.log2(args.t_end / t0))))
    lim = resonance.verify_limit_B(rd, dyads=dyads)
    decay = resonance.measure_resonant_decay(rd)

    cfg = IntegratorConfig()
    contrast_coef = damping.make_table1_coefficient("mt", t0, m=args.a)
    grid = OutputGrid.log_spaced(points_per_decade=32)
    t_end_fit = min(args.t_end, 1e4 * t0)
    contrast = integrate_polar(contrast_coef, args.lambda_star, 1.0, -0.5 * math.pi,
                               t0, t_end_fit, cfg.with_grid(grid))
    contrast_fit = analysis.fit_decay_exponent(contrast.t, contrast.energy)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    eta_csv = out_dir / "eta_table.csv"
    rd.export_table(eta_csv)
    outputs.append(eta_csv)

    res_traj = integrate_polar(rd.coefficient, args.lambda_star, 1.0, -0.5 * math.pi,
                               t0, t_end_fit, cfg.with_grid(grid))
    res_csv = out_dir / "energy_resonant.csv"
    trajectory_to_csv(res_traj, res_csv)
    outputs.append(res_csv)
    con_csv = out_dir / "energy_contrast.csv"
    trajectory_to_csv(contrast, con_csv)
    outputs.append(con_csv)

    summary = {
        "a": args.a,
        "r": args.r,
        "lambda_star": args.lambda_star,
        "expected_exponent": rd.a - 0.5 * rd.r,
        "fitted_exponent_resonant": decay.fit.exponent,
        "fitted_exponent_contrast": contrast_fit.exponent,
        "gamma3_estimate": decay.gamma3_estimate,
        "theta_eta_max_dev": theta_eta.max_abs_dev,
        "limit_estimate": lim.limit_estimate,
        "limit_last_diff": lim.last_diff,
    }
    sj = out_dir / "summary.json"
    sj.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    outputs.append(sj)
    write_manifest(out_dir, "resonance",
                   {k: summary[k] for k in ("a", "r", "lambda_star")} | {"t_end": args.t_end},
                   outputs, started)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# verification suites


def _case(name, bound_name, max_ratio, worst_t, passed) -> dict:
    return {
        "name": name,
        "bound_name": bound_name,
        "max_ratio": float(max_ratio),
        "worst_t": float(worst_t),
        "pass": bool(passed),
    }


def _from_bound_report(name, rep) -> dict:
    return _case(name, rep.bound_name, rep.max_ratio, rep.worst_t, rep.passed)


def _tolerance_case(name, bound_name, measured, expected, tol) -> dict:
    ratio = abs(measured - expected) / tol
    return _case(name, bound_name, ratio, 0.0, ratio <= 1.0)


def suite_gamma(seeds: int) -> list[dict]:
    rep = oscint.check_gamma_inequality(
        np.linspace(0.04, 4.0, 50), np.geomspace(0.1, 10.0, 20), np.geomspace(1.0, 1e6, 50)
    )
    return [_from_bound_report("gamma_inequality_grid", rep)]


def suite_lemmas(seeds: int) -> list[dict]:
    cases = []
    spec1 = oscint.PhaseAmplitudeSpec(
        phi=lambda s: 2.0 * s, dphi=lambda s: 2.0 * np.ones_like(s),
        d2phi=lambda s: np.zeros_like(s),
        psi=np.log, dpsi=lambda s: 1.0 / s, phi0=2.0, Psi0=1.0, window=(1.0, 1e4),
    )
    cases.append(_from_bound_report(
        "phase_modulation[phi=2s,psi=log]",
        oscint.check_lemma_int_phi_psi(spec1, t_grid=np.geomspace(1, 1e4, 64)),
    ))
    spec2 = oscint.PhaseAmplitudeSpec(
        phi=lambda s: s**2 + 2.0 * s, dphi=lambda s: 2.0 * s + 2.0,
        d2phi=lambda s: 2.0 * np.ones_like(s),
        psi=lambda s: 0.5 * np.log(s), dpsi=lambda s: 0.5 / s,
        phi0=4.0, Psi0=0.5, window=(1.0, 1e3),
    )
    cases.append(_from_bound_report(
        "phase_modulation[phi=s^2+2s,psi=log/2]",
        oscint.check_lemma_int_phi_psi(spec2, t_grid=np.geomspace(1, 1e3, 64)),
    ))
    zero = lambda s: np.zeros_like(np.asarray(s, dtype=np.float64))
    for n in (2, 4):
        cases.append(_from_bound_report(
            f"oscillation_integral[h=0,n={n}]",
            oscint.check_lemma_osc_int(zero, zero, 0.0, 1.0, n, 1.0,
                                       np.geomspace(1, 1e4, 64), dyads=10),
        ))
    logh = lambda s: np.log(np.asarray(s, dtype=np.float64))
    dlogh = lambda s: 1.0 / np.asarray(s, dtype=np.float64)
    cases.append(_from_bound_report(
        "oscillation_integral[h=log,n=2]",
        oscint.check_lemma_osc_int(logh, dlogh, 1.0, 1.0, 2, 1.0,
                                   np.geomspace(1, 1e4, 64)),
    ))
    cases.append(_from_bound_report(
        "oscillation_integral[h=0,n=2,lam=100]",
        oscint.check_lemma_osc_int(zero, zero, 0.0, 100.0, 2, 1.0,
                                   np.geomspace(1, 1e3, 32)),
    ))
    cases.append(_from_bound_report(
        "mixed_phase[h=0,lam=1,alpha=2]",
        oscint.check_lemma_s_alpha(zero, zero, 0.0, 1.0, 2.0, 1.0,
                                   np.geomspace(1, 1e3, 64)),
    ))
    halflog = lambda s: 0.5 * np.log(np.asarray(s, dtype=np.float64))
    dhalflog = lambda s: 0.5 / np.asarray(s, dtype=np.float64)
    cases.append(_from_bound_report(
        "mixed_phase[h=log/2,lam=2,alpha=3]",
        oscint.check_lemma_s_alpha(halflog, dhalflog, 0.5, 2.0, 3.0, 1.0,
                                   np.geomspace(1, 300, 48)),
    ))
    return cases


def suite_general(seeds: int) -> list[dict]:
    t_grid = np.geomspace(1.0, 1e4, 64)
    model = spectral.SpectralModel.log_spaced(n=16, lo=1e-2, hi=10.0)

    def one(seed: int) -> list[dict]:
        m, M = PAIR_CYCLE[seed % len(PAIR_CYCLE)]
        coef = damping.make_pinched_random(PinchedRandomSpec(m=m, M=M, seed=seed), 1.0)
        rng = np.random.default_rng(1000 + seed)
        u0 = rng.normal(size=16)
        v0 = rng.normal(size=16)
        data = spectral.InitialData(u0, v0)
        scale = math.sqrt(data.constraint_norm_sq(model))
        data = spectral.InitialData(u0 / scale, v0 / scale)
        out = [_from_bound_report(
            f"pde_general[seed={seed},m={m:g},M={M:g}]",
            analysis.verify_pde_general(coef, model, data, t_grid),
        )]
        lam = (0.0, 0.01, 1.0, 10.0)[seed % 4]
        out.append(_from_bound_report(
            f"mode_general[seed={seed},lam={lam:g}]",
            analysis.verify_prop_main_1(coef, lam, 0.3, 1.0, t_grid),
        ))
        if lam > 0:
            out.append(_from_bound_report(
                f"mode_hyperbolic[seed={seed},lam={lam:g}]",
                analysis.verify_hyperbolic(coef, lam, 0.3, 1.0, t_grid),
            ))
        return out

    return [c for chunk in parallel_map(one, range(seeds)) for c in chunk]


def suite_fast(seeds: int) -> list[dict]:
    t_grid = np.geomspace(1.0, 1e3, 64)
    cases = []
    for (a, r, alpha) in ((1.0, 1.0, 2.0), (2.0, 1.0, 1.5)):
        for lam in (0.01, 1.0):
            cases.append(_from_bound_report(
                f"mode_fast[a={a:g},r={r:g},alpha={alpha:g},lam={lam:g}]",
                analysis.verify_prop_main_2(a, r, alpha, lam, 0.0, 1.0, 1.0, t_grid),
            ))
        cases.append(_from_bound_report(
            f"mode_fast_rate[a={a:g},r={r:g},alpha={alpha:g},lam=1]",
            analysis.verify_hyp_alpha(a, r, alpha, 1.0, 0.0, 1.0, 1.0, t_grid),
        ))
        coef = damping.make_fast_oscillation(a, r, alpha, 1.0)
        grid = OutputGrid.log_spaced(points_per_decade=32)
        traj = integrate_polar(coef, 1.0, 1.0, -0.5 * math.pi, 1.0, 1e3,
                               IntegratorConfig().with_grid(grid))
        fit = analysis.fit_decay_exponent(traj.t, traj.energy)
        cases.append(_tolerance_case(
            f"fast_exponent[a={a:g},r={r:g},alpha={alpha:g}]",
            "fitted_exponent", fit.exponent, a, 0.05,
        ))
    return cases


def suite_parabolic(seeds: int) -> list[dict]:
    t_grid = np.geomspace(1.0, 1e3, 64)
    cases = []
    plain = damping.make_table1_coefficient("mt", 1.0, m=1.0)
    for lam in (0.01, 1.0):
        cases.append(_from_bound_report(
            f"parabolic_split[b=1/t,lam={lam:g}]",
            analysis.verify_parabolic_split(plain, 1.0, 0.0, lam, 0.0, 1.0, t_grid),
        ))
    a, r, alpha = 1.0, 1.0, 2.0
    osc = damping.make_fast_oscillation(a, r, alpha, 1.0)
    B = 3.0 * r / (alpha * 1.0**alpha)
    for lam in (0.01, 1.0):
        cases.append(_from_bound_report(
            f"parabolic_split[b=(1+sin(t^2))/t,lam={lam:g}]",
            analysis.verify_parabolic_split(osc, a, B, lam, 0.0, 1.0, t_grid),
        ))
    cases.append(_from_bound_report(
        "parabolic_split[b=1/t,lam=1,u-data]",
        analysis.verify_parabolic_split(plain, 1.0, 0.0, 1.0, 1.0, 0.0, t_grid),
    ))
    return cases


def suite_coercive(seeds: int) -> list[dict]:
    from .modeode import batched_mode_energies

    lams = np.geomspace(1.0, 10.0, 8)
    coef = damping.make_table1_coefficient("mt", 1.0, m=3.0)
    t_grid = np.geomspace(1.0, 1e4, 129)
    cfg = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-12)
    energies = batched_mode_energies(coef, lams, np.zeros(8), np.ones(8), t_grid, 1.0, cfg)
    worst = math.inf
    worst_lam = lams[0]
    for j, lam in enumerate(lams):
        fit = analysis.fit_decay_exponent(t_grid, energies[:, j])
        if fit.exponent < worst:
            worst = fit.exponent
            worst_lam = lam
    return [_case("coercive_modes[b=3/t]", "min_mode_exponent", 2.95 / worst,
                  worst_lam, worst >= 2.95)]


def suite_resonance(seeds: int) -> list[dict]:
    a, r, lam_star = 1.0, 0.5, 1.0
    rd = resonance.build_resonant(a, r, lam_star, 1.0, t_end=2.0**14)
    cases = []
    te = resonance.verify_theta_equals_eta(rd)
    cases.append(_case("resonance_theta_eta", "phase_identity",
                       te.max_abs_dev / te.tolerance, te.worst_t, te.passed))
    lim = resonance.verify_limit_B(rd, dyads=14)
    cases.append(_case("resonance_limit", "dyadic_cauchy",
                       lim.last_diff / 1e-3, float(rd.t0 * 2.0**14),
                       lim.passed and lim.last_diff < 1e-3))
    t = np.geomspace(rd.t0, rd.t_end, 100_000)
    tb = t * rd.b(t)
    pinch_ratio = max(tb.max() / (a + r), (a - r) / tb.min())
    cases.append(_case("resonance_pinching", "envelope",
                       pinch_ratio, float(t[np.argmax(t * rd.b(t))]),
                       pinch_ratio <= 1.0 + 1e-9))
    decay = resonance.measure_resonant_decay(rd)
    cases.append(_tolerance_case("resonance_exponent", "fitted_exponent",
                                 decay.fit.exponent, a - 0.5 * r, 0.05))
    contrast_coef = damping.make_table1_coefficient("mt", 1.0, m=a)
    grid = OutputGrid.log_spaced(points_per_decade=32)
    traj = integrate_polar(contrast_coef, lam_star, 1.0, -0.5 * math.pi, 1.0, 1e4,
                           IntegratorConfig().with_grid(grid))
    fit = analysis.fit_decay_exponent(traj.t, traj.energy)
    cases.append(_tolerance_case("resonance_contrast_exponent", "fitted_exponent",
                                 fit.exponent, a, 0.05))
    return cases


SUITES = {
    "gamma": suite_gamma,
    "lemmas": suite_lemmas,
    "general": suite_general,
    "fast": suite_fast,
    "parabolic": suite_parabolic,
    "coercive": suite_coercive,
    "resonance": suite_resonance,
}


def cmd_verify(args) -> int:
    started = _now()
    if args.suite != "all" and args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from "
              f"{', '.join(sorted(SUITES))} or 'all'", file=sys.stderr)
        return 2
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    report = {"suites": {}, "seeds": args.seeds, "tool_version": __version__}
    all_pass = True
    for name in names:
        cases = SUITES[name](args.seeds)
        ok = all(c["pass"] for c in cases)
        all_pass = all_pass and ok
        report["suites"][name] = {"cases": cases, "pass": ok}
    report["pass"] = all_pass

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_manifest(out.parent, "verify", {"suite": args.suite, "seeds": args.seeds},
                   [out], started)

    for name in names:
        for c in report["suites"][name]["cases"]:
            tag = "pass" if c["pass"] else "FAIL"
            print(f"[{tag}] {name}: {c['name']} (max_ratio={c['max_ratio']:.3g})")
    if not all_pass:
        print("verification FAILED", file=sys.stderr)
        return 1
    print("all verification suites passed")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dwlab",
                                description="Damped-wave decay laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate one mode and export the trajectory")
    sim.add_argument("--coefficient", required=True,
                     help="JSON file or preset:{mt,tp,log,linear,integrable,inverse,"
                          "const,fastosc,pinched,resonant}")
    sim.add_argument("--lambda", type=float, required=True, dest="lambda")
    sim.add_argument("--u0", type=float, default=0.0)
    sim.add_argument("--v0", type=float, default=1.0)
    sim.add_argument("--t0", type=float, default=1.0)
    sim.add_argument("--t-end", type=float, default=1e4, dest="t_end")
    sim.add_argument("--polar", action="store_true")
    sim.add_argument("--out", default="trajectory.csv")
    sim.add_argument("--tol", type=float, default=1e-10)
    sim.add_argument("--m", type=float, default=1.0)
    sim.add_argument("--M", type=float, default=1.0)
    sim.add_argument("--p", type=float, default=0.5)
    sim.add_argument("--a", type=float, default=1.0)
    sim.add_argument("--r", type=float, default=0.5)
    sim.add_argument("--alpha", type=float, default=2.0)
    sim.add_argument("--b0", type=float, default=1.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--lambda-star", type=float, default=1.0, dest="lambda_star")
    sim.set_defaults(func=cmd_simulate)

    tab = sub.add_parser("table1", help="reproduce the decay-rate table")
    tab.add_argument("--rows", default="all",
                     help="comma list like mt:1,mt:3,tp:0.5 or 'all'")
    tab.add_argument("--model", default=None, help="spectral model JSON file")
    tab.add_argument("--out-dir", default="table1_out", dest="out_dir")
    tab.set_defaults(func=cmd_table1)

    res = sub.add_parser("resonance", help="build and probe a resonant coefficient")
    res.add_argument("--a", type=float, required=True)
    res.add_argument("--r", type=float, required=True)
    res.add_argument("--lambda-star", type=float, required=True, dest="lambda_star")
    res.add_argument("--t0", type=float, default=1.0)
    res.add_argument("--t-end", type=float, default=2.0**14, dest="t_end")
    res.add_argument("--dyads", type=int, default=14)
    res.add_argument("--out-dir", default="resonance_out", dest="out_dir")
    res.set_defaults(func=cmd_resonance)

    ver = sub.add_parser("verify", help="run verification suites")
    ver.add_argument("--suite", default="all")
    ver.add_argument("--seeds", type=int, default=8)
    ver.add_argument("--out", default="verify_report.json")
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return 3
    except (DampingDomainError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
