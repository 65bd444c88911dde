"""Command-line entry point: simulate, geodesic, beam, transform, sweep, check."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalBreakdown, ResolutionError, WorkbenchError
from .io import write_csv, write_field, write_json, write_trace_csv
from .media import Nonlinearity, SoundSpeed

EXIT_OK, EXIT_CONFIG, EXIT_BREAKDOWN, EXIT_RESOLUTION = 0, 2, 3, 4


def _vec(text: str) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"expected x,y,z, got {text!r}") from exc
    if v.shape != (3,):
        raise ConfigError(f"expected three components, got {text!r}")
    return v


def _medium(alpha: float) -> SoundSpeed:
    return SoundSpeed.constant(1.0) if alpha == 1.0 else SoundSpeed.herglotz(alpha)


def _tau_sweep(text: str) -> list[float]:
    try:
        lo, hi, factor = (float(s) for s in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--tau-sweep expects lo:hi:factor, got {text!r}") from exc
    if lo < 1 or hi < lo or factor <= 1:
        raise ConfigError("--tau-sweep needs 1 <= lo <= hi and factor > 1")
    out = [lo]
    while out[-1] * factor <= hi * (1 + 1e-12):
        out.append(out[-1] * factor)
    return out


def cmd_simulate(args) -> int:
    from .config import load_config
    from .solvers import dn_trace, solve_linear, solve_westervelt

    cfg = load_config(args.config)
    out = Path(args.out or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    c, beta, f = cfg.sound_speed(), cfg.nonlinearity(), cfg.profile()
    rep = solve_linear(c, f, grid) if beta.is_zero else solve_westervelt(c, beta, f, grid)
    write_field(out / "u.bin", rep.solution)
    tr = dn_trace(rep)
    write_trace_csv(out / "dn_trace.csv", tr)
    from .fields import l2_sigma

    summary = rep.summary()
    summary["dn_l2_sigma"] = l2_sigma(tr)
    summary["c"] = c.describe()
    summary["beta"] = beta.describe()
    summary["profile_C"] = cfg["profile.C"]
    write_json(out / "report.json", summary)
    print(f"min factor {rep.min_factor:.6g}, ||D_nu u||_L2(Sigma) = {summary['dn_l2_sigma']:.6g}")
    return EXIT_OK


def cmd_geodesic(args) -> int:
    from .geodesics import scattering_relation, shoot_geodesic

    c = _medium(args.alpha)
    geo = shoot_geodesic(c, _vec(args.entry), _vec(args.dir), args.step, args.t_minus)
    sd = scattering_relation(c, _vec(args.entry), _vec(args.dir), args.step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(t, *x, *v) for t, x, v in zip(geo.t, geo.x.tolist(), geo.v.tolist())]
    write_csv(out / "geodesic.csv", ("t", "x", "y", "z", "vx", "vy", "vz"), rows)
    write_json(out / "scattering.json", {
        "entry": sd.entry, "entry_covector": sd.entry_covector,
        "exit": sd.exit, "exit_covector": sd.exit_covector, "length": sd.length,
        "medium": c.describe(), "step": args.step,
    })
    print(f"exit {np.array2string(sd.exit, precision=9)} length {sd.length:.12g}")
    return EXIT_OK


def cmd_beam(args) -> int:
    from .beams import TubeQuadrature, beam_c0, beam_l2, beam_to_field, chart_for, make_beam, residual_norm
    from .fields import Grid3D

    c = _medium(args.alpha)
    chart = chart_for(c, _vec(args.entry), _vec(args.dir), args.t_minus, args.rho)
    beam = make_beam(chart, args.tau, min(args.rho, chart.rho_max))
    q = TubeQuadrature.build(beam, args.T)
    res = residual_norm(beam, args.T, h=args.h, quad=q)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid3D.from_T(args.n, args.dt, args.T)
    write_field(out / "beam.bin", beam_to_field(beam, grid))
    write_csv(out / "residual.csv", ("tau", "rho", "residual_l2", "beam_l2", "beam_c0"),
              [(float(args.tau), beam.rho, res, beam_l2(beam, args.T, q), beam_c0(beam, args.T, q))])
    print(f"tau {args.tau:g} rho {beam.rho:g} ||Pv|| {res:.6g}")
    return EXIT_OK


def cmd_transform(args) -> int:
    from .beams import chart_for, make_beam
    from .transforms import beam_pairing, jacobi_transform

    c = _medium(args.alpha)
    beta = Nonlinearity.constant(args.beta)
    taus = _tau_sweep(args.tau_sweep)
    rows = []
    J = None
    for tau in taus:
        rho = 1.0 / tau if args.rho == "inv" else float(args.rho)
        chart = chart_for(c, _vec(args.entry), _vec(args.dir), args.t_minus, rho)
        if J is None:
            J = jacobi_transform(c, beta, chart.geodesic, chart.jacobi).value
        v = make_beam(chart, tau, min(rho, chart.rho_max))
        val = beam_pairing(beta, v, v.partner(), args.T, h=args.h)
        rows.append((tau, v.rho, J.real, J.imag, val.real, val.imag, abs(val - J)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "transform.csv",
              ("tau", "rho", "J_re", "J_im", "pairing_re", "pairing_im", "abs_gap"), rows)
    for r in rows:
        print(f"tau {r[0]:g} |pairing - J| {r[6]:.6g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .config import load_config
    from . import experiments as ex

    cfg = load_config(args.config)
    grid = cfg.grid()
    study = cfg["study"]
    workers = args.workers or cfg["sweep.workers"]
    deltas = ex.ladder(cfg["sweep.delta_min"], cfg["sweep.delta_max"], cfg["sweep.count"])
    fit_range = (cfg["sweep.delta_min"], cfg["sweep.delta_max"])
    C = cfg["profile.C"]
    out = Path(args.out or cfg["output.dir"])
    if study == "beta_sweep":
        res = ex.beta_sweep(grid, cfg["sweep.anchor"], deltas, C, cfg.sound_speed(), workers, fit_range)
    elif study == "c_const_sweep":
        res = ex.c_sweep(grid, cfg["sweep.anchor"], deltas, C, workers, fit_range)
    elif study == "herglotz_sweep":
        if cfg["sweep.beta"] == 0.0 and cfg["c.kind"] != "herglotz":
            res = ex.herglotz_alpha_sweep(grid, cfg["sweep.anchor"], deltas, 0.0, C, workers, fit_range)
        elif cfg["c.kind"] == "herglotz":
            res = ex.herglotz_beta_sweep(grid, cfg["c.alpha"], cfg["sweep.anchor"], deltas, C, workers, fit_range)
        else:
            res = ex.herglotz_alpha_sweep(grid, cfg["sweep.anchor"], deltas, cfg["sweep.beta"], C, workers, fit_range)
    elif study == "linearization_scaling":
        from .fits import loglog_fit
        from .solvers import expansion_remainders

        rows = expansion_remainders(cfg.sound_speed(), cfg.nonlinearity(), cfg.profile().scaled(1.0 / C),
                                    cfg["sweep.eps"], grid)
        res = ex.SweepResult(study, ("eps", "Q_l2", "R_l2"), rows)
        e = [r[0] for r in rows]
        res.fit = loglog_fit(e, [r[1] for r in rows])
        res.extra["fit_R"] = loglog_fit(e, [r[2] for r in rows]).as_dict()
    elif study == "residual_scaling":
        from .beams import chart_for, make_beam, residual_scaling

        rho = cfg["beam.rho"]
        chart = chart_for(cfg.sound_speed(), cfg["geodesic.entry"], cfg["geodesic.dir"],
                          cfg["geodesic.t_minus"], rho, cfg["geodesic.step"])
        beams = [make_beam(chart, t, min(rho, chart.rho_max)) for t in cfg["sweep.taus"]]
        norms, fit = residual_scaling(beams, cfg["beam.T"])
        res = ex.SweepResult(study, ("tau", "residual_l2"), list(zip(cfg["sweep.taus"], norms)), fit=fit)
    else:
        raise ConfigError(f"unknown study {study!r}")
    res.write(out)
    if res.fit is not None:
        print(f"{study}: slope {res.fit.slope:.4f} R^2 {res.fit.r2:.4f} ({len(res.breakdown)} breakdown points)")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    ok = True
    for name, passed in run_checks():
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= passed
    return EXIT_OK if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="westervelt-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="solve the Westervelt problem from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    def geo_args(q):
        q.add_argument("--alpha", type=float, default=1.0, help="Herglotz alpha (1 = flat)")
        q.add_argument("--entry", default="-1,0,0")
        q.add_argument("--dir", default="1,0,0")
        q.add_argument("--t-minus", type=float, default=1.0)
        q.add_argument("--out", default="out")

    g = sub.add_parser("geodesic", help="shoot a geodesic and report the scattering relation")
    geo_args(g)
    g.add_argument("--step", type=float, default=1e-3)
    g.set_defaults(func=cmd_geodesic)

    b = sub.add_parser("beam", help="build a Gaussian beam, sample it and measure its residual")
    geo_args(b)
    b.add_argument("--tau", type=float, default=50.0)
    b.add_argument("--rho", type=float, default=0.25)
    b.add_argument("--T", type=float, default=4.0)
    b.add_argument("--n", type=int, default=17)
    b.add_argument("--dt", type=float, default=0.05)
    b.add_argument("--h", type=float, default=None, help="finite-difference step for P (default 1/(10 tau))")
    b.set_defaults(func=cmd_beam)

    t = sub.add_parser("transform", help="ray transform against the beam pairing")
    geo_args(t)
    t.add_argument("--beta", type=float, default=1.0)
    t.add_argument("--tau-sweep", default="40:320:2")
    t.add_argument("--rho", default="inv", help="cutoff radius or 'inv' for 1/tau")
    t.add_argument("--T", type=float, default=4.0)
    t.add_argument("--h", type=float, default=None, help="time-derivative step (default 1/(20 tau))")
    t.set_defaults(func=cmd_transform)

    w = sub.add_parser("sweep", help="run a stability study from a config file")
    w.add_argument("--config", required=True)
    w.add_argument("--out")
    w.add_argument("--workers", type=int, default=0)
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check", help="run the fast invariant checks")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResolutionError as exc:
        print(f"resolution guard: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except NumericalBreakdown as exc:
        print(f"numerical breakdown: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
