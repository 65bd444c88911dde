"""Stability sweeps: DN-trace differences against parameter differences."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalBreakdown, WorkbenchError
from .fields import BoundaryTrace, Grid3D, l2_sigma
from .fits import SlopeFit, loglog_fit
from .io import write_csv, write_json
from .media import Nonlinearity, SoundSpeed
from .solvers import DirichletProfile, dn_trace, exp_inv_sq_profile, solve_linear, solve_westervelt

STUDIES = ("beta_sweep", "c_const_sweep", "herglotz_sweep", "residual_scaling", "linearization_scaling")


@dataclass(frozen=True)
class Medium:
    c: SoundSpeed
    beta: Nonlinearity

    def label(self) -> str:
        cd = self.c.describe()
        cs = f"c={cd.get('value', '')}" if self.c.kind == "constant" else f"alpha={cd.get('alpha', '')}"
        return f"{cs};beta={self.beta.value}"


def simulate_trace(medium: Medium, f: DirichletProfile, grid: Grid3D) -> BoundaryTrace:
    """DN trace of the Westervelt solution; beta = 0 uses the linear solver."""
    if medium.beta.is_zero:
        return dn_trace(solve_linear(medium.c, f, grid))
    return dn_trace(solve_westervelt(medium.c, medium.beta, f, grid))


def dn_difference(m1: Medium, m2: Medium, f: DirichletProfile, grid: Grid3D) -> float:
    """||D_nu(u1 - u2)||_{L2(Sigma)} for two media and the same boundary data."""
    if m1 == m2:
        return 0.0
    return l2_sigma(simulate_trace(m1, f, grid) - simulate_trace(m2, f, grid))


@dataclass
class SweepResult:
    study: str
    columns: tuple
    rows: list = field(default_factory=list)
    breakdown: list = field(default_factory=list)
    fit: SlopeFit | None = None
    extra: dict = field(default_factory=dict)

    def write(self, outdir) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "sweep.csv", self.columns, self.rows)
        write_csv(out / "breakdown.csv", ("param1", "param2", "delta", "error", "message"), self.breakdown)
        summary = {"study": self.study, "points": len(self.rows), "breakdown_points": len(self.breakdown)}
        if self.fit is not None:
            summary["fit"] = self.fit.as_dict()
        summary.update(self.extra)
        write_json(out / "fit.json", summary)


def _trace_job(args):
    medium, f, grid = args
    try:
        return "ok", simulate_trace(medium, f, grid).values
    except NumericalBreakdown as exc:
        return "error", (type(exc).__name__, str(exc))


def _run_jobs(jobs, workers: int):
    if workers <= 1:
        return [_trace_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trace_job, jobs))


def ladder(lo: float, hi: float, count: int) -> np.ndarray:
    """Log-spaced parameter differences."""
    return np.geomspace(lo, hi, count)


def parameter_sweep(
    study: str, anchor_medium: Medium, make_medium, anchor: float, deltas,
    f: DirichletProfile, grid: Grid3D, workers: int = 1, fit_range=None,
) -> SweepResult:
    """Generic ladder: parameter2 = anchor + delta for each delta.

    ``make_medium(p)`` builds the medium for parameter value p.  Breakdown
    points are listed separately and left out of the fit.
    """
    deltas = [float(d) for d in deltas]
    jobs = [(anchor_medium, f, grid)] + [(make_medium(anchor + d), f, grid) for d in deltas]
    results = _run_jobs(jobs, workers)
    res = SweepResult(study, ("param1", "param2", "delta", "dn_difference"))
    status, ref = results[0]
    if status != "ok":
        for d in deltas:
            res.breakdown.append((anchor, anchor + d, d, ref[0], "anchor run failed: " + ref[1]))
        return res
    ref_trace = BoundaryTrace(grid, ref)
    for d, (status, payload) in zip(deltas, results[1:]):
        if status == "ok":
            diff = l2_sigma(BoundaryTrace(grid, payload) - ref_trace)
            res.rows.append((anchor, anchor + d, d, diff))
        else:
            res.breakdown.append((anchor, anchor + d, d, payload[0], payload[1]))
    pts = [(r[2], r[3]) for r in res.rows
           if r[3] > 0 and (fit_range is None or fit_range[0] * (1 - 1e-9) <= r[2] <= fit_range[1] * (1 + 1e-9))]
    if len(pts) >= 4:
        x, y = zip(*pts)
        res.fit = loglog_fit(x, y)
    return res


def beta_sweep(
    grid: Grid3D, anchor: float = 0.1, deltas=None, C: float = 0.1,
    c: SoundSpeed | None = None, workers: int = 1, fit_range=(1e-3, 1e-1),
) -> SweepResult:
    c = c or SoundSpeed.constant(1.0)
    deltas = ladder(1e-3, 1e-1, 8) if deltas is None else deltas
    make = lambda b: Medium(c, Nonlinearity.constant(b))
    return parameter_sweep("beta_sweep", make(anchor), make, anchor, deltas,
                           exp_inv_sq_profile(C), grid, workers, fit_range)


def c_sweep(
    grid: Grid3D, anchor: float = 1.4, deltas=None, C: float = 0.1,
    workers: int = 1, fit_range=(1e-2, 0.4),
) -> SweepResult:
    deltas = ladder(1e-2, 0.4, 8) if deltas is None else deltas
    make = lambda v: Medium(SoundSpeed.constant(v), Nonlinearity.constant(0.0))
    res = parameter_sweep("c_const_sweep", make(anchor), make, anchor, deltas,
                          exp_inv_sq_profile(C), grid, workers, fit_range)
    return res


def herglotz_beta_sweep(grid: Grid3D, alpha: float = 1.5, anchor: float = 0.1, deltas=None,
                        C: float = 0.1, workers: int = 1, fit_range=(1e-3, 1e-1)) -> SweepResult:
    res = beta_sweep(grid, anchor, deltas, C, SoundSpeed.herglotz(alpha), workers, fit_range)
    res.study = "herglotz_sweep"
    res.extra["part"] = "beta"
    res.extra["alpha"] = alpha
    return res


def herglotz_alpha_sweep(grid: Grid3D, anchor: float = 1.5, deltas=None, beta: float = 0.0,
                         C: float = 0.1, workers: int = 1, fit_range=(1e-2, 0.4)) -> SweepResult:
    deltas = ladder(1e-2, 0.4, 8) if deltas is None else deltas
    make = lambda a: Medium(SoundSpeed.herglotz(a), Nonlinearity.constant(beta))
    res = parameter_sweep("herglotz_sweep", make(anchor), make, anchor, deltas,
                          exp_inv_sq_profile(C), grid, workers, fit_range)
    res.extra["part"] = "alpha"
    res.extra["beta"] = beta
    return res


def stable_alpha_endpoint(grid: Grid3D, beta: float, alphas, C: float = 1.0) -> float:
    """Largest alpha of an increasing ladder before the first breakdown."""
    last = float("nan")
    for a in alphas:
        try:
            solve_westervelt(SoundSpeed.herglotz(a), Nonlinearity.constant(beta), exp_inv_sq_profile(C), grid)
        except NumericalBreakdown:
            break
        last = float(a)
    return last


def breakdown_probe(grid: Grid3D, C: float, deltas, anchor: float = 1e-4,
                    c: SoundSpeed | None = None) -> list:
    """(delta, error name or '') for beta2 = anchor + delta against the anchor."""
    c = c or SoundSpeed.constant(1.0)
    out = []
    for d in deltas:
        try:
            solve_westervelt(c, Nonlinearity.constant(anchor + d), exp_inv_sq_profile(C), grid)
            out.append((float(d), ""))
        except NumericalBreakdown as exc:
            out.append((float(d), type(exc).__name__))
    return out


def is_monotone(values, tol: float = 1e-10) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) >= -tol))


__all__ = [
    "Medium", "SweepResult", "STUDIES", "beta_sweep", "breakdown_probe", "c_sweep",
    "dn_difference", "herglotz_alpha_sweep", "herglotz_beta_sweep", "is_monotone",
    "ladder", "loglog_fit", "parameter_sweep", "simulate_trace", "stable_alpha_endpoint",
    "WorkbenchError",
]
