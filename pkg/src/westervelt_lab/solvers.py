"""Crank-Nicolson solvers for the linear, second-order and Westervelt problems.

All solvers march the once-integrated form

    c^-2 d_t u - beta d_t(u^2) - Laplacian(int_0^t u) = s,

which for beta = 0 is the acoustic wave equation with zero initial data.
Writing U for the running time integral, one step reads

    a (u1 - u0) = dt Lap U0 + dt^2/4 Lap(u0 + u1) + S,  a = c^-2 - beta (u0 + u1),
    U1 = U0 + dt/2 (u0 + u1),

so each step is a symmetric positive solve for the interior of u1, wrapped in a
Picard loop on the coefficient a when beta is nonzero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import CFLError, GridError, NonFiniteState, NonlinearDegeneracy, SolverDivergence
from .fields import BoundaryTrace, Grid3D, SpaceTimeField, _lap_interior, l2_M, normal_derivative
from .media import Nonlinearity, SoundSpeed

CG_RTOL = 1e-10
CG_MAXITER = 500
PICARD_MAXITER = 20
PICARD_TOL = 1e-10
DEGENERACY_THRESHOLD = 0.1


@dataclass(frozen=True)
class DirichletProfile:
    """Boundary data f(t, x) = C * shape(t, x) with shape vanishing to all orders at t=0."""

    shape: callable
    C: float = 1.0
    name: str = "custom"

    def __call__(self, t, x):
        return self.C * self.shape(t, x)

    def scaled(self, factor: float) -> "DirichletProfile":
        return DirichletProfile(self.shape, self.C * factor, self.name)

    def trace(self, grid: Grid3D) -> BoundaryTrace:
        return BoundaryTrace.from_function(grid, self)


def _exp_inv_sq(t, x):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.exp(-1.0 / safe**2), 0.0) * np.ones(np.shape(x)[:-1])


def exp_inv_sq_profile(C: float = 0.1) -> DirichletProfile:
    """f(t, x) = C exp(-t^-2), uniform over the boundary."""
    return DirichletProfile(_exp_inv_sq, C, "exp_inv_sq")


def smooth_bump(u):
    """exp(-1/(1-u^2)) on (-1, 1), zero outside."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1
    safe = np.where(inside, 1.0 - u**2, 1.0)
    return np.where(inside, np.exp(-1.0 / safe), 0.0)


@dataclass(frozen=True)
class _Bump:
    center: float
    width: float
    kx: tuple

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        spatial = 1.0 + 0.5 * np.sin(np.pi * (x @ np.asarray(self.kx)) / 2)
        return np.e * smooth_bump((np.asarray(t) - self.center) / self.width) * spatial


def bump_profile(center: float, width: float, C: float = 1.0, kx=(1.0, 0.5, 0.25)) -> DirichletProfile:
    """Compactly timed bump with a smooth, non-uniform spatial pattern."""
    return DirichletProfile(_Bump(center, width, tuple(kx)), C, "bump")


@dataclass
class SolveReport:
    solution: SpaceTimeField
    min_factor: float = 1.0
    cg_iterations: list = field(default_factory=list)
    picard_iterations: list = field(default_factory=list)
    wall_time: float = 0.0

    def summary(self) -> dict:
        """Deterministic summary; wall time is left out on purpose."""
        F = self.solution.frames
        return {
            "n": self.solution.grid.n,
            "n_t": self.solution.grid.n_t,
            "dt": self.solution.grid.dt,
            "min_factor": self.min_factor,
            "max_abs_u": float(np.max(np.abs(F))),
            "l2_M": l2_M(self.solution),
            "cg_iterations_total": int(sum(self.cg_iterations)),
            "picard_iterations_max": int(max(self.picard_iterations, default=0)),
        }


def check_cfl(c: SoundSpeed, grid: Grid3D) -> None:
    cmax = float(np.max(c.on_grid(grid)))
    if grid.dt > 0.9 * grid.dx / cmax:
        raise CFLError(f"dt={grid.dt} exceeds 0.9*dx/max c = {0.9 * grid.dx / cmax:.4g}")


def _boundary_lap(full: np.ndarray, dx: float) -> np.ndarray:
    """Interior Laplacian contribution of boundary values only."""
    tmp = full.copy()
    tmp[1:-1, 1:-1, 1:-1] = 0.0
    return _lap_interior(tmp, dx)


class _Stepper:
    def __init__(self, c: SoundSpeed, beta: np.ndarray | None, grid: Grid3D, threshold: float):
        if grid.n < 3:
            raise GridError("grid too small")
        self.grid = grid
        self.c2 = c.on_grid(grid) ** 2
        self.cinv2 = (1.0 / self.c2)[1:-1, 1:-1, 1:-1]
        self.c2i = self.c2[1:-1, 1:-1, 1:-1]
        self.beta = None if beta is None or not np.any(beta) else beta[1:-1, 1:-1, 1:-1]
        self.threshold = threshold
        m = grid.n - 2
        self.shape = (m, m, m)
        self.k = grid.dt**2 / 4.0
        self._pad = np.zeros((grid.n,) * 3)

    def lap0(self, x: np.ndarray) -> np.ndarray:
        self._pad[1:-1, 1:-1, 1:-1] = x.reshape(self.shape)
        return _lap_interior(self._pad, self.grid.dx)

    def solve(self, a: np.ndarray, rhs: np.ndarray, x0: np.ndarray):
        N = a.size
        k, dx = self.k, self.grid.dx
        av = a.ravel()
        op = LinearOperator((N, N), matvec=lambda x: av * x - k * self.lap0(x).ravel(), dtype=float)
        dinv = 1.0 / (av + 6.0 * k / dx**2)
        prec = LinearOperator((N, N), matvec=lambda x: dinv * x, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = cg(op, rhs.ravel(), x0=x0.ravel(), rtol=CG_RTOL, atol=0.0,
                     maxiter=CG_MAXITER, M=prec, callback=cb)
        if info != 0:
            raise SolverDivergence(f"CG did not converge (info={info})")
        return x.reshape(self.shape), count[0]

    def march(self, bvals: BoundaryTrace | None, source=None) -> SolveReport:
        """source(n) returns the interior increment S for the step n -> n+1."""
        g = self.grid
        t0 = time.perf_counter()
        frames = np.zeros((g.n_t, g.n, g.n, g.n))
        if bvals is not None:
            bvals.fill_boundary(0, frames[0])
        U = np.zeros((g.n,) * 3)
        report = SolveReport(SpaceTimeField(g, frames))
        dt, k = g.dt, self.k
        min_factor = 1.0
        for n in range(g.n_t - 1):
            u0 = frames[n]
            u1 = frames[n + 1]
            if bvals is not None:
                bvals.fill_boundary(n + 1, u1)
            u0i = u0[1:-1, 1:-1, 1:-1]
            base = dt * _lap_interior(U, g.dx) + k * _lap_interior(u0, g.dx) + k * _boundary_lap(u1, g.dx)
            if source is not None:
                base = base + source(n)
            guess = u0i if n == 0 else 2 * u0i - frames[n - 1][1:-1, 1:-1, 1:-1]
            if self.beta is None:
                a = self.cinv2
                x, it = self.solve(a, a * u0i + base, guess)
                report.cg_iterations.append(it)
                report.picard_iterations.append(1)
            else:
                x = guess
                total = 0
                for p in range(PICARD_MAXITER):
                    a = self.cinv2 - self.beta * (x + u0i)
                    fac = float(np.min(self.c2i * a))
                    if fac < self.threshold:
                        raise NonlinearDegeneracy(
                            f"1 - 2 beta c^2 u fell to {fac:.3g} at step {n + 1}",
                            min_factor=fac, step=n + 1,
                        )
                    x_new, it = self.solve(a, a * u0i + base, x)
                    total += it
                    diff = float(np.max(np.abs(x_new - x)))
                    x = x_new
                    if diff <= PICARD_TOL * max(float(np.max(np.abs(x))), 1e-300):
                        break
                else:
                    raise SolverDivergence(f"Picard iteration stalled at step {n + 1}")
                report.cg_iterations.append(total)
                report.picard_iterations.append(p + 1)
                fac = float(np.min(1.0 - 2.0 * self.beta * self.c2i * x))
                min_factor = min(min_factor, fac)
                if fac < self.threshold:
                    raise NonlinearDegeneracy(
                        f"1 - 2 beta c^2 u fell to {fac:.3g} at step {n + 1}",
                        min_factor=fac, step=n + 1,
                    )
            u1[1:-1, 1:-1, 1:-1] = x
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(f"non-finite solution at step {n + 1}")
            U += 0.5 * dt * (u0 + u1)
        report.min_factor = min_factor
        report.wall_time = time.perf_counter() - t0
        return report


def _as_trace(f, grid: Grid3D) -> BoundaryTrace:
    if isinstance(f, BoundaryTrace):
        return f
    return f.trace(grid)


def solve_linear(c: SoundSpeed, f, grid: Grid3D) -> SolveReport:
    """Linear wave equation with Dirichlet data f and zero initial data."""
    check_cfl(c, grid)
    return _Stepper(c, None, grid, DEGENERACY_THRESHOLD).march(_as_trace(f, grid))


def solve_backward(c: SoundSpeed, h, grid: Grid3D) -> SolveReport:
    """Linear wave equation with zero data at t = T, via time reversal."""
    rep = solve_linear(c, _as_trace(h, grid).reversed(), grid)
    rep.solution = rep.solution.reversed()
    return rep


def solve_second_linearization(c: SoundSpeed, beta: Nonlinearity, v: SpaceTimeField) -> SolveReport:
    """c^-2 w_tt - Lap w = beta (v^2)_tt with w = 0 on the boundary.

    The source enters through the increments beta ((v^{n+1})^2 - (v^n)^2),
    which is the second-order term of the discrete Westervelt step.
    """
    grid = v.grid
    check_cfl(c, grid)
    b = beta.on_grid(grid)[1:-1, 1:-1, 1:-1]
    sq = v.frames[:, 1:-1, 1:-1, 1:-1] ** 2

    def source(n):
        return b * (sq[n + 1] - sq[n])

    return _Stepper(c, None, grid, DEGENERACY_THRESHOLD).march(None, source)


def solve_westervelt(
    c: SoundSpeed, beta: Nonlinearity, f, grid: Grid3D,
    threshold: float = DEGENERACY_THRESHOLD,
) -> SolveReport:
    check_cfl(c, grid)
    st = _Stepper(c, beta.on_grid(grid), grid, threshold)
    return st.march(_as_trace(f, grid))


def dn_trace(report: SolveReport) -> BoundaryTrace:
    return normal_derivative(report.solution)


def expansion_remainders(c: SoundSpeed, beta: Nonlinearity, f: DirichletProfile, eps_list, grid: Grid3D):
    """Rows (eps, ||u - eps v||, ||u - eps v - eps^2 w||) in L2(M)."""
    v = solve_linear(c, f, grid).solution
    w = solve_second_linearization(c, beta, v).solution
    rows = []
    for eps in eps_list:
        u = solve_westervelt(c, beta, f.scaled(eps), grid).solution
        Q = u.frames - eps * v.frames
        R = Q - eps**2 * w.frames
        rows.append((float(eps), l2_M(SpaceTimeField(grid, Q)), l2_M(SpaceTimeField(grid, R))))
    return rows


def second_order_dn_fd(c: SoundSpeed, beta: Nonlinearity, f: DirichletProfile, eps: float, grid: Grid3D) -> BoundaryTrace:
    """Normal derivative of 2 eps^-2 (u_{eps f} - 2 u_{eps f / 2})."""
    u1 = solve_westervelt(c, beta, f.scaled(eps), grid).solution
    u2 = solve_westervelt(c, beta, f.scaled(eps / 2), grid).solution
    D = SpaceTimeField(grid, 2.0 / eps**2 * (u1.frames - 2.0 * u2.frames))
    return normal_derivative(D)


def discrete_energy(u: SpaceTimeField, c: SoundSpeed) -> np.ndarray:
    """0.5 * sum(c^-2 u_t^2 + |grad u|^2) dx^3 per time level (midpoint u_t)."""
    g = u.grid
    cinv2 = 1.0 / c.on_grid(g) ** 2
    F = u.frames
    ut = np.gradient(F, g.dt, axis=0)
    out = []
    for n in range(g.n_t):
        gx = [np.diff(F[n], axis=a) / g.dx for a in range(3)]
        e = 0.5 * np.sum(cinv2 * ut[n] ** 2) + 0.5 * sum(np.sum(q**2) for q in gx)
        out.append(e * g.dx**3)
    return np.array(out)
