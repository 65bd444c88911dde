"""Jacobi-weighted ray transform, beam pairing and the Alessandrini identity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .beams import GaussianBeam, TubeQuadrature, time_derivative_at
from .errors import BranchTrackingError, ResolutionError
from .fields import Grid3D, sigma_inner
from .geodesics import Geodesic, JacobiData
from .media import Nonlinearity, SoundSpeed
from .solvers import dn_trace, solve_backward, solve_linear, solve_second_linearization

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class RayTransformResult:
    p: np.ndarray
    direction: np.ndarray
    value: complex
    s: np.ndarray
    weight: np.ndarray
    constant: float


def transform_constant(jacobi: JacobiData, c: SoundSpeed, p) -> float:
    """2 (2 pi)^{3/2} C_theta^{-1/2} c(p)^{3/2}."""
    return 2.0 * (2 * np.pi) ** 1.5 * jacobi.C_theta**-0.5 * float(c(p)) ** 1.5


def pairing_constant(jacobi: JacobiData, c: SoundSpeed, p) -> float:
    """Constant that Laplace's method gives for the tau^{-1/2}-scaled pairing.

    With s normalized by E0 = (1, gamma')/sqrt 2 this is
    2^{-1/2} pi^{3/2} C_theta^{-1/2} c(p)^{3/2}.
    """
    return 2**-0.5 * np.pi**1.5 * jacobi.C_theta**-0.5 * float(c(p)) ** 1.5


def _weighted_integral(c: SoundSpeed, beta: Nonlinearity, geodesic: Geodesic, jacobi: JacobiData):
    fr = jacobi.frame
    lo, hi = fr.i_minus, int(np.searchsorted(fr.s, fr.s_plus, side="right"))
    s = fr.s[lo:hi]
    dY = jacobi.det_Y[lo:hi]
    steps = np.diff(np.angle(dY))
    wrapped = (steps + np.pi) % (2 * np.pi) - np.pi
    if wrapped.size and np.max(np.abs(wrapped)) > np.pi / 2:
        raise BranchTrackingError("arg det Y jumps by more than pi/2 between samples")
    arg = np.concatenate([[0.0], np.cumsum(wrapped)]) + np.angle(dY[0])
    inv_sqrt = np.abs(dY) ** -0.5 * np.exp(-0.5j * arg)
    x = fr.states[lo:hi, :3]
    weight = np.asarray(c(x)) ** 1.5 * inv_sqrt
    integrand = np.asarray(beta(x)) * weight
    total = np.trapezoid(integrand, s)
    # last partial interval up to s_plus
    if fr.s_plus > s[-1]:
        end = slice(max(0, len(s) - 4), len(s))
        spl = CubicSpline(s[end], integrand[end]) if len(s) >= 4 else None
        if spl is not None:
            total += spl.integrate(s[-1], fr.s_plus)
    return total, s, weight


def jacobi_transform(c: SoundSpeed, beta: Nonlinearity, geodesic: Geodesic, jacobi: JacobiData) -> RayTransformResult:
    """C * int beta c^{3/2} (det Y)^{-1/2} ds over [s_minus, s_plus] (trapezoid)."""
    total, s, weight = _weighted_integral(c, beta, geodesic, jacobi)
    C = transform_constant(jacobi, c, geodesic.p)
    return RayTransformResult(geodesic.p, geodesic.direction, complex(C * total), s, weight, C)


def pairing_limit(c: SoundSpeed, beta: Nonlinearity, geodesic: Geodesic, jacobi: JacobiData) -> complex:
    """Large-tau limit of beam_pairing when the cutoff radius stays fixed."""
    total, _, _ = _weighted_integral(c, beta, geodesic, jacobi)
    return complex(pairing_constant(jacobi, c, geodesic.p) * total)


def flat_axis_transform() -> complex:
    """Closed form of jacobi_transform for c = 1, beta = 1 on an axis chord.

    The chord has s-length 2 sqrt 2, and int_0^L (1 + i s)^{-1} ds = -i log(1 + i L).
    """
    return complex(2 * (2 * np.pi) ** 1.5 * (-1j) * np.log(1 + 2j * SQRT2))


def beam_pairing(
    beta: Nonlinearity, v: GaussianBeam, theta: GaussianBeam, T: float,
    h: float | None = None, quad: TubeQuadrature | None = None, chunk: int = 50_000,
) -> complex:
    """tau^{-1/2} int_M beta d_t(v^2) d_t(theta) dx dt by tube quadrature."""
    tau = v.tau
    h = 1.0 / (20.0 * tau) if h is None else h
    if 2 * tau * h >= 0.5:
        raise ResolutionError(f"time step {h} too coarse for tau={tau}")
    q = quad or TubeQuadrature.build(v, T)
    total = 0j
    for a in range(0, q.points.shape[0], chunk):
        P = q.points[a:a + chunk]
        dv2 = time_derivative_at(v, P, h, square=True)
        dth = time_derivative_at(theta, P, h)
        b = np.asarray(beta(P[:, 1:]))
        total += np.sum(q.weights[a:a + chunk] * b * dv2 * dth)
    return complex(tau**-0.5 * total)


def spacetime_integral(frames: np.ndarray, grid: Grid3D) -> complex:
    w = grid.trapezoid_weights()
    return np.einsum("tijk,t,i,j,k->", frames, grid.time_weights(), w, w, w)


def _dt_at(F: np.ndarray, n: int, dt: float, square: bool = False) -> np.ndarray:
    """Second-order d_t of F (or F^2) at level n, one-sided at the ends."""
    g = (lambda k: F[k] ** 2) if square else (lambda k: F[k])
    last = F.shape[0] - 1
    if n == 0:
        return (-3 * g(0) + 4 * g(1) - g(2)) / (2 * dt)
    if n == last:
        return (3 * g(last) - 4 * g(last - 1) + g(last - 2)) / (2 * dt)
    return (g(n + 1) - g(n - 1)) / (2 * dt)


def _dt_product_integral(b: np.ndarray, v: np.ndarray, th: np.ndarray, grid: Grid3D) -> complex:
    """Trapezoid integral of b d_t(v^2) d_t(th) over M, one time level at a time."""
    w = grid.trapezoid_weights()
    W = np.einsum("i,j,k->ijk", w, w, w) * b
    wt = grid.time_weights()
    total = 0.0
    for n in range(grid.n_t):
        if wt[n] == 0:
            continue
        total += wt[n] * np.sum(W * _dt_at(v, n, grid.dt, True) * _dt_at(th, n, grid.dt))
    return total


def alessandrini_check(c: SoundSpeed, beta: Nonlinearity, f, h, grid: Grid3D):
    """(lhs, rhs, gap) for int_Sigma d_nu w h = int_M beta d_t(v^2) d_t(theta)."""
    v = solve_linear(c, f, grid).solution
    w = solve_second_linearization(c, beta, v)
    h_trace = h.trace(grid) if hasattr(h, "trace") else h
    lhs = sigma_inner(dn_trace(w), h_trace)
    del w
    th = solve_backward(c, h_trace, grid).solution
    rhs = _dt_product_integral(beta.on_grid(grid), v.frames, th.frames, grid)
    scale = max(abs(lhs), abs(rhs))
    gap = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return lhs, rhs, float(gap)
