"""Perturbation studies for geodesics, Jacobi data, beams and a scalar ODE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beams import TubeQuadrature, chart_for, make_beam
from .fields import Grid3D
from .fits import SlopeFit, loglog_fit
from .geodesics import jacobi_for, rk4, shoot_geodesic
from .media import SoundSpeed, sup_distance

EPSILONS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
ENTRY = (-1.0, 0.3, 0.1)
DIRECTION = (1.0, 0.0, 0.0)


@dataclass
class DeviationStudy:
    distances: list
    deviations: list
    fit: SlopeFit


def _c0(alpha: float, eps: float, grid: Grid3D) -> float:
    return sup_distance(SoundSpeed.herglotz(alpha), SoundSpeed.herglotz(alpha + eps), grid)


def _study(dist, dev) -> DeviationStudy:
    return DeviationStudy(list(dist), list(dev), loglog_fit(dist, dev))


def geodesic_deviation(alpha: float = 1.5, eps=EPSILONS, p=ENTRY, d=DIRECTION, h: float = 1e-3):
    """sup_t |gamma_1 - gamma_2| over the common time range against ||c_1 - c_2||_C0."""
    grid = Grid3D(17, 1.0, 2)
    g1 = shoot_geodesic(SoundSpeed.herglotz(alpha), p, d, h)
    dist, dev = [], []
    for e in eps:
        g2 = shoot_geodesic(SoundSpeed.herglotz(alpha + e), p, d, h)
        m = min(len(g1.t), len(g2.t))
        dev.append(float(np.max(np.linalg.norm(g1.x[:m] - g2.x[:m], axis=1))))
        dist.append(_c0(alpha, e, grid))
    return _study(dist, dev)


def det_y_deviation(alpha: float = 1.5, eps=EPSILONS, p=ENTRY, d=DIRECTION, h: float = 1e-3):
    """sup_s |det Y_1 - det Y_2| over the common s range."""
    grid = Grid3D(17, 1.0, 2)

    def data(a):
        c = SoundSpeed.herglotz(a)
        J = jacobi_for(c, shoot_geodesic(c, p, d, h), h=h)
        i = J.frame.i_minus
        k = int(np.searchsorted(J.s, J.s_plus, side="right"))
        return J.det_Y[i:k]

    y1 = data(alpha)
    dist, dev = [], []
    for e in eps:
        y2 = data(alpha + e)
        m = min(len(y1), len(y2))
        dev.append(float(np.max(np.abs(y1[:m] - y2[:m]))))
        dist.append(_c0(alpha, e, grid))
    return _study(dist, dev)


def beam_deviation(alpha: float = 1.5, tau: float = 50.0, eps=EPSILONS, p=ENTRY, d=DIRECTION,
                   t_minus: float = 1.0, T: float = 4.0, rho: float = 0.25):
    """sup |v_1 - v_2| over tube nodes of the unperturbed beam at fixed tau."""
    grid = Grid3D(17, 1.0, 2)
    v1 = make_beam(chart_for(SoundSpeed.herglotz(alpha), p, d, t_minus, rho), tau, rho)
    P = TubeQuadrature.build(v1, T, n_z=8, n_s=24).points
    base = v1.eval_points(P)
    dist, dev = [], []
    for e in eps:
        ch = chart_for(SoundSpeed.herglotz(alpha + e), p, d, t_minus, rho)
        v2 = make_beam(ch, tau, min(rho, ch.rho_max))
        dev.append(float(np.max(np.abs(v2.eval_points(P) - base))))
        dist.append(_c0(alpha, e, grid))
    return _study(dist, dev)


def ode_solution(xi: float, a: float, t1: float = 1.0, h: float = 1e-2) -> np.ndarray:
    """RK4 solution of x' = sin(x) + a, x(0) = xi."""
    return rk4(lambda _t, x: np.sin(x) + a, np.array([xi]), 0.0, t1, h)[1][:, 0]


def ode_lipschitz_constant(pairs, t1: float = 1.0, h: float = 1e-2) -> float:
    """max ||x_1 - x_2||_inf / (|xi_1 - xi_2| + |a_1 - a_2|) over the given pairs.

    ``pairs`` holds ((xi1, a1), (xi2, a2)) tuples with distinct parameters.
    """
    K = 0.0
    for (x1, a1), (x2, a2) in pairs:
        gap = np.max(np.abs(ode_solution(x1, a1, t1, h) - ode_solution(x2, a2, t1, h)))
        K = max(K, float(gap / (abs(x1 - x2) + abs(a1 - a2))))
    return K
