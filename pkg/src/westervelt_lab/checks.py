"""Fast invariant checks behind the ``check`` subcommand."""

from __future__ import annotations

import numpy as np

from .fields import Grid3D, ScalarField3D, SpaceTimeField, laplacian7, normal_derivative
from .geodesics import jacobi_for, shoot_geodesic
from .media import Nonlinearity, SoundSpeed, christoffel, herglotz_check
from .solvers import exp_inv_sq_profile, solve_linear, solve_westervelt


def _laplacian_quadratic():
    g = Grid3D(9, 0.1, 2)
    lap = laplacian7(ScalarField3D.from_function(g, lambda x, y, z: x**2 + y**2 + z**2))
    return float(np.max(np.abs(lap.values[1:-1, 1:-1, 1:-1] - 6.0))) < 1e-10


def _normal_derivative_linear():
    g = Grid3D(9, 0.1, 2)
    X = g.mesh()[0]
    tr = normal_derivative(SpaceTimeField(g, np.stack([X, X])))
    want = np.array([-1, 1, 0, 0, 0, 0], dtype=float)[None, :, None, None]
    return float(np.max(np.abs(tr.values - want))) < 1e-12


def _flat_jacobi():
    c = SoundSpeed.constant(1.0)
    J = jacobi_for(c, shoot_geodesic(c, [-1, 0, 0], [1, 0, 0]))
    ds = J.s - J.s_minus
    ok = np.max(np.abs(J.det_Y - (1 + 1j * ds) ** 2)) < 1e-8
    return bool(ok and np.max(np.abs(J.invariant() - 1)) < 1e-8)


def _herglotz_conservation():
    c = SoundSpeed.herglotz(1.5)
    J = jacobi_for(c, shoot_geodesic(c, [-1, 0.3, 0.1], [1, 0, 0]))
    inv = J.invariant()
    return float(np.max(np.abs(inv / inv[J.frame.i_minus] - 1))) < 1e-6


def _unit_speed():
    c = SoundSpeed.herglotz(1.5)
    return shoot_geodesic(c, [-1, 0.2, -0.4], [1, 0.3, 0.2]).speed_defect() < 1e-6


def _christoffel_symmetry():
    G = christoffel(SoundSpeed.herglotz(1.5), np.array([0.3, -0.2, 0.5]))
    return bool(np.allclose(G, np.swapaxes(G, 1, 2), atol=0, rtol=0))


def _herglotz():
    return herglotz_check(SoundSpeed.herglotz(1.5)) and herglotz_check(SoundSpeed.constant(1.0))


def _beta_zero_equivalence():
    g = Grid3D.from_T(9, 0.03, 1.2)
    c = SoundSpeed.constant(1.0)
    u = solve_westervelt(c, Nonlinearity.constant(0.0), exp_inv_sq_profile(0.1), g).solution
    v = solve_linear(c, exp_inv_sq_profile(0.1), g).solution
    return float(np.max(np.abs(u.frames - v.frames))) < 1e-8


CHECKS = {
    "laplacian_quadratic_exact": _laplacian_quadratic,
    "normal_derivative_linear_exact": _normal_derivative_linear,
    "flat_jacobi_closed_form": _flat_jacobi,
    "herglotz_conservation_law": _herglotz_conservation,
    "geodesic_unit_speed": _unit_speed,
    "christoffel_symmetric": _christoffel_symmetry,
    "herglotz_condition": _herglotz,
    "beta_zero_equivalence": _beta_zero_equivalence,
}


def run_checks() -> list[tuple[str, bool]]:
    return [(name, bool(fn())) for name, fn in CHECKS.items()]
