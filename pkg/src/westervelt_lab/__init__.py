"""Numerical workbench for the Westervelt equation on the unit cube.

Forward solvers, acoustic-metric geodesics with Fermi frames and Jacobi
fields, Gaussian beam quasimodes, the Jacobi-weighted ray transform and
the stability sweeps built on top of them.
"""

from .errors import (
    CFLError, ConfigError, DomainError, GridError, NonlinearDegeneracy,
    NumericalBreakdown, ResolutionError, SolverDivergence, WorkbenchError,
)
from .fields import BoundaryTrace, Grid3D, ScalarField3D, SpaceTimeField, l2_sigma
from .media import Nonlinearity, SoundSpeed, herglotz_check
from .geodesics import fermi_frame, jacobi_for, scattering_relation, shoot_geodesic
from .beams import GaussianBeam, chart_for, make_beam, residual_norm
from .solvers import (
    dn_trace, exp_inv_sq_profile, solve_backward, solve_linear,
    solve_second_linearization, solve_westervelt,
)
from .transforms import alessandrini_check, beam_pairing, jacobi_transform

__version__ = "0.1.0"

__all__ = [
    "BoundaryTrace", "CFLError", "ConfigError", "DomainError", "GaussianBeam", "Grid3D",
    "GridError", "NonlinearDegeneracy", "Nonlinearity", "NumericalBreakdown",
    "ResolutionError", "ScalarField3D", "SolverDivergence", "SoundSpeed", "SpaceTimeField",
    "WorkbenchError", "alessandrini_check", "beam_pairing", "chart_for", "dn_trace",
    "fermi_frame", "herglotz_check", "jacobi_for", "jacobi_transform", "l2_sigma",
    "make_beam", "exp_inv_sq_profile", "residual_norm", "scattering_relation",
    "shoot_geodesic", "solve_backward", "solve_linear", "solve_second_linearization",
    "solve_westervelt",
]
