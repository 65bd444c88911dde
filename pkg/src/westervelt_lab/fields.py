"""Uniform grids on [-1,1]^3 x [0,T], fields on them, stencils and norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, GridError

# Face order used by every BoundaryTrace: (axis, side) with side -1 / +1.
FACES = ((0, -1), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1))


@dataclass(frozen=True)
class Grid3D:
    """Uniform space-time lattice on [-1,1]^3 x [0,T]."""

    n: int
    dt: float
    n_t: int

    def __post_init__(self):
        if self.n < 3:
            raise GridError(f"need at least 3 nodes per axis, got {self.n}")
        if self.n_t < 1:
            raise GridError("need at least one time level")
        if not self.dt > 0:
            raise GridError("dt must be positive")

    @classmethod
    def from_T(cls, n: int, dt: float, T: float) -> "Grid3D":
        n_t = int(round(T / dt)) + 1
        if abs((n_t - 1) * dt - T) > 1e-9 * max(T, 1.0):
            raise GridError(f"T={T} is not a multiple of dt={dt}")
        return cls(n, dt, n_t)

    @classmethod
    def from_dx(cls, dx: float, dt: float, T: float) -> "Grid3D":
        n = int(round(2.0 / dx)) + 1
        if abs((n - 1) * dx - 2.0) > 1e-12:
            raise GridError(f"dx={dx} does not divide [-1,1]")
        return cls.from_T(n, dt, T)

    @property
    def dx(self) -> float:
        return 2.0 / (self.n - 1)

    @property
    def T(self) -> float:
        return (self.n_t - 1) * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t)

    def mesh(self):
        """Coordinate arrays X, Y, Z of shape (n, n, n), ij-indexed."""
        return np.meshgrid(self.x, self.x, self.x, indexing="ij")

    def points(self) -> np.ndarray:
        return np.stack(self.mesh(), axis=-1)

    def face_points(self, face: int) -> np.ndarray:
        """Coordinates (n, n, 3) of the lattice on one face of the cube."""
        axis, side = FACES[face]
        a, b = [k for k in range(3) if k != axis]
        A, B = np.meshgrid(self.x, self.x, indexing="ij")
        pts = np.empty((self.n, self.n, 3))
        pts[..., axis] = float(side)
        pts[..., a] = A
        pts[..., b] = B
        return pts

    def boundary_points(self) -> np.ndarray:
        """All face lattices stacked, shape (6, n, n, 3)."""
        return np.stack([self.face_points(f) for f in range(6)])

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def time_weights(self) -> np.ndarray:
        w = np.full(self.n_t, self.dt)
        if self.n_t > 1:
            w[0] = w[-1] = 0.5 * self.dt
        else:
            w[0] = 0.0
        return w


@dataclass(frozen=True)
class ScalarField3D:
    grid: Grid3D
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        if self.values.shape != (n, n, n):
            raise GridError(f"expected shape {(n, n, n)}, got {self.values.shape}")

    @classmethod
    def from_function(cls, grid: Grid3D, func) -> "ScalarField3D":
        X, Y, Z = grid.mesh()
        return cls(grid, np.asarray(func(X, Y, Z), dtype=float) * np.ones_like(X))


@dataclass(frozen=True)
class SpaceTimeField:
    """u(t_k, x_ijk) stored as one array of shape (n_t, n, n, n)."""

    grid: Grid3D
    frames: np.ndarray

    def __post_init__(self):
        g = self.grid
        if self.frames.shape != (g.n_t, g.n, g.n, g.n):
            raise GridError(
                f"expected shape {(g.n_t, g.n, g.n, g.n)}, got {self.frames.shape}"
            )

    def frame(self, k: int) -> ScalarField3D:
        return ScalarField3D(self.grid, self.frames[k])

    def __sub__(self, other):
        return SpaceTimeField(self.grid, self.frames - other.frames)

    def __add__(self, other):
        return SpaceTimeField(self.grid, self.frames + other.frames)

    def scaled(self, a) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, a * self.frames)

    def reversed(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.frames[::-1].copy())

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.frames)


@dataclass(frozen=True)
class BoundaryTrace:
    """Values on the six faces at every time level, shape (n_t, 6, n, n).

    Face f carries the lattice of ``FACES[f]`` indexed by the two remaining
    axes in increasing order.  Edge and corner nodes appear on every face
    that contains them.
    """

    grid: Grid3D
    values: np.ndarray

    def __post_init__(self):
        g = self.grid
        if self.values.shape != (g.n_t, 6, g.n, g.n):
            raise GridError(
                f"expected shape {(g.n_t, 6, g.n, g.n)}, got {self.values.shape}"
            )

    @classmethod
    def from_function(cls, grid: Grid3D, func) -> "BoundaryTrace":
        """Sample ``func(t, x)`` with x of shape (..., 3) on Sigma."""
        pts = grid.boundary_points()
        vals = [np.broadcast_to(func(t, pts), pts.shape[:-1]) for t in grid.t]
        return cls(grid, np.array(vals))

    @classmethod
    def from_volume(cls, grid: Grid3D, frames: np.ndarray) -> "BoundaryTrace":
        """Restrict full space-time data (n_t, n, n, n) to the faces."""
        out = np.empty((grid.n_t, 6, grid.n, grid.n), dtype=frames.dtype)
        for f, (axis, side) in enumerate(FACES):
            idx = 0 if side < 0 else -1
            out[:, f] = np.take(frames, idx, axis=axis + 1)
        return cls(grid, out)

    def fill_boundary(self, k: int, out: np.ndarray) -> np.ndarray:
        """Write the face values at time level k into the faces of ``out``."""
        for f, (axis, side) in enumerate(FACES):
            idx = 0 if side < 0 else -1
            sl = [slice(None)] * 3
            sl[axis] = idx
            out[tuple(sl)] = self.values[k, f]
        return out

    def __sub__(self, other):
        return BoundaryTrace(self.grid, self.values - other.values)

    def __add__(self, other):
        return BoundaryTrace(self.grid, self.values + other.values)

    def scaled(self, a) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, a * self.values)

    def reversed(self) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values[::-1].copy())


def laplacian7(field: ScalarField3D) -> ScalarField3D:
    """Seven-point Laplacian; boundary nodes are flagged with NaN."""
    u = field.values
    out = np.full_like(u, np.nan, dtype=np.result_type(u, float))
    out[1:-1, 1:-1, 1:-1] = _lap_interior(u, field.grid.dx)
    return ScalarField3D(field.grid, out)


def _lap_interior(u: np.ndarray, dx: float) -> np.ndarray:
    c = u[1:-1, 1:-1, 1:-1]
    return (
        u[2:, 1:-1, 1:-1] + u[:-2, 1:-1, 1:-1]
        + u[1:-1, 2:, 1:-1] + u[1:-1, :-2, 1:-1]
        + u[1:-1, 1:-1, 2:] + u[1:-1, 1:-1, :-2]
        - 6.0 * c
    ) / dx**2


def normal_derivative(u: SpaceTimeField) -> BoundaryTrace:
    """Outward normal derivative by the one-sided (3u0 - 4u1 + u2)/(2dx) stencil."""
    g = u.grid
    if g.n < 3:
        raise GridError("normal derivative needs n >= 3")
    F = u.frames
    out = np.empty((g.n_t, 6, g.n, g.n), dtype=F.dtype)
    for f, (axis, side) in enumerate(FACES):
        ax = axis + 1
        if side > 0:
            u0, u1, u2 = (np.take(F, i, axis=ax) for i in (-1, -2, -3))
        else:
            u0, u1, u2 = (np.take(F, i, axis=ax) for i in (0, 1, 2))
        out[:, f] = (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * g.dx)
    return BoundaryTrace(g, out)


def sigma_inner(a: BoundaryTrace, b: BoundaryTrace) -> complex:
    """Trapezoid quadrature of a*b over Sigma (no conjugation)."""
    g = a.grid
    w = g.trapezoid_weights()
    wt = g.time_weights()
    face_w = np.outer(w, w)
    return np.einsum("t,tfab,ab->", wt, a.values * b.values, face_w)


def l2_sigma(trace: BoundaryTrace) -> float:
    """L2(Sigma) norm with per-face tensor trapezoid weights and trapezoid in t."""
    g = trace.grid
    w = g.trapezoid_weights()
    wt = g.time_weights()
    face_w = np.outer(w, w)
    s = np.einsum("t,tfab,ab->", wt, np.abs(trace.values) ** 2, face_w)
    return float(np.sqrt(s))


def l2_M(u: SpaceTimeField) -> float:
    """L2 norm over M = [0,T] x Omega by tensor trapezoid quadrature."""
    g = u.grid
    w = g.trapezoid_weights()
    wt = g.time_weights()
    a = np.abs(u.frames) ** 2
    s = np.einsum("tijk,t,i,j,k->", a, wt, w, w, w)
    return float(np.sqrt(s))


def time_integral(u: SpaceTimeField) -> SpaceTimeField:
    """Cumulative trapezoid integral in t; frame 0 is zero."""
    out = cumulative_trapezoid(u.frames, dx=u.grid.dt, axis=0, initial=0)
    return SpaceTimeField(u.grid, out)


def time_derivative(frames: np.ndarray, dt: float) -> np.ndarray:
    """Second-order central differences in t, one-sided second order at the ends."""
    return np.gradient(frames, dt, axis=0, edge_order=2)


def trilinear_sample(field: ScalarField3D, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise DomainError("sample point outside [-1,1]^3")
    xs = field.grid.x
    interp = RegularGridInterpolator((xs, xs, xs), field.values, method="linear")
    out = interp(np.clip(x, -1.0, 1.0).reshape(-1, 3))
    return out[0] if x.ndim == 1 else out.reshape(x.shape[:-1])
