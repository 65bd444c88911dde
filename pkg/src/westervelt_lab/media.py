"""Sound-speed and nonlinearity models, the acoustic metric and its connection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, DomainError
from .fields import Grid3D, ScalarField3D

SQRT3 = np.sqrt(3.0)
EXTENSION = 0.25


def herglotz_c(alpha: float, x) -> np.ndarray | float:
    """c_alpha(x) = alpha*sqrt(3) / ((alpha-1)|x| + sqrt(3))."""
    if alpha < 1:
        raise ConfigError(f"alpha must be >= 1, got {alpha}")
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return alpha * SQRT3 / ((alpha - 1.0) * r + SQRT3)


def _fd4_derivatives(values: np.ndarray, dx: float):
    """Gradient and Hessian by fourth-order central differences.

    Nodes within two cells of a face fall back to second-order stencils.
    """

    def d1(u, ax):
        out = np.gradient(u, dx, axis=ax, edge_order=2)
        sl = lambda a, b: tuple(
            slice(a, (u.shape[ax] + b) if b <= 0 else b) if k == ax else slice(None)
            for k in range(u.ndim)
        )
        out[sl(2, -2)] = (
            -u[sl(4, 0)] + 8 * u[sl(3, -1)] - 8 * u[sl(1, -3)] + u[sl(0, -4)]
        ) / (12 * dx)
        return out

    grad = np.stack([d1(values, a) for a in range(3)], axis=-1)
    hess = np.empty(values.shape + (3, 3))
    for a in range(3):
        for b in range(a, 3):
            h = d1(grad[..., a], b)
            hess[..., a, b] = h
            hess[..., b, a] = h
    return grad, hess


@dataclass(frozen=True)
class SoundSpeed:
    """c(x) with analytic derivatives for closed-form kinds.

    Tabulated media are extended beyond the cube by clamping x to [-1,1]^3,
    which is constant continuation along the outward normal.
    """

    kind: str
    value: float = 1.0
    alpha: float = 1.0
    table: ScalarField3D | None = None
    _interp: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "constant":
            if not self.value > 0:
                raise ConfigError("constant sound speed must be positive")
        elif self.kind == "herglotz":
            if self.alpha < 1:
                raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        elif self.kind == "tabulated":
            if self.table is None:
                raise ConfigError("tabulated sound speed needs a table")
            v = self.table.values
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ConfigError("tabulated sound speed must be finite and positive")
            grad, hess = _fd4_derivatives(v, self.table.grid.dx)
            xs = self.table.grid.x
            mk = lambda a: RegularGridInterpolator((xs, xs, xs), a, method="linear")
            object.__setattr__(self, "_interp", (mk(v), mk(grad), mk(hess)))
        else:
            raise ConfigError(f"unknown sound speed kind {self.kind!r}")

    @classmethod
    def constant(cls, c0: float) -> "SoundSpeed":
        return cls("constant", value=float(c0))

    @classmethod
    def herglotz(cls, alpha: float) -> "SoundSpeed":
        return cls("herglotz", alpha=float(alpha))

    @classmethod
    def tabulated(cls, table: ScalarField3D) -> "SoundSpeed":
        return cls("tabulated", table=table)

    @property
    def is_flat(self) -> bool:
        return self.kind == "constant" or (self.kind == "herglotz" and self.alpha == 1.0)

    @property
    def is_radial(self) -> bool:
        return self.kind in ("constant", "herglotz")

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "herglotz":
            d["alpha"] = self.alpha
        return d

    # evaluators accept x of shape (3,) or (..., 3)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape[:-1], self.value)[()]
        if self.kind == "herglotz":
            return herglotz_c(self.alpha, x)
        return self._table_eval(0, x)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.zeros(x.shape)
        if self.kind == "herglotz":
            a = self.alpha - 1.0
            r = np.linalg.norm(x, axis=-1)[..., None]
            D = a * r + SQRT3
            safe = np.where(r > 0, r, 1.0)
            return np.where(r > 0, -self.alpha * SQRT3 * a * x / (safe * D**2), 0.0)
        return self._table_eval(1, x)

    def hess(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.zeros(x.shape + (3,))
        if self.kind == "herglotz":
            a = self.alpha - 1.0
            K = self.alpha * SQRT3
            r = np.linalg.norm(x, axis=-1)[..., None, None]
            safe = np.where(r > 0, r, 1.0)
            u = x[..., :, None] / safe[..., 0]
            P = u * np.swapaxes(u, -1, -2)
            D = a * r + SQRT3
            I = np.eye(3)
            H = -K * a * ((I - P) / (safe * D**2) - 2 * a * P / D**3)
            return np.where(r > 0, H, 0.0)
        return self._table_eval(2, x)

    def grad_log(self, x) -> np.ndarray:
        if self.is_flat:
            return np.zeros(np.shape(x))
        return self.grad(x) / np.asarray(self(x))[..., None]

    def hess_log(self, x) -> np.ndarray:
        c = np.asarray(self(x))[..., None, None]
        g = self.grad(x)
        return self.hess(x) / c - g[..., :, None] * g[..., None, :] / c**2

    def _table_eval(self, which: int, x: np.ndarray):
        xc = np.clip(x, -1.0, 1.0)
        flat = xc.reshape(-1, 3)
        out = self._interp[which](flat)
        if which == 0:
            return out.reshape(x.shape[:-1])[()]
        if which == 1:
            g = out.reshape(x.shape)
            # clamped directions carry no gradient
            return np.where(np.abs(x) > 1.0, 0.0, g)
        H = out.reshape(x.shape + (3,))
        outside = np.abs(x) > 1.0
        H = np.where(outside[..., :, None], 0.0, H)
        return np.where(outside[..., None, :], 0.0, H)

    def on_grid(self, grid: Grid3D) -> np.ndarray:
        if self.kind == "tabulated" and self.table.grid.n == grid.n:
            return self.table.values.copy()
        return np.asarray(self(grid.points())) * np.ones((grid.n,) * 3)

    def max_on_extended(self, n: int = 41) -> float:
        s = np.linspace(-1 - EXTENSION, 1 + EXTENSION, n)
        pts = np.stack(np.meshgrid(s, s, s, indexing="ij"), axis=-1)
        return float(np.max(self(pts)))

    def min_on_extended(self, n: int = 41) -> float:
        s = np.linspace(-1 - EXTENSION, 1 + EXTENSION, n)
        pts = np.stack(np.meshgrid(s, s, s, indexing="ij"), axis=-1)
        return float(np.min(self(pts)))


@dataclass(frozen=True)
class Nonlinearity:
    """beta(x); constant continuation outside the cube for tabulated data."""

    kind: str
    value: float = 0.0
    table: ScalarField3D | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if not np.isfinite(self.value):
                raise ConfigError("beta must be finite")
        elif self.kind == "tabulated":
            if self.table is None or not np.all(np.isfinite(self.table.values)):
                raise ConfigError("tabulated beta must be finite")
        else:
            raise ConfigError(f"unknown nonlinearity kind {self.kind!r}")

    @classmethod
    def constant(cls, b0: float) -> "Nonlinearity":
        return cls("constant", value=float(b0))

    @classmethod
    def tabulated(cls, table: ScalarField3D) -> "Nonlinearity":
        return cls("tabulated", table=table)

    @property
    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.value == 0.0
        return not np.any(self.table.values)

    def describe(self) -> dict:
        return {"kind": self.kind, "value": self.value} if self.kind == "constant" else {"kind": "tabulated"}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape[:-1], self.value)[()]
        xs = self.table.grid.x
        interp = RegularGridInterpolator((xs, xs, xs), self.table.values)
        return interp(np.clip(x, -1, 1).reshape(-1, 3)).reshape(x.shape[:-1])[()]

    def on_grid(self, grid: Grid3D) -> np.ndarray:
        if self.kind == "constant":
            return np.full((grid.n,) * 3, self.value)
        if self.table.grid.n == grid.n:
            return self.table.values.copy()
        return np.asarray(self(grid.points()))


def metric(c: SoundSpeed, x) -> np.ndarray:
    """g_ij = c^-2 delta_ij."""
    cx = np.asarray(c(x))
    return cx[..., None, None] ** -2 * np.eye(3)


def christoffel(c: SoundSpeed, x) -> np.ndarray:
    """Gamma[k, i, j] of g = c^-2 delta, from the gradient of log c."""
    d = np.asarray(c.grad_log(x), dtype=float)
    I = np.eye(3)
    return (
        -np.einsum("jk,i->kij", I, d)
        - np.einsum("ik,j->kij", I, d)
        + np.einsum("ij,k->kij", I, d)
    )


def spacetime_christoffel(c: SoundSpeed, x) -> np.ndarray:
    """Connection of -dt^2 + g; index 0 is time and every time slot vanishes."""
    G = np.zeros((4, 4, 4))
    G[1:, 1:, 1:] = christoffel(c, x)
    return G


def herglotz_check(c: SoundSpeed, samples: int = 200) -> bool:
    """True iff d/dr (r / c(r)) > 0 on a radial lattice over (0, sqrt 3]."""
    r = np.linspace(SQRT3 / samples, SQRT3, samples)
    if c.kind == "constant":
        return bool(1.0 / c.value > 0)
    if c.kind == "herglotz":
        deriv = (2 * (c.alpha - 1) * r + SQRT3) / (c.alpha * SQRT3)
        return bool(np.all(deriv > 0))
    # tabulated: require radial symmetry, then difference along the diagonal
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(16, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    rr = np.linspace(0.05, 0.95, 10)
    vals = np.array([c(np.outer(rr, d)) for d in dirs])
    ref = vals.mean(axis=0)
    if np.max(np.abs(vals - ref) / np.abs(ref)) > 0.05:
        raise DomainError("herglotz_check needs a radial sound speed")
    diag = np.ones(3) / SQRT3
    q = r / c(np.outer(r, diag))
    return bool(np.all(np.diff(q) > 0))


def sup_distance(c1: SoundSpeed, c2: SoundSpeed, grid: Grid3D, order: int = 0) -> float:
    """Sup-norm distance on the lattice; order 1 adds the gradient (C^1 norm)."""
    pts = grid.points()
    d = float(np.max(np.abs(c1(pts) - c2(pts))))
    if order >= 1:
        d = max(d, float(np.max(np.abs(c1.grad(pts) - c2.grad(pts)))))
    return d
