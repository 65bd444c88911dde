"""Geodesics of g = c^-2 delta, Fermi frames along their null lifts, and the
complex Jacobi/Riccati system carried by a Gaussian beam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DomainError,
    FrameDegeneracyError,
    JacobiDegeneracyError,
    NonFiniteState,
    TrappedRayError,
)
from .media import SQRT3, SoundSpeed

SQRT2 = np.sqrt(2.0)
A_MATRIX = np.diag([0.0, 1.0, 1.0])


# ---------------------------------------------------------------- integrator


def rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4(f, x0, t0: float, t1: float, h: float):
    """Fixed-step classical RK4 from t0 to t1 (either direction).

    The last step is shortened to land on t1.  Returns (times, states).
    """
    if not h > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x0)
    span = t1 - t0
    n_full = int(np.floor(abs(span) / h + 1e-12))
    sgn = 1.0 if span >= 0 else -1.0
    ts = [t0]
    xs = [x]
    t = t0
    for k in range(n_full):
        x = rk4_step(f, t, x, sgn * h)
        t = t0 + sgn * h * (k + 1)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"non-finite state at t={t}")
        ts.append(t)
        xs.append(x)
    rest = t1 - t
    if abs(rest) > 1e-14 * max(1.0, abs(span)):
        x = rk4_step(f, t, x, rest)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"non-finite state at t={t1}")
        ts.append(t1)
        xs.append(x)
    return np.array(ts), np.array(xs)


# ---------------------------------------------------------------- geodesics


def _dot(a, b):
    return (a * b).sum(axis=-1, keepdims=True)


def _accel(d, v):
    return 2.0 * _dot(d, v) * v - _dot(v, v) * d


def geodesic_accel(c: SoundSpeed, x, v):
    """-Gamma(v, v) for g = c^-2 delta: 2 (d.v) v - |v|^2 d with d = grad log c."""
    return _accel(c.grad_log(x), v)


def _connection(d, u, w):
    """Gamma(u, w) contracted, for d = grad log c."""
    return -_dot(d, u) * w - _dot(d, w) * u + _dot(u, w) * d


@dataclass(frozen=True)
class Geodesic:
    """Unit-speed geodesic sampled on a fixed step, entry at t_minus."""

    c: SoundSpeed
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    step: float

    @property
    def p(self) -> np.ndarray:
        return self.x[0]

    @property
    def t_minus(self) -> float:
        return float(self.t[0])

    @property
    def t_plus(self) -> float:
        return float(self.t[-1])

    @property
    def length(self) -> float:
        return self.t_plus - self.t_minus

    @property
    def exit_point(self) -> np.ndarray:
        return self.x[-1]

    @property
    def direction(self) -> np.ndarray:
        v0 = self.v[0]
        return v0 / np.linalg.norm(v0)

    def speed_defect(self) -> float:
        """max |<v, v>_g - 1| over the samples."""
        cx = np.asarray(self.c(self.x))
        return float(np.max(np.abs(np.sum(self.v**2, axis=1) / cx**2 - 1.0)))


@dataclass(frozen=True)
class ScatteringDatum:
    entry: np.ndarray
    entry_covector: np.ndarray
    exit: np.ndarray
    exit_covector: np.ndarray
    length: float


def _outside(x) -> float:
    return float(np.max(np.abs(x))) - 1.0


def shoot_geodesic(
    c: SoundSpeed, p, direction, h: float = 1e-3, t_minus: float = 0.0
) -> Geodesic:
    """Integrate from p in the given (inward) direction until the cube is left.

    The direction is rescaled to unit g-speed, |v| = c(p).
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(direction, dtype=float)
    if abs(_outside(p)) > 1e-9:
        raise DomainError("entry point must lie on the boundary of the cube")
    nd = np.linalg.norm(d)
    if nd == 0:
        raise DomainError("zero direction")
    v0 = d / nd * float(c(p))
    # inward: a short step must stay inside
    if _outside(p + 1e-7 * d / nd) > 0:
        raise DomainError("direction is not inward-pointing at the entry point")

    def f(_t, y):
        return np.concatenate([y[3:], geodesic_accel(c, y[:3], y[3:])])

    limit = 10.0 * 2.0 * SQRT3 * (1.0 / c.min_on_extended(9))
    y = np.concatenate([p, v0])
    t = t_minus
    ts, ys = [t], [y]
    while True:
        y_new = rk4_step(f, t, y, h)
        if not np.all(np.isfinite(y_new)):
            raise NonFiniteState(f"non-finite geodesic state at t={t + h}")
        if _outside(y_new[:3]) > 0 and t > t_minus:
            lo, hi = 0.0, h
            while hi - lo > 1e-10:
                mid = 0.5 * (lo + hi)
                if _outside(rk4_step(f, t, y, mid)[:3]) > 0:
                    hi = mid
                else:
                    lo = mid
            y_exit = rk4_step(f, t, y, lo)
            ts.append(t + lo)
            ys.append(y_exit)
            break
        if t == t_minus and _outside(y_new[:3]) > 0:
            raise DomainError("geodesic leaves the cube immediately")
        t += h
        y = y_new
        ts.append(t)
        ys.append(y)
        if t - t_minus > limit:
            raise TrappedRayError(f"no exit after g-length {limit:.3g}")
    ys = np.array(ys)
    return Geodesic(c, np.array(ts), ys[:, :3], ys[:, 3:], h)


def scattering_relation(c: SoundSpeed, p, direction, h: float = 1e-3) -> ScatteringDatum:
    geo = shoot_geodesic(c, p, direction, h)
    cp = float(c(geo.p))
    cq = float(c(geo.exit_point))
    return ScatteringDatum(
        entry=geo.p,
        entry_covector=geo.v[0] / cp**2,
        exit=geo.exit_point,
        exit_covector=geo.v[-1] / cq**2,
        length=geo.length,
    )


# ---------------------------------------------------------------- Fermi frame


def _rotation_from_x(n: np.ndarray) -> np.ndarray:
    """Rotation matrix taking e_x to the unit vector n (Rodrigues)."""
    ex = np.array([1.0, 0.0, 0.0])
    k = np.cross(ex, n)
    s = np.linalg.norm(k)
    cth = float(np.dot(ex, n))
    if s < 1e-14:
        if cth > 0:
            return np.eye(3)
        return np.diag([-1.0, -1.0, 1.0])
    k /= s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - cth) * K @ K


class FermiFrame:
    """Parallel pseudo-orthonormal frame along theta(s) = (s / sqrt 2, gamma).

    E0 = (1, gamma')/sqrt 2 and E1 = (-1, gamma')/sqrt 2 are tied to the
    tangent, so only the spatial parts of E2 and E3 are transported.  The
    state per node is (x, v, E2, E3) with v the unit-g-speed velocity.
    """

    def __init__(self, c: SoundSpeed, geodesic: Geodesic, h: float = 1e-3, ext: float = 0.5):
        self.c = c
        self.geodesic = geodesic
        self.h = h
        self.ext = ext
        self.s_minus = SQRT2 * geodesic.t_minus
        self.s_plus = SQRT2 * geodesic.t_plus
        n = geodesic.direction
        R = _rotation_from_x(n)
        cp = float(c(geodesic.p))
        y0 = np.concatenate([geodesic.p, cp * n, cp * R[:, 1], cp * R[:, 2]])
        k_lo = int(np.ceil(ext / h))
        k_hi = int(np.ceil((self.s_plus - self.s_minus + ext) / h))
        _, back = rk4(self.rhs, y0, self.s_minus, self.s_minus - k_lo * h, h)
        _, fwd = rk4(self.rhs, y0, self.s_minus, self.s_minus + k_hi * h, h)
        self.states = np.concatenate([back[::-1], fwd[1:]])
        self.s = self.s_minus + h * np.arange(-k_lo, k_hi + 1)
        self.i_minus = k_lo
        self.check_orthonormality(1e-5)

    def rhs(self, _s, y):
        x, v = y[..., 0:3], y[..., 3:6]
        u = v / SQRT2
        if self.c.is_flat:
            return np.concatenate([u, np.zeros(y.shape[:-1] + (9,))], axis=-1)
        W = y[..., 6:12].reshape(y.shape[:-1] + (2, 3))
        d = self.c.grad_log(x)
        conn = (-_dot(d, u)[..., None] * W - (W @ d[..., None]) * u[..., None, :]
                + (W @ u[..., None]) * d[..., None, :])
        return np.concatenate(
            [u, _accel(d, v) / SQRT2, -conn.reshape(y.shape[:-1] + (6,))], axis=-1
        )

    @property
    def s_lo(self) -> float:
        return float(self.s[0])

    @property
    def s_hi(self) -> float:
        return float(self.s[-1])

    def state_at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s < self.s_lo - 1e-12) or np.any(s > self.s_hi + 1e-12):
            raise DomainError("s outside the frame's range")
        k = np.clip(np.floor((s - self.s_lo) / self.h).astype(int), 0, len(self.s) - 2)
        delta = (s - self.s[k])[..., None]
        y = self.states[k]
        return rk4_step(self.rhs, 0.0, y, delta)

    def theta(self, s) -> np.ndarray:
        """Null curve (t, x) at s."""
        y = self.state_at(s)
        t = np.asarray(s, dtype=float)[..., None] / SQRT2
        return np.concatenate([t, y[..., 0:3]], axis=-1)

    def vectors(self, s=None, states=None) -> np.ndarray:
        """Frame matrix with columns E0..E3 as (t, x) vectors, shape (..., 4, 4)."""
        y = self.state_at(s) if states is None else states
        v = y[..., 3:6] / SQRT2
        shp = y.shape[:-1]
        E = np.zeros(shp + (4, 4))
        E[..., 0, 0] = 1 / SQRT2
        E[..., 0, 1] = -1 / SQRT2
        E[..., 1:, 0] = v
        E[..., 1:, 1] = v
        E[..., 1:, 2] = y[..., 6:9]
        E[..., 1:, 3] = y[..., 9:12]
        return E

    def gram(self, states=None) -> np.ndarray:
        y = self.states if states is None else states
        E = self.vectors(states=y)
        cx = np.asarray(self.c(y[..., 0:3]))
        G = np.zeros(y.shape[:-1] + (4, 4))
        G[..., 0, 0] = -1.0
        idx = np.arange(1, 4)
        G[..., idx, idx] = cx[..., None] ** -2
        return np.swapaxes(E, -1, -2) @ G @ E

    def check_orthonormality(self, tol: float) -> float:
        target = np.array(
            [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float
        )
        err = float(np.max(np.abs(self.gram() - target)))
        if err > tol:
            raise FrameDegeneracyError(f"frame pseudo-orthonormality defect {err:.2e}")
        return err

    # --- chart map F(s, z) = exp_theta(s)(z^i E_i(s))

    def chart_map(self, s, z, steps: int = 8) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        y = self.state_at(s)
        E = self.vectors(states=y)
        V = np.einsum("...mi,...i->...m", E[..., 1:], z)
        t = s / SQRT2 + V[..., 0]
        x0 = y[..., 0:3]
        if self.c.is_flat:
            x = x0 + V[..., 1:]
        else:
            x = self._exp(x0, V[..., 1:], steps)
        return np.concatenate([t[..., None], x], axis=-1)

    def _exp(self, x0, w0, steps):
        c = self.c

        def f(_l, y):
            return np.concatenate([y[..., 3:], geodesic_accel(c, y[..., :3], y[..., 3:])], axis=-1)

        y = np.concatenate([x0, w0], axis=-1)
        for k in range(steps):
            y = rk4_step(f, k / steps, y, 1.0 / steps)
        return y[..., :3]

    def chart_jacobian(self, s, z, delta: float = 1e-5) -> np.ndarray:
        """dF with respect to (s, z1, z2, z3) by central differences, (..., 4, 4)."""
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        cols = []
        for m in range(4):
            if m == 0:
                fp = self.chart_map(s + delta, z)
                fm = self.chart_map(s - delta, z)
            else:
                dz = np.zeros(3)
                dz[m - 1] = delta
                fp = self.chart_map(s, z + dz)
                fm = self.chart_map(s, z - dz)
            cols.append((fp - fm) / (2 * delta))
        return np.stack(cols, axis=-1)

    def pulled_metric(self, s, z, delta: float = 1e-5) -> np.ndarray:
        J = self.chart_jacobian(s, z, delta)
        p = self.chart_map(s, z)
        cx = np.asarray(self.c(p[..., 1:]))
        G = np.zeros(p.shape[:-1] + (4, 4))
        G[..., 0, 0] = -1.0
        idx = np.arange(1, 4)
        G[..., idx, idx] = cx[..., None] ** -2
        return np.swapaxes(J, -1, -2) @ G @ J


def fermi_frame(c: SoundSpeed, geodesic: Geodesic, h: float = 1e-3, ext: float = 0.5) -> FermiFrame:
    return FermiFrame(c, geodesic, h, ext)


# ---------------------------------------------------------------- B and Jacobi


@dataclass(frozen=True)
class BProfile:
    """Second-order coefficient matrices B(s) on a coarse s lattice."""

    s: np.ndarray
    B: np.ndarray
    frame: FermiFrame

    def spline(self):
        if not np.any(self.B):
            return lambda s: np.zeros(np.shape(s) + (3, 3))
        return CubicSpline(self.s, self.B, axis=0)


def _stencil_offsets(h):
    pts = [np.zeros(3)]
    for i in range(3):
        e = np.eye(3)[i]
        pts += [h * e, -h * e]
    for i in range(3):
        for j in range(i + 1, 3):
            ei, ej = np.eye(3)[i], np.eye(3)[j]
            for a in (1, -1):
                for b in (1, -1):
                    pts.append(h * (a * ei + b * ej))
    return np.array(pts)


def fermi_B(
    c: SoundSpeed,
    geodesic: Geodesic,
    frame: FermiFrame,
    h_z: float = 0.01,
    ds: float = 0.02,
    delta: float = 1e-5,
) -> BProfile:
    """Coefficient of z^i z^j in the z1-z1 entry of the inverse pulled-back metric.

    That entry vanishes to first order on the null curve, and its quadratic
    part is the matrix B driving the Riccati equation H' + HAH + B = 0.
    The 19-point stencil {0, +-h e_i, +-h e_i +- h e_j} gives second-order
    central differences; the result is Hessian / 2.
    """
    n_s = int(np.ceil((frame.s_hi - frame.s_lo) / ds)) + 1
    s = np.linspace(frame.s_lo, frame.s_hi, n_s)
    if c.is_flat:
        return BProfile(s, np.zeros((n_s, 3, 3)), frame)
    # keep FD stencils in s inside the frame range
    s_eval = np.clip(s, frame.s_lo + 2 * delta, frame.s_hi - 2 * delta)
    off = _stencil_offsets(h_z)
    S = np.repeat(s_eval[:, None], len(off), axis=1)
    Z = np.broadcast_to(off, (n_s,) + off.shape)
    G = frame.pulled_metric(S, Z, delta)
    ginv = np.linalg.inv(G)[..., 1, 1]
    f0 = ginv[:, 0]
    H = np.empty((n_s, 3, 3))
    for i in range(3):
        H[:, i, i] = (ginv[:, 1 + 2 * i] - 2 * f0 + ginv[:, 2 + 2 * i]) / h_z**2
    k = 7
    for i in range(3):
        for j in range(i + 1, 3):
            pp, pm, mp, mm = ginv[:, k], ginv[:, k + 1], ginv[:, k + 2], ginv[:, k + 3]
            H[:, i, j] = H[:, j, i] = (pp - pm - mp + mm) / (4 * h_z**2)
            k += 4
    return BProfile(s, 0.5 * H, frame)


@dataclass(frozen=True)
class JacobiData:
    frame: FermiFrame
    s: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    B: BProfile
    C_theta: float

    @property
    def s_minus(self) -> float:
        return self.frame.s_minus

    @property
    def s_plus(self) -> float:
        return self.frame.s_plus

    @property
    def H(self) -> np.ndarray:
        return self.Z @ np.linalg.inv(self.Y)

    @property
    def det_Y(self) -> np.ndarray:
        return np.linalg.det(self.Y)

    def invariant(self) -> np.ndarray:
        """det(Im H) |det Y|^2 along s."""
        return np.linalg.det(self.H.imag) * np.abs(self.det_Y) ** 2

    def riccati_residual(self) -> float:
        """max |H' + HAH + B| with H' by central differences on the s grid."""
        H = self.H
        dH = (H[2:] - H[:-2]) / (2 * self.frame.h)
        Bs = self.B.spline()(self.s[1:-1])
        R = dH + H[1:-1] @ A_MATRIX @ H[1:-1] + Bs
        return float(np.max(np.abs(R)))


def jacobi_Y(c: SoundSpeed, geodesic: Geodesic, B: BProfile) -> JacobiData:
    """Solve Y' = AZ, Z' = -BY from Y = I, Z = iI at s_minus, both directions."""
    frame = B.frame
    Bf = B.spline()

    flat = not np.any(B.B)

    def f(s, y):
        AZ = y[9:].copy()
        AZ[:3] = 0.0
        if flat:
            return np.concatenate([AZ, np.zeros(9, dtype=y.dtype)])
        Bs = np.asarray(Bf(s))
        Bs = 0.5 * (Bs + Bs.T)
        return np.concatenate([AZ, (-Bs @ y[:9].reshape(3, 3)).ravel()])

    y0 = np.concatenate([np.eye(3, dtype=complex).ravel(), 1j * np.eye(3).ravel()])
    h = frame.h
    s_m = frame.s_minus
    _, back = rk4(f, y0, s_m, frame.s_lo, h)
    _, fwd = rk4(f, y0, s_m, frame.s_hi, h)
    ys = np.concatenate([back[::-1], fwd[1:]])
    Y = ys[:, :9].reshape(-1, 3, 3)
    Z = ys[:, 9:].reshape(-1, 3, 3)
    dY = np.abs(np.linalg.det(Y))
    if np.min(dY) < 1e-10:
        raise JacobiDegeneracyError(f"|det Y| dropped to {np.min(dY):.2e}")
    H0 = Z[frame.i_minus] @ np.linalg.inv(Y[frame.i_minus])
    C = float(np.linalg.det(H0.imag) * abs(np.linalg.det(Y[frame.i_minus])) ** 2)
    return JacobiData(frame, frame.s.copy(), Y, Z, B, C)


def jacobi_for(
    c: SoundSpeed, geodesic: Geodesic, h: float = 1e-3, ext: float = 0.5,
    h_z: float = 0.01, ds: float = 0.02,
) -> JacobiData:
    """Frame, B and Jacobi data for a geodesic in one call."""
    frame = fermi_frame(c, geodesic, h, ext)
    return jacobi_Y(c, geodesic, fermi_B(c, geodesic, frame, h_z, ds))
