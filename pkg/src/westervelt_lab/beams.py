"""Gaussian beams of order (2,0,0) in Fermi coordinates along a null geodesic."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .errors import BranchTrackingError, ChartInversionError, DomainError, ResolutionError
from .fields import BoundaryTrace, Grid3D, SpaceTimeField
from .fits import SlopeFit, loglog_fit
from .geodesics import A_MATRIX, Geodesic, JacobiData
from .media import SoundSpeed

# sixth-order central second derivative
D2_6 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
# fourth-order central first derivative, offsets -2..2
D1_4 = np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])


def smooth_cutoff(r, rho: float):
    """C-infinity step: 1 for r <= rho/2, 0 for r >= rho."""
    u = np.clip((np.asarray(r, dtype=float) - 0.5 * rho) / (0.5 * rho), 0.0, 1.0)

    def psi(x):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)

    a, b = psi(1.0 - u), psi(u)
    return a / (a + b)


class FermiChart:
    """Chart (s, z) -> (t, x) around theta, with its inverse and beam data."""

    def __init__(self, c: SoundSpeed, geodesic: Geodesic, jacobi: JacobiData, rho_max: float):
        self.c = c
        self.geodesic = geodesic
        self.jacobi = jacobi
        self.frame = jacobi.frame
        self.rho_max = rho_max
        fr = self.frame
        self._nodes = np.concatenate([fr.s[:, None] / np.sqrt(2), fr.states[:, :3]], axis=1)
        self._tree = cKDTree(self._nodes)
        self._E = fr.vectors(states=fr.states)
        H = jacobi.H
        self._H = CubicSpline(jacobi.s, H, axis=0)
        self._imHinv = CubicSpline(jacobi.s, np.linalg.inv(H.imag), axis=0)
        self.log_amp_nodes = self._log_amplitude()
        self._logA = CubicSpline(jacobi.s, self.log_amp_nodes)

    def _log_amplitude(self) -> np.ndarray:
        j = self.jacobi
        dY = j.det_Y
        ang = np.angle(dY)
        im = j.frame.i_minus
        steps = np.diff(ang)
        wrapped = (steps + np.pi) % (2 * np.pi) - np.pi
        if np.max(np.abs(wrapped)) > np.pi / 2:
            raise BranchTrackingError("arg det Y jumps by more than pi/2 between samples")
        arg = np.concatenate([[0.0], np.cumsum(wrapped)])
        arg = arg - arg[im] + ang[im]
        logdet = np.log(np.abs(dY)) + 1j * arg
        cp = float(self.c(self.geodesic.p))
        ct = np.asarray(self.c(self.frame.states[:, :3]))
        return 0.5 * np.log(cp) - 0.5 * np.log(ct) - 0.5 * logdet

    # --- chart data along s

    @property
    def s_lo(self) -> float:
        return self.frame.s_lo

    @property
    def s_hi(self) -> float:
        return self.frame.s_hi

    def H(self, s) -> np.ndarray:
        return self._H(s)

    def log_amplitude(self, s) -> np.ndarray:
        return self._logA(s)

    def amplitude(self, s) -> np.ndarray:
        return np.exp(self._logA(s))

    def widths(self, s, tau: float) -> np.ndarray:
        """Marginal standard deviations of |exp(i tau phi)|^2 in each z direction."""
        d = np.einsum("...ii->...i", self._imHinv(s))
        return np.sqrt(np.maximum(d, 0.0) / (2.0 * tau))

    def coframe(self, s) -> np.ndarray:
        """Rows ds, dz1, dz2, dz3 at theta(s) as (t, x) covectors."""
        return np.linalg.inv(self.frame.vectors(s))

    # --- maps

    def forward(self, s, z) -> np.ndarray:
        return self.frame.chart_map(s, z)

    def jac_det(self, s, z) -> np.ndarray:
        return np.abs(np.linalg.det(self.frame.chart_jacobian(s, z)))

    def inverse(self, P, radius: float | None = None, tol: float = 1e-12, max_iter: int = 30):
        """(s, z, found) for points P (..., 4); found marks points in the chart range.

        Points whose linearized guess lies further than 1.5 * radius from theta
        are not refined and reported as not found.
        """
        P = np.asarray(P, dtype=float)
        shp = P.shape[:-1]
        P = P.reshape(-1, 4)
        radius = self.rho_max if radius is None else radius
        if self.c.is_flat:
            # theta is a straight line and the frame is constant
            k = np.full(P.shape[0], self.frame.i_minus)
        else:
            _, k = self._tree.query(P)
        sol = np.linalg.solve(self._E[k], (P - self._nodes[k])[..., None])[..., 0]
        s = self.frame.s[k] + sol[:, 0]
        z = sol[:, 1:]
        found = (np.linalg.norm(z, axis=1) <= 1.5 * radius) & (s >= self.s_lo) & (s <= self.s_hi)
        if not self.c.is_flat and np.any(found):
            idx = np.nonzero(found)[0]
            ss, zz, pp = s[idx], z[idx], P[idx]
            active = np.ones(idx.size, bool)
            for _ in range(max_iter):
                a = np.nonzero(active)[0]
                if a.size == 0:
                    break
                r = self.forward(ss[a], zz[a]) - pp[a]
                done = np.max(np.abs(r), axis=1) < tol
                active[a[done]] = False
                a, r = a[~done], r[~done]
                if a.size == 0:
                    break
                J = self.frame.chart_jacobian(ss[a], zz[a])
                d = np.linalg.solve(J, r[..., None])[..., 0]
                ss[a] = np.clip(ss[a] - d[:, 0], self.s_lo, self.s_hi)
                zz[a] = zz[a] - d[:, 1:]
            bad = active & (np.linalg.norm(zz, axis=1) < radius)
            if np.any(bad):
                raise ChartInversionError(f"Newton failed at {int(bad.sum())} points inside the tube")
            s[idx], z[idx] = ss, zz
            found[idx] = ~active
        return s.reshape(shp), z.reshape(shp + (3,)), found.reshape(shp)


def build_chart(
    c: SoundSpeed, geodesic: Geodesic, jacobi: JacobiData, rho_start: float = 0.25,
    rho_min: float = 1e-3, tol: float = 1e-6,
) -> FermiChart:
    """Chart whose radius is halved from rho_start until round trips pass."""
    rho = rho_start
    fr = jacobi.frame
    s_test = np.linspace(fr.s_minus, fr.s_plus, 7)
    dirs = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1], [-1, 1, -1], [0, -1, 1]], float)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    while rho >= rho_min:
        chart = FermiChart(c, geodesic, jacobi, rho)
        if c.is_flat:
            return chart
        Z = np.concatenate([0.9 * rho * dirs, -0.9 * rho * dirs, 0.45 * rho * dirs])
        S = np.repeat(s_test, len(Z))
        ZZ = np.tile(Z, (len(s_test), 1))
        try:
            P = chart.forward(S, ZZ)
            s2, z2, ok = chart.inverse(P, radius=rho)
            err = max(np.max(np.abs(s2 - S)), np.max(np.abs(z2 - ZZ)))
            if np.all(ok) and err < tol:
                return chart
        except (ChartInversionError, DomainError, np.linalg.LinAlgError):
            pass
        rho *= 0.5
    raise ChartInversionError("chart inversion failed at every tested radius")


def amplitude(chart: FermiChart):
    """(s, A0(s)) on the Jacobi grid."""
    return chart.jacobi.s, np.exp(chart.log_amp_nodes)


@dataclass(frozen=True)
class GaussianBeam:
    chart: FermiChart
    tau: float
    rho: float
    multiplier: float = 1.0
    conjugate: bool = False

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if not 0 < self.rho <= self.chart.rho_max + 1e-15:
            raise ValueError(f"rho must lie in (0, {self.chart.rho_max}]")

    @property
    def frequency(self) -> float:
        return self.multiplier * self.tau

    def partner(self) -> "GaussianBeam":
        """The measurement beam: conjugated, doubled frequency."""
        return replace(self, multiplier=2.0 * self.multiplier, conjugate=not self.conjugate)

    def phase(self, s, z) -> np.ndarray:
        H = self.chart.H(s)
        return z[..., 0] + 0.5 * np.einsum("...i,...ij,...j->...", z, H, z)

    def eval_sz(self, s, z) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        chi = smooth_cutoff(np.linalg.norm(z, axis=-1), self.rho)
        val = chi * np.exp(self.chart.log_amplitude(s) + 1j * self.frequency * self.phase(s, z))
        return np.conj(val) if self.conjugate else val

    def eval_points(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        s, z, found = self.chart.inverse(P, radius=self.rho)
        out = np.zeros(P.shape[:-1], dtype=complex)
        inside = found & (np.linalg.norm(z, axis=-1) < self.rho)
        if np.any(inside):
            out[inside] = self.eval_sz(s[inside], z[inside])
        return out


def make_beam(chart: FermiChart, tau: float, rho: float | None = None) -> GaussianBeam:
    return GaussianBeam(chart, float(tau), chart.rho_max if rho is None else float(rho))


def beam_eval(beam: GaussianBeam, t, x) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    P = np.concatenate([np.broadcast_to(t[..., None], x.shape[:-1] + (1,)), x], axis=-1)
    return beam.eval_points(P)


def _chunked(func, P, chunk=200_000):
    flat = P.reshape(-1, 4)
    out = np.empty(flat.shape[0], dtype=complex)
    for a in range(0, flat.shape[0], chunk):
        out[a:a + chunk] = func(flat[a:a + chunk])
    return out.reshape(P.shape[:-1])


def beam_to_field(beam: GaussianBeam, grid: Grid3D) -> SpaceTimeField:
    X = grid.points()
    P = np.empty((grid.n_t,) + X.shape[:-1] + (4,))
    P[..., 0] = grid.t[:, None, None, None]
    P[..., 1:] = X
    return SpaceTimeField(grid, _chunked(beam.eval_points, P))


def beam_boundary_trace(beam: GaussianBeam, grid: Grid3D) -> BoundaryTrace:
    X = grid.boundary_points()
    P = np.empty((grid.n_t,) + X.shape[:-1] + (4,))
    P[..., 0] = grid.t[:, None, None, None]
    P[..., 1:] = X
    return BoundaryTrace(grid, _chunked(beam.eval_points, P))


# ---------------------------------------------------------------- tube quadrature


@dataclass(frozen=True)
class TubeQuadrature:
    """Nodes and weights for integrals over M of functions supported near theta.

    z = L(s) * zeta with zeta on a Gauss-Legendre cube, L_i = min(rho, 6 sigma_i),
    and for every zeta the s-range whose image lies in [0,T] x [-1,1]^3.
    """

    s: np.ndarray
    z: np.ndarray
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, beam: GaussianBeam, T: float, n_z: int = 20, n_s: int = 32, n_scan: int = 160,
              width: float = 6.0):
        chart = beam.chart
        gz, wz = np.polynomial.legendre.leggauss(n_z)
        gs, ws = np.polynomial.legendre.leggauss(n_s)
        Zeta = np.stack(np.meshgrid(gz, gz, gz, indexing="ij"), axis=-1).reshape(-1, 3)
        Wz = np.einsum("i,j,k->ijk", wz, wz, wz).ravel()
        tau = beam.frequency

        def scale(s):
            return np.minimum(beam.rho, width * chart.widths(s, tau))

        def dist(s, zeta):
            p = chart.forward(s, scale(s) * zeta)
            return np.maximum(np.max(np.abs(p[..., 1:]), axis=-1) - 1.0,
                              np.maximum(-p[..., 0], p[..., 0] - T))

        scan = np.linspace(chart.s_lo, chart.s_hi, n_scan)
        S = np.broadcast_to(scan, (Zeta.shape[0], n_scan))
        D = dist(S, Zeta[:, None, :])
        inside = D <= 0
        has = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        last = n_scan - 1 - np.argmax(inside[:, ::-1], axis=1)
        keep = np.nonzero(has)[0]
        Zeta, Wz, first, last = Zeta[keep], Wz[keep], first[keep], last[keep]

        def refine(i_in, i_out):
            a = scan[i_in].copy()
            b = scan[np.clip(i_out, 0, n_scan - 1)].copy()
            edge = (i_out < 0) | (i_out >= n_scan)
            b[edge] = a[edge]
            for _ in range(45):
                m = 0.5 * (a + b)
                dm = dist(m, Zeta)
                ins = dm <= 0
                a = np.where(ins, m, a)
                b = np.where(ins, b, m)
            return a

        lo = refine(first, first - 1)
        hi = refine(last, last + 1)
        L = hi - lo
        s_nodes = lo[:, None] + 0.5 * L[:, None] * (gs[None, :] + 1.0)
        w_s = 0.5 * L[:, None] * ws[None, :]
        z_nodes = scale(s_nodes) * Zeta[:, None, :]
        jac = np.prod(scale(s_nodes), axis=-1) * chart.jac_det(s_nodes, z_nodes)
        weights = (Wz[:, None] * w_s * jac).ravel()
        s_nodes = s_nodes.ravel()
        z_nodes = z_nodes.reshape(-1, 3)
        pts = chart.forward(s_nodes, z_nodes)
        return cls(s_nodes, z_nodes, pts, weights)

    def integrate(self, values) -> complex:
        return np.sum(self.weights * values)


def beam_l2(beam: GaussianBeam, T: float, quad: TubeQuadrature | None = None) -> float:
    q = quad or TubeQuadrature.build(beam, T)
    return float(np.sqrt(q.integrate(np.abs(beam.eval_sz(q.s, q.z)) ** 2).real))


def beam_c0(beam: GaussianBeam, T: float, quad: TubeQuadrature | None = None) -> float:
    """Sup of |v| over the tube nodes and over theta itself."""
    q = quad or TubeQuadrature.build(beam, T)
    fr = beam.chart.frame
    s_axis = np.linspace(fr.s_minus, fr.s_plus, 401)
    th = fr.theta(s_axis)
    on_axis = (th[:, 0] >= 0) & (th[:, 0] <= T)
    axis_vals = np.abs(beam.eval_sz(s_axis[on_axis], np.zeros((on_axis.sum(), 3))))
    return float(max(np.max(np.abs(beam.eval_sz(q.s, q.z))), np.max(axis_vals, initial=0.0)))


def tube_mass_fraction(beam: GaussianBeam, T: float, radius: float, quad=None) -> float:
    q = quad or TubeQuadrature.build(beam, T)
    m = np.abs(beam.eval_sz(q.s, q.z)) ** 2 * q.weights
    inner = np.linalg.norm(q.z, axis=1) < radius
    return float(m[inner].sum() / m.sum())


def wave_operator(func, c: SoundSpeed, P: np.ndarray, h: float) -> np.ndarray:
    """(-d_t^2 + c^2 Laplacian) of ``func`` at points P by sixth-order differences."""
    c2 = np.asarray(c(P[:, 1:])) ** 2
    offs = np.arange(-3, 4) * h
    out = np.zeros(P.shape[0], dtype=complex)
    centre = func(P)
    for axis in range(4):
        acc = D2_6[3] * centre
        for j, o in enumerate(offs):
            if j == 3:
                continue
            Q = P.copy()
            Q[:, axis] += o
            acc = acc + D2_6[j] * func(Q)
        acc = acc / h**2
        out += -acc if axis == 0 else c2 * acc
    return out


def apply_P(beam: GaussianBeam, P: np.ndarray, h: float) -> np.ndarray:
    return wave_operator(beam.eval_points, beam.chart.c, P, h)


def residual_norm(
    beam: GaussianBeam, T: float, h: float | None = None, quad=None,
    check: bool = True, rtol: float = 1e-2, chunk: int = 50_000,
) -> float:
    """||P v||_{L2(M)} with a step-halving resolution guard."""
    q = quad or TubeQuadrature.build(beam, T)
    h = 1.0 / (10.0 * beam.frequency) if h is None else h

    def norm(step):
        tot = 0.0
        for a in range(0, q.points.shape[0], chunk):
            r = apply_P(beam, q.points[a:a + chunk], step)
            tot += float(np.sum(q.weights[a:a + chunk] * np.abs(r) ** 2))
        return np.sqrt(tot)

    n1 = norm(h)
    if check:
        n2 = norm(0.5 * h)
        if abs(n1 - n2) > rtol * max(n2, 1e-300):
            raise ResolutionError(f"residual changes by {abs(n1 - n2) / n2:.2e} under step halving")
    return n1


def residual_scaling(beams, T: float, **kw) -> tuple[list[float], SlopeFit]:
    norms = [residual_norm(b, T, **kw) for b in beams]
    return norms, loglog_fit([b.tau for b in beams], norms)


def time_derivative_at(beam: GaussianBeam, P: np.ndarray, h: float, square: bool = False):
    """d_t of the beam (or of its square) at P, fourth-order central differences."""
    acc = np.zeros(P.shape[0], dtype=complex)
    for j, o in enumerate(np.arange(-2, 3) * h):
        if j == 2:
            continue
        Q = P.copy()
        Q[:, 0] += o
        v = beam.eval_points(Q)
        acc += D1_4[j] * (v * v if square else v)
    return acc / h


def transport_residual(chart: FermiChart) -> float:
    """max |2 A' + (tr(A H) + (log c)') A| on interior nodes of theta."""
    j = chart.jacobi
    s = j.s
    A0 = np.exp(chart.log_amp_nodes)
    h = s[1] - s[0]
    dA = (A0[2:] - A0[:-2]) / (2 * h)
    lc = np.log(np.asarray(chart.c(chart.frame.states[:, :3])))
    dlc = (lc[2:] - lc[:-2]) / (2 * h)
    trAH = np.einsum("ij,sji->s", A_MATRIX, j.H[1:-1])
    return float(np.max(np.abs(2 * dA + (trAH + dlc) * A0[1:-1])))


def chart_for(
    c: SoundSpeed, p, direction, t_minus: float = 1.0, rho: float = 0.25,
    h: float = 1e-3, ext: float | None = None,
) -> FermiChart:
    """Geodesic, frame, Jacobi data and chart for one entry covector."""
    from .geodesics import jacobi_for, shoot_geodesic

    geo = shoot_geodesic(c, p, direction, h, t_minus)
    ext = 0.5 + min(rho, 1.0) if ext is None else ext
    jac = jacobi_for(c, geo, h=h, ext=ext)
    return build_chart(c, geo, jac, rho_start=max(rho, 0.25) if not c.is_flat else rho)
