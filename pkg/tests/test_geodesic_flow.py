import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from westervelt_lab.errors import DomainError, NonFiniteState
from westervelt_lab.geodesics import (
    _rotation_from_x, fermi_B, fermi_frame, jacobi_for, rk4, scattering_relation,
    shoot_geodesic,
)
from westervelt_lab.fields import Grid3D
from westervelt_lab.media import SoundSpeed, christoffel, sup_distance

from conftest import HERGLOTZ_ENTRY, observed_order

def ray_box_exit(p, d):
    d = d / np.linalg.norm(d)
    ts = [(np.sign(di) - pi) / di for pi, di in zip(p, d) if abs(di) > 1e-14]
    t = min(x for x in ts if x > 1e-12)
    return p + t * d, t


def riemann_lowered(c, x, e=1e-4):
    """R_abcd of g = c^-2 delta from differences of the connection."""
    G = christoffel(c, x)
    dG = np.zeros((3, 3, 3, 3))
    for m in range(3):
        dx = np.zeros(3)
        dx[m] = e
        dG[m] = (christoffel(c, x + dx) - christoffel(c, x - dx)) / (2 * e)
    R = (np.einsum("cadb->abcd", dG) - np.einsum("dacb->abcd", dG)
         + np.einsum("ack,kdb->abcd", G, G) - np.einsum("adk,kcb->abcd", G, G))
    return float(c(x)) ** -2 * R


# ---------------------------------------------------------------- rk4


def test_rk4_exponential():
    t, x = rk4(lambda _t, y: y, np.array([1.0]), 0.0, 1.0, 1e-3)
    assert t[-1] == 1.0 and abs(x[-1, 0] - np.e) < 1e-10


def test_rk4_oscillator_energy():
    f = lambda _t, y: np.array([y[1], -y[0]])
    _, y = rk4(f, np.array([1.0, 0.0]), 0.0, 1.0, 1e-3)
    energy = 0.5 * (y[:, 0] ** 2 + y[:, 1] ** 2)
    assert len(y) == 1001 and np.max(np.abs(energy - 0.5)) < 1e-8


def test_rk4_fourth_order_and_partial_step():
    errs = []
    for h in (0.1, 0.05, 0.025):
        _, x = rk4(lambda t, y: np.cos(t) * y, np.array([1.0]), 0.0, 2.0, h)
        errs.append(abs(x[-1, 0] - np.exp(np.sin(2.0))))
    assert np.allclose(np.array(errs[:-1]) / errs[1:], 16, rtol=0.15)
    t, _ = rk4(lambda t, y: y, np.array([1.0]), 0.0, 0.35, 0.1)
    assert np.allclose(t, [0, 0.1, 0.2, 0.3, 0.35])
    t, _ = rk4(lambda t, y: y, np.array([1.0]), 1.0, 0.0, 0.3)
    assert t[-1] == 0.0 and t[1] < t[0]
    with pytest.raises(NonFiniteState), np.errstate(over="ignore", invalid="ignore"):
        rk4(lambda t, y: y**2, np.array([1.0]), 0.0, 2.0, 0.1)


# ---------------------------------------------------------------- geodesics


def test_flat_axis_geodesic(flat):
    g = shoot_geodesic(flat, [-1, 0, 0], [1, 0, 0])
    assert np.max(np.abs(g.exit_point - [1, 0, 0])) < 1e-8
    assert abs(g.length - 2.0) < 1e-8


@settings(max_examples=20)
@given(
    py=st.floats(-0.95, 0.95), pz=st.floats(-0.95, 0.95),
    dy=st.floats(-2, 2), dz=st.floats(-2, 2),
)
def test_flat_oblique_chord(py, pz, dy, dz):
    c = SoundSpeed.constant(1.0)
    p, d = np.array([-1.0, py, pz]), np.array([1.0, dy, dz])
    q, L = ray_box_exit(p, d)
    sd = scattering_relation(c, p, d)
    assert np.max(np.abs(sd.exit - q)) < 1e-8
    assert abs(sd.length - L) < 1e-8
    assert np.allclose(sd.exit_covector, d / np.linalg.norm(d), atol=1e-12)


def test_constant_speed_rescales_length():
    p, d = np.array([-1.0, 0.2, -0.1]), np.array([1.0, 0.4, 0.3])
    one = scattering_relation(SoundSpeed.constant(1.0), p, d)
    c0 = 1.6
    sd = scattering_relation(SoundSpeed.constant(c0), p, d)
    assert np.max(np.abs(sd.exit - one.exit)) < 1e-8
    assert abs(sd.length - one.length / c0) < 1e-8


def test_herglotz_self_convergence(herglotz):
    p, d = [-1, 0, 0], [1, 0.35, -0.2]
    coarse = shoot_geodesic(herglotz, p, d, h=1e-3)
    fine = shoot_geodesic(herglotz, p, d, h=1e-3 / 8)
    assert np.max(np.abs(coarse.exit_point - fine.exit_point)) < 1e-6
    assert abs(coarse.length - fine.length) < 1e-6


@settings(max_examples=12)
@given(
    a=st.floats(1.0, 2.5), py=st.floats(-0.9, 0.9), pz=st.floats(-0.9, 0.9),
    dy=st.floats(-1, 1), dz=st.floats(-1, 1),
)
def test_unit_speed_and_boundary_endpoints(a, py, pz, dy, dz):
    c = SoundSpeed.herglotz(a)
    g = shoot_geodesic(c, [-1, py, pz], [1, dy, dz])
    # c_alpha depends on |x| and is not differentiable at the origin
    assume(a == 1.0 or np.min(np.linalg.norm(g.x, axis=1)) > 5 * g.step)
    assert g.speed_defect() < 1e-6
    assert abs(np.max(np.abs(g.exit_point)) - 1) < 1e-9
    assert np.all(np.max(np.abs(g.x[:-1]), axis=1) <= 1 + 1e-9)


def test_kink_at_origin_costs_one_order():
    c = SoundSpeed.herglotz(2.0)
    d1 = shoot_geodesic(c, [-1, 0, 0], [1, 0, 0], h=1e-3).speed_defect()
    d2 = shoot_geodesic(c, [-1, 0, 0], [1, 0, 0], h=5e-4).speed_defect()
    assert d1 < 1e-3 and 1.5 < d1 / d2 < 3.0


def test_scattering_relation_lipschitz_in_alpha():
    p, d = [-1, 0.3, 0.1], [1, 0.2, 0]
    base = scattering_relation(SoundSpeed.herglotz(1.5), p, d)
    ratios = []
    for k in (2, 3, 4):
        eps = 10.0**-k
        sd = scattering_relation(SoundSpeed.herglotz(1.5 + eps), p, d)
        c0 = sup_distance(SoundSpeed.herglotz(1.5), SoundSpeed.herglotz(1.5 + eps), Grid3D(17, 1.0, 2))
        ratios.append(np.linalg.norm(sd.exit - base.exit) / c0)
    assert max(ratios) / min(ratios) < 1.2


def test_bad_entry_rejected(flat):
    with pytest.raises(DomainError):
        shoot_geodesic(flat, [0, 0, 0], [1, 0, 0])
    with pytest.raises(DomainError):
        shoot_geodesic(flat, [-1, 0, 0], [-1, 0, 0])
    with pytest.raises(DomainError):
        shoot_geodesic(flat, [-1, 0, 0], [0, 0, 0])


unit = arrays(np.float64, 3, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 1e-3)


@given(n=unit)
def test_rotation_takes_x_to_direction(n):
    n = n / np.linalg.norm(n)
    R = _rotation_from_x(n)
    assert np.allclose(R @ np.array([1.0, 0, 0]), n, atol=1e-12)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1) < 1e-12


def test_rotation_antipodal():
    R = _rotation_from_x(np.array([-1.0, 0, 0]))
    assert np.allclose(R @ [1, 0, 0], [-1, 0, 0]) and abs(np.linalg.det(R) - 1) < 1e-12


# ---------------------------------------------------------------- frames and B


def test_flat_frame_constant(flat_jacobi):
    fr = flat_jacobi.frame
    E = fr.vectors(states=fr.states)
    assert np.max(np.abs(E - E[fr.i_minus])) < 1e-14
    s2 = 1 / np.sqrt(2)
    assert np.allclose(E[0][:, 0], [s2, s2, 0, 0]) and np.allclose(E[0][:, 1], [-s2, s2, 0, 0])


def test_frame_pseudo_orthonormal(herglotz_jacobi):
    want = np.zeros((4, 4))
    want[0, 1] = want[1, 0] = want[2, 2] = want[3, 3] = 1
    assert np.max(np.abs(herglotz_jacobi.frame.gram() - want)) < 1e-6


def test_frame_self_convergence(herglotz):
    g = shoot_geodesic(herglotz, HERGLOTZ_ENTRY, [1, 0, 0])
    coarse = fermi_frame(herglotz, g, h=1e-3, ext=0.05)
    fine = fermi_frame(herglotz, g, h=1e-3 / 8, ext=0.05)
    i = coarse.i_minus + int(round((coarse.s_plus - coarse.s_minus) / 1e-3)) - 1
    s = coarse.s[i]
    j = int(round((s - fine.s_lo) / fine.h))
    assert abs(fine.s[j] - s) < 1e-9
    assert np.max(np.abs(coarse.states[i] - fine.states[j])) < 1e-6


def test_flat_B_vanishes(flat_jacobi):
    assert not np.any(flat_jacobi.B.B)


def test_B_symmetric(herglotz_jacobi):
    B = herglotz_jacobi.B.B
    assert np.max(np.abs(B - np.swapaxes(B, 1, 2))) < 1e-4


def test_B_equals_curvature_contraction(herglotz, herglotz_jacobi):
    """B_ij = R(E_i, u, E_j, u) with u the spatial part of E_0."""
    fr = herglotz_jacobi.frame
    Bp = herglotz_jacobi.B
    for target in (0.5, 1.5, 2.0):
        i = int(np.argmin(np.abs(Bp.s - (fr.s_minus + target))))
        s = Bp.s[i]
        E = fr.vectors(s)[1:, :]
        x = fr.theta(s)[1:]
        R = riemann_lowered(herglotz, x)
        K = np.einsum("abcd,ai,b,cj,d->ij", R, E[:, 1:], E[:, 0], E[:, 1:], E[:, 0])
        assert np.max(np.abs(Bp.B[i] - K)) < 2e-4 * max(1.0, np.max(np.abs(K)))
        assert np.max(np.abs(K[0])) < 1e-6


def test_B_second_order_in_expansion_step(herglotz, herglotz_jacobi):
    fr = herglotz_jacobi.frame
    g = herglotz_jacobi.frame.geodesic
    Bs = [fermi_B(herglotz, g, fr, h_z=h, ds=0.25).B for h in (0.08, 0.04, 0.02)]
    d1, d2 = np.max(np.abs(Bs[0] - Bs[1])), np.max(np.abs(Bs[1] - Bs[2]))
    assert 1.7 < np.log2(d1 / d2) < 2.3


# ---------------------------------------------------------------- Jacobi data


def test_flat_jacobi_closed_form(flat_jacobi):
    J = flat_jacobi
    ds = J.s - J.s_minus
    A = np.diag([0.0, 1, 1])
    Y_exact = np.eye(3) + 1j * ds[:, None, None] * A
    assert np.max(np.abs(J.Y - Y_exact)) < 1e-10
    assert np.max(np.abs(J.Z - 1j * np.eye(3))) < 1e-12
    H_exact = 1j * np.stack([np.diag([1, 1 / (1 + 1j * d), 1 / (1 + 1j * d)]) for d in ds])
    assert np.max(np.abs(J.H - H_exact)) < 1e-10
    assert np.max(np.abs(J.det_Y - (1 + 1j * ds) ** 2)) < 1e-8
    assert J.C_theta == 1.0


def test_herglotz_conservation_and_riccati(herglotz_jacobi):
    J = herglotz_jacobi
    inv = J.invariant()
    assert abs(J.C_theta - 1) < 1e-12
    assert np.max(np.abs(inv / J.C_theta - 1)) < 1e-6
    assert J.riccati_residual() < 1e-5
    assert np.min(np.linalg.eigvalsh(J.H.imag)) > 0
    assert np.min(np.abs(J.det_Y)) > 1e-10


@settings(max_examples=4)
@given(a=st.floats(1.0, 2.5), py=st.floats(-0.6, 0.6), dz=st.floats(-0.5, 0.5))
def test_jacobi_invariants_hold_generally(a, py, dz):
    c = SoundSpeed.herglotz(a)
    J = jacobi_for(c, shoot_geodesic(c, [-1, py, 0.1], [1, 0.2, dz]), ext=0.1)
    assert np.max(np.abs(J.invariant() - 1)) < 1e-6
    assert np.min(np.linalg.eigvalsh(J.H.imag)) > 0
