import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vocfrt.oscillator import (AmplitudeCollapse, OscState, VocParams, c_osc_for_droop,
                               droop_residual, i_dvoc_ref, pair_power, voc_derivative,
                               voc_rhs)

VN = 400 * np.sqrt(2)
WN = 2 * np.pi * 50
C = c_osc_for_droop(0.05, 15e3, VN, WN)
P = VocParams(omega_n=WN, V_n=VN, C_osc=C, xi=100 / VN ** 2, P_ref=9e3, Q_ref=0.0)


def rhs(v, fb, p=P):
    return voc_rhs(complex(v), complex(fb), p.omega_n, p.V_n, p.k_v, p.k_i, p.C_osc,
                   p.xi, p.P_ref, p.Q_ref, p.eps)


def test_c_osc_oracle():
    assert C == pytest.approx(9.947183943243458e-4, rel=1e-12)
    assert P.coupling == pytest.approx(335.1032163829112, rel=1e-12)


def test_droop_gives_design_frequency_drop():
    p = P._replace(P_ref=0.0)
    dw, _ = droop_residual(OscState(VN, 0.0), 15e3, 0.0, p)
    assert dw == pytest.approx(-0.05 * WN)


def test_equilibrium_rotates_at_nominal_frequency():
    v = VN * np.exp(0.7j)
    fb = np.conj(P.P_ref / (1.5 * v))  # delivers exactly P_ref with Q = 0
    assert rhs(v, fb) == pytest.approx(1j * WN * v, abs=1e-6)


def test_no_feedback_amplitude_settles_at_nominal():
    v = 0.3 * VN + 0j
    dt = 1e-5
    for _ in range(20000):
        k1 = rhs(v, 0)
        k2 = rhs(v + 0.5 * dt * k1, 0)
        k3 = rhs(v + 0.5 * dt * k2, 0)
        k4 = rhs(v + dt * k3, 0)
        v += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert abs(v) == pytest.approx(VN, rel=1e-9)


@given(st.floats(0.2, 2.0), st.floats(-np.pi, np.pi), st.floats(-50, 50), st.floats(-50, 50),
       st.floats(-np.pi, np.pi))
def test_rotation_equivariance(a, th, ir, ii, phi):
    v = a * VN * np.exp(1j * th)
    fb = complex(ir, ii)
    r = np.exp(1j * phi)
    assert rhs(v * r, fb * r) == pytest.approx(rhs(v, fb) * r, rel=1e-9, abs=1e-6)


@given(st.floats(0.2, 2.0), st.floats(-np.pi, np.pi), st.floats(-50, 50), st.floats(-50, 50))
def test_polar_form_matches_droop_laws(a, th, ir, ii):
    v = a * VN * np.exp(1j * th)
    fb = complex(ir, ii)
    dv = rhs(v, fb)
    st_ = OscState(v.real, v.imag)
    Pp, Qp = pair_power(st_, (fb.real, fb.imag))
    dw, dV = droop_residual(st_, Pp, Qp, P)
    V = abs(v)
    assert (dv / v).imag == pytest.approx(WN + dw, rel=1e-9)
    assert (dv / v).real * V == pytest.approx(dV, rel=1e-9, abs=1e-6)


def test_voc_derivative_wrapper_and_collapse():
    d = voc_derivative(OscState(VN, 0.0), (0.0, 0.0), P._replace(P_ref=0.0))
    assert d.v_beta == pytest.approx(WN * VN)
    with pytest.raises(AmplitudeCollapse):
        voc_derivative(OscState(1e-6, 0.0), (0.0, 0.0), P)


def test_i_dvoc_ref():
    assert i_dvoc_ref(VN, 9e3) == pytest.approx(10.606601717798213)
    assert i_dvoc_ref(VN, 15e3) == pytest.approx(17.67766952966369)
    with pytest.raises(AmplitudeCollapse):
        i_dvoc_ref(0.0, 9e3)


def test_osc_state_polar():
    s = OscState(0.0, 2.0)
    assert (s.V_VOC, s.theta_VOC) == pytest.approx((2.0, np.pi / 2))
