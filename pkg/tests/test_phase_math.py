import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vocfrt.phase_math import (AlphaBeta0, Dq0, Phasor, QuadraturePair, ThreePhase,
                               clarke, from_symmetric_components, inst_power,
                               inverse_clarke, inverse_park, park, phase_shift, sogi_step,
                               symmetric_components, wrap_angle)

W = 2 * np.pi * 50
finite = st.floats(-1e3, 1e3, allow_nan=False)
angle = st.floats(-20, 20, allow_nan=False)


def balanced(amp, phi):
    return ThreePhase(*(amp * np.cos(phi + k) for k in (0, -2 * np.pi / 3, 2 * np.pi / 3)))


def test_clarke_balanced_oracle():
    ab = clarke(balanced(325.0, 0.0))
    assert ab.alpha == pytest.approx(325.0)
    assert ab.beta == pytest.approx(0.0, abs=1e-12)
    assert ab.zero == pytest.approx(0.0, abs=1e-12)
    ab = clarke(balanced(1.0, np.pi / 2))
    assert ab.beta == pytest.approx(1.0)


def test_park_aligned_frame():
    dq = park(AlphaBeta0(np.cos(0.3), np.sin(0.3), 0.0), 0.3)
    assert (dq.d, dq.q) == pytest.approx((1.0, 0.0), abs=1e-15)
    dq = park(AlphaBeta0(0.0, 1.0, 0.0), 0.0)
    assert dq.q == pytest.approx(1.0)


def test_inst_power_oracle():
    v = balanced(400 * np.sqrt(2), 0.1)
    p, q = inst_power(v, balanced(20 * np.sqrt(2), 0.1))
    assert p == pytest.approx(3 * 400 * 20)
    assert q == pytest.approx(0.0, abs=1e-9)
    # a current lagging by 90 degrees gives positive reactive power
    p, q = inst_power(v, balanced(10.0, 0.1 - np.pi / 2))
    assert p == pytest.approx(0.0, abs=1e-9)
    assert q == pytest.approx(1.5 * 400 * np.sqrt(2) * 10.0)


@given(finite, finite, finite)
def test_clarke_roundtrip(a, b, c):
    x = inverse_clarke(clarke(ThreePhase(a, b, c)))
    assert np.allclose(x, (a, b, c), atol=1e-9)


@given(finite, finite, finite, angle)
def test_park_roundtrip(al, be, ze, th):
    x = inverse_park(park(AlphaBeta0(al, be, ze), th))
    assert np.allclose(x, (al, be, ze), atol=1e-9)


@given(finite, finite, angle)
def test_park_preserves_magnitude(al, be, th):
    dq = park(AlphaBeta0(al, be, 0.0), th)
    assert np.hypot(dq.d, dq.q) == pytest.approx(np.hypot(al, be), abs=1e-9)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_wrap_angle(x):
    y = wrap_angle(x)
    assert -np.pi < y <= np.pi
    assert np.isclose(np.cos(y), np.cos(x), atol=1e-9) and np.isclose(np.sin(y), np.sin(x), atol=1e-9)


def test_wrap_angle_edges():
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(np.array([0.0, 3 * np.pi])) == pytest.approx([0.0, np.pi])


@given(st.lists(st.tuples(st.floats(0, 100), angle), min_size=3, max_size=3))
def test_symmetric_components_roundtrip(ph):
    a, b, c = (Phasor(m, wrap_angle(t)) for m, t in ph)
    back = from_symmetric_components(*symmetric_components(a, b, c))
    for x, y in zip(back, (a, b, c)):
        assert abs(x.to_complex() - y.to_complex()) < 1e-9


def test_symmetric_components_balanced():
    a, b, c = (Phasor(1.0, t) for t in (0.2, 0.2 - 2 * np.pi / 3, 0.2 + 2 * np.pi / 3))
    pos, neg, zero = symmetric_components(a, b, c)
    assert pos.magnitude == pytest.approx(1.0)
    assert pos.angle == pytest.approx(0.2)
    assert neg.magnitude < 1e-12 and zero.magnitude < 1e-12


def run_sogi(x_of_t, n, dt=1e-5, fll_gain=0.0, w0=W):
    s = QuadraturePair(0.0, 0.0, w0)
    for k in range(1, n + 1):
        s = sogi_step(s, x_of_t(k * dt), W, dt, fll_gain=fll_gain)
    return s, n * dt


def test_sogi_locks_amplitude_and_phase():
    s, t = run_sogi(lambda t: 100 * np.cos(W * t + 0.4), 20000)
    assert s.amplitude == pytest.approx(100, rel=2e-3)
    assert wrap_angle(s.phase - (W * t + 0.4)) == pytest.approx(0.0, abs=5e-3)


def test_sogi_rejects_dc_offset():
    s, t = run_sogi(lambda t: 100 * np.cos(W * t) + 30.0, 30000)
    assert s.amplitude == pytest.approx(100, rel=5e-3)
    assert s.dc == pytest.approx(30.0, rel=1e-2)


def test_fll_tracks_off_nominal_frequency():
    w = 2 * np.pi * 49.0
    s, _ = run_sogi(lambda t: 100 * np.cos(w * t), 100000, fll_gain=50.0)
    # the held input lags by dt/2, which biases the lock by about k*w*dt/4
    assert s.omega_est == pytest.approx(w, rel=2e-3)
    assert s.amplitude == pytest.approx(100, rel=1e-2)


def test_sogi_rejects_bad_step():
    with pytest.raises(ValueError):
        sogi_step(QuadraturePair(0, 0, W), 0.0, W, 0.0)


@pytest.mark.parametrize("shift", [-2 * np.pi / 3, 2 * np.pi / 3])
def test_phase_shift_matches_shifted_cosine(shift):
    s, t = run_sogi(lambda t: 20 * np.cos(W * t), 20000)
    assert phase_shift(s, shift) == pytest.approx(20 * np.cos(W * t + shift), abs=0.2)


def test_phase_shift_exact_on_ideal_pair():
    th = 1.1
    pair = QuadraturePair(np.cos(th), np.sin(th), W)
    assert phase_shift(pair, -0.5) == pytest.approx(np.cos(th - 0.5))
    assert Dq0(1, 2, 0).theta == 0.0
