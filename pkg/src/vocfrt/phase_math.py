"""Reference-frame transforms, quadrature generation and power utilities.

All transforms use the amplitude-invariant convention, so dq magnitudes equal
per-phase peak values. Functions accept scalars or numpy arrays and broadcast.
"""

from typing import NamedTuple

import numpy as np
from numba import njit

SQRT3 = np.sqrt(3.0)
SOGI_GAIN = np.sqrt(2.0)
A_OP = np.exp(2j * np.pi / 3)


class ThreePhase(NamedTuple):
    """Instantaneous per-phase samples (volts or amperes)."""

    a: float
    b: float
    c: float


class AlphaBeta0(NamedTuple):
    """Stationary-frame components."""

    alpha: float
    beta: float
    zero: float


class Dq0(NamedTuple):
    """Rotating-frame components and the frame angle in rad."""

    d: float
    q: float
    zero: float
    theta: float = 0.0


class Phasor(NamedTuple):
    """Peak magnitude and angle wrapped to (-pi, pi]."""

    magnitude: float
    angle: float

    @classmethod
    def from_complex(cls, z):
        return cls(float(abs(z)), wrap_angle(float(np.angle(z))))

    def to_complex(self):
        return self.magnitude * np.exp(1j * self.angle)


class QuadraturePair(NamedTuple):
    """Orthogonal signal pair from a SOGI tracker.

    Parameters
    ----------
    direct : float
        In-phase (band-pass) output.
    quadrature : float
        Output lagging `direct` by 90 degrees.
    omega_est : float
        Frequency estimate in rad/s.
    dc : float
        Internal dc-offset estimate.
    """

    direct: float
    quadrature: float
    omega_est: float
    dc: float = 0.0

    @property
    def amplitude(self):
        return float(np.hypot(self.direct, self.quadrature))

    @property
    def phase(self):
        return float(np.arctan2(self.quadrature, self.direct))


def wrap_angle(x):
    """Wrap angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def clarke(x):
    """Amplitude-invariant Clarke transform of a ThreePhase sample."""
    a, b, c = (np.asarray(v, dtype=float) for v in x)
    alpha = (2.0 / 3.0) * (a - 0.5 * b - 0.5 * c)
    beta = (2.0 / 3.0) * (SQRT3 / 2.0) * (b - c)
    zero = (a + b + c) / 3.0
    return AlphaBeta0(alpha, beta, zero)


def inverse_clarke(x):
    """Inverse of `clarke`."""
    alpha, beta, zero = (np.asarray(v, dtype=float) for v in x)
    a = alpha + zero
    b = -0.5 * alpha + 0.5 * SQRT3 * beta + zero
    c = -0.5 * alpha - 0.5 * SQRT3 * beta + zero
    return ThreePhase(a, b, c)


def park(x, theta):
    """Rotate a stationary-frame vector by -theta into the dq frame."""
    ct, st = np.cos(theta), np.sin(theta)
    d = ct * x.alpha + st * x.beta
    q = -st * x.alpha + ct * x.beta
    return Dq0(d, q, x.zero, theta)


def inverse_park(x):
    """Rotate a dq vector by +theta back to the stationary frame."""
    ct, st = np.cos(x.theta), np.sin(x.theta)
    alpha = ct * x.d - st * x.q
    beta = st * x.d + ct * x.q
    return AlphaBeta0(alpha, beta, x.zero)


def inst_power(v, i):
    """Instantaneous three-phase active and reactive power.

    Reactive power uses the line-voltage cross-product form,
    q = (v_bc i_a + v_ca i_b + v_ab i_c) / sqrt(3).

    Returns
    -------
    p, q : float or ndarray
    """
    va, vb, vc = (np.asarray(u, dtype=float) for u in v)
    ia, ib, ic = (np.asarray(u, dtype=float) for u in i)
    p = va * ia + vb * ib + vc * ic
    q = ((vb - vc) * ia + (vc - va) * ib + (va - vb) * ic) / SQRT3
    return p, q


@njit(cache=True)
def sogi_rk4(d, q, dc, w, x, dt, k, k_dc):
    """One RK4 step of a SOGI with dc-offset rejection, input held over dt.

    States obey ``e = x - d - dc``, ``d' = k w e - w q``, ``q' = w d`` and
    ``dc' = k_dc w e``.
    """
    def f(d, q, dc):
        e = x - d - dc
        return k * w * e - w * q, w * d, k_dc * w * e

    a1, b1, c1 = f(d, q, dc)
    h = 0.5 * dt
    a2, b2, c2 = f(d + h * a1, q + h * b1, dc + h * c1)
    a3, b3, c3 = f(d + h * a2, q + h * b2, dc + h * c2)
    a4, b4, c4 = f(d + dt * a3, q + dt * b3, dc + dt * c3)
    s = dt / 6.0
    return (d + s * (a1 + 2 * a2 + 2 * a3 + a4),
            q + s * (b1 + 2 * b2 + 2 * b3 + b4),
            dc + s * (c1 + 2 * c2 + 2 * c3 + c4))


@njit(cache=True)
def fll_update(d, q, w, x, dt, k, gain, w_nom):
    """Normalized frequency-locked-loop correction of the SOGI frequency."""
    e = x - d
    amp2 = d * d + q * q
    if gain <= 0.0 or amp2 < 1e-12:
        return w
    w_new = w - gain * k * w * e * q / amp2 * dt
    lo, hi = 0.5 * w_nom, 1.5 * w_nom
    return min(max(w_new, lo), hi)


def sogi_step(state, x, omega_nominal, dt, k=SOGI_GAIN, k_dc=None, fll_gain=0.0):
    """Advance a SOGI quadrature tracker by one sample.

    Parameters
    ----------
    state : QuadraturePair
        Current tracker state.
    x : float
        New input sample.
    omega_nominal : float
        Nominal frequency in rad/s, used when the FLL is disabled.
    dt : float
        Step in s.
    k : float, optional
        SOGI damping gain.
    k_dc : float, optional
        Dc-rejection gain, default ``k/2``.
    fll_gain : float, optional
        Normalized FLL gain, 0 disables frequency adaptation.

    Returns
    -------
    QuadraturePair
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if k_dc is None:
        k_dc = 0.5 * k
    w = state.omega_est if fll_gain > 0 else omega_nominal
    d, q, dc = sogi_rk4(state.direct, state.quadrature, state.dc, w, float(x),
                        dt, k, k_dc)
    if fll_gain > 0:
        w = fll_update(d, q, w, float(x) - dc, dt, k, fll_gain, omega_nominal)
    return QuadraturePair(d, q, w, dc)


def phase_shift(pair, shift):
    """Shift the tracked fundamental by `shift` rad.

    A unit cosine shifted by ``-2*pi/3`` becomes ``cos(wt - 2*pi/3)``.
    """
    return pair.direct * np.cos(shift) - pair.quadrature * np.sin(shift)


def symmetric_components(a, b, c):
    """Fortescue decomposition of three phasors.

    Returns
    -------
    pos, neg, zero : Phasor
    """
    za, zb, zc = (p.to_complex() for p in (a, b, c))
    pos = (za + A_OP * zb + A_OP ** 2 * zc) / 3
    neg = (za + A_OP ** 2 * zb + A_OP * zc) / 3
    zero = (za + zb + zc) / 3
    return Phasor.from_complex(pos), Phasor.from_complex(neg), Phasor.from_complex(zero)


def from_symmetric_components(pos, neg, zero):
    """Rebuild phase phasors from sequence components."""
    p, n, z = (x.to_complex() for x in (pos, neg, zero))
    za = z + p + n
    zb = z + A_OP ** 2 * p + A_OP * n
    zc = z + A_OP * p + A_OP ** 2 * n
    return Phasor.from_complex(za), Phasor.from_complex(zb), Phasor.from_complex(zc)
