"""Per-phase Andronov-Hopf virtual oscillator.

Each phase carries its own orthogonal pair ``v = v_alpha + j v_beta``. The
polar dynamics are

    theta' = omega_n - m / V**2 * (P - P_ref)
    V'     = xi / k_v**2 * V * (2 V_n**2 - 2 V**2) - m / V * (Q - Q_ref)

with ``m = k_v k_i / (3 C_osc)`` and per-phase powers
``P + jQ = 1.5 * v * conj(i_fb)`` so that three balanced phases report the
three-phase power.
"""

from typing import NamedTuple

import numpy as np
from numba import njit


class AmplitudeCollapse(ArithmeticError):
    """Oscillator amplitude fell below the numerical floor."""


class VocParams(NamedTuple):
    """Oscillator parameters.

    Parameters
    ----------
    omega_n : float
        Nominal frequency in rad/s.
    V_n : float
        Nominal peak amplitude in V.
    k_v, k_i : float
        Voltage and current scaling gains.
    C_osc : float
        Virtual capacitance in F.
    xi : float
        Amplitude-correction gain in 1/(V^2 s).
    P_ref, Q_ref : float
        Three-phase power set-points in W and var.
    """

    omega_n: float = 2 * np.pi * 50
    V_n: float = 400 * np.sqrt(2)
    k_v: float = 1.0
    k_i: float = 1.0
    C_osc: float = 0.1
    xi: float = 1e-4
    P_ref: float = 0.0
    Q_ref: float = 0.0

    @property
    def eps(self):
        return 1e-3 * self.V_n

    @property
    def coupling(self):
        return self.k_v * self.k_i / (3.0 * self.C_osc)


class OscState(NamedTuple):
    """Orthogonal oscillator pair of one phase."""

    v_alpha: float
    v_beta: float

    @property
    def V_VOC(self):
        return float(np.hypot(self.v_alpha, self.v_beta))

    @property
    def theta_VOC(self):
        return float(np.arctan2(self.v_beta, self.v_alpha))


def c_osc_for_droop(droop, P_rated, V_n, omega_n, k_v=1.0, k_i=1.0):
    """Virtual capacitance giving a frequency drop of ``droop*omega_n`` at `P_rated`."""
    return k_v * k_i * P_rated / (3.0 * V_n ** 2 * droop * omega_n)


@njit(cache=True)
def voc_rhs(v, fb, omega_n, V_n, k_v, k_i, C_osc, xi, P_ref, Q_ref, eps):
    """Complex time-derivative of one oscillator pair."""
    V2 = v.real * v.real + v.imag * v.imag
    if V2 < eps * eps:
        V2 = eps * eps
    s = 1.5 * v * np.conj(fb)
    m = k_v * k_i / (3.0 * C_osc)
    w = omega_n - m / V2 * (s.real - P_ref)
    r = xi / (k_v * k_v) * (2.0 * V_n * V_n - 2.0 * V2) - m / V2 * (s.imag - Q_ref)
    return v * (r + 1j * w)


def _check(V, params):
    if V < params.eps:
        raise AmplitudeCollapse(f"V_VOC={V:.3g} V below floor {params.eps:.3g} V")


def voc_derivative(state, fb, params):
    """Time-derivative of an oscillator pair.

    Parameters
    ----------
    state : OscState
    fb : tuple of float
        Feedback current pair ``(i_alpha, i_beta)`` in A.
    params : VocParams

    Returns
    -------
    OscState
        ``(dv_alpha/dt, dv_beta/dt)``.
    """
    _check(state.V_VOC, params)
    dv = voc_rhs(complex(state.v_alpha, state.v_beta), complex(fb[0], fb[1]),
                 params.omega_n, params.V_n, params.k_v, params.k_i,
                 params.C_osc, params.xi, params.P_ref, params.Q_ref, params.eps)
    return OscState(dv.real, dv.imag)


def pair_power(state, fb):
    """Three-phase-equivalent (P, Q) seen by one oscillator."""
    s = 1.5 * complex(state.v_alpha, state.v_beta) * np.conj(complex(fb[0], fb[1]))
    return s.real, s.imag


def i_dvoc_ref(V_VOC, P_ref, eps=1e-9):
    """d-axis current at which the oscillator delivers `P_ref`, ``2 P/(3 V)``."""
    if np.any(np.asarray(V_VOC) < eps):
        raise AmplitudeCollapse("V_VOC below floor")
    return 2.0 * P_ref / (3.0 * V_VOC)


def droop_residual(state, P, Q, params):
    """Frequency offset and amplitude rate implied by the droop laws.

    Returns
    -------
    delta_omega : float
        ``theta' - omega_n`` in rad/s.
    dV : float
        ``V'`` in V/s.
    """
    V = max(state.V_VOC, params.eps)
    m = params.coupling
    delta_omega = -m / V ** 2 * (P - params.P_ref)
    dV = (params.xi / params.k_v ** 2 * V * (2 * params.V_n ** 2 - 2 * V ** 2)
          - m / V * (Q - params.Q_ref))
    return delta_omega, dV
