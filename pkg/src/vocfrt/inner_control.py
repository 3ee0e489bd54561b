"""Nested dq voltage and current PI loops with current limiting.

Per-phase quantities are represented as complex dq values ``x_d + j x_q`` in
the frame aligned with the oscillator pair. The njit cores are shared with the
simulation kernel; the NamedTuple wrappers form the public API.
"""

from typing import NamedTuple

import numpy as np
from numba import njit

from .phase_math import Dq0

LIMIT_ANGLE = 0
LIMIT_D_PRIORITY = 1
LIMIT_MODES = {"angle": LIMIT_ANGLE, "d_priority": LIMIT_D_PRIORITY}


class InnerParams(NamedTuple):
    """Gains of the voltage and current loops."""

    K_pv: float = 0.2
    K_iv: float = 10.0
    K_pc: float = 12.57
    K_ic: float = 314.0
    C_f: float = 8e-6
    L_f: float = 2e-3
    omega_n: float = 2 * np.pi * 50


class CurrentLimits(NamedTuple):
    """d-axis clamp and total magnitude clamp (peak amperes).

    `mode` selects how the magnitude clamp treats the d-clamped vector:
    ``"angle"`` scales both axes, ``"d_priority"`` keeps I_d and trims I_q.
    """

    I_d_upper: float = 20.0
    I_d_lower: float = 0.0
    I_max_mag: float = 20.0 * np.sqrt(2)
    mode: str = "angle"


class SatFlags(NamedTuple):
    d: int
    mag: bool


class CtrlState(NamedTuple):
    vloop_int_d: float = 0.0
    vloop_int_q: float = 0.0
    cloop_int_d: float = 0.0
    cloop_int_q: float = 0.0
    saturated: SatFlags = SatFlags(0, False)


@njit(cache=True)
def voltage_pi(e_d, e_q, vm_d, vm_q, x_d, x_q, K_pv, omega_n, C_f):
    """Unsaturated current references with capacitor feed-forward."""
    i_d = K_pv * e_d + x_d - omega_n * C_f * vm_q
    i_q = K_pv * e_q + x_q + omega_n * C_f * vm_d
    return i_d, i_q


@njit(cache=True)
def limit(i_d, i_q, lo, hi, i_max, mode):
    """d clamp followed by magnitude clamp. Returns (i_d, i_q, sat_d, sat_mag)."""
    sat_d = 0
    if i_d > hi:
        i_d = hi
        sat_d = 1
    elif i_d < lo:
        i_d = lo
        sat_d = -1
    mag = np.hypot(i_d, i_q)
    sat_mag = False
    if mag > i_max:
        sat_mag = True
        if mode == LIMIT_D_PRIORITY and abs(i_d) <= i_max:
            i_q = np.copysign(np.sqrt(i_max * i_max - i_d * i_d), i_q)
        else:
            i_d *= i_max / mag
            i_q *= i_max / mag
    return i_d, i_q, sat_d, sat_mag


@njit(cache=True)
def integrate_voltage_loop(x_d, x_q, e_d, e_q, i_d_u, i_q_u, sat_d, sat_mag,
                           K_iv, dt, enabled):
    """Conditional integration of the voltage-loop integrators."""
    freeze_d = False
    freeze_q = False
    if enabled:
        freeze_d = ((sat_d == 1 and e_d > 0) or (sat_d == -1 and e_d < 0)
                    or (sat_mag and e_d * i_d_u > 0))
        freeze_q = sat_mag and e_q * i_q_u > 0
    if not freeze_d:
        x_d += K_iv * e_d * dt
    if not freeze_q:
        x_q += K_iv * e_q * dt
    return x_d, x_q


@njit(cache=True)
def current_pi(r_d, r_q, m_d, m_q, vp_d, vp_q, c_d, c_q, K_pc, K_ic, omega_n, L_f, dt):
    """Current loop with PCC feed-forward and cross decoupling.

    Returns the command ``(v_d, v_q)`` and the updated integrators.
    """
    e_d = r_d - m_d
    e_q = r_q - m_q
    c_d += K_ic * e_d * dt
    c_q += K_ic * e_q * dt
    v_d = K_pc * e_d + c_d + vp_d - omega_n * L_f * m_q
    v_q = K_pc * e_q + c_q + vp_q + omega_n * L_f * m_d
    return v_d, v_q, c_d, c_q


def voltage_pi_step(v_ref_dq, v_meas_dq, state, params, dt=None):
    """Unsaturated voltage-loop output ``(I_dPI*, I_qPI*)``.

    The integrators are read, not advanced; `anti_windup` advances them once
    the limiter outcome is known. `dt` is accepted for interface symmetry.
    """
    if dt is not None and dt <= 0:
        raise ValueError("dt must be positive")
    e_d = v_ref_dq.d - v_meas_dq.d
    e_q = v_ref_dq.q - v_meas_dq.q
    return voltage_pi(e_d, e_q, v_meas_dq.d, v_meas_dq.q, state.vloop_int_d,
                      state.vloop_int_q, params.K_pv, params.omega_n, params.C_f)


def limit_current(i_ref, limits):
    """Apply the current limiter to ``(I_d, I_q)``.

    Returns
    -------
    (i_d, i_q) : tuple of float
    flags : SatFlags
    """
    i_d, i_q, sd, sm = limit(float(i_ref[0]), float(i_ref[1]), limits.I_d_lower,
                             limits.I_d_upper, limits.I_max_mag,
                             LIMIT_MODES[limits.mode])
    return (i_d, i_q), SatFlags(sd, bool(sm))


def anti_windup(state, sat_flags, error_dq, params, dt, i_ref_unsat=(0.0, 0.0),
                enabled=True):
    """Advance the voltage-loop integrators with conditional integration.

    An integrator is frozen while its axis is saturated and its error pushes
    further into saturation.
    """
    x_d, x_q = integrate_voltage_loop(
        state.vloop_int_d, state.vloop_int_q, float(error_dq[0]), float(error_dq[1]),
        float(i_ref_unsat[0]), float(i_ref_unsat[1]), sat_flags.d, sat_flags.mag,
        params.K_iv, dt, enabled)
    return state._replace(vloop_int_d=x_d, vloop_int_q=x_q, saturated=sat_flags)


def current_pi_step(i_ref_dq, i_meas_dq, v_pcc_dq, state, params, dt):
    """Current loop step.

    Returns
    -------
    Dq0
        Inverter voltage command in the same frame.
    CtrlState
        State with advanced current-loop integrators.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_d, v_q, c_d, c_q = current_pi(
        i_ref_dq[0], i_ref_dq[1], i_meas_dq[0], i_meas_dq[1], v_pcc_dq.d, v_pcc_dq.q,
        state.cloop_int_d, state.cloop_int_q, params.K_pc, params.K_ic,
        params.omega_n, params.L_f, dt)
    return (Dq0(v_d, v_q, v_pcc_dq.zero, v_pcc_dq.theta),
            state._replace(cloop_int_d=c_d, cloop_int_q=c_q))
