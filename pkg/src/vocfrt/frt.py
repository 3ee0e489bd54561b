"""Fault ride-through supervisor.

Per-phase SOGI amplitude detection with hysteresis and debounce selects one of
three modes. In voltage-sync mode every oscillator is pulled toward the
nominal-amplitude PCC unit vector; in current-sync mode the faulted phases are
fed currents rebuilt from the healthy phases.
"""

from typing import NamedTuple

import numpy as np
from numba import njit

from .phase_math import SOGI_GAIN, ThreePhase, fll_update, phase_shift, sogi_rk4

NORMAL = 0
CURRENT_SYNC = 1
VOLTAGE_SYNC = 2
MODE_NAMES = ("Normal", "CurrentSync", "VoltageSync")

COUPLING_INDUCTIVE = 0
COUPLING_RESISTIVE = 1
COUPLINGS = {"inductive": COUPLING_INDUCTIVE, "resistive": COUPLING_RESISTIVE}

TWO_PI_3 = 2 * np.pi / 3


class ModeMismatch(ValueError):
    """Feedback law requested in a mode where it does not apply."""


class FrtParams(NamedTuple):
    """Supervisor settings.

    Parameters
    ----------
    gamma : float
        Voltage-sync gain in A/V.
    fault_threshold, clear_threshold : float
        Amplitude thresholds as fractions of V_n.
    debounce : float
        Time in s a threshold condition must persist.
    coupling : str
        ``"inductive"`` rotates the voltage-sync error by -90 degrees before
        it reaches the oscillator, ``"resistive"`` uses it as is.
    sogi_k : float
        SOGI damping gain.
    fll_gain : float
        Normalized FLL gain, 0 holds the nominal frequency.
    p_restore_rate : float
        Rate limit in W/s on raising the adapted power reference back
        toward P_ref; reductions act at once.
    """

    gamma: float = 0.05
    fault_threshold: float = 0.85
    clear_threshold: float = 0.90
    debounce: float = 0.003
    coupling: str = "inductive"
    sogi_k: float = SOGI_GAIN
    fll_gain: float = 0.0
    p_restore_rate: float = 1.5e5


class FrtMode(NamedTuple):
    kind: str
    phases: tuple = ()

    @property
    def code(self):
        return MODE_NAMES.index(self.kind)


class DetectorState(NamedTuple):
    """Per-phase tracker arrays of shape (3,).

    `u_ref` and `t_ref` have shape (2, 3): the newest and the previous
    half-cycle snapshot of the unit vector and the time it was taken.
    """

    direct: np.ndarray
    quadrature: np.ndarray
    dc: np.ndarray
    omega: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    flags: np.ndarray
    n_below: np.ndarray
    n_above: np.ndarray
    u_ref: np.ndarray
    t_ref: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, v_peak, omega, phases=(0.0, -TWO_PI_3, TWO_PI_3)):
        """Tracker already locked onto a balanced set of amplitude `v_peak`."""
        z = v_peak * np.exp(1j * np.asarray(phases, dtype=float))
        u = np.exp(1j * np.asarray(phases, dtype=float)) if v_peak > 0 else np.ones(3, complex)
        return cls(z.real.copy(), z.imag.copy(), np.zeros(3), np.full(3, float(omega)),
                   np.abs(z), np.angle(z), np.zeros(3, np.int64), np.zeros(3, np.int64),
                   np.zeros(3, np.int64), np.vstack([u, u]), np.zeros((2, 3)))

    def held_unit_vectors(self):
        """Unit vectors the voltage-sync law would use at the current time."""
        return unit_vector(self.u_ref[1], self.t_ref[1], self.omega, self.t)

    def copy(self):
        return DetectorState(*(x.copy() if isinstance(x, np.ndarray) else x for x in self))


@njit(cache=True)
def detector_update(x, d, q, dc, w, amp, ph, flags, n_below, n_above, u_ref, t_ref,
                    t, dt, V_n, thr_f, thr_c, n_debounce, k, k_dc, fll_gain, omega_n):
    """Advance the three trackers in place."""
    for p in range(3):
        d[p], q[p], dc[p] = sogi_rk4(d[p], q[p], dc[p], w[p], x[p], dt, k, k_dc)
        if fll_gain > 0.0:
            w[p] = fll_update(d[p], q[p], w[p], x[p] - dc[p], dt, k, fll_gain, omega_n)
        amp[p] = np.hypot(d[p], q[p])
        ph[p] = np.arctan2(q[p], d[p])
        if amp[p] < thr_f * V_n:
            n_below[p] += 1
        else:
            n_below[p] = 0
        if amp[p] > thr_c * V_n:
            n_above[p] += 1
        else:
            n_above[p] = 0
        if flags[p] == 0 and n_below[p] >= n_debounce:
            flags[p] = 1
        elif flags[p] == 1 and n_above[p] >= n_debounce:
            flags[p] = 0
        # half-cycle snapshots while healthy; row 1 is the older one, taken
        # before the disturbance that the detector is about to flag
        if amp[p] >= thr_f * V_n and t - t_ref[0, p] >= np.pi / omega_n - 0.5 * dt:
            u_ref[1, p] = u_ref[0, p]
            t_ref[1, p] = t_ref[0, p]
            u_ref[0, p] = complex(d[p], q[p]) / amp[p]
            t_ref[0, p] = t


@njit(cache=True)
def mode_code(flags):
    n = flags[0] + flags[1] + flags[2]
    if n == 0:
        return NORMAL
    if n == 3:
        return VOLTAGE_SYNC
    return CURRENT_SYNC


@njit(cache=True)
def unit_vector(u_ref, t_ref, w, t):
    """Held PCC unit vector advanced at `w` from the time it was taken."""
    return u_ref * np.exp(1j * w * (t - t_ref))


@njit(cache=True)
def vsync_fb(v_osc, u, V_nom, gamma, coupling):
    """Voltage-sync feedback for one phase as a complex pair."""
    e = gamma * (v_osc - V_nom * u)
    if coupling == COUPLING_INDUCTIVE:
        return -1j * e
    return e


@njit(cache=True)
def csync_fb(i_out, i_pair, flags, fb):
    """Overwrite `fb` entries of faulted phases with rebuilt currents.

    `i_out` holds complex output-current pairs, `i_pair` the SOGI analytic
    estimates ``direct + j quadrature`` of the same currents.
    """
    n = flags[0] + flags[1] + flags[2]
    if n == 1:
        for p in range(3):
            if flags[p] == 1:
                fb[p] = -(i_out[(p + 1) % 3] + i_out[(p + 2) % 3])
    elif n == 2:
        z = 0
        for p in range(3):
            if flags[p] == 0:
                z = p
        fb[(z + 1) % 3] = i_pair[z] * np.exp(-1j * TWO_PI_3)
        fb[(z + 2) % 3] = i_pair[z] * np.exp(1j * TWO_PI_3)


@njit(cache=True)
def adapted_power(mode, amp, flags, I_d_upper, P_ref):
    """Power reference capped at what the limited d current can deliver."""
    if mode == NORMAL:
        return P_ref
    s = 0.0
    n = 0
    for p in range(3):
        if mode == VOLTAGE_SYNC or flags[p] == 0:
            s += amp[p]
            n += 1
    return min(P_ref, 1.5 * (s / n) * I_d_upper)


def detector_step(state, v_pcc, dt, V_n, params=FrtParams(), omega_n=2 * np.pi * 50):
    """Advance the fault detector by one sample of `v_pcc` (ThreePhase)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    s = state.copy()
    t = s.t + dt
    n_deb = max(1, int(round(params.debounce / dt)))
    detector_update(np.asarray(v_pcc, dtype=float), s.direct, s.quadrature, s.dc, s.omega,
                    s.amplitude, s.phase, s.flags, s.n_below, s.n_above, s.u_ref,
                    s.t_ref, t, dt, V_n, params.fault_threshold, params.clear_threshold,
                    n_deb, params.sogi_k, 0.5 * params.sogi_k, params.fll_gain, omega_n)
    return s._replace(t=t)


def select_mode(flags):
    """Map a per-phase flag triple to an FrtMode."""
    f = tuple(bool(x) for x in flags)
    n = sum(f)
    if n == 0:
        return FrtMode("Normal")
    if n == 3:
        return FrtMode("VoltageSync", (0, 1, 2))
    return FrtMode("CurrentSync", tuple(i for i in range(3) if f[i]))


def voltage_sync_feedback(v_voc, unit_vectors, V_voc_nominal, gamma):
    """``fb_x = gamma (v_VOC,x - V_VOCn u_x)`` on instantaneous samples."""
    v = np.asarray(v_voc, dtype=float)
    u = np.asarray(unit_vectors, dtype=float)
    return ThreePhase(*(gamma * (v - V_voc_nominal * u)))


def current_sync_feedback(i_out, pairs, mode):
    """Feedback currents with faulted phases rebuilt from healthy ones.

    Parameters
    ----------
    i_out : ThreePhase
        Measured output currents.
    pairs : sequence of QuadraturePair
        SOGI trackers of the three output currents.
    mode : FrtMode
        Must be CurrentSync.

    Returns
    -------
    ThreePhase
    """
    if mode.kind != "CurrentSync":
        raise ModeMismatch(f"current sync feedback undefined in {mode.kind}")
    fb = [float(x) for x in i_out]
    faulted = set(mode.phases)
    if len(faulted) == 1:
        (k,) = faulted
        fb[k] = -sum(float(i_out[x]) for x in range(3) if x != k)
    else:
        (z,) = set(range(3)) - faulted
        fb[(z + 1) % 3] = phase_shift(pairs[z], -TWO_PI_3)
        fb[(z + 2) % 3] = phase_shift(pairs[z], TWO_PI_3)
    return ThreePhase(*fb)


def power_ref_adapt(mode, V_pcc_fault, limits, P_ref):
    """Cap the power reference at ``1.5 V I_d_upper`` while a fault is active."""
    if mode.kind == "Normal":
        return P_ref
    return min(P_ref, 1.5 * V_pcc_fault * limits.I_d_upper)
