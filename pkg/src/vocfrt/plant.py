"""Averaged inverter, LC filter, Thevenin grid and shunt fault branch.

Each phase is an independent four-wire circuit. The derivative cores accept
complex arrays so the kernel can carry each phase as an analytic signal whose
real part is the physical quantity; the equations are linear, so real inputs
give the physical model directly.
"""

from typing import NamedTuple

import numpy as np
from numba import njit

from .phase_math import ThreePhase

PHASE_OFFSETS = np.array([0.0, -2 * np.pi / 3, 2 * np.pi / 3])


class AlreadyOpen(RuntimeError):
    """Breaker trip requested on an open breaker."""


class PlantParams(NamedTuple):
    """Per-phase circuit parameters (SI units, peak voltages)."""

    L_f: float = 2e-3
    C_f: float = 8e-6
    R_f: float = 0.05
    L_g: float = 0.0
    R_g: float = 0.0
    V_g: float = 400 * np.sqrt(2)
    omega_g: float = 2 * np.pi * 50
    fault_impedance: float = 0.05
    fault_inductance: float = 50e-6
    fault_clear_tau: float = 5e-3


class FaultSpec(NamedTuple):
    """Shunt fault at the PCC and optional grid EMF sag on the same phases."""

    phases: tuple = ()
    t_start: float = 0.5
    t_clear: float = 0.75
    impedance: float = 0.05
    grid_sag: float = 0.0

    def active(self, t):
        return self.t_start <= t < self.t_clear

    def mask(self, t):
        on = self.active(t)
        return np.array([1.0 if (on and p in self.phases) else 0.0 for p in range(3)])


class PlantState(NamedTuple):
    i_inv: np.ndarray
    v_pcc: np.ndarray
    i_grid: np.ndarray
    i_fault: np.ndarray
    breaker_closed: bool = True
    trip_reason: str = ""


def grid_impedance(scr, x_over_r, s_base, v_rms, omega):
    """Thevenin (L, R) from short-circuit ratio and X/R at a three-phase base."""
    z_base = 3 * v_rms ** 2 / s_base
    z = z_base / scr
    r = z / np.sqrt(1 + x_over_r ** 2)
    return r * x_over_r / omega, r


@njit(cache=True)
def grid_emf(t, V_g, omega_g, sag, out):
    """Analytic grid EMF per phase, scaled by ``1 - sag``."""
    for p in range(3):
        off = 0.0 if p == 0 else (-2 * np.pi / 3 if p == 1 else 2 * np.pi / 3)
        out[p] = V_g * (1.0 - sag[p]) * np.exp(1j * (omega_g * t + off))


@njit(cache=True)
def plant_rhs(i_inv, v_pcc, i_grid, i_fault, v_cmd, v_g, g_fault, breaker,
              L_f, C_f, R_f, L_g, R_g, R_flt, L_flt, tau_clr, di, dv, dg, df):
    """Fill the state derivatives in place.

    `g_fault` is 1 on phases whose shunt branch is energized, 2 on phases whose
    branch is interrupting (current decays with `tau_clr` like an extinguishing
    arc) and 0 elsewhere. The breaker sits between the inverter and both the
    grid and the fault branch; while open, neither current changes.
    """
    for p in range(3):
        di[p] = (v_cmd[p] - v_pcc[p] - R_f * i_inv[p]) / L_f
        dv[p] = (i_inv[p] - i_grid[p] - i_fault[p]) / C_f
        if breaker:
            dg[p] = (v_pcc[p] - v_g[p] - R_g * i_grid[p]) / L_g
        else:
            dg[p] = 0.0
        if not breaker:
            df[p] = 0.0
        elif g_fault[p] == 1.0:
            df[p] = (v_pcc[p] - R_flt * i_fault[p]) / L_flt
        elif g_fault[p] == 2.0:
            df[p] = -i_fault[p] / tau_clr
        else:
            df[p] = 0.0


def grid_voltage(t, params):
    """Instantaneous grid EMF as a ThreePhase."""
    return ThreePhase(*(params.V_g * np.cos(params.omega_g * t + PHASE_OFFSETS)))


def fault_branch_state(fault, t):
    """Per-phase branch code: 1 energized, 2 interrupting, 0 absent."""
    g = np.zeros(3)
    for p in fault.phases:
        if fault.t_start <= t < fault.t_clear:
            g[p] = 1.0
        elif t >= fault.t_clear:
            g[p] = 2.0
    return g


def initial_state(n=3):
    z = np.zeros(n)
    return PlantState(z.copy(), z.copy(), z.copy(), z.copy())


def plant_derivative(state, v_inv_cmd, t, params, fault=FaultSpec()):
    """Time-derivative of a PlantState (real instantaneous samples).

    The fault branch is a series R-L whose current is a state. It is energized
    on the faulted phases for ``t_start <= t < t_clear``; afterwards its
    current decays with time constant ``fault_clear_tau``.
    """
    vg = np.asarray(grid_voltage(t, params), dtype=float) * (
        1.0 - fault.grid_sag * fault.mask(t))
    g = fault_branch_state(fault, t) if np.isfinite(fault.impedance) else np.zeros(3)
    out = [np.zeros(3) for _ in range(4)]
    if params.L_g <= 0 and state.breaker_closed:
        raise ValueError("L_g must be positive with the breaker closed")
    plant_rhs(np.asarray(state.i_inv, float), np.asarray(state.v_pcc, float),
              np.asarray(state.i_grid, float), np.asarray(state.i_fault, float),
              np.asarray(v_inv_cmd, float), vg, g, bool(state.breaker_closed),
              params.L_f, params.C_f, params.R_f, max(params.L_g, 1e-12), params.R_g,
              fault.impedance if np.isfinite(fault.impedance) else 0.0,
              params.fault_inductance, params.fault_clear_tau, *out)
    return PlantState(*out, state.breaker_closed, state.trip_reason)


def breaker_trip(state, reason):
    """Open the grid breaker and zero the grid and fault-branch currents."""
    if not state.breaker_closed:
        raise AlreadyOpen(f"breaker already open ({state.trip_reason})")
    return state._replace(i_grid=np.zeros_like(np.asarray(state.i_grid, float)),
                          i_fault=np.zeros_like(np.asarray(state.i_fault, float)),
                          breaker_closed=False, trip_reason=reason)
