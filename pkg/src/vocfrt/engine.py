"""Fixed-step simulation of plant, oscillators, inner loops and FRT supervisor.

Every continuous state is advanced with classical RK4 at step `dt`; the
controllers run once per step at the step boundary and their outputs are held
over the step. Each phase is carried as an analytic signal: the real part is
the physical quantity and the imaginary part its ideal quadrature, which gives
the per-phase dq loops their orthogonal axis.
"""

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple

import numpy as np
from numba import njit

from .frt import (COUPLINGS, CURRENT_SYNC, NORMAL, VOLTAGE_SYNC, FrtParams, adapted_power,
                  csync_fb, detector_update, mode_code, unit_vector, vsync_fb)
from .inner_control import (LIMIT_MODES, CurrentLimits, InnerParams, current_pi,
                            integrate_voltage_loop, limit, voltage_pi)
from .oscillator import VocParams, voc_rhs
from .phase_math import A_OP, sogi_rk4, wrap_angle
from .plant import FaultSpec, PlantParams, grid_emf, plant_rhs

TWO_PI_3 = 2 * np.pi / 3

# recorded columns
COLUMNS = (
    "t", "v_pcc_a", "v_pcc_b", "v_pcc_c", "i_inv_a", "i_inv_b", "i_inv_c",
    "p", "q", "p_a", "p_b", "p_c", "v_voc_a", "v_voc_b", "v_voc_c",
    "sin_delta", "delta", "frt_mode", "limiter_d", "limiter_mag", "breaker",
    "id_pi", "iq_pi", "x_d", "v_pcc_d", "v_pcc_q", "flag_a", "flag_b", "flag_c",
    "p_ref_eff", "i_out_a", "i_out_b", "i_out_c", "v_osc_a", "id_lim", "iq_lim",
    "q_a", "q_b", "q_c", "amp_a", "amp_b", "amp_c", "x_q",
)
COL = {name: i for i, name in enumerate(COLUMNS)}
NCOL = len(COLUMNS)

# global scalar slots
G_BRK, G_NEG, G_DU, G_DPREV, G_TRIP, G_FORCED, G_PEFF = range(7)


class NonFinite(FloatingPointError):
    """A state left the finite range; `record` holds the samples so far."""

    def __init__(self, msg, record=None):
        super().__init__(msg)
        self.record = record


class KernelParams(NamedTuple):
    dt: float
    n_steps: int
    decimate: int
    L_f: float
    C_f: float
    R_f: float
    L_g: float
    R_g: float
    V_g: float
    omega_g: float
    R_flt: float
    L_flt: float
    tau_clr: float
    omega_n: float
    V_n: float
    k_v: float
    k_i: float
    C_osc: float
    xi: float
    P_ref: float
    Q_ref: float
    eps: float
    K_pv: float
    K_iv: float
    K_pc: float
    K_ic: float
    I_d_upper: float
    I_d_lower: float
    I_max: float
    limit_mode: int
    frt_enabled: bool
    gamma: float
    p_restore: float
    thr_f: float
    thr_c: float
    n_debounce: int
    sogi_k: float
    sogi_kdc: float
    fll_gain: float
    coupling: int
    t_start: float
    t_clear: float
    shunt: bool
    grid_sag: float
    anti_windup: bool
    bidirectional: bool
    grid_connected: bool
    trip_threshold: float
    n_trip: int
    force_delta: float


class FullState(NamedTuple):
    """All simulation state, mutated in place by the kernel.

    `y` rows are i_inv, v_pcc, i_grid, i_fault, oscillator pair (complex).
    """

    y: np.ndarray
    vi: np.ndarray
    ci: np.ndarray
    sd: np.ndarray
    sq: np.ndarray
    sdc: np.ndarray
    sw: np.ndarray
    amp: np.ndarray
    ph: np.ndarray
    flags: np.ndarray
    n_below: np.ndarray
    n_above: np.ndarray
    u_ref: np.ndarray
    t_ref: np.ndarray
    i_d: np.ndarray
    i_q: np.ndarray
    i_dc: np.ndarray
    g: np.ndarray

    def copy(self):
        return FullState(*(x.copy() for x in self))


@dataclasses.dataclass(frozen=True)
class Scenario:
    """Declarative description of one run."""

    duration: float = 1.5
    dt: float = 10e-6
    decimate: int = 10
    plant: PlantParams = PlantParams()
    voc: VocParams = VocParams()
    inner: InnerParams = InnerParams()
    limits: CurrentLimits = CurrentLimits()
    frt: FrtParams = FrtParams()
    fault: FaultSpec = FaultSpec()
    frt_enabled: bool = False
    bidirectional: bool = True
    anti_windup: bool = True
    grid_connected: bool = True
    seed: int = 0
    force_delta_c: float = float("nan")
    sync_loss_threshold: float = 0.5
    name: str = ""

    def validate(self):
        if not 0 < self.dt <= 50e-6:
            raise ValueError(f"dt={self.dt} outside (0, 50 us]")
        if self.decimate < 1:
            raise ValueError("decimate must be >= 1")
        if self.fault.phases and self.fault.t_clear <= self.fault.t_start:
            raise ValueError("fault t_clear must exceed t_start")
        if self.fault.phases and self.duration < self.fault.t_clear + 0.5 - 1e-12:
            raise ValueError("duration must cover t_clear + 0.5 s")
        if self.frt.clear_threshold <= self.frt.fault_threshold:
            raise ValueError("clear_threshold must exceed fault_threshold")
        if self.limits.I_d_lower > self.limits.I_d_upper:
            raise ValueError("I_d_lower exceeds I_d_upper")
        for name, val in (("L_f", self.plant.L_f), ("C_f", self.plant.C_f),
                          ("C_osc", self.voc.C_osc), ("xi", self.voc.xi),
                          ("gamma", self.frt.gamma), ("K_pc", self.inner.K_pc)):
            if not val > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_connected and not self.plant.L_g > 0:
            raise ValueError("L_g must be positive when grid connected")
        return self

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def kernel_params(self):
        p, v, c, lim, f, flt = self.plant, self.voc, self.inner, self.limits, self.frt, self.fault
        n = int(round(self.duration / self.dt))
        shunt = bool(flt.phases) and np.isfinite(flt.impedance)
        return KernelParams(
            float(self.dt), n, int(self.decimate), p.L_f, p.C_f, p.R_f, p.L_g, p.R_g,
            p.V_g, p.omega_g, float(flt.impedance) if shunt else 0.0, p.fault_inductance,
            p.fault_clear_tau, v.omega_n, v.V_n, v.k_v, v.k_i, v.C_osc, v.xi, v.P_ref, v.Q_ref, v.eps,
            c.K_pv, c.K_iv, c.K_pc, c.K_ic, lim.I_d_upper, lim.I_d_lower, lim.I_max_mag,
            LIMIT_MODES[lim.mode], bool(self.frt_enabled), f.gamma, f.p_restore_rate,
            f.fault_threshold,
            f.clear_threshold, max(1, int(round(f.debounce / self.dt))), f.sogi_k,
            0.5 * f.sogi_k, f.fll_gain, COUPLINGS[f.coupling], flt.t_start, flt.t_clear,
            shunt, flt.grid_sag, bool(self.anti_windup), bool(self.bidirectional),
            bool(self.grid_connected), 0.02 * abs(v.P_ref), max(1, int(round(0.005 / self.dt))),
            float(self.force_delta_c))

    def fault_mask(self):
        return np.array([1.0 if i in self.fault.phases else 0.0 for i in range(3)])


def initial_state(scenario):
    """Synchronized no-load start: oscillators and PCC at the grid EMF."""
    V = scenario.voc.V_n
    ang = np.array([0.0, -TWO_PI_3, TWO_PI_3])
    z = V * np.exp(1j * ang)
    y = np.zeros((5, 3), complex)
    y[1] = scenario.plant.V_g * np.exp(1j * ang)
    y[4] = z
    g = np.zeros(7)
    g[G_PEFF] = scenario.voc.P_ref
    g[G_BRK] = 1.0 if scenario.grid_connected else 0.0
    g[G_TRIP] = np.nan
    vp = y[1]
    return FullState(
        y, np.zeros(3, complex), np.zeros(3, complex), vp.real.copy(), vp.imag.copy(),
        np.zeros(3), np.full(3, scenario.voc.omega_n),
        np.abs(vp), np.angle(vp), np.zeros(3, np.int64), np.zeros(3, np.int64),
        np.zeros(3, np.int64), np.vstack([vp, vp]) / np.abs(vp), np.zeros((2, 3)),
        np.zeros(3), np.zeros(3),
        np.zeros(3), g)


@njit(cache=True)
def _deriv(y, t, vcmd, fb, peff, gf, sag, brk, kp, dy, vg):
    grid_emf(t, kp.V_g, kp.omega_g, sag, vg)
    plant_rhs(y[0], y[1], y[2], y[3], vcmd, vg, gf, brk, kp.L_f, kp.C_f, kp.R_f,
              kp.L_g, kp.R_g, kp.R_flt, kp.L_flt, kp.tau_clr, dy[0], dy[1], dy[2], dy[3])
    for p in range(3):
        dy[4, p] = voc_rhs(y[4, p], fb[p], kp.omega_n, kp.V_n, kp.k_v, kp.k_i,
                           kp.C_osc, kp.xi, peff, kp.Q_ref, kp.eps)


@njit(cache=True)
def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


@njit(cache=True)
def _step(S, kp, fmask, t, out):
    """Advance the full state from t to t+dt and fill `out` with samples at t."""
    dt = kp.dt
    y = S.y
    # events on the step grid must not depend on rounding of s * dt
    te = t + 1e-6 * dt
    active = te >= kp.t_start and te < kp.t_clear
    gf = np.zeros(3)
    sag = np.zeros(3)
    for p in range(3):
        if fmask[p] > 0.0 and kp.shunt:
            if active:
                gf[p] = 1.0
            elif te >= kp.t_clear:
                gf[p] = 2.0
        if active and fmask[p] > 0.0:
            sag[p] = kp.grid_sag
    if not np.isnan(kp.force_delta) and S.g[G_FORCED] == 0.0 and te >= kp.t_clear:
        for p in range(3):
            off = 0.0 if p == 0 else (-TWO_PI_3 if p == 1 else TWO_PI_3)
            y[4, p] = np.abs(y[4, p]) * np.exp(1j * (kp.omega_g * t + off + kp.force_delta))
        S.g[G_DU] += _wrap(kp.force_delta - S.g[G_DPREV])
        S.g[G_DPREV] = kp.force_delta
        S.g[G_FORCED] = 1.0
    brk = S.g[G_BRK] > 0.5
    iout = y[2] + y[3]

    # supervisor
    x = np.empty(3)
    for p in range(3):
        x[p] = y[1, p].real
    detector_update(x, S.sd, S.sq, S.sdc, S.sw, S.amp, S.ph, S.flags, S.n_below,
                    S.n_above, S.u_ref, S.t_ref, t, dt, kp.V_n, kp.thr_f, kp.thr_c,
                    kp.n_debounce, kp.sogi_k, kp.sogi_kdc, kp.fll_gain, kp.omega_n)
    for p in range(3):
        S.i_d[p], S.i_q[p], S.i_dc[p] = sogi_rk4(S.i_d[p], S.i_q[p], S.i_dc[p], kp.omega_n,
                                                 iout[p].real, dt, kp.sogi_k, kp.sogi_kdc)
    mode = 0
    peff = kp.P_ref
    fb = iout.copy()
    if kp.frt_enabled:
        mode = mode_code(S.flags)
        if mode == VOLTAGE_SYNC:
            for p in range(3):
                u = unit_vector(S.u_ref[1, p], S.t_ref[1, p], S.sw[p], t)
                fb[p] = vsync_fb(y[4, p], u, kp.V_n, kp.gamma, kp.coupling)
        elif mode == CURRENT_SYNC:
            ipair = S.i_d + 1j * S.i_q
            csync_fb(iout, ipair, S.flags, fb)
        peff = adapted_power(mode, S.amp, S.flags, kp.I_d_upper, kp.P_ref)
        # cuts apply at once, restoration is rate limited
        rise = kp.p_restore * dt
        if peff > S.g[G_PEFF] + rise:
            peff = S.g[G_PEFF] + rise
        S.g[G_PEFF] = peff

    # inner loops
    vcmd = np.empty(3, np.complex128)
    lim_d = 0.0
    lim_m = 0.0
    for p in range(3):
        v = y[4, p]
        V = np.abs(v)
        rot = 1.0 + 0j
        if V > kp.eps:
            rot = np.conj(v) / V
        vm = y[1, p] * rot
        im = y[0, p] * rot
        e_d = V - vm.real
        e_q = -vm.imag
        xi_ = S.vi[p]
        idu, iqu = voltage_pi(e_d, e_q, vm.real, vm.imag, xi_.real, xi_.imag,
                              kp.K_pv, kp.omega_n, kp.C_f)
        i_d, i_q, sd, sm = limit(idu, iqu, kp.I_d_lower, kp.I_d_upper, kp.I_max,
                                 kp.limit_mode)
        if mode == NORMAL:
            xd, xq = integrate_voltage_loop(xi_.real, xi_.imag, e_d, e_q, idu, iqu, sd, sm,
                                            kp.K_iv, dt, kp.anti_windup)
            S.vi[p] = complex(xd, xq)
        c = S.ci[p]
        vd, vq, cd, cq = current_pi(i_d, i_q, im.real, im.imag, vm.real, vm.imag,
                                    c.real, c.imag, kp.K_pc, kp.K_ic, kp.omega_n,
                                    kp.L_f, dt)
        S.ci[p] = complex(cd, cq)
        vcmd[p] = complex(vd, vq) * np.conj(rot)
        if sd != 0:
            lim_d = 1.0
        if sm:
            lim_m = 1.0
        if p == 0:
            out[21] = idu
            out[22] = iqu
            out[23] = xi_.real
            out[42] = xi_.imag
            out[24] = vm.real
            out[25] = vm.imag
            out[34] = i_d
            out[35] = i_q

    # measurements at t
    va = y[1, 0].real
    vb = y[1, 1].real
    vc = y[1, 2].real
    ia = iout[0].real
    ib = iout[1].real
    ic = iout[2].real
    P = va * ia + vb * ib + vc * ic
    Q = ((vb - vc) * ia + (vc - va) * ib + (va - vb) * ic) / np.sqrt(3.0)
    # positive-sequence oscillator angle against the grid EMF
    vpos = (y[4, 0] + A_OP * y[4, 1] + A_OP * A_OP * y[4, 2]) / 3.0
    dw = np.angle(vpos * np.exp(-1j * kp.omega_g * t))
    S.g[G_DU] += _wrap(dw - S.g[G_DPREV])
    S.g[G_DPREV] = dw

    out[0] = t
    for p in range(3):
        out[1 + p] = y[1, p].real
        out[4 + p] = y[0, p].real
        s = 0.5 * y[1, p] * np.conj(iout[p])
        out[9 + p] = s.real
        out[36 + p] = s.imag
        out[12 + p] = np.abs(y[4, p])
        out[26 + p] = S.flags[p]
        out[30 + p] = iout[p].real
        out[39 + p] = S.amp[p]
    out[7] = P
    out[8] = Q
    out[15] = np.sin(dw)
    out[16] = S.g[G_DU]
    out[17] = mode
    out[18] = lim_d
    out[19] = lim_m
    out[20] = S.g[G_BRK]
    out[29] = peff
    out[33] = y[4, 0].real

    # unidirectional source protection
    if brk and not kp.bidirectional:
        if P < -kp.trip_threshold:
            S.g[G_NEG] += 1.0
        else:
            S.g[G_NEG] = 0.0
        if S.g[G_NEG] >= kp.n_trip:
            S.g[G_BRK] = 0.0
            S.g[G_TRIP] = t
            brk = False
            for p in range(3):
                y[2, p] = 0.0
                y[3, p] = 0.0

    # RK4 with held controller outputs
    vg = np.empty(3, np.complex128)
    k1 = np.empty((5, 3), np.complex128)
    k2 = np.empty((5, 3), np.complex128)
    k3 = np.empty((5, 3), np.complex128)
    k4 = np.empty((5, 3), np.complex128)
    _deriv(y, t, vcmd, fb, peff, gf, sag, brk, kp, k1, vg)
    _deriv(y + 0.5 * dt * k1, t + 0.5 * dt, vcmd, fb, peff, gf, sag, brk, kp, k2, vg)
    _deriv(y + 0.5 * dt * k2, t + 0.5 * dt, vcmd, fb, peff, gf, sag, brk, kp, k3, vg)
    _deriv(y + dt * k3, t + dt, vcmd, fb, peff, gf, sag, brk, kp, k4, vg)
    ok = True
    for r in range(5):
        for p in range(3):
            y[r, p] += dt / 6.0 * (k1[r, p] + 2.0 * k2[r, p] + 2.0 * k3[r, p] + k4[r, p])
            if not (np.isfinite(y[r, p].real) and np.isfinite(y[r, p].imag)):
                ok = False
    return ok


@njit(cache=True)
def _run(S, kp, fmask):
    n = kp.n_steps
    dec = kp.decimate
    nrec = (n - 1) // dec + 1
    rec = np.zeros((nrec, NCOL))
    row = np.zeros(NCOL)
    for s in range(n):
        t = s * kp.dt
        ok = _step(S, kp, fmask, t, row)
        if s % dec == 0:
            rec[s // dec] = row
        if not ok:
            return rec[: s // dec + 1], False
    return rec, True


def step(state, scenario, t, dt=None):
    """Advance a copy of `state` by one step.

    Returns
    -------
    FullState
        State at ``t + dt``.
    ndarray
        Sample row at `t` (see COLUMNS).
    """
    sc = scenario if dt is None else scenario.replace(dt=dt)
    s = state.copy()
    row = np.zeros(NCOL)
    ok = _step(s, sc.kernel_params(), sc.fault_mask(), float(t), row)
    if not ok:
        raise NonFinite(f"non-finite state at t={t}")
    return s, row


@dataclasses.dataclass
class RunRecord:
    """Uniformly sampled run output; columns are listed in `COLUMNS`."""

    data: np.ndarray
    scenario: Scenario
    complete: bool = True
    runtime_s: float = 0.0

    def __getitem__(self, name):
        return self.data[:, COL[name]]

    @property
    def t(self):
        return self.data[:, 0]

    @property
    def sample_dt(self):
        return self.scenario.dt * self.scenario.decimate


def load_angle(theta_voc, theta_grid):
    """Wrapped load angle and its continuity-tracked unwrapped series."""
    d = wrap_angle(np.asarray(theta_voc) - np.asarray(theta_grid))
    return d, np.unwrap(np.atleast_1d(d))


def _window_rms(x, n):
    if len(x) < n or n < 1:
        return float(np.sqrt(np.mean(x ** 2))) if len(x) else 0.0
    c = np.concatenate([[0.0], np.cumsum(x ** 2)])
    return float(np.sqrt(np.max((c[n:] - c[:-n]) / n)))


def _cycle_mean(x, n):
    """Trailing one-cycle mean; the first cycle uses the samples available."""
    c = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(1, len(x) + 1)
    lo = np.maximum(i - n, 0)
    return (c[i] - c[lo]) / (i - lo)


def _first_sustained(mask, n):
    run = 0
    for i, m in enumerate(mask):
        run = run + 1 if m else 0
        if run >= n:
            return i - n + 1
    return -1


def _recovery(t, x, ref, band, t0, eps=0.0):
    sel = t >= t0 - eps
    tt, xx = t[sel], x[sel]
    if len(tt) == 0:
        return None
    bad = np.nonzero(np.abs(xx - ref) > band * abs(ref))[0]
    if len(bad) == 0:
        return 0.0
    if bad[-1] >= len(tt) - 1:
        return None
    return float(tt[bad[-1] + 1] - t0)


def _settle_time(t, err, band, t0, t1, eps=0.0):
    """Time after `t0` from which `err` stays below `band` until `t1`."""
    w = (t >= t0 - eps) & (t < t1 - eps)
    if not w.any():
        return None
    out = np.nonzero(err[w] >= band)[0]
    if len(out) == 0:
        return 0.0
    return float(t[w][out[-1] + 1] - t0)


def detect_events(record):
    """Derive the flat metrics dictionary from a RunRecord."""
    sc = record.scenario
    t = record.t
    # window edges sit a hair early so samples on an event instant are classified
    # the same way the kernel treats them
    eps = 1e-6 * sc.dt
    P = record["p"]
    P_ref = sc.voc.P_ref
    f = sc.fault
    h = record.sample_dt
    cyc = int(round(2 * np.pi / sc.plant.omega_g / h))
    pre = (t >= f.t_start - 0.05 - eps) & (t < f.t_start - eps)
    if not pre.any():
        pre = t >= t[-1] - 0.05
    during = (t >= f.t_start - eps) & (t < f.t_clear - eps)
    post = t >= f.t_clear - eps
    delta = record["delta"]
    delta_p = float(np.mean(delta[pre]))
    dsin = np.abs(np.sin(delta) - np.sin(delta_p))
    m = {"name": sc.name, "complete": bool(record.complete), "delta_p_rad": delta_p}
    m["p_prefault_W"] = float(np.mean(P[pre]))
    m["prefault_valid"] = bool(abs(m["p_prefault_W"] - P_ref) <= 0.01 * max(abs(P_ref), 1.0))
    for k, ph in enumerate("abc"):
        m[f"p_{ph}_prefault_W"] = float(np.mean(record[f"p_{ph}"][pre]))
    m["max_dsin_fault"] = float(dsin[during].max()) if during.any() else 0.0
    after = t >= f.t_start - eps
    m["max_dsin_after"] = float(dsin[after].max()) if after.any() else 0.0
    m["sync_loss"] = bool(m["max_dsin_after"] > sc.sync_loss_threshold)
    if during.any():
        d_clear = delta[during][-1]
        m["fault_settle_time_s"] = _settle_time(t, np.abs(delta - d_clear), 0.01, f.t_start,
                                                f.t_clear, eps)
    else:
        m["fault_settle_time_s"] = None
    Pm = _cycle_mean(P, cyc)
    m["min_p_post_W"] = float(Pm[post].min()) if post.any() else None
    m["min_p_post_inst_W"] = float(P[post].min()) if post.any() else None
    n5 = max(1, int(round(0.005 / h)))
    thr = -0.02 * abs(P_ref)
    i0 = _first_sustained(P[post] < thr, n5) if post.any() else -1
    m["reversal"] = bool(i0 >= 0)
    m["reversal_time_s"] = float(t[post][i0]) if i0 >= 0 else None
    rec = _recovery(t, P, P_ref, 0.02, f.t_clear, eps) if P_ref != 0 else None
    m["recovered"] = rec is not None
    m["recovery_time_s"] = rec
    for ph in "abc":
        x = record[f"i_inv_{ph}"][during]
        m[f"i_rms_fault_{ph}_A"] = _window_rms(x, cyc) if during.any() else 0.0
    m["i_rms_fault_max_A"] = max(m[f"i_rms_fault_{ph}_A"] for ph in "abc")
    rel = delta - delta_p
    sel = t >= f.t_start - eps
    s = np.sign(rel[sel] + np.pi)
    s = s[s != 0]
    m["slip_crossings"] = int(np.sum(s[1:] != s[:-1]))
    s2 = np.sign(delta[sel] + 2 * np.pi)
    s2 = s2[s2 != 0]
    m["crossings_minus_2pi"] = int(np.sum(s2[1:] != s2[:-1]))
    m["delta_min_rad"] = float(delta[sel].min()) if sel.any() else delta_p
    tail = t >= t[-1] - 0.05
    m["delta_end_rad"] = float(np.mean(delta[tail]))
    m["net_slips"] = int(np.round((m["delta_end_rad"] - delta_p) / (2 * np.pi)))
    m["p_end_W"] = float(np.mean(P[tail]))
    for ph in "abc":
        pp = record[f"p_{ph}"]
        m[f"p_{ph}_end_W"] = float(np.mean(pp[tail]))
        m[f"p_{ph}_fault_min_W"] = float(pp[during].min()) if during.any() else 0.0
        m[f"p_{ph}_fault_max_W"] = float(pp[during].max()) if during.any() else 0.0
        m[f"p_{ph}_post_min_W"] = float(pp[post].min()) if post.any() else 0.0
        j = _first_sustained(pp[after] < thr / 3, n5) if after.any() else -1
        m[f"p_{ph}_reversal"] = bool(j >= 0)
        r = _recovery(t, pp, P_ref / 3, 0.02, f.t_clear, eps) if P_ref != 0 else None
        m[f"p_{ph}_recovery_time_s"] = r
    m["breaker_tripped"] = bool(np.any(record["breaker"] < 0.5)) and sc.grid_connected
    tr = np.nonzero(record["breaker"] < 0.5)[0]
    m["trip_time_s"] = float(t[tr[0]]) if (len(tr) and sc.grid_connected) else None
    m["v_voc_a_end_V"] = float(np.mean(record["v_voc_a"][tail]))
    return m


def run(scenario):
    """Simulate a scenario.

    Returns
    -------
    RunRecord
    dict
        Metrics.

    Raises
    ------
    NonFinite
        With the partial record attached.
    """
    scenario.validate()
    S = initial_state(scenario)
    t0 = time.perf_counter()
    data, ok = _run(S, scenario.kernel_params(), scenario.fault_mask())
    rec = RunRecord(data, scenario, bool(ok), time.perf_counter() - t0)
    if not ok:
        raise NonFinite(f"non-finite state near t={data[-1, 0]:.6f} s", rec)
    return rec, detect_events(rec)


def _metrics_only(scenario):
    try:
        return run(scenario)[1]
    except NonFinite as exc:
        m = {"name": scenario.name, "complete": False, "error": str(exc)}
        return m


def run_many(scenarios, workers=1):
    """Metrics for many scenarios, in input order."""
    scenarios = list(scenarios)
    if workers <= 1 or len(scenarios) < 2:
        return [_metrics_only(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_metrics_only, scenarios))
