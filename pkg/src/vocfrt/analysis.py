"""Quasi-static load-angle analysis at fault clearance.

At clearance the PCC voltage is restored while the oscillator is still at its
faulted amplitude and angle. Treating the voltage loop output as an algebraic
function of the load angle gives a scalar ODE for the angle, and the sign of
the d-axis demand mismatch at the clearance instant separates recovering
(`CONDITION1`) from slipping (`CONDITION2`) trajectories.
"""

import math
from typing import NamedTuple

import numpy as np

from numba import njit

from .engine import NonFinite, RunRecord, run, run_many
from .inner_control import LIMIT_MODES, limit, voltage_pi
from .oscillator import i_dvoc_ref
from .phase_math import wrap_angle
from .plant import FaultSpec

CONDITION1 = "Condition1"
CONDITION2 = "Condition2"


class ClearanceSnapshot(NamedTuple):
    """Operating point at the clearance instant.

    Voltages are peak amplitudes, `x_d` is the voltage-loop d integrator
    (amperes) and `delta_p` the pre-fault load angle.
    """

    V_VOC_F: float
    V_PCC: float
    delta_c: float
    K_pv: float
    K_iv: float
    C_f: float
    omega_n: float
    k_v: float
    k_i: float
    C_osc: float
    P_ref: float
    V_n: float = 400 * math.sqrt(2)
    xi: float = 100 / (2 * 400 ** 2)
    x_d: float = 0.0
    delta_p: float = 0.0

    def check(self):
        if not (self.V_VOC_F > 0 and self.V_PCC > 0):
            raise ValueError("V_VOC_F and V_PCC must be positive")
        return self


class ClearanceCondition(NamedTuple):
    """Classification result; `margin` is ``I_dPI* - I_dVOC*`` in amperes."""

    kind: str
    margin: float
    boundary: bool = False


class Trajectory(NamedTuple):
    t: np.ndarray
    delta: np.ndarray
    v_voc: np.ndarray
    i_dpi: np.ndarray
    diverged: bool


def idpi_quasistatic(snap, delta, integrator_state=None, v_voc=None):
    """Voltage-loop d-axis demand for a PCC at load angle `delta`.

    ``K_pv*(V_VOC - V_PCC*cos(delta)) + x_d - omega_n*C_f*V_PCC*sin(-delta)``,
    with `x_d` the integrator (defaults to the snapshot value) and `V_VOC`
    the oscillator amplitude (defaults to the faulted value).
    """
    x = snap.x_d if integrator_state is None else integrator_state
    V = snap.V_VOC_F if v_voc is None else v_voc
    delta = np.asarray(delta, float) if np.ndim(delta) else float(delta)
    return (snap.K_pv * (V - snap.V_PCC * np.cos(delta)) + x
            - snap.omega_n * snap.C_f * snap.V_PCC * np.sin(-delta))


def amplitude_time_constant(snap):
    """Secant time constant of the amplitude law between V_VOC_F and V_n."""
    V = snap.V_VOC_F
    return snap.k_v ** 2 / (2.0 * snap.xi * V * (snap.V_n + V))


def delta_trajectory(snap, horizon, dt, track_amplitude=False, integrate=True,
                     slip_bound=2 * math.pi):
    """Integrate the post-clearance load angle.

    Parameters
    ----------
    snap : ClearanceSnapshot
    horizon, dt : float
        Length and step of the integration (s).
    track_amplitude : bool
        Use the recovering V_VOC(t) in the rate denominator instead of the
        frozen faulted amplitude.
    integrate : bool
        Advance the voltage-loop integrator with its error; otherwise hold it.
    slip_bound : float
        Stop and mark divergence once ``delta_c - delta`` exceeds this.

    Returns
    -------
    Trajectory
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    snap.check()
    n = int(math.ceil(horizon / dt)) + 1
    tau = amplitude_time_constant(snap)
    t = np.zeros(n)
    d = np.zeros(n)
    vv = np.zeros(n)
    ip = np.zeros(n)
    delta, V, x = float(snap.delta_c), float(snap.V_VOC_F), float(snap.x_d)
    kk = snap.k_v * snap.k_i / (2.0 * snap.C_osc)

    def rhs(s):
        dl, Vs, xs = s
        i_pi = idpi_quasistatic(snap, dl, xs, Vs)
        i_ref = i_dvoc_ref(Vs, snap.P_ref)
        den = Vs if track_amplitude else snap.V_VOC_F
        return np.array([-kk / den * (i_pi - i_ref), (snap.V_n - Vs) / tau,
                         snap.K_iv * (Vs - snap.V_PCC * math.cos(dl)) if integrate else 0.0])

    s = np.array([delta, V, x])
    diverged = False
    k = 0
    for k in range(n):
        t[k] = k * dt
        d[k], vv[k] = s[0], s[1]
        ip[k] = idpi_quasistatic(snap, s[0], s[2], s[1])
        if not np.all(np.isfinite(s)):
            raise NonFinite(f"trajectory left the finite range at t={t[k]:.4g} s")
        if snap.delta_c - s[0] > slip_bound:
            diverged = True
            break
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * dt * k1)
        k3 = rhs(s + 0.5 * dt * k2)
        k4 = rhs(s + dt * k3)
        s = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    m = k + 1
    return Trajectory(t[:m], d[:m], vv[:m], ip[:m], diverged)


def classify_clearance(snap, rtol=1e-12):
    """Compare the voltage-loop demand at clearance with the oscillator reference."""
    snap.check()
    i_pi = float(idpi_quasistatic(snap, snap.delta_c))
    i_ref = float(i_dvoc_ref(snap.V_VOC_F, snap.P_ref))
    margin = i_pi - i_ref
    tie = abs(margin) <= rtol * max(abs(i_pi), abs(i_ref), 1e-300)
    if margin > 0 and not tie:
        return ClearanceCondition(CONDITION2, margin)
    return ClearanceCondition(CONDITION1, margin, tie)


@njit(cache=True)
def _settle(E, dg, Z, Yc, V, x_d, x_q, i0, K_pv, omega_n, C_f, lo, hi, i_max, mode,
            xi, k_v, V_n, m, Q_ref, alpha, n_max, tol):
    tau = k_v * k_v / (4.0 * xi * V_n * V_n)
    e = E * np.exp(-1j * dg)
    I = i0
    v = e
    for _ in range(n_max):
        v = (e + Z * I) / (1.0 + Z * Yc)
        ig = I - Yc * v
        idu, iqu = voltage_pi(V - v.real, -v.imag, v.real, v.imag, x_d, x_q, K_pv,
                              omega_n, C_f)
        a, b, _, _ = limit(idu, iqu, lo, hi, i_max, mode)
        dI = complex(a, b) - I
        Q = 1.5 * (V * np.conj(ig)).imag
        f = xi / (k_v * k_v) * V * (2.0 * V_n * V_n - 2.0 * V * V) - m / V * (Q - Q_ref)
        I += alpha * dI
        V += alpha * tau * f
        if abs(dI) < tol and abs(tau * f) < tol:
            break
    v = (e + Z * I) / (1.0 + Z * Yc)
    return V, v, I


def clearance_point(scenario, V_VOC, delta_grid, x_d, x_q=0.0, i0=0j, delta_p=0.0,
                    alpha=0.05, n_max=20000, tol=1e-9):
    """Quasi-static operating point just after clearance.

    With the oscillator angle `delta_grid` (relative to the restored grid EMF)
    and the voltage-loop integrators held, the network, the limited inner-loop
    current and the oscillator amplitude equilibrium under its reactive
    feedback are relaxed to a joint fixed point, starting from the current
    `i0` (oscillator frame). These fast states settle within a few
    milliseconds, well before the angle moves appreciably.

    Returns
    -------
    ClearanceSnapshot
        With the settled oscillator amplitude, the PCC amplitude and the
        oscillator-to-PCC angle.
    """
    p, c, lim, v = scenario.plant, scenario.inner, scenario.limits, scenario.voc
    Z = complex(p.R_g, p.omega_g * p.L_g)
    Yc = complex(0.0, p.omega_g * p.C_f)
    m = v.k_v * v.k_i / (3.0 * v.C_osc)
    V, vp, _ = _settle(p.V_g, float(delta_grid), Z, Yc, float(V_VOC), float(x_d), float(x_q),
                       complex(i0), c.K_pv, c.omega_n, p.C_f, lim.I_d_lower, lim.I_d_upper,
                       lim.I_max_mag, LIMIT_MODES[lim.mode], v.xi, v.k_v, v.V_n, m, v.Q_ref,
                       alpha, n_max, tol)
    return _snapshot(scenario, V, abs(vp), -np.angle(vp), x_d, delta_p)


def snapshot_from_record(record, delta_c=None, lead=1):
    """Build a ClearanceSnapshot from a simulated run.

    The oscillator amplitude, integrators and current are read `lead` samples
    before clearance and the post-clearance point is settled with
    `clearance_point`. `delta_c` overrides the oscillator-to-grid angle.
    """
    sc = record.scenario
    t = record.t
    k = max(int(np.searchsorted(t, sc.fault.t_clear)) - lead, 0)
    pre = (t >= sc.fault.t_start - 0.05) & (t < sc.fault.t_start)
    dp = 0.0
    if pre.any():
        dp = float(np.mean(-np.arctan2(record["v_pcc_q"][pre], record["v_pcc_d"][pre])))
    dg = float(wrap_angle(record["delta"][k])) if delta_c is None else float(delta_c)
    i0 = complex(record["id_lim"][k], record["iq_lim"][k])
    return clearance_point(sc, record["v_voc_a"][k], dg, record["x_d"][k],
                           record["x_q"][k], i0, dp)


def _snapshot(sc, V, V_PCC, delta_c, x_d, delta_p):
    v, c = sc.voc, sc.inner
    return ClearanceSnapshot(
        V_VOC_F=float(V), V_PCC=float(V_PCC), delta_c=float(delta_c),
        K_pv=c.K_pv, K_iv=c.K_iv, C_f=sc.plant.C_f, omega_n=v.omega_n, k_v=v.k_v,
        k_i=v.k_i, C_osc=v.C_osc, P_ref=v.P_ref, V_n=v.V_n, xi=v.xi, x_d=float(x_d),
        delta_p=float(delta_p))


def frt_criteria(obj, band=0.2, v_tol=0.02):
    """Check the two ride-through criteria.

    Parameters
    ----------
    obj : RunRecord or ClearanceSnapshot
    band : float
        Allowed load-angle excursion from the pre-fault angle (rad).
    v_tol : float
        Relative amplitude error at which the oscillator counts as recovered.

    Returns
    -------
    (bool, bool)
        Angle kept near its pre-fault value during the fault; d-axis demand
        below the oscillator reference while the angle is negative and the
        amplitude recovers.
    """
    if isinstance(obj, ClearanceSnapshot):
        c1 = abs(obj.delta_c - obj.delta_p) < band
        c2 = obj.delta_c >= 0 or classify_clearance(obj).kind == CONDITION1
        return bool(c1), bool(c2)
    if not isinstance(obj, RunRecord):
        raise TypeError("expected RunRecord or ClearanceSnapshot")
    sc = obj.scenario
    t = obj.t
    f = sc.fault
    if not f.phases:
        return True, True
    delta = obj["delta"]
    pre = (t >= f.t_start - 0.05) & (t < f.t_start)
    dp = float(np.mean(delta[pre])) if pre.any() else 0.0
    during = (t >= f.t_start) & (t < f.t_clear)
    c1 = not during.any() or float(np.max(np.abs(delta[during] - dp))) < band
    V = obj["v_voc_a"]
    post = np.nonzero(t >= f.t_clear)[0]
    ok = np.abs(V[post] - sc.voc.V_n) < v_tol * sc.voc.V_n
    end = post[np.argmax(ok)] if ok.any() else len(t)
    win = np.arange(post[0], end) if len(post) else np.arange(0)
    neg = win[wrap_angle(delta[win]) < 0]
    i_ref = i_dvoc_ref(V[neg], sc.voc.P_ref)
    c2 = bool(np.all(obj["id_pi"][neg] < i_ref))
    return bool(c1), c2


# oracle grid ---------------------------------------------------------------

def sag_scenario(base, depth, delta_c=float("nan")):
    """Balanced grid-EMF sag over the base fault window, optionally forcing
    the oscillator to `delta_c` (rad) at clearance."""
    f = base.fault
    fault = FaultSpec(phases=(0, 1, 2), t_start=f.t_start, t_clear=f.t_clear,
                      impedance=math.inf, grid_sag=float(depth))
    dur = max(base.duration, f.t_clear + 0.5)
    return base.replace(fault=fault, frt_enabled=False, bidirectional=True,
                        grid_connected=True, force_delta_c=float(delta_c), duration=dur,
                        name=f"sag{depth:.4g}_dc{delta_c:.4g}")


class GridPoint(NamedTuple):
    delta_c: float
    sag: float
    predicted: str
    margin: float
    simulated: str = ""
    agree: bool | None = None


def _outcome(m):
    if not m.get("complete", False):
        return CONDITION2
    return CONDITION1 if m["net_slips"] == 0 else CONDITION2


def _clearance_state(sc):
    rec, _ = run(sc)
    k = max(int(np.searchsorted(rec.t, sc.fault.t_clear)) - 1, 0)
    return (rec["v_voc_a"][k], rec["x_d"][k], rec["x_q"][k],
            complex(rec["id_lim"][k], rec["iq_lim"][k]))


def clearance_grid(base, deltas, sags, with_oracle=False, workers=1):
    """Classify a grid of clearance angles and sag depths.

    One unforced run per sag depth supplies the faulted amplitude, integrator
    and current state (the pre-clearance trajectory does not depend on the
    forced angle); `clearance_point` settles each grid angle. With `with_oracle`, each grid point is also simulated with
    the oscillator forced to the clearance angle and the net slip count decides
    the true outcome.

    Returns
    -------
    list of GridPoint
        Row-major over (sags, deltas).
    """
    deltas = [float(d) for d in deltas]
    sags = [float(s) for s in sags]
    base_runs = [sag_scenario(base, s) for s in sags]
    if workers > 1 and len(base_runs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            states = list(ex.map(_clearance_state, base_runs))
    else:
        states = [_clearance_state(s) for s in base_runs]
    pts = []
    for s, (V, xd, xq, i0) in zip(sags, states):
        for d in deltas:
            c = classify_clearance(clearance_point(base, V, d, xd, xq, i0))
            pts.append(GridPoint(d, s, c.kind, c.margin))
    if with_oracle:
        scs = [sag_scenario(base, p.sag, p.delta_c) for p in pts]
        ms = run_many(scs, workers)
        pts = [p._replace(simulated=_outcome(m), agree=_outcome(m) == p.predicted)
               for p, m in zip(pts, ms)]
    return pts


def agreement(points):
    """Fraction of oracle-checked grid points where prediction matches."""
    chk = [p.agree for p in points if p.agree is not None]
    return float(np.mean(chk)) if chk else float("nan")


def boundary_band(points):
    """Disagreeing points that are not adjacent (in delta) to a predicted
    class change, i.e. disagreements outside the boundary band."""
    by_sag = {}
    for p in points:
        by_sag.setdefault(p.sag, []).append(p)
    outside = []
    for row in by_sag.values():
        row = sorted(row, key=lambda p: p.delta_c)
        kinds = [p.predicted for p in row]
        sim = [p.simulated for p in row]
        for i, p in enumerate(row):
            if p.agree is False:
                lo, hi = max(i - 2, 0), min(i + 3, len(row))
                near = len(set(kinds[lo:hi])) > 1 or len(set(sim[lo:hi])) > 1
                if not near:
                    outside.append(p)
    return outside


__all__ = ["CONDITION1", "CONDITION2", "ClearanceSnapshot", "ClearanceCondition",
           "Trajectory", "idpi_quasistatic", "amplitude_time_constant", "delta_trajectory",
           "classify_clearance", "clearance_point", "snapshot_from_record", "frt_criteria", "sag_scenario",
           "GridPoint", "clearance_grid", "agreement", "boundary_band"]
