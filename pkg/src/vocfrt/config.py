"""Scenario configuration documents.

A configuration is a JSON object with one section per parameter group. Every
physical key carries its unit in the name. Missing keys take the defaults in
`DEFAULTS`; unknown keys are rejected. Named presets ship with the package.
"""

import copy
import json
import math
from importlib import resources

from .engine import Scenario
from .frt import COUPLINGS, FrtParams
from .inner_control import LIMIT_MODES, CurrentLimits, InnerParams
from .oscillator import VocParams, c_osc_for_droop
from .plant import FaultSpec, PlantParams, grid_impedance

SQRT2 = math.sqrt(2.0)
PRESETS = ("paper-sec2-baseline", "paper-sec2-frt", "paper-sec5-slg", "paper-sec5-dlg")

DEFAULTS = {
    "name": "",
    "simulation": {
        "duration_s": 1.5,
        "dt_us": 10.0,
        "decimate": 10,
        "frt_enabled": False,
        "bidirectional_source": True,
        "anti_windup": True,
        "grid_connected": True,
        "seed": 0,
        "force_delta_c_rad": None,
        "sync_loss_threshold": 0.5,
    },
    "plant": {
        "l_f_mH": 2.0,
        "c_f_uF": 8.0,
        "r_f_ohm": 0.05,
        "grid_scr": 5.0,
        "grid_x_over_r": 7.0,
        "grid_s_base_kVA": 24.0,
        "v_grid_rms_V": 400.0,
        "f_grid_Hz": 50.0,
        "fault_inductance_uH": 50.0,
        "fault_clear_tau_ms": 5.0,
    },
    "voc": {
        "f_nominal_Hz": 50.0,
        "v_nominal_rms_V": 400.0,
        "k_v": 1.0,
        "k_i": 1.0,
        "droop_pu": 0.05,
        "p_rated_kW": 15.0,
        "xi_vn2_per_s": 100.0,
        "p_ref_kW": 9.0,
        "q_ref_kvar": 0.0,
    },
    "inner": {
        "k_pv_A_per_V": 0.4,
        "k_iv_A_per_Vs": 25.0,
        "k_pc_V_per_A": 12.57,
        "k_ic_V_per_As": 314.0,
    },
    "limits": {
        "i_d_upper_A": 20.0,
        "i_d_lower_A": 0.0,
        "i_max_rms_A": 20.0,
        "limiter_mode": "d_priority",
    },
    "frt": {
        "gamma_A_per_V": 0.05,
        "fault_threshold_pu": 0.85,
        "clear_threshold_pu": 0.90,
        "debounce_ms": 3.0,
        "coupling": "inductive",
        "sogi_k": SQRT2,
        "fll_gain": 0.0,
        "p_restore_pu_per_s": 10.0,
    },
    "fault": {
        "phases": "abc",
        "t_start_s": 0.5,
        "t_clear_s": 0.75,
        "impedance_ohm": 0.05,
        "grid_sag_pu": 0.0,
    },
}

CHOICES = {
    ("limits", "limiter_mode"): tuple(LIMIT_MODES),
    ("frt", "coupling"): tuple(COUPLINGS),
}
NULLABLE = {("simulation", "force_delta_c_rad"), ("fault", "impedance_ohm")}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or line."""

    def __init__(self, msg, key=""):
        super().__init__(msg)
        self.key = key


def _merge(base, doc, path=""):
    out = copy.deepcopy(base)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'document'}: expected an object")
    for k, v in doc.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown key '{where}'", where)
        if isinstance(base[k], dict):
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = _coerce(path, k, base[k], v, where)
    return out


def _coerce(section, key, default, value, where):
    if value is None:
        if (section, key) in NULLABLE:
            return None
        raise ConfigError(f"'{where}' may not be null", where)
    if (section, key) in CHOICES:
        if value not in CHOICES[(section, key)]:
            raise ConfigError(f"'{where}' must be one of {CHOICES[(section, key)]}", where)
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"'{where}' must be true or false", where)
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{where}' must be an integer", where)
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"'{where}' must be a string", where)
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}' must be a number", where)
    if not math.isfinite(value):
        raise ConfigError(f"'{where}' must be finite", where)
    return float(value)


def parse(text, source="<config>"):
    """Parse JSON text into a complete configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return complete(doc)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {_locate(text, exc.key)}{exc}") from None


def _locate(text, key):
    """``line N: `` prefix for the first occurrence of the last key segment."""
    if not key:
        return ""
    needle = '"%s"' % key.split(".")[-1]
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return f"line {n}: "
    return ""


def complete(doc):
    """Fill defaults and validate keys of a (partial) document."""
    return _merge(DEFAULTS, doc)


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc.strerror}") from exc
    return parse(text, str(path))


def preset(name):
    """Complete document of a shipped preset."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}', choose from {PRESETS}")
    text = resources.files("vocfrt").joinpath("presets", f"{name}.json").read_text("utf-8")
    return parse(text, name)


def dumps(doc):
    """Serialize a document; the output re-parses to the same document."""
    return json.dumps(doc, indent=2) + "\n"


def _phases(spec, where="fault.phases"):
    idx = []
    for ch in spec.lower():
        if ch not in "abc" or "abc".index(ch) in idx:
            raise ConfigError(f"'{where}' must be a subset of 'abc', got '{spec}'", where)
        idx.append("abc".index(ch))
    return tuple(sorted(idx))


def to_scenario(doc):
    """Build a Scenario from a complete document."""
    d = complete(doc)
    s, p, v, c, lim, f, flt = (d[k] for k in ("simulation", "plant", "voc", "inner",
                                              "limits", "frt", "fault"))
    w_g = 2 * math.pi * p["f_grid_Hz"]
    w_n = 2 * math.pi * v["f_nominal_Hz"]
    V_n = v["v_nominal_rms_V"] * SQRT2
    for key in ("grid_scr", "grid_x_over_r", "grid_s_base_kVA"):
        if not p[key] > 0:
            raise ConfigError(f"'plant.{key}' must be positive")
    if not f["p_restore_pu_per_s"] > 0:
        raise ConfigError("'frt.p_restore_pu_per_s' must be positive", "frt.p_restore_pu_per_s")
    for key in ("droop_pu", "p_rated_kW", "xi_vn2_per_s"):
        if not v[key] > 0:
            raise ConfigError(f"'voc.{key}' must be positive")
    L_g, R_g = grid_impedance(p["grid_scr"], p["grid_x_over_r"], 1e3 * p["grid_s_base_kVA"],
                              p["v_grid_rms_V"], w_g)
    plant = PlantParams(
        L_f=1e-3 * p["l_f_mH"], C_f=1e-6 * p["c_f_uF"], R_f=p["r_f_ohm"], L_g=L_g, R_g=R_g,
        V_g=p["v_grid_rms_V"] * SQRT2, omega_g=w_g,
        fault_impedance=flt["impedance_ohm"] if flt["impedance_ohm"] is not None else math.inf,
        fault_inductance=1e-6 * p["fault_inductance_uH"],
        fault_clear_tau=1e-3 * p["fault_clear_tau_ms"])
    voc = VocParams(
        omega_n=w_n, V_n=V_n, k_v=v["k_v"], k_i=v["k_i"],
        C_osc=c_osc_for_droop(v["droop_pu"], 1e3 * v["p_rated_kW"], V_n, w_n, v["k_v"], v["k_i"]),
        xi=v["xi_vn2_per_s"] / V_n ** 2, P_ref=1e3 * v["p_ref_kW"], Q_ref=1e3 * v["q_ref_kvar"])
    inner = InnerParams(K_pv=c["k_pv_A_per_V"], K_iv=c["k_iv_A_per_Vs"], K_pc=c["k_pc_V_per_A"],
                        K_ic=c["k_ic_V_per_As"], C_f=plant.C_f, L_f=plant.L_f, omega_n=w_n)
    limits = CurrentLimits(I_d_upper=lim["i_d_upper_A"], I_d_lower=lim["i_d_lower_A"],
                           I_max_mag=lim["i_max_rms_A"] * SQRT2, mode=lim["limiter_mode"])
    frt = FrtParams(gamma=f["gamma_A_per_V"], fault_threshold=f["fault_threshold_pu"],
                    clear_threshold=f["clear_threshold_pu"], debounce=1e-3 * f["debounce_ms"],
                    coupling=f["coupling"], sogi_k=f["sogi_k"], fll_gain=f["fll_gain"],
                    p_restore_rate=f["p_restore_pu_per_s"] * 1e3 * v["p_rated_kW"])
    fault = FaultSpec(phases=_phases(flt["phases"]), t_start=flt["t_start_s"],
                      t_clear=flt["t_clear_s"],
                      impedance=plant.fault_impedance, grid_sag=flt["grid_sag_pu"])
    fd = s["force_delta_c_rad"]
    sc = Scenario(
        duration=s["duration_s"], dt=1e-6 * s["dt_us"], decimate=s["decimate"], plant=plant,
        voc=voc, inner=inner, limits=limits, frt=frt, fault=fault,
        frt_enabled=s["frt_enabled"], bidirectional=s["bidirectional_source"],
        anti_windup=s["anti_windup"], grid_connected=s["grid_connected"], seed=s["seed"],
        force_delta_c=math.nan if fd is None else fd,
        sync_loss_threshold=s["sync_loss_threshold"], name=d["name"])
    try:
        return sc.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def set_key(doc, dotted, value):
    """Copy of `doc` with ``section.key`` set to `value` (validated)."""
    parts = dotted.split(".")
    patch = value
    for part in reversed(parts):
        patch = {part: patch}
    merged = copy.deepcopy(doc)
    node, base = merged, DEFAULTS
    for part in parts[:-1]:
        if part not in base or not isinstance(base[part], dict):
            raise ConfigError(f"unknown key '{dotted}'")
        node, base = node[part], base[part]
    if parts[-1] not in base or isinstance(base[parts[-1]], dict):
        raise ConfigError(f"unknown key '{dotted}'")
    if (isinstance(base[parts[-1]], int) and not isinstance(base[parts[-1]], bool)
            and isinstance(value, float) and value.is_integer()):
        value = int(value)
    node[parts[-1]] = _coerce(parts[-2] if len(parts) > 1 else "", parts[-1],
                              base[parts[-1]], value, dotted)
    return merged
