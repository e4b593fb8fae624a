"""Named scenarios, PSD tables and SNR sweeps behind the command-line tool."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar

from .config import ScenarioConfig
from .constants import convert_momentum
from .detuning import (
    DetuningParams,
    detuned_double_psd,
    detuned_single_psd,
    equal_power_coupling,
    matched_delta_prime,
    optimize_g_detuned,
)
from .filtering import (
    FULL_BAND,
    Band,
    eta,
    snr_gas,
    snr_gas_from_spectrum,
    snr_longrange_closed_form,
    snr_longrange_sql,
    snr_optimal,
)
from .noise import (
    PositionNoise,
    VelocityNoise,
    approx_params,
    eta_sql,
    g_opt_position,
    g_opt_velocity,
    position_psd,
    spike_frequencies,
    velocity_psd,
)
from .response import REFERENCE, DetectorParams
from .signals import FlybySignal, ImpulseSignal

SPIKE_WINDOW = 0.02  # relative half-width of the dense grid around each spike
CSV_COLUMNS = ("nu_rad_s", "shot", "thermal", "backaction", "total", "correlation", "variant", "spike")
SNR_COLUMNS = ("tau_s", "snr_velocity_exact", "snr_velocity_closed_form", "snr_position_exact",
               "ratio_velocity_position", "ratio_exact_closed_form")


# -- detector resolution ---------------------------------------------------


def velocity_detector(p: DetectorParams, coupling="opt") -> DetectorParams:
    return p.replace(G=g_opt_velocity(p) if coupling == "opt" else float(coupling))


def position_detector(p: DetectorParams, tau: float, coupling="opt") -> DetectorParams:
    return p.replace(G=g_opt_position(p, tau) if coupling == "opt" else float(coupling))


def detuning_params(cfg: ScenarioConfig, p: DetectorParams) -> DetuningParams:
    if cfg.detuning is None:
        raise ValueError("detuned variants need delta and omega_sig in the config")
    d = dict(cfg.detuning)
    if d.get("delta_prime") == "matched":
        base = DetuningParams(d["delta"], d["omega_sig"], 0.0, d.get("kappa_prime"), d.get("g_ratio", -1.0))
        d["delta_prime"] = matched_delta_prime(p, base, sign=1.0)
    return DetuningParams(d["delta"], d["omega_sig"], d.get("delta_prime", 0.0), d.get("kappa_prime"),
                          d.get("g_ratio", -1.0))


def variant_model(cfg: ScenarioConfig, variant: str):
    """Returns (psd function nu -> NoisePsdBreakdown, params, has_spikes)."""
    p = cfg.detector
    if variant == "velocity":
        q = velocity_detector(p, cfg.coupling)
        return (lambda nu: velocity_psd(nu, q)), q, True
    if variant == "position":
        q = position_detector(p, cfg.position_tau, cfg.coupling)
        return (lambda nu: position_psd(nu, q)), q, False
    d = detuning_params(cfg, p)
    if variant == "velocity_detuned":
        if cfg.coupling == "opt":
            # same intracavity photon number as the resonant optimum
            q = p.replace(G=equal_power_coupling(g_opt_velocity(p), d.delta, p.kappa))
        else:
            q = p.replace(G=float(cfg.coupling))
        return (lambda nu: detuned_double_psd(nu, q, d)), q, False
    if variant == "position_detuned":
        g = optimize_g_detuned(p, d, "single") if cfg.coupling == "opt" else float(cfg.coupling)
        q = p.replace(G=g)
        return (lambda nu: detuned_single_psd(nu, q, d)), q, False
    raise ValueError(f"unknown variant {variant!r}")


# -- PSD tables ------------------------------------------------------------


def frequency_grid(lo: float, hi: float, points_per_decade: int, spike_points_per_decade: int, spikes=()):
    """Log grid with denser sampling around spikes; spikes themselves included."""
    if not hi > lo:
        return np.empty(0)
    n = max(2, int(math.ceil(math.log10(hi / lo) * points_per_decade)) + 1)
    parts = [np.geomspace(lo, hi, n)]
    for s in spikes:
        a, b = max(lo, s * (1 - SPIKE_WINDOW)), min(hi, s * (1 + SPIKE_WINDOW))
        k = max(2, int(math.ceil(math.log10(b / a) * spike_points_per_decade)) + 1)
        parts.append(np.geomspace(a, b, k))
        parts.append(np.array([s]))
    return np.unique(np.concatenate(parts))


def psd_rows(cfg: ScenarioConfig):
    """Rows (nu, shot, thermal, backaction, total, correlation, variant, spike) for each variant."""
    lo, hi = cfg.band if cfg.band is not None else (cfg.nu_min, cfg.nu_max)
    if hi <= lo:
        return []
    if lo <= 0:
        raise ValueError("PSD grid needs a positive lower frequency")
    if not math.isfinite(hi):
        raise ValueError("PSD grid needs a finite upper frequency")
    models = {v: variant_model(cfg, v) for v in cfg.variants}
    spikes = np.empty(0)
    for v, (_, q, has_spikes) in models.items():
        if has_spikes:
            spikes = np.union1d(spikes, spike_frequencies(q, lo, hi))
    nu = frequency_grid(lo, hi, cfg.points_per_decade, cfg.spike_points_per_decade, spikes)
    is_spike = np.isin(nu, spikes)
    rows = []
    for v in cfg.variants:
        fn, _, has_spikes = models[v]
        with np.errstate(divide="ignore", invalid="ignore"):
            br = fn(nu)
        corr = np.broadcast_to(np.asarray(br.correlation, dtype=float), nu.shape)
        for i in range(nu.size):
            flag = bool(has_spikes and is_spike[i])
            shot = math.inf if flag else float(br.shot[i])
            total = math.inf if flag else float(br.total[i])
            rows.append((float(nu[i]), shot, float(br.thermal[i]), float(br.backaction[i]), total,
                         float(corr[i]), v, int(flag)))
    return rows


# -- flyby SNR sweep -------------------------------------------------------


def gravitational_flyby(m_chi: float, m_s: float, b: float, tau: float) -> FlybySignal:
    return FlybySignal.gravitational(m_chi, m_s, b, v=b / tau)


def optimize_velocity_coupling(signal, p: DetectorParams, band=FULL_BAND, span_decades: float = 3.0) -> float:
    """Coupling maximising the velocity-meter optimal SNR for this signal."""
    g0 = g_opt_velocity(p)

    def neg(log_g):
        return -snr_optimal(signal, VelocityNoise(p.replace(G=g0 * 10.0**log_g)), band, rtol=1e-7).snr

    res = minimize_scalar(neg, bounds=(-span_decades, span_decades), method="bounded", options={"xatol": 1e-4})
    return g0 * 10.0**res.x


def snr_sweep(p: DetectorParams, m_chi: float, b: float, taus, band=None, optimize_velocity: bool = False):
    """Velocity (exact, closed form) and position optimal SNR for flybys of duration tau.

    The position meter is re-optimised at each tau; the velocity coupling is
    the tau-independent optimum unless ``optimize_velocity`` is set.
    """
    band = Band.coerce(band)
    pv = velocity_detector(p)
    rows = []
    for tau in taus:
        s = gravitational_flyby(m_chi, p.m, b, tau)
        qv = p.replace(G=optimize_velocity_coupling(s, p, band)) if optimize_velocity else pv
        vel = snr_optimal(s, VelocityNoise(qv), band).snr
        closed = snr_longrange_closed_form(s, qv)
        pos = snr_optimal(s, PositionNoise(position_detector(p, tau)), band).snr
        rows.append((float(tau), vel, closed, pos, vel / pos if pos > 0 else math.inf,
                     vel / closed if closed > 0 else math.inf))
    return rows


def monotonicity(values) -> str:
    d = np.diff(np.asarray(values, dtype=float))
    if d.size == 0:
        return "n/a"
    if np.all(d >= 0):
        return "non-decreasing"
    if np.all(d <= 0):
        return "non-increasing"
    return "non-monotone"


# -- named scenarios -------------------------------------------------------


DARK_MATTER_DEFAULTS = {"m_chi": 1e-5, "m_s": REFERENCE.m, "b": 1e-3, "v": 2.2e5}
DARK_MATTER_REFERENCE_SNR = 1e-3
GAS_DEFAULTS = {"delta_p_kev": 10.0, "m": 1e-18, "L": 1e-4, "t_d": 1e-5}
GAS_REFERENCE_SNR = 1.0
DETECTOR_KEYS = ("m", "omega_m", "gamma", "kappa", "T", "t_d", "L")


def _split_overrides(defaults: dict, overrides: dict | None, base: DetectorParams):
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(defaults) - set(DETECTOR_KEYS)
    if unknown:
        raise KeyError(f"unknown override(s): {', '.join(sorted(unknown))}")
    values = {**defaults, **{k: float(v) for k, v in overrides.items() if k in defaults}}
    det = {k: float(v) for k, v in overrides.items() if k in DETECTOR_KEYS and k not in defaults}
    return values, base.replace(**det)


def dark_matter_flyby(overrides: dict | None = None, base: DetectorParams = REFERENCE) -> dict:
    """Gravitational flyby of a heavy particle past the reference detector."""
    v, p = _split_overrides(DARK_MATTER_DEFAULTS, overrides, base)
    p = p.replace(m=v["m_s"])
    p = velocity_detector(p)
    s = FlybySignal.gravitational(v["m_chi"], v["m_s"], v["b"], v["v"])
    ap = approx_params(p)
    numeric = snr_optimal(s, VelocityNoise(p), FULL_BAND)
    estimate = snr_longrange_sql(s, p)
    return {
        "scenario": "dark-matter-flyby",
        "inputs": {**v, "detector": p.as_dict()},
        "tau_s": s.tau,
        "G_opt": p.G,
        "n_bm": p.n_bm,
        "n_bm_tilde": ap.n_bm_tilde,
        "theta": ap.theta,
        "eta": eta(s, p),
        "eta_sql": eta_sql(p, s.tau),
        "snr_estimate": estimate,
        "snr_closed_form": snr_longrange_closed_form(s, p),
        "snr_numeric": numeric.snr,
        "numeric_spike_refinements": numeric.spike_refinements,
        "reference_snr": DARK_MATTER_REFERENCE_SNR,
        "ratio_estimate_to_reference": estimate / DARK_MATTER_REFERENCE_SNR,
        "ratio_numeric_to_reference": numeric.snr / DARK_MATTER_REFERENCE_SNR,
        "notes": "snr_estimate: thermal floor N_BM with eta_sql; snr_closed_form: loss-inclusive "
                 "floor N_tilde with Theta at G_opt; snr_numeric: exact template against the full PSD.",
    }


def gas_collision(overrides: dict | None = None, base: DetectorParams = REFERENCE) -> dict:
    """Single gas-molecule kick on a light sensor; thermal noise excluded."""
    v, p = _split_overrides(GAS_DEFAULTS, overrides, base)
    p = p.replace(m=v["m"], L=v["L"], t_d=v["t_d"])
    dp = convert_momentum(v["delta_p_kev"])
    q = velocity_detector(p.replace(T=0.0))
    ap = approx_params(q)
    closed = snr_gas(dp, p)
    numeric = snr_optimal(ImpulseSignal(dp), VelocityNoise(q), FULL_BAND)
    return {
        "scenario": "gas-collision",
        "inputs": {**v, "delta_p": dp, "detector": p.as_dict()},
        "G_opt": q.G,
        "n_bm_tilde": ap.n_bm_tilde,
        "theta": ap.theta,
        "crossover_rad_s": math.sqrt(ap.n_bm_tilde / ap.theta),
        "eta": None,
        "snr_closed_form": closed,
        "snr_spectrum_closed_form": snr_gas_from_spectrum(dp, p),
        "snr_numeric": numeric.snr,
        "numeric_spike_refinements": numeric.spike_refinements,
        "reference_snr": GAS_REFERENCE_SNR,
        "ratio_closed_form_to_reference": closed / GAS_REFERENCE_SNR,
        "ratio_numeric_to_reference": numeric.snr / GAS_REFERENCE_SNR,
        "notes": "reference value is an order-of-magnitude figure; snr_closed_form uses Theta = hbar m, "
                 "snr_spectrum_closed_form the exact Theta at G_opt, snr_numeric the full PSD at T = 0.",
    }


SCENARIOS = {"dark-matter-flyby": dark_matter_flyby, "gas-collision": gas_collision}


def format_report(report: dict) -> str:
    lines = [f"scenario: {report['scenario']}"]
    for k, v in report.items():
        if k in ("scenario", "inputs", "notes"):
            continue
        lines.append(f"  {k:32s} {v:.6g}" if isinstance(v, float) else f"  {k:32s} {v}")
    lines.append("  inputs:")
    for k, v in report["inputs"].items():
        if k != "detector":
            lines.append(f"    {k:30s} {v:.6g}")
    lines.append("    detector: " + ", ".join(f"{k}={v:.4g}" for k, v in report["inputs"]["detector"].items()))
    lines.append(f"  note: {report['notes']}")
    return "\n".join(lines)
