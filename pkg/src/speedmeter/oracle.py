"""Toy-parameter Monte Carlo checks of the analytic noise and SNR formulas."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import K_B
from .filtering import Band, matched_filter, snr_generic
from .langevin import (
    SimConfig,
    compare_bands,
    estimate_force_psd,
    estimate_psd,
    run_snr_trials,
    simulate,
)
from .noise import PositionNoise, VelocityNoise, g_opt_position, g_opt_velocity
from .response import DetectorParams, mechanical_response
from .signals import ImpulseSignal

TOY_N_BM = 1e-30
TOY_DT = 5e-5
TOY_BASE = DetectorParams(m=1e-6, omega_m=10.0, gamma=1.0, kappa=1e3, T=TOY_N_BM / (4e-6 * K_B))
TOY_SINGLE = TOY_BASE.replace(G=g_opt_position(TOY_BASE, 0.01))
_DOUBLE = TOY_BASE.replace(t_d=0.01, L=1e-3)
TOY_DOUBLE = _DOUBLE.replace(G=g_opt_velocity(_DOUBLE))
SINGLE_BAND = (50.0, 400.0)
DOUBLE_BAND = (30.0, 300.0)  # below the first spike near 476 rad/s
PSD_TOL = 0.10
SNR_TOL = 0.15
TOY_IMPULSE = ImpulseSignal(1.5e-15)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class OracleReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        return "\n".join(c.line() for c in self.checks) + f"\n{'ALL PASS' if self.passed else 'MISMATCH'}\n"


DEFAULT_MODELS = {"single": PositionNoise, "double": VelocityNoise}


def _psd_check(name, p, cfg, band, model, nperseg, tol=PSD_TOL):
    tr = simulate(p, cfg)
    est = estimate_force_psd(tr, nperseg=nperseg, min_segments=64)
    rows = compare_bands(est, model(tr.params), *band)
    worst = max(rows, key=lambda r: abs(r[2] - 1.0))
    ok = all(abs(r[2] - 1.0) <= tol for r in rows)
    return Check(name, ok, f"{est.n_segments} segments, worst sub-band ratio {worst[2]:.4f} "
                           f"in [{worst[0]:.4g}, {worst[1]:.4g}] rad/s (tol {tol:.0%})",
                 {"rows": rows, "n_segments": est.n_segments})


def psd_check_single(seed: int, segments: int, model=PositionNoise, dt: float = TOY_DT) -> Check:
    nperseg = int(round(2**15 * TOY_DT / dt))
    cfg = SimConfig(dt=dt, duration=nperseg * segments * dt, seed=seed, burn_in=10.0)
    label = "single-sided force PSD" + (f" (dt = {dt:g})" if dt != TOY_DT else "")
    return _psd_check(label, TOY_SINGLE, cfg, SINGLE_BAND, model, nperseg)


def psd_check_double(seed: int, segments: int, model=VelocityNoise) -> Check:
    nperseg = 2**15
    cfg = SimConfig(dt=TOY_DT, duration=nperseg * segments * TOY_DT, seed=seed, burn_in=10.0, topology="double")
    return _psd_check("double-ring force PSD", TOY_DOUBLE, cfg, DOUBLE_BAND, model, nperseg)


def vacuum_check(seed: int, segments: int = 128) -> Check:
    """G = 0 and no force: the output quadrature is filtered vacuum with unit PSD."""
    p = TOY_BASE.replace(T=0.0)
    nperseg = 2**12
    cfg = SimConfig(dt=TOY_DT, duration=nperseg * segments * TOY_DT, seed=seed)
    est = estimate_psd(simulate(p, cfg).samples, TOY_DT, nperseg).band(10.0, 2000.0)
    ratio = float(np.mean(est.psd))
    ci = float(np.sqrt(np.mean(est.ci95**2) / max(1, est.frequencies.size / 2)))
    ok = abs(ratio - 1.0) <= max(3 * ci, 0.02)
    return Check("vacuum output PSD", ok, f"mean level {ratio:.4f} (expected 1, ci {ci:.4f})")


def fdt_check(seed: int, segments: int = 256) -> Check:
    """G = 0 with thermal drive: position PSD equals |chi_m|^2 N_BM."""
    p = TOY_BASE
    nperseg = 2**15
    cfg = SimConfig(dt=TOY_DT, duration=nperseg * segments * TOY_DT, seed=seed, burn_in=10.0, keep_position=True)
    est = estimate_psd(simulate(p, cfg).position, TOY_DT, nperseg)

    def model(nu):
        return np.abs(mechanical_response(nu, p)) ** 2 * p.n_bm

    rows = compare_bands(est, model, 30.0, 300.0, n_sub=4)
    worst = max(rows, key=lambda r: abs(r[2] - 1.0))
    ok = all(abs(r[2] - 1.0) <= PSD_TOL for r in rows)
    return Check("fluctuation-dissipation (position PSD)", ok, f"worst sub-band ratio {worst[2]:.4f} (tol {PSD_TOL:.0%})")


def snr_check(seed: int, trajectories: int = 600, model=PositionNoise) -> Check:
    p = TOY_SINGLE
    noise = model(p)
    filt = matched_filter(TOY_IMPULSE, noise)
    band = Band(*SINGLE_BAND)
    analytic = snr_generic(filt, TOY_IMPULSE, noise, band, two_sided=True)
    cfg = SimConfig(dt=TOY_DT, duration=2.0, seed=seed, burn_in=5.0, injected_signal=TOY_IMPULSE,
                    n_trajectories=trajectories)
    trials = run_snr_trials(p, cfg, filt, SINGLE_BAND)
    rel = trials.snr / analytic - 1.0
    ok = abs(rel) <= SNR_TOL
    return Check("matched-filter SNR", ok, f"empirical {trials.snr:.4f} vs analytic {analytic:.4f} "
                                           f"({rel:+.1%}, tol {SNR_TOL:.0%}, {trajectories} trajectories)",
                 {"empirical": trials.snr, "analytic": analytic})


def run_oracle(seed: int = 0, segments: int = 1024, trajectories: int = 600, models: dict | None = None) -> OracleReport:
    """All toy checks; ``models`` maps "single"/"double" to a NoiseSpectrum factory."""
    m = {**DEFAULT_MODELS, **(models or {})}
    checks = [
        vacuum_check(seed + 1),
        fdt_check(seed + 2),
        psd_check_single(seed + 3, segments, m["single"]),
        psd_check_single(seed + 4, max(64, segments // 2), m["single"], dt=TOY_DT / 2),
        psd_check_double(seed + 5, segments, m["double"]),
        snr_check(seed + 6, trajectories, m["single"]),
    ]
    return OracleReport(checks)


def corrupted(factor: float):
    """Factory scaling the single-sided analytic PSD; a negative control for the oracle."""

    class Scaled(PositionNoise):
        def __call__(self, nu):
            return factor * super().__call__(nu)

    return Scaled


__all__ = ["Check", "OracleReport", "run_oracle", "TOY_SINGLE", "TOY_DOUBLE", "corrupted"]
