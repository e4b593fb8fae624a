"""Matched filtering: optimal-filter SNR, generic-filter SNR and impulse variances.

SNR integrals run over one-sided bands [nu_lo, nu_hi] with
SNR^2 = \\int_band |F_sig|^2 / N dnu for the optimal filter F_sig / N. For a
real signal the full-line value is sqrt(2) larger; ``two_sided`` options
return that variant where it matters (Monte Carlo comparisons).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .noise import NoiseSpectrum, QuadraticNoise, VelocityNoise, approx_params
from .quadrature import DEFAULT_RTOL, QuadRule, adaptive_rule
from .response import DetectorParams, PoleError
from .signals import FlybySignal


@dataclass(frozen=True)
class Band:
    nu_lo: float
    nu_hi: float

    def __post_init__(self):
        if not (self.nu_lo >= 0 and self.nu_hi > self.nu_lo) or math.isnan(self.nu_hi):
            raise ValueError(f"band needs 0 <= nu_lo < nu_hi, got [{self.nu_lo}, {self.nu_hi}]")

    @classmethod
    def coerce(cls, band) -> "Band":
        if band is None:
            return cls(0.0, math.inf)
        if isinstance(band, Band):
            return band
        lo, hi = band
        return cls(float(lo), float(hi))

    @property
    def width(self) -> float:
        return self.nu_hi - self.nu_lo


FULL_BAND = Band(0.0, math.inf)


def default_band(p: DetectorParams, tau_coll: float = math.inf) -> Band:
    """[max(10 omega_m, 1/tau_coll), sqrt(kappa / 2 t_d)], where the approximate PSD holds."""
    if p.t_d <= 0:
        raise ValueError("default band needs t_d > 0")
    lo = max(10.0 * p.omega_m, 1.0 / tau_coll)
    return Band(lo, math.sqrt(p.kappa / (2.0 * p.t_d)))


@dataclass
class SnrReport:
    snr: float
    band: Band
    n_evals: int
    spike_refinements: int
    closed_form: float | None = None
    error: float = 0.0
    rule: QuadRule | None = field(default=None, repr=False)

    @property
    def ratio(self) -> float | None:
        """Numeric over closed-form SNR."""
        if self.closed_form is None or self.closed_form == 0:
            return None
        return self.snr / self.closed_form

    def as_dict(self) -> dict:
        return {
            "snr": self.snr,
            "band": [self.band.nu_lo, self.band.nu_hi],
            "n_evals": self.n_evals,
            "spike_refinements": self.spike_refinements,
            "closed_form": self.closed_form,
            "ratio": self.ratio,
        }


def _signal_scales(signal) -> list[float]:
    scales = getattr(signal, "scales", None)
    return list(scales()) if scales is not None else []


def _nodes(signal, noise: NoiseSpectrum, band: Band) -> tuple[np.ndarray, int]:
    pts = noise.nodes(band.nu_lo, band.nu_hi)
    n_poles = 0
    cap = min(band.nu_hi, noise.pole_cap)
    if cap > band.nu_lo and math.isfinite(cap):
        n_poles = len(noise.poles(band.nu_lo, cap))
    extra = [s for s in _signal_scales(signal) if band.nu_lo < s < band.nu_hi]
    return np.unique(np.concatenate([pts, np.asarray(extra, dtype=float)])), n_poles


def _inverse_noise(noise: NoiseSpectrum, nu):
    n = noise(nu)
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(n), 0.0, 1.0 / n)


def snr_optimal(signal, noise: NoiseSpectrum, band=FULL_BAND, rtol: float = DEFAULT_RTOL) -> SnrReport:
    """Optimal-filter SNR, sqrt(\\int_band |F_sig|^2 / N dnu)."""
    band = Band.coerce(band)
    pts, n_poles = _nodes(signal, noise, band)

    def integrand(nu):
        return np.abs(signal(nu)) ** 2 * _inverse_noise(noise, nu)

    if band.nu_hi == math.inf and len(pts) == 0 and band.nu_lo == 0:
        raise ValueError("no frequency scale available to anchor a [0, inf) integral")
    rule = adaptive_rule(integrand, band.nu_lo, band.nu_hi, pts, rtol=rtol)
    snr2 = max(float(rule.value), 0.0)
    return SnrReport(math.sqrt(snr2), band, rule.n_evals, n_poles, error=rule.error, rule=rule)


def matched_filter(signal, noise: NoiseSpectrum):
    """The optimal filter f(nu) = F_sig(nu) / N(nu) as a callable."""

    def f(nu):
        return signal(nu) * _inverse_noise(noise, nu)

    return f


def box_filter(tau: float):
    """Spectrum of the unit window on [0, tau], whose output is \\int_0^tau F dt."""

    def f(nu):
        nu = np.asarray(nu, dtype=float)
        x = 0.5 * nu * tau
        # (e^{i nu tau} - 1) / (i nu sqrt(2 pi)) = tau e^{i x} sinc(x) / sqrt(2 pi)
        return tau * np.exp(1j * x) * np.sinc(x / np.pi) / math.sqrt(2.0 * math.pi)

    f.scales = lambda: [2.0 * math.pi * k / tau for k in (1, 2, 4, 8, 16)]
    return f


def snr_generic(filt, signal, noise: NoiseSpectrum, band=FULL_BAND, rule: QuadRule | None = None,
                two_sided: bool = False, rtol: float = DEFAULT_RTOL) -> float:
    """|\\int f* F_sig dnu|^2 / \\int |f|^2 N dnu over the band, square-rooted.

    Passing the ``rule`` of an :func:`snr_optimal` report evaluates both
    integrals on the same nodes, so the discrete Cauchy-Schwarz bound holds
    exactly. ``two_sided`` mirrors the band to negative frequencies assuming
    Hermitian f and F_sig.
    """
    band = Band.coerce(band)
    if rule is None:
        pts, _ = _nodes(signal, noise, band)
        extra = [x for x in _signal_scales(filt) if band.nu_lo < x < band.nu_hi]
        pts = np.unique(np.concatenate([pts, np.asarray(extra, dtype=float)]))

        def den_int(nu):
            return np.abs(filt(nu)) ** 2 * noise(nu)

        def num_int(nu):
            return np.conj(filt(nu)) * signal(nu)

        den = adaptive_rule(den_int, band.nu_lo, band.nu_hi, pts, rtol=rtol).value
        num = adaptive_rule(num_int, band.nu_lo, band.nu_hi, pts, rtol=rtol).value
    else:
        nu = rule.nodes
        fv = filt(nu)
        f2 = np.abs(fv) ** 2
        with np.errstate(invalid="ignore"):
            den = rule.integrate(np.where(f2 == 0, 0.0, f2 * noise(nu)))
        num = rule.integrate(np.conj(fv) * signal(nu))
    if not den > 0:
        raise ValueError("filter has zero norm on the band")
    if two_sided:
        return math.sqrt(4.0 * complex(num).real ** 2 / (2.0 * den))
    return math.sqrt(abs(num) ** 2 / den)


def box_impulse_variance(noise: NoiseSpectrum, tau: float, band=FULL_BAND, rtol: float = DEFAULT_RTOL) -> float:
    """Variance of \\int_0^tau F_E dt restricted to +-band.

    Equals (1/2 pi) \\int_{|nu| in band} 4 sin^2(nu tau / 2) / nu^2 N dnu,
    i.e. (1/pi) times the one-sided integral.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return 0.0
    band = Band.coerce(band)
    if band.nu_lo == 0 and getattr(noise, "low_divergence", False):
        raise PoleError("noise diverges at nu = 0; raise the lower band edge")
    if math.isinf(band.nu_hi):
        # every delay-line spike up to infinity lies in the band
        if isinstance(noise, VelocityNoise) and noise.p.t_d > 0:
            raise PoleError("band reaches shot-noise spikes of the velocity meter")
        poles = noise.poles(band.nu_lo, noise.pole_cap) if math.isfinite(noise.pole_cap) else []
    else:
        poles = noise.poles(band.nu_lo, band.nu_hi)
    if len(poles):
        raise PoleError(f"band contains {len(poles)} noise poles, first at {poles[0]:.6g} rad/s")

    def integrand(nu):
        x = 0.5 * nu * tau
        # 4 sin^2(x) / nu^2 = tau^2 sinc^2(x)
        return tau**2 * np.sinc(x / np.pi) ** 2 * noise(nu)

    pts = list(noise.nodes(band.nu_lo, band.nu_hi))
    # sinc^2 lobes: force nodes at the first few zeros, then the envelope decays as 1/nu^2
    pts += [2.0 * math.pi * k / tau for k in (1, 2, 4, 8, 16)]
    rule = adaptive_rule(integrand, band.nu_lo, band.nu_hi, pts, rtol=rtol)
    return rule.value / math.pi


def snr_impulse_closed_form(delta_p: float, n_bm_tilde: float, theta: float) -> float:
    """sqrt(Delta_p^2 / (4 sqrt(Theta N_tilde))), the [0, inf) optimal SNR for N_tilde + Theta nu^2."""
    return math.sqrt(delta_p**2 / (4.0 * math.sqrt(theta * n_bm_tilde)))


def snr_gas(delta_p: float, p: DetectorParams) -> float:
    """Single-collision SNR with thermal noise dropped and optimal coupling.

    sqrt(Delta_p^2 t_d / (sqrt(L) hbar m)). Diverges as L -> 0.
    """
    if p.L <= 0:
        raise ValueError("gas-collision SNR diverges for L = 0")
    if p.t_d <= 0:
        raise ValueError("t_d must be > 0")
    return math.sqrt(delta_p**2 * p.t_d / (math.sqrt(p.L) * HBAR * p.m))


def snr_gas_from_spectrum(delta_p: float, p: DetectorParams) -> float:
    """The same limit evaluated from the quadratic PSD at optimal coupling and gamma = 0."""
    from .noise import g_opt_velocity

    q = p.replace(gamma=0.0, G=g_opt_velocity(p))
    ap = approx_params(q)
    return snr_impulse_closed_form(delta_p, ap.n_bm_tilde, ap.theta)


def eta(s: FlybySignal, p: DetectorParams) -> float:
    """sqrt(Theta / (N_tilde tau^2)) for the approximate PSD at the detector's G."""
    ap = approx_params(p)
    return math.sqrt(ap.theta / (ap.n_bm_tilde * s.tau**2))


def snr_longrange_closed_form(s: FlybySignal, p: DetectorParams) -> float:
    """sqrt(beta^2 / (b^2 v^2 tau N_tilde (1 + eta))) from the exponential template."""
    ap = approx_params(p)
    e = eta(s, p)
    return math.sqrt(s.beta**2 / (s.b**2 * s.v**2 * s.tau * ap.n_bm_tilde * (1.0 + e)))


def snr_longrange_sql(s: FlybySignal, p: DetectorParams) -> float:
    """Optimised-coupling estimate with N_tilde -> N_BM and Theta -> hbar m.

    This is the form used for order-of-magnitude scenario numbers; it drops
    the loss contribution to the white floor.
    """
    from .noise import eta_sql

    if p.n_bm <= 0:
        raise ValueError("needs a thermal floor N_BM > 0")
    e = eta_sql(p, s.tau)
    return math.sqrt(s.beta**2 / (s.b**2 * s.v**2 * s.tau * p.n_bm * (1.0 + e)))


def snr_longrange(s: FlybySignal, p: DetectorParams, band=FULL_BAND, rtol: float = DEFAULT_RTOL) -> SnrReport:
    """Numeric optimal SNR of the exact flyby template against the velocity PSD.

    ``closed_form`` carries the exponential-template estimate. Its validity
    needs tau sqrt(kappa / 2 t_d) >~ 1.
    """
    report = snr_optimal(s, VelocityNoise(p), band, rtol=rtol)
    report.closed_form = snr_longrange_closed_form(s, p)
    return report


def snr_approx_noise(signal, p: DetectorParams, band=FULL_BAND, rtol: float = DEFAULT_RTOL) -> SnrReport:
    """Optimal SNR against the quadratic approximation N_tilde + Theta nu^2."""
    return snr_optimal(signal, QuadraticNoise.from_detector(p), band, rtol=rtol)


__all__ = [
    "Band",
    "FULL_BAND",
    "SnrReport",
    "default_band",
    "snr_optimal",
    "snr_generic",
    "matched_filter",
    "box_filter",
    "box_impulse_variance",
    "snr_impulse_closed_form",
    "snr_gas",
    "snr_gas_from_spectrum",
    "eta",
    "snr_longrange",
    "snr_longrange_closed_form",
    "snr_longrange_sql",
    "snr_approx_noise",
]
