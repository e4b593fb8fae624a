"""Force-noise power spectral densities for velocity and position meters.

All PSDs are two-sided in angular frequency, normalised so that a force
with <F(t) F(t')> = N delta(t - t') has N(nu) = N. Units are N^2 s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .response import (
    DetectorParams,
    cavity_phase_factor,
    cavity_response,
    mechanical_response,
)

# |1 + e^{i psi}| below this is treated as an exact shot-noise pole.
SPIKE_ATOL = 1e-14


@dataclass(frozen=True)
class NoisePsdBreakdown:
    """Shot / thermal / back-action decomposition of a force-noise PSD.

    ``correlation`` holds the shot/back-action cross term; it is identically
    zero for the resonant models and only appears for detuned readouts.
    """

    shot: np.ndarray
    thermal: np.ndarray
    backaction: np.ndarray
    correlation: np.ndarray | float = 0.0

    @property
    def total(self) -> np.ndarray:
        return self.shot + self.thermal + self.backaction + self.correlation


@dataclass(frozen=True)
class ApproxPsdParams:
    n_bm_tilde: float  # N^2 s
    theta: float  # N^2 s^3


def thermal_noise(p: DetectorParams) -> float:
    """Brownian force noise N_BM = 4 m gamma k_B T."""
    return p.n_bm


def delay_phase_factor(nu, p: DetectorParams):
    """e^{i(nu t_d + phi_c)}, the round-trip factor of the double ring."""
    nu = np.asarray(nu, dtype=float)
    return np.exp(1j * nu * p.t_d) * cavity_phase_factor(nu, p.kappa)


def velocity_psd(nu, p: DetectorParams) -> NoisePsdBreakdown:
    """Exact force-noise PSD of the double-ring velocity meter.

    Shot-noise poles (where 1 + e^{i(nu t_d + phi_c)} vanishes) come back as
    ``inf`` in the shot component.
    """
    nu = np.asarray(nu, dtype=float)
    chi_c2 = np.abs(cavity_response(nu, p.kappa)) ** 2
    chi_m2 = np.abs(mechanical_response(nu, p)) ** 2
    g2 = p.G**2
    # |1 + e^{i psi}|^2 / 4 == cos^2(psi / 2), evaluated without extracting psi
    amp = np.abs(1.0 + delay_phase_factor(nu, p))
    cos2 = amp**2 / 4.0
    with np.errstate(divide="ignore"):
        shot = 1.0 / (4.0 * (1.0 - p.L) * g2 * chi_c2 * chi_m2 * cos2)
    shot = np.where(amp < SPIKE_ATOL, np.inf, shot)
    kk = p.kappa**2 / 4.0
    bracket = 1.0 - p.L / 2.0 + (1.0 - p.L) / (nu**2 + kk) * (
        nu * p.kappa * np.sin(nu * p.t_d) + (nu**2 - kk) * np.cos(nu * p.t_d)
    )
    backaction = 2.0 * HBAR**2 * g2 * chi_c2 * np.maximum(bracket, 0.0)
    thermal = np.full_like(shot, p.n_bm)
    return NoisePsdBreakdown(shot, thermal, backaction)


def spike_frequencies(p: DetectorParams, lo: float, hi: float, max_count: int = 100_000):
    """Positive frequencies in [lo, hi] where the velocity-meter shot noise diverges.

    These solve nu t_d + phi_c(nu) = (2k + 1) pi for k >= 1, with phi_c on its
    continuous branch pi + 2 arctan(2 nu / kappa). Found by bisection.
    """
    if p.t_d <= 0 or not hi > lo:
        return np.empty(0)
    if not math.isfinite(hi):
        raise ValueError("spike search needs a finite upper frequency")
    k_lo = max(1, math.floor(lo * p.t_d / (2.0 * math.pi)))
    k_hi = math.floor((hi * p.t_d / math.pi + 1.0) / 2.0) + 1
    if k_hi - k_lo > max_count:
        raise ValueError(f"more than {max_count} shot-noise spikes in [{lo}, {hi}]")
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    if k.size == 0:
        return np.empty(0)
    # g(nu) = nu t_d + 2 arctan(2 nu / kappa) - 2 pi k is increasing in nu
    a = (2.0 * k - 1.0) * math.pi / p.t_d
    b = 2.0 * math.pi * k / p.t_d
    for _ in range(200):
        mid = 0.5 * (a + b)
        g = mid * p.t_d + 2.0 * np.arctan(2.0 * mid / p.kappa) - 2.0 * math.pi * k
        below = g < 0
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(b - a <= 4 * np.finfo(float).eps * b):
            break
    roots = 0.5 * (a + b)
    return roots[(roots >= lo) & (roots <= hi)]


def approx_params(p: DetectorParams) -> ApproxPsdParams:
    """White floor and nu^2 coefficient of the in-band approximation."""
    g2 = p.G**2
    if g2 == 0:
        raise ValueError("approximate PSD needs G > 0")
    s = (4.0 + p.kappa * p.t_d) ** 2
    n_tilde = p.n_bm + 4.0 * HBAR**2 * g2 * p.L / p.kappa
    shot_like = p.m * p.kappa**3 / (4.0 * HBAR * g2 * s)
    ba_like = 4.0 * HBAR * g2 * s / (p.m * p.kappa**3)
    return ApproxPsdParams(n_tilde, HBAR * p.m * (shot_like + ba_like))


def theta_terms(p: DetectorParams) -> tuple[float, float]:
    """The shot-like and back-action-like brackets of the nu^2 coefficient."""
    g2 = p.G**2
    s = (4.0 + p.kappa * p.t_d) ** 2
    return p.m * p.kappa**3 / (4.0 * HBAR * g2 * s), 4.0 * HBAR * g2 * s / (p.m * p.kappa**3)


def velocity_psd_approx(nu, p: DetectorParams):
    """N_tilde + Theta nu^2, valid for omega_m << nu < kappa."""
    ap = approx_params(p)
    return ap.n_bm_tilde + ap.theta * np.asarray(nu, dtype=float) ** 2


def g_opt_velocity(p: DetectorParams) -> float:
    """Coupling minimising the nu^2 coefficient of the approximate PSD."""
    if p.m <= 0 or p.kappa <= 0 or p.t_d <= 0:
        raise ValueError("g_opt_velocity needs m, kappa, t_d > 0")
    g2 = 0.25 * p.m * p.kappa**3 / (HBAR * (4.0 + p.kappa * p.t_d) ** 2)
    return math.sqrt(g2)


def velocity_psd_optimized(nu, p: DetectorParams):
    """N_BM + (hbar m / t_d^2)(L + nu^2 t_d^2), the printed optimised form.

    Substituting the optimal coupling into the approximate PSD gives a nu^2
    coefficient of 2 hbar m rather than hbar m; this function keeps the
    printed expression and :func:`velocity_psd_approx` carries the other.
    """
    if p.t_d <= 0:
        raise ValueError("t_d must be > 0")
    nu = np.asarray(nu, dtype=float)
    return p.n_bm + HBAR * p.m / p.t_d**2 * (p.L + nu**2 * p.t_d**2)


def velocity_psd_low_asymptote(nu, p: DetectorParams):
    """nu -> 0 limit: m^2 kappa^3 omega_m^4 / (4 G^2 (4 + kappa t_d)^2 nu^2)."""
    nu = np.asarray(nu, dtype=float)
    return p.m**2 * p.kappa**3 * p.omega_m**4 / (4.0 * p.G**2 * (4.0 + p.kappa * p.t_d) ** 2 * nu**2)


def velocity_psd_high_asymptote(nu, p: DetectorParams, delay_factor: bool = True):
    """nu -> infinity limit of the velocity-meter PSD.

    The envelope m^2 nu^6 / (G^2 kappa) drops the oscillating delay-line
    factor; with ``delay_factor`` the exact factor 1 / (4 (1 - L) cos^2(psi/2))
    is restored, which is what the full PSD actually approaches pointwise.
    """
    nu = np.asarray(nu, dtype=float)
    env = p.m**2 * nu**6 / (p.G**2 * p.kappa)
    if not delay_factor:
        return env
    cos2 = np.abs(1.0 + delay_phase_factor(nu, p)) ** 2 / 4.0
    with np.errstate(divide="ignore"):
        return env / (4.0 * (1.0 - p.L) * cos2)


def position_psd(nu, p: DetectorParams) -> NoisePsdBreakdown:
    """Force-noise PSD of the resonant single-sided cavity (position meter)."""
    nu = np.asarray(nu, dtype=float)
    chi_c2 = np.abs(cavity_response(nu, p.kappa)) ** 2
    chi_m2 = np.abs(mechanical_response(nu, p)) ** 2
    g2 = p.G**2
    with np.errstate(divide="ignore"):
        shot = 1.0 / (g2 * chi_c2 * chi_m2)
    backaction = HBAR**2 * g2 * chi_c2
    return NoisePsdBreakdown(shot, np.full_like(shot, p.n_bm), backaction)


def g_opt_position(p: DetectorParams, tau: float) -> float:
    """Coupling balancing shot noise and back-action at nu = 1 / tau."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    nu = 1.0 / tau
    chi_c2 = abs(complex(cavity_response(nu, p.kappa))) ** 2
    chi_m = abs(complex(mechanical_response(nu, p)))
    return math.sqrt(1.0 / (HBAR * chi_c2 * chi_m))


def eta_sql(p: DetectorParams, tau: float) -> float:
    """sqrt(hbar m / (tau^2 N_BM)): SQL measurement noise over thermal noise."""
    if p.n_bm == 0:
        return math.inf
    return math.sqrt(HBAR * p.m / (tau**2 * p.n_bm))


def sql_impulse_variance(p: DetectorParams, tau: float) -> float:
    """Impulse variance of an SQL-limited position meter over time tau."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return p.n_bm * tau + HBAR * p.m / tau


def velocity_impulse_variance(p: DetectorParams, tau: float) -> float:
    """Impulse variance N_BM tau (1 + eta) of the back-action-evading meter."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if p.n_bm == 0:
        return math.sqrt(HBAR * p.m)
    return p.n_bm * tau * (1.0 + eta_sql(p, tau))


# -- spectrum objects -------------------------------------------------------


class NoiseSpectrum:
    """A real, even, positive force-noise PSD N(nu).

    Subclasses implement :meth:`breakdown`. ``nodes`` lists frequencies where
    integrators should place segment boundaries; ``poles`` lists frequencies
    where N is infinite.
    """

    def breakdown(self, nu) -> NoisePsdBreakdown:
        raise NotImplementedError

    def __call__(self, nu):
        return self.breakdown(nu).total

    def poles(self, lo: float, hi: float) -> np.ndarray:
        return np.empty(0)

    def scales(self) -> list[float]:
        return []

    # poles above this frequency are not used as integration nodes
    pole_cap = math.inf

    def nodes(self, lo: float, hi: float) -> np.ndarray:
        pts = [s for s in self.scales() if math.isfinite(s) and lo < s < hi]
        cap = min(hi, self.pole_cap)
        if math.isfinite(cap) and cap > lo:
            pts.extend(self.poles(lo, cap))
        return np.unique(np.asarray(pts, dtype=float))


class WhiteNoise(NoiseSpectrum):
    def __init__(self, level: float):
        if level <= 0:
            raise ValueError("white noise level must be > 0")
        self.level = float(level)

    def breakdown(self, nu):
        nu = np.asarray(nu, dtype=float)
        z = np.zeros_like(nu)
        return NoisePsdBreakdown(z, np.full_like(nu, self.level), z)


class QuadraticNoise(NoiseSpectrum):
    """N_tilde + Theta nu^2 (the in-band approximation as a spectrum)."""

    def __init__(self, n_bm_tilde: float, theta: float):
        if n_bm_tilde <= 0 or theta < 0:
            raise ValueError("need n_bm_tilde > 0 and theta >= 0")
        self.n_bm_tilde = float(n_bm_tilde)
        self.theta = float(theta)

    @classmethod
    def from_detector(cls, p: DetectorParams) -> "QuadraticNoise":
        ap = approx_params(p)
        return cls(ap.n_bm_tilde, ap.theta)

    def breakdown(self, nu):
        nu = np.asarray(nu, dtype=float)
        z = np.zeros_like(nu)
        return NoisePsdBreakdown(self.theta * nu**2, np.full_like(nu, self.n_bm_tilde), z)

    def scales(self):
        return [math.sqrt(self.n_bm_tilde / self.theta)] if self.theta > 0 else []


class VelocityNoise(NoiseSpectrum):
    # the shot term diverges as nu -> 0 (the readout is blind to static force)
    low_divergence = True

    def __init__(self, p: DetectorParams):
        if p.G <= 0:
            raise ValueError("velocity meter needs G > 0")
        self.p = p
        self.pole_cap = 10.0 * p.kappa

    def breakdown(self, nu):
        return velocity_psd(nu, self.p)

    def poles(self, lo, hi):
        return spike_frequencies(self.p, lo, hi)

    def scales(self):
        p = self.p
        out = [p.kappa / 2.0, p.kappa]
        if p.omega_m > 0:
            out.append(p.omega_m)
        if p.t_d > 0:
            out.append(math.sqrt(p.kappa / (2.0 * p.t_d)))
            ap = approx_params(p)
            if ap.n_bm_tilde > 0:
                out.append(math.sqrt(ap.n_bm_tilde / ap.theta))
        return out


class OptimizedVelocityNoise(NoiseSpectrum):
    def __init__(self, p: DetectorParams):
        self.p = p

    def breakdown(self, nu):
        nu = np.asarray(nu, dtype=float)
        p = self.p
        z = np.zeros_like(nu)
        measured = HBAR * p.m / p.t_d**2 * (p.L + nu**2 * p.t_d**2)
        return NoisePsdBreakdown(measured, np.full_like(nu, p.n_bm), z)


class PositionNoise(NoiseSpectrum):
    def __init__(self, p: DetectorParams):
        if p.G <= 0:
            raise ValueError("position meter needs G > 0")
        self.p = p

    def breakdown(self, nu):
        return position_psd(nu, self.p)

    def scales(self):
        p = self.p
        out = [p.kappa / 2.0]
        if p.omega_m > 0:
            out.append(p.omega_m)
        return out


__all__ = [
    "NoisePsdBreakdown",
    "ApproxPsdParams",
    "NoiseSpectrum",
    "WhiteNoise",
    "QuadraticNoise",
    "VelocityNoise",
    "OptimizedVelocityNoise",
    "PositionNoise",
    "thermal_noise",
    "velocity_psd",
    "velocity_psd_approx",
    "velocity_psd_optimized",
    "velocity_psd_low_asymptote",
    "velocity_psd_high_asymptote",
    "approx_params",
    "theta_terms",
    "g_opt_velocity",
    "position_psd",
    "g_opt_position",
    "sql_impulse_variance",
    "velocity_impulse_variance",
    "eta_sql",
    "spike_frequencies",
    "SPIKE_ATOL",
]
