"""Force templates in the time and frequency domains.

Fourier convention: F(nu) = (2 pi)^{-1/2} \\int F(t) e^{+i nu t} dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import x_k1

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ImpulseSignal:
    """Instantaneous momentum kick delta_p at time t0."""

    delta_p: float
    t0: float = 0.0

    def __post_init__(self):
        if not (self.delta_p >= 0 and math.isfinite(self.delta_p)):
            raise ValueError("delta_p must be finite and >= 0")

    def spectrum(self, nu):
        return impulse_spectrum(self, nu)

    __call__ = spectrum

    def scales(self) -> list[float]:
        return []


@dataclass(frozen=True)
class FlybySignal:
    """Transverse force from a particle on a straight line past the sensor.

    ``beta`` sets the 1/r potential V = beta / r (J m), ``b`` is the impact
    parameter and ``v`` the speed. The force peaks at t = 0.
    """

    beta: float
    b: float
    v: float

    def __post_init__(self):
        if not (self.b > 0 and self.v > 0):
            raise ValueError("impact parameter b and speed v must be > 0")

    @property
    def tau(self) -> float:
        return self.b / self.v

    @classmethod
    def gravitational(cls, m_chi: float, m_s: float, b: float, v: float) -> "FlybySignal":
        from .constants import G_N

        return cls(beta=G_N * m_chi * m_s, b=b, v=v)

    def force(self, t):
        return flyby_force(self, t)

    def spectrum(self, nu):
        return flyby_spectrum_exact(self, nu)

    __call__ = spectrum

    @property
    def total_impulse(self) -> float:
        return 2.0 * self.beta / (self.b * self.v)

    def scales(self) -> list[float]:
        return [1.0 / self.tau, 10.0 / self.tau]


@dataclass(frozen=True)
class ApproxFlyby:
    """Exponential stand-in for the flyby spectrum (an underestimate)."""

    signal: FlybySignal

    def spectrum(self, nu):
        return flyby_spectrum_approx(self.signal, nu)

    __call__ = spectrum

    def scales(self):
        return self.signal.scales()


def impulse_spectrum(s: ImpulseSignal, nu):
    """delta_p e^{i nu t0} / sqrt(2 pi); flat in magnitude."""
    nu = np.asarray(nu, dtype=float)
    return s.delta_p * np.exp(1j * nu * s.t0) / _SQRT_2PI


def flyby_force(s: FlybySignal, t):
    """beta b / (b^2 + v^2 t^2)^{3/2}."""
    t = np.asarray(t, dtype=float)
    return s.beta * s.b / (s.b**2 + (s.v * t) ** 2) ** 1.5


def flyby_spectrum_exact(s: FlybySignal, nu):
    """sqrt(2/pi) beta |nu| / v^2 K_1(b |nu| / v), real and even."""
    nu = np.asarray(nu, dtype=float)
    # |nu| K1(b|nu|/v) = (v/b) xK1(x) with x = b|nu|/v, finite at nu = 0
    return _SQRT_2_OVER_PI * s.beta / (s.b * s.v) * x_k1(s.b * nu / s.v)


def flyby_spectrum_approx(s: FlybySignal, nu):
    """sqrt(2/pi) beta / (b v) e^{-tau |nu| / 2}."""
    nu = np.asarray(nu, dtype=float)
    return _SQRT_2_OVER_PI * s.beta / (s.b * s.v) * np.exp(-0.5 * s.tau * np.abs(nu))


def numeric_spectrum(force, nu, half_span: float, dt: float):
    """(2 pi)^{-1/2} sum_n F(t_n) e^{i nu t_n} dt on t_n in [-half_span, half_span].

    A brute-force transform of a time-domain template, used as an oracle for
    the analytic spectra. Accurate when F is smooth on the dt scale and has
    decayed by +-half_span.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    n = int(round(half_span / dt))
    t = np.arange(-n, n + 1) * dt
    f = force(t)
    out = np.empty(nu.size, dtype=complex)
    for i, w in enumerate(nu):
        out[i] = np.sum(f * np.exp(1j * w * t)) * dt / _SQRT_2PI
    return out
