"""Detector parameters and the cavity / mechanical response functions."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import K_B


class PoleError(ValueError):
    """Raised when a response or noise model is evaluated on a pole."""


@dataclass(frozen=True)
class DetectorParams:
    """Mechanical, optical and bath parameters of one sensor.

    Rates are angular (rad/s). ``G`` is the drive-enhanced optomechanical
    coupling in (rad/s)/m, taken real and non-negative. ``t_d`` and ``L``
    describe the delay line between the two ring cavities and are ignored
    by the single-sided (position meter) model.
    """

    m: float
    omega_m: float
    gamma: float
    kappa: float
    T: float
    G: float = 0.0
    t_d: float = 0.0
    L: float = 0.0

    def __post_init__(self):
        for name in ("m", "omega_m", "gamma", "kappa", "T", "G", "t_d", "L"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.m <= 0:
            raise ValueError("m must be > 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.gamma < 0 or self.omega_m < 0 or self.T < 0:
            raise ValueError("gamma, omega_m and T must be >= 0")
        if self.G < 0:
            raise ValueError("G must be >= 0 (real gauge)")
        if self.t_d < 0:
            raise ValueError("t_d must be >= 0")
        if not 0.0 <= self.L <= 1.0:
            raise ValueError("L must lie in [0, 1]")

    def replace(self, **changes) -> "DetectorParams":
        return dataclasses.replace(self, **changes)

    @property
    def n_bm(self) -> float:
        """Thermal force noise 4 m gamma k_B T in N^2 s."""
        return 4.0 * self.m * self.gamma * K_B * self.T

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# Reference detector used for the force-noise comparison plots: 1 g mirror,
# 10 mK bath, 10 us delay line with 1e-4 loss. Rates read as rad/s.
REFERENCE = DetectorParams(
    m=1e-3, omega_m=1.0, gamma=1e-4, kappa=1e7, T=1e-2, G=0.0, t_d=1e-5, L=1e-4
)


class ResponseSet(NamedTuple):
    chi_c: np.ndarray
    chi_m: np.ndarray
    phase_factor: np.ndarray


def cavity_response(nu, kappa: float):
    nu = np.asarray(nu, dtype=float)
    return np.sqrt(kappa) / (-1j * nu + kappa / 2.0)


def mechanical_response(nu, p: DetectorParams):
    nu = np.asarray(nu, dtype=float)
    denom = nu**2 - p.omega_m**2 + 1j * p.gamma * nu
    scale = nu**2 + p.omega_m**2
    if np.any(np.abs(denom) <= 1e-300 * np.maximum(scale, 1e-300)):
        raise PoleError(
            "mechanical resonance hit with zero damping; set gamma > 0 or "
            "exclude nu = +/- omega_m"
        )
    return -1.0 / (p.m * denom)


def cavity_phase_factor(nu, kappa: float):
    """The all-pass factor e^{i phi_c} = 1 - sqrt(kappa) chi_c."""
    nu = np.asarray(nu, dtype=float)
    return (-1j * nu - kappa / 2.0) / (-1j * nu + kappa / 2.0)


def response(nu, p: DetectorParams) -> ResponseSet:
    """Cavity response, mechanical susceptibility and cavity phase factor."""
    chi_c = cavity_response(nu, p.kappa)
    return ResponseSet(chi_c, mechanical_response(nu, p), cavity_phase_factor(nu, p.kappa))


def unwrapped_cavity_phase(nu, kappa: float):
    """Continuous branch of phi_c(nu), equal to pi at nu = 0."""
    return np.pi + 2.0 * np.arctan(2.0 * np.asarray(nu, dtype=float) / kappa)

