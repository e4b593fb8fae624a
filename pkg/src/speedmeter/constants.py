"""Physical constants (CODATA 2018, SI) and unit conversions.

Every rate in this package (kappa, gamma, omega_m, detunings, analysis
frequencies) is an angular frequency in rad/s.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34  # J s
    k_B: float = 1.380649e-23  # J/K
    G_N: float = 6.67430e-11  # m^3 kg^-1 s^-2
    c: float = 299792458.0  # m/s
    e: float = 1.602176634e-19  # C (J per eV)


CONSTANTS = PhysicalConstants()

HBAR = CONSTANTS.hbar
K_B = CONSTANTS.k_B
G_N = CONSTANTS.G_N
C_LIGHT = CONSTANTS.c
E_CHARGE = CONSTANTS.e


@dataclass(frozen=True)
class UnitConversion:
    kev_per_c_to_si: float = 1000.0 * E_CHARGE / C_LIGHT  # (kg m/s) per (keV/c)
    hz_to_angular: float = 2.0 * math.pi


UNITS = UnitConversion()


def convert_momentum(value):
    """Convert a momentum in keV/c to kg m/s."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("momentum must be finite")
    if np.any(arr < 0):
        raise ValueError("momentum must be non-negative")
    out = arr * UNITS.kev_per_c_to_si
    return float(out) if out.ndim == 0 else out


def hz_to_rad_s(value):
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return np.multiply(value, UNITS.hz_to_angular)
