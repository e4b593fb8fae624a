"""Quantum force-noise spectra, matched filtering and SNR for optomechanical impulse sensors.

Velocity (back-action-evading, double ring cavity) and position (single-sided
cavity) readouts, with a time-domain Langevin oracle for validation.
"""

from .constants import CONSTANTS, UNITS, convert_momentum, hz_to_rad_s
from .filtering import (
    FULL_BAND,
    Band,
    SnrReport,
    box_filter,
    box_impulse_variance,
    default_band,
    matched_filter,
    snr_gas,
    snr_generic,
    snr_longrange,
    snr_optimal,
)
from .noise import (
    NoisePsdBreakdown,
    PositionNoise,
    VelocityNoise,
    g_opt_position,
    g_opt_velocity,
    position_psd,
    spike_frequencies,
    velocity_psd,
    velocity_psd_approx,
)
from .response import REFERENCE, DetectorParams, PoleError, cavity_response, mechanical_response
from .signals import FlybySignal, ImpulseSignal

__version__ = "0.1.0"
