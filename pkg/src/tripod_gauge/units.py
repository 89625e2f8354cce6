"""Unit conversions and strontium-87 presets.

Internal units are microseconds, micrometres and radians with hbar = 1, so
every energy is an angular frequency in rad/us.  Conveniently 1 um/us equals
1 m/s, so velocities need no conversion factor.
"""

import math

from scipy import constants

SR87_MASS_U = 86.9088775
SR87_MASS_KG = SR87_MASS_U * constants.atomic_mass
INTERCOMBINATION_WAVELENGTH_UM = 0.689

TWO_PI = 2.0 * math.pi


def khz_to_rad_per_us(f_khz):
    """Angular frequency 2*pi*f for f given in kHz."""
    return TWO_PI * f_khz * 1e-3


def rad_per_us_to_khz(w):
    return w / TWO_PI * 1e3


def wavenumber(wavelength_um=INTERCOMBINATION_WAVELENGTH_UM):
    """k = 2*pi/lambda in rad/um."""
    return TWO_PI / wavelength_um


def recoil_frequency(k, mass_kg=SR87_MASS_KG):
    """omega_R = hbar k^2 / (2M) in rad/us, with k in rad/um."""
    k_si = k * 1e6
    return constants.hbar * k_si**2 / (2.0 * mass_kg) * 1e-6


def recoil_temperature_uK(omega_r, mass_kg=SR87_MASS_KG):
    """T_R = hbar omega_R / k_B in microkelvin."""
    return constants.hbar * omega_r * 1e6 / constants.k * 1e6


def thermal_velocity(temperature_uK, mass_kg=SR87_MASS_KG):
    """sqrt(k_B T / M) in um/us (numerically equal to m/s)."""
    if temperature_uK < 0:
        raise ValueError("temperature must be non-negative")
    return math.sqrt(constants.k * temperature_uK * 1e-6 / mass_kg)


def temperature_from_velocity(v_bar, mass_kg=SR87_MASS_KG):
    """Inverse of :func:`thermal_velocity`; returns microkelvin."""
    return mass_kg * v_bar**2 / constants.k * 1e6
