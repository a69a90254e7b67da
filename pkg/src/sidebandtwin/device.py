"""Optomechanical device parameters and the analytic sideband-rate formulas.

All stored rates are ordinary frequencies in Hz (the "/2pi" values). The
conversion to angular rates happens inside the formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants

from .errors import DomainError, EstimationError

PLANCK = constants.h
HBAR = constants.hbar
BOLTZMANN = constants.k
TWO_PI = 2.0 * math.pi


def _finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite input: {v!r}")


@dataclass(frozen=True)
class OpticalMode:
    resonance_frequency: float
    kappa_intrinsic: float
    kappa_external: float
    doublet_splitting: float = 0.0

    def __post_init__(self):
        _finite(self.resonance_frequency, self.kappa_intrinsic,
                self.kappa_external, self.doublet_splitting)
        if self.kappa_intrinsic <= 0 or self.kappa_external <= 0:
            raise DomainError("optical loss rates must be positive")
        if self.resonance_frequency <= 0:
            raise DomainError("resonance frequency must be positive")
        if self.doublet_splitting < 0:
            raise DomainError("doublet splitting must be >= 0")

    @property
    def kappa_total(self) -> float:
        return self.kappa_intrinsic + self.kappa_external

    @property
    def quality_factor(self) -> float:
        """Loaded optical Q."""
        return self.resonance_frequency / self.kappa_total


@dataclass(frozen=True)
class MechanicalMode:
    frequency: float
    damping: float

    def __post_init__(self):
        _finite(self.frequency, self.damping)
        if self.frequency <= 0 or self.damping <= 0:
            raise DomainError("mechanical frequency and damping must be positive")

    @property
    def quality_factor(self) -> float:
        return self.frequency / self.damping


@dataclass(frozen=True)
class DeviceModel:
    optical: OpticalMode
    mechanical: MechanicalMode
    g0: float

    def __post_init__(self):
        _finite(self.g0)
        if self.g0 <= 0:
            raise DomainError("g0 must be positive")

    @property
    def sideband_resolution(self) -> float:
        """Omega_m / kappa_tot."""
        return self.mechanical.frequency / self.optical.kappa_total


@dataclass(frozen=True)
class DetectorModel:
    efficiency_total: float
    dark_rate: float = 0.0
    pump_leak_rate: float = 0.0

    def __post_init__(self):
        _finite(self.efficiency_total, self.dark_rate, self.pump_leak_rate)
        if not 0.0 < self.efficiency_total <= 1.0:
            raise DomainError("efficiency_total must lie in (0, 1]")
        if self.dark_rate < 0 or self.pump_leak_rate < 0:
            raise DomainError("dark and leak rates must be >= 0")


def bose_einstein_occupancy(frequency: float, temperature: float) -> float:
    """Thermal occupancy 1/(exp(hf/kT) - 1); zero at T = 0."""
    _finite(frequency, temperature)
    if frequency <= 0:
        raise DomainError("frequency must be positive")
    if temperature < 0:
        raise DomainError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    x = PLANCK * frequency / (BOLTZMANN * temperature)
    if x > 700.0:
        # expm1 would overflow; 1/(e^x - 1) = e^-x to double precision here
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def modal_temperature(occupancy: float, frequency: float) -> float:
    """Temperature whose Bose-Einstein occupancy at `frequency` is `occupancy`."""
    _finite(occupancy, frequency)
    if occupancy <= 0:
        raise DomainError("occupancy must be positive")
    if frequency <= 0:
        raise DomainError("frequency must be positive")
    return PLANCK * frequency / (BOLTZMANN * math.log1p(1.0 / occupancy))


def intracavity_photon_number(power: float, detuning: float,
                              optical: OpticalMode,
                              laser_frequency: float) -> float:
    """Steady-state mean intracavity photon number for a detuned drive.

    n_a = kappa_e * (P / hbar w_L) / (Delta^2 + (kappa_tot/2)^2), angular units.
    """
    _finite(power, detuning, laser_frequency)
    if power < 0:
        raise DomainError("power must be >= 0")
    if laser_frequency <= 0:
        raise DomainError("laser frequency must be positive")
    photon_flux = power / (HBAR * TWO_PI * laser_frequency)
    kappa_e = TWO_PI * optical.kappa_external
    half_width = TWO_PI * optical.kappa_total / 2.0
    delta = TWO_PI * detuning
    return kappa_e * photon_flux / (delta ** 2 + half_width ** 2)


def scattering_prefactor(device: DeviceModel, efficiency: float) -> float:
    """eta * 4 kappa_e / kappa_tot^2 * g0^2 in counts/s per intracavity photon."""
    kappa_e = TWO_PI * device.optical.kappa_external
    kappa_tot = TWO_PI * device.optical.kappa_total
    g0 = TWO_PI * device.g0
    return efficiency * 4.0 * kappa_e / kappa_tot ** 2 * g0 ** 2


def sideband_rates(device: DeviceModel, n_a: float, n_b: float,
                   detector: DetectorModel,
                   filter_transmission: float = 1.0) -> tuple[float, float]:
    """Detected Stokes (blue drive) and anti-Stokes (red drive) rates.

    `filter_transmission` multiplies the detector efficiency; leave it at 1
    when `detector.efficiency_total` already includes the filters.
    """
    _finite(n_a, n_b, filter_transmission)
    if n_a < 0 or n_b < 0:
        raise DomainError("n_a and n_b must be >= 0")
    base = scattering_prefactor(
        device, detector.efficiency_total * filter_transmission) * n_a
    return base * (n_b + 1.0), base * n_b


def occupancy_from_rates(gamma_b: float, gamma_r: float) -> float:
    """Invert the sideband asymmetry: n_b = 1 / (gamma_b/gamma_r - 1)."""
    _finite(gamma_b, gamma_r)
    if gamma_r < 0:
        raise EstimationError("anti-Stokes rate must be >= 0")
    if gamma_r >= gamma_b:
        raise EstimationError(
            f"anti-Stokes rate {gamma_r!r} >= Stokes rate {gamma_b!r}")
    if gamma_r == 0:
        return 0.0
    # r/(b - r) is the same quantity and avoids cancellation in b/r - 1
    return gamma_r / (gamma_b - gamma_r)


def spd_rate(gamma_sideband: float, detector: DetectorModel) -> float:
    if gamma_sideband < 0:
        raise DomainError("sideband rate must be >= 0")
    return gamma_sideband + detector.dark_rate + detector.pump_leak_rate


def thermal_ground_probability(n_b: float) -> float:
    """Vacuum weight 1/(1 + n_b) of a thermal state."""
    if n_b < 0:
        raise DomainError("occupancy must be >= 0")
    return 1.0 / (1.0 + n_b)
