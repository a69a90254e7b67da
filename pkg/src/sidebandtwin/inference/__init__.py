"""Estimators and fitters for count records and spectra."""

from .lsq import (JACOBIAN_TOLERANCE, FitModel, SpectralFit, ill_conditioned,
                  jacobian_check, least_squares_fit)
from .occupancy import (METHODS, OccupancyEstimate, estimate_from_record,
                        estimate_occupancy)
from .power import (CONVENTIONS, POWER_LAW, PowerLawFit, extract_g0,
                    fit_power_law, fit_rate_slope)
from .spectra import (DOUBLET, MECHANICAL, SINGLET, doublet_reflection,
                      fit_lorentzian_doublet, fit_mechanical_spectrum,
                      mechanical_psd, singlet_reflection)

__all__ = [
    "CONVENTIONS", "DOUBLET", "METHODS", "JACOBIAN_TOLERANCE", "MECHANICAL", "POWER_LAW",
    "SINGLET", "FitModel", "OccupancyEstimate", "PowerLawFit", "SpectralFit",
    "doublet_reflection", "estimate_from_record", "estimate_occupancy",
    "extract_g0", "fit_lorentzian_doublet", "fit_mechanical_spectrum",
    "fit_power_law", "fit_rate_slope", "ill_conditioned", "jacobian_check",
    "least_squares_fit", "mechanical_psd", "singlet_reflection",
]
