"""Power-law and linear-slope fits, and g0 extraction from a rate slope."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..device import TWO_PI, DetectorModel, DeviceModel
from ..errors import DomainError, FitError
from .lsq import FitModel, covariance_from_jacobian

CONVENTIONS = ("sum", "mean", "single-sideband")


@dataclass(frozen=True)
class PowerLawFit:
    amplitude: float
    exponent: float
    amplitude_err: float
    exponent_err: float
    covariance: np.ndarray   # of (ln amplitude, exponent)
    chi2: float
    dof: int

    def __iter__(self):
        yield self.amplitude
        yield self.exponent
        yield (self.amplitude_err, self.exponent_err)

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "exponent": self.exponent,
                "amplitude_err": self.amplitude_err, "exponent_err": self.exponent_err,
                "covariance_log": self.covariance.tolist(), "chi2": self.chi2,
                "dof": self.dof}


def _loglin(x, p):
    return p[0] + p[1] * x


def _loglin_jac(x, p):
    return np.column_stack([np.ones_like(x), x])


# abscissa is ln(power); parameters are (ln amplitude, exponent)
POWER_LAW = FitModel(
    "power-law", ("ln_amplitude", "exponent"), _loglin, _loglin_jac,
    lambda p: 1e-4 * np.maximum(np.abs(p), 1.0),
    lambda p: np.log(np.logspace(-9, -5, 50)))


def fit_power_law(powers, rates, uncertainties=None) -> PowerLawFit:
    """Weighted least squares of ln(rate) = ln(amplitude) + exponent * ln(power).

    With `uncertainties` (absolute, on the rates) the covariance is absolute;
    otherwise it is scaled by the residual variance.
    """
    p = np.asarray(powers, dtype=float)
    y = np.asarray(rates, dtype=float)
    if p.size < 3 or p.size != y.size:
        raise FitError("need at least 3 (power, rate) pairs")
    if np.any(p <= 0) or np.any(y <= 0):
        raise FitError("powers and rates must be positive")
    lp = np.log(p)
    if np.ptp(lp) == 0:
        raise FitError("all powers are equal; exponent is undetermined")
    sig = None if uncertainties is None else np.asarray(uncertainties, dtype=float) / y
    w = np.ones_like(y) if sig is None else 1.0 / sig
    design = _loglin_jac(lp, None) * w[:, None]
    coef, *_ = np.linalg.lstsq(design, np.log(y) * w, rcond=None)
    resid = (np.log(y) - _loglin(lp, coef)) * w
    chi2 = float(resid @ resid)
    dof = y.size - 2
    scale = 1.0 if sig is not None else (chi2 / dof if dof > 0 else 0.0)
    cov = covariance_from_jacobian(design, scale)
    amp = math.exp(coef[0])
    return PowerLawFit(amp, float(coef[1]), amp * math.sqrt(cov[0, 0]),
                       math.sqrt(cov[1, 1]), cov, chi2, dof)


def fit_rate_slope(n_a, rates, uncertainties=None) -> tuple[float, float]:
    """Slope of rate = slope * n_a (line through the origin) and its 1-sigma error.

    Several datasets are fitted jointly by concatenating them.
    """
    x = np.asarray(n_a, dtype=float).ravel()
    y = np.asarray(rates, dtype=float).ravel()
    if x.size < 1 or x.size != y.size or not np.any(x != 0):
        raise FitError("need at least one point with non-zero n_a")
    w = np.ones_like(y) if uncertainties is None else \
        1.0 / np.asarray(uncertainties, dtype=float).ravel() ** 2
    sxx = float(np.sum(w * x * x))
    slope = float(np.sum(w * x * y)) / sxx
    if uncertainties is None:
        dof = max(x.size - 1, 1)
        s2 = float(np.sum((y - slope * x) ** 2)) / dof
        return slope, math.sqrt(s2 / sxx)
    return slope, math.sqrt(1.0 / sxx)


def sideband_factor(n_b: float, convention: str) -> float:
    if convention == "sum":
        return 2.0 * n_b + 1.0
    if convention == "mean":
        return n_b + 0.5
    if convention == "single-sideband":
        return n_b + 1.0
    raise ValueError(f"convention must be one of {CONVENTIONS}")


def extract_g0(slope: float, device: DeviceModel, detector: DetectorModel,
               n_b_thermal: float, convention: str = "sum",
               slope_err: float = 0.0,
               filter_transmission: float = 1.0) -> tuple[float, float]:
    """g0 (as g0/2pi, Hz) from the slope of detected rate versus n_a.

    `convention` says what the rate is: the Stokes + anti-Stokes sum, their
    mean, or the Stokes rate alone ("single-sideband").
    """
    if not slope > 0:
        raise DomainError("slope must be positive")
    if n_b_thermal < 0:
        raise DomainError("thermal occupancy must be >= 0")
    eta = detector.efficiency_total * filter_transmission
    kappa_e = TWO_PI * device.optical.kappa_external
    kappa_tot = TWO_PI * device.optical.kappa_total
    g0_sq = slope / (eta * 4.0 * kappa_e / kappa_tot ** 2
                     * sideband_factor(n_b_thermal, convention))
    g0 = math.sqrt(g0_sq) / TWO_PI
    return g0, 0.5 * g0 * slope_err / slope
