"""Fabry-Perot filter cascade in front of the photon counter."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .device import MechanicalMode
from .errors import DomainError, NumericalError


@dataclass(frozen=True)
class FabryPerotStage:
    fwhm: float
    fsr: float
    peak_transmission: float = 1.0

    def __post_init__(self):
        if not 0 < self.fwhm < self.fsr:
            raise DomainError("stage needs 0 < fwhm < fsr")
        if not 0 < self.peak_transmission <= 1:
            raise DomainError("peak transmission must lie in (0, 1]")

    @property
    def finesse(self) -> float:
        return self.fsr / self.fwhm


@dataclass(frozen=True)
class DriftLaw:
    """Step drift: full transmission inside `stable_window`, reduced after."""

    stable_window: float = 2.5
    post_window_transmission_factor: float = 0.85

    def __post_init__(self):
        if self.stable_window < 0:
            raise DomainError("stable window must be >= 0")
        if not 0 < self.post_window_transmission_factor <= 1:
            raise DomainError("drift factor must lie in (0, 1]")

    def factor(self, elapsed):
        elapsed = np.asarray(elapsed, dtype=float)
        if np.any(elapsed < 0):
            raise DomainError("elapsed time must be >= 0")
        out = np.where(elapsed <= self.stable_window, 1.0,
                       self.post_window_transmission_factor)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class FilterChain:
    stages: tuple[FabryPerotStage, ...]
    drift: DriftLaw = field(default_factory=DriftLaw)
    # linear transmission floor (e.g. 1e-8 for an 80 dB ceiling); None = ideal
    extinction_floor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise DomainError("filter chain needs at least one stage")
        if self.extinction_floor is not None and not 0 <= self.extinction_floor < 1:
            raise DomainError("extinction floor must lie in [0, 1)")

    @property
    def peak_transmission(self) -> float:
        return math.prod(s.peak_transmission for s in self.stages)


def stage_transmission(stage: FabryPerotStage, offset):
    """Airy transmission of one stage at frequency `offset` from its resonance."""
    coeff = (2.0 * stage.finesse / math.pi) ** 2
    s = np.sin(math.pi * np.asarray(offset, dtype=float) / stage.fsr)
    out = stage.peak_transmission / (1.0 + coeff * s * s)
    return out if out.ndim else float(out)


def chain_transmission(chain: FilterChain, offset, elapsed=0.0):
    t = np.ones_like(np.asarray(offset, dtype=float))
    for stage in chain.stages:
        t = t * stage_transmission(stage, offset)
    t = t * chain.drift.factor(elapsed)
    if chain.extinction_floor is not None:
        t = np.maximum(t, chain.extinction_floor)
    t = np.asarray(t)
    return t if t.ndim else float(t)


def extinction_db(chain: FilterChain, offset) -> float:
    """Suppression at `offset` relative to the on-resonance transmission, in dB."""
    on = chain_transmission(chain, 0.0)
    return 10.0 * math.log10(on / chain_transmission(chain, offset))


def _scattered_center(mech: MechanicalMode, probe_detuning: float,
                      branch: str | None) -> float:
    if branch is None:
        branch = "blue" if probe_detuning >= 0 else "red"
    if branch == "blue":
        return probe_detuning - mech.frequency
    if branch == "red":
        return probe_detuning + mech.frequency
    raise ValueError(f"unknown branch {branch!r}")


@functools.lru_cache(maxsize=4096)
def _overlap(chain: FilterChain, mech: MechanicalMode, center: float) -> float:
    half = mech.damping / 2.0
    widest = max(max(s.fwhm for s in chain.stages), mech.damping)
    window = max(0.5 * min(s.fsr for s in chain.stages), 200.0 * widest)
    lo = min(0.0, center) - window
    hi = max(0.0, center) + window

    def integrand(f):
        lor = (half / math.pi) / ((f - center) ** 2 + half * half)
        return chain_transmission(chain, f) * lor

    points = sorted({0.0, center})
    val, err = integrate.quad(integrand, lo, hi, points=points, limit=1000,
                              epsabs=0.0, epsrel=1e-10)
    if not math.isfinite(val) or (val > 0 and err / val > 1e-6):
        raise NumericalError(f"overlap quadrature did not converge (err={err:g})")
    return val


def sweep_response(chain: FilterChain, mech: MechanicalMode,
                   probe_detuning: float, branch: str | None = None) -> float:
    """Relative detected rate versus probe detuning from the optical resonance.

    Overlap of the filter passband (centred on the cavity) with the Lorentzian
    scattered line at probe_detuning -/+ Omega_m, normalised to one at the
    sideband condition probe_detuning = +/-Omega_m. The branch defaults to
    blue (Stokes) for non-negative detuning and red otherwise.
    """
    peak = _overlap(chain, mech, 0.0)
    return _overlap(chain, mech,
                    _scattered_center(mech, probe_detuning, branch)) / peak


def sweep_table(chain: FilterChain, mech: MechanicalMode, detunings) -> np.ndarray:
    """(detuning, response) rows, e.g. for a figure-data CSV."""
    detunings = np.asarray(detunings, dtype=float)
    resp = np.array([sweep_response(chain, mech, d) for d in detunings])
    return np.column_stack([detunings, resp])
