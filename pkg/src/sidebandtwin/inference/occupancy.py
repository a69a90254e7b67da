"""Phonon occupancy from Stokes / anti-Stokes counts.

The count model is two independent Poisson variables with a known dark rate:

    blue ~ Poisson(T_b * ((n + 1) * A + dark))
    red  ~ Poisson(T_r * (n * A + dark))

with A >= 0 the common scattering rate per unit occupancy factor. The point
estimate is the maximum-likelihood value, which in the interior coincides
with dark subtraction followed by the rate-ratio inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .. import rng
from ..errors import DomainError

METHODS = ("profile-likelihood", "bootstrap", "subtraction")


@dataclass(frozen=True)
class OccupancyEstimate:
    n_b: float
    ci_low: float
    ci_high: float
    confidence: float
    method: str
    clipped: bool = False      # estimate pinned at the n_b = 0 boundary
    unbounded: bool = False    # red >= blue after subtraction, n_b -> infinity

    @property
    def boundary(self) -> bool:
        return self.clipped or self.unbounded

    def to_dict(self) -> dict:
        return {"n_b": self.n_b, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "confidence": self.confidence, "method": self.method,
                "clipped": self.clipped, "unbounded": self.unbounded}


def _profile_scale(n, b, tb, r, tr, dark):
    """Scattering rate A maximizing the likelihood at fixed occupancy n."""
    alpha, beta = n + 1.0, n
    s = tb * alpha + tr * beta
    if dark == 0:
        return (b + r) / s
    a2 = s * alpha * beta
    a1 = s * (alpha + beta) * dark - (b + r) * alpha * beta
    a0 = s * dark * dark - dark * (b * alpha + r * beta)
    if a0 >= 0:
        # the score is decreasing in A and already non-positive at A = 0
        return 0.0
    if a2 == 0:
        return max(-a0 / a1, 0.0)
    disc = math.sqrt(max(a1 * a1 - 4.0 * a2 * a0, 0.0))
    # larger root, written to avoid cancellation
    root = (-a1 + disc) / (2 * a2) if a1 <= 0 else (-2 * a0) / (a1 + disc)
    return max(root, 0.0)


def _deviance(counts, means):
    counts = np.asarray(counts, dtype=float)
    means = np.asarray(means, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = special.xlogy(counts, counts) - special.xlogy(counts, means) - (counts - means)
    return 2.0 * float(np.sum(term))


def _profile_deviance(n, b, tb, r, tr, dark):
    a = _profile_scale(n, b, tb, r, tr, dark)
    return _deviance([b, r], [tb * ((n + 1) * a + dark), tr * (n * a + dark)])


def _limit_deviance(b, tb, r, tr, dark):
    """Deviance of the n -> infinity limit (equal blue and red rates)."""
    c = max((b + r) / (tb + tr) - dark, 0.0)
    return _deviance([b, r], [tb * (c + dark), tr * (c + dark)])


def _point(b, tb, r, tr, dark):
    """(n_hat, clipped, unbounded) from dark-subtracted rates."""
    blue = b / tb - dark
    red = r / tr - dark
    if red <= 0:
        return 0.0, True, False
    if blue <= red:
        return math.inf, False, True
    return red / (blue - red), False, False


def _check(blue, red, dark_rate, confidence):
    (b, tb), (r, tr) = blue, red
    if not (tb > 0 and tr > 0):
        raise DomainError("exposures must be positive")
    if b < 0 or r < 0:
        raise DomainError("counts must be >= 0")
    if dark_rate < 0:
        raise DomainError("dark rate must be >= 0")
    if not 0 < confidence < 1:
        raise DomainError("confidence must lie in (0, 1)")
    return float(b), float(tb), float(r), float(tr)


def profile_interval(b, tb, r, tr, dark, confidence):
    n_hat, clipped, unbounded = _point(b, tb, r, tr, dark)
    crit = stats.chi2.ppf(confidence, 1)
    if unbounded:
        d_min = _limit_deviance(b, tb, r, tr, dark)
    else:
        d_min = _profile_deviance(n_hat, b, tb, r, tr, dark)

    def excess(n):
        return _profile_deviance(n, b, tb, r, tr, dark) - d_min - crit

    if unbounded:
        # sup of the likelihood sits at infinity; search downwards for the lower end
        hi = 1.0
        while excess(hi) > 0 and hi < 1e15:
            hi *= 2.0
        if excess(0.0) <= 0:
            return 0.0, math.inf
        return optimize.brentq(excess, 0.0, hi, xtol=1e-12, rtol=1e-12), math.inf

    low = 0.0 if excess(0.0) <= 0 else optimize.brentq(
        excess, 0.0, n_hat, xtol=1e-14, rtol=1e-12)
    if _limit_deviance(b, tb, r, tr, dark) - d_min - crit <= 0:
        return low, math.inf
    hi = max(2.0 * n_hat, 1.0)
    while excess(hi) <= 0:
        hi *= 2.0
        if hi > 1e15:
            return low, math.inf
    high = optimize.brentq(excess, n_hat, hi, xtol=1e-14, rtol=1e-12)
    return low, high


def _vector_point(b, tb, r, tr, dark):
    blue = b / tb - dark
    red = r / tr - dark
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.where(red <= 0, 0.0, np.where(blue > red, red / (blue - red), np.inf))
    return n


def bootstrap_interval(b, tb, r, tr, dark, confidence, n_resamples=2000, seed=0):
    """Parametric bootstrap percentile interval from the fitted Poisson means."""
    n_hat, clipped, unbounded = _point(b, tb, r, tr, dark)
    if unbounded:
        a = 0.0
        mu_b = b
        mu_r = r
    else:
        a = _profile_scale(n_hat, b, tb, r, tr, dark)
        mu_b = tb * ((n_hat + 1) * a + dark)
        mu_r = tr * (n_hat * a + dark)
    gen = rng.stream(seed, 0x0B00)
    bs = gen.poisson(mu_b, n_resamples)
    rs = gen.poisson(mu_r, n_resamples)
    draws = np.sort(_vector_point(bs, tb, rs, tr, dark))
    tail = (1.0 - confidence) / 2.0
    lo = draws[int(math.floor(tail * n_resamples))]
    hi = draws[min(int(math.ceil((1.0 - tail) * n_resamples)) - 1, n_resamples - 1)]
    return float(lo), float(hi)


def subtraction_interval(b, tb, r, tr, dark, confidence):
    """Delta-method interval around the dark-subtracted ratio estimate."""
    n_hat, _, unbounded = _point(b, tb, r, tr, dark)
    if unbounded:
        return 0.0, math.inf
    blue = b / tb - dark
    red = max(r / tr - dark, 0.0)
    diff = blue - red
    if diff <= 0:
        # nothing above the dark level on either channel
        return 0.0, math.inf
    var = (blue ** 2 * (r / tr ** 2) + red ** 2 * (b / tb ** 2)) / diff ** 4
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    half = z * math.sqrt(var)
    return max(n_hat - half, 0.0), n_hat + half


def estimate_occupancy(blue, red, dark_rate: float, confidence: float = 0.95,
                       method: str = "profile-likelihood",
                       n_resamples: int = 2000, seed: int = 0) -> OccupancyEstimate:
    """Mean phonon occupancy and confidence interval from sideband counts.

    `blue` and `red` are (counts, exposure_s) pairs. Estimates below zero are
    clipped to 0 and flagged; red >= blue after dark subtraction returns an
    unbounded estimate (n_b = inf) rather than raising.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    b, tb, r, tr = _check(blue, red, dark_rate, confidence)
    n_hat, clipped, unbounded = _point(b, tb, r, tr, dark_rate)
    if method == "profile-likelihood":
        lo, hi = profile_interval(b, tb, r, tr, dark_rate, confidence)
    elif method == "bootstrap":
        lo, hi = bootstrap_interval(b, tb, r, tr, dark_rate, confidence, n_resamples, seed)
    else:
        lo, hi = subtraction_interval(b, tb, r, tr, dark_rate, confidence)
    lo = min(lo, n_hat)
    hi = max(hi, n_hat)
    return OccupancyEstimate(n_hat, lo, hi, confidence, method, clipped, unbounded)


def estimate_from_record(record, dark_rate: float, confidence: float = 0.95,
                         blue_label: str = "blue", red_label: str = "red",
                         **kwargs) -> OccupancyEstimate:
    return estimate_occupancy(record.totals(blue_label), record.totals(red_label),
                              dark_rate, confidence, **kwargs)
