"""Lorentzian line-shape fits: optical doublet and mechanical spectrum."""

from __future__ import annotations

import numpy as np
from scipy import ndimage, signal

from ..errors import FitError
from .lsq import FitModel, SpectralFit, least_squares_fit

# --- optical reflection doublet ----------------------------------------------


def _lor(x, width):
    return 1.0 / (1.0 + (2.0 * x / width) ** 2)


def _dlor_dx(x, width):
    return -8.0 * x / width ** 2 * _lor(x, width) ** 2


def _dlor_dw(x, width):
    return 8.0 * x ** 2 / width ** 3 * _lor(x, width) ** 2


def _depth(ki, ke):
    kt = ki + ke
    return 4.0 * ki * ke / kt ** 2


def doublet_reflection(f, p):
    """Baseline times (1 - D*(L1 + L2)): two dips of full width kappa_i + kappa_e.

    Each dip has the critical-coupling depth D = 4 kappa_i kappa_e / kappa_tot^2,
    centred at center -/+ splitting/2.
    """
    c, s, ki, ke, base = p
    kt = ki + ke
    x1 = f - c + s / 2.0
    x2 = f - c - s / 2.0
    return base * (1.0 - _depth(ki, ke) * (_lor(x1, kt) + _lor(x2, kt)))


def _doublet_jac(f, p):
    c, s, ki, ke, base = p
    kt = ki + ke
    x1 = f - c + s / 2.0
    x2 = f - c - s / 2.0
    d = _depth(ki, ke)
    l1, l2 = _lor(x1, kt), _lor(x2, kt)
    d1, d2 = _dlor_dx(x1, kt), _dlor_dx(x2, kt)
    w_sum = _dlor_dw(x1, kt) + _dlor_dw(x2, kt)
    dd_ki = 4.0 * ke * (ke - ki) / kt ** 3
    dd_ke = 4.0 * ki * (ki - ke) / kt ** 3
    return np.column_stack([
        base * d * (d1 + d2),
        -base * d * (d1 - d2) / 2.0,
        -base * (dd_ki * (l1 + l2) + d * w_sum),
        -base * (dd_ke * (l1 + l2) + d * w_sum),
        1.0 - d * (l1 + l2),
    ])


def _doublet_steps(p):
    kt = abs(p[2]) + abs(p[3])
    return np.array([1e-4 * kt, 1e-4 * kt, 1e-6 * abs(p[2]), 1e-6 * abs(p[3]),
                     1e-6 * max(abs(p[4]), 1e-12)])


def _doublet_grid(p):
    kt = p[2] + p[3]
    half = abs(p[1]) / 2.0 + 5.0 * kt
    return np.linspace(p[0] - half, p[0] + half, 401)


DOUBLET = FitModel("doublet", ("center", "splitting", "kappa_i", "kappa_e", "baseline"),
                   doublet_reflection, _doublet_jac, _doublet_steps, _doublet_grid)


def singlet_reflection(f, p):
    c, ki, ke, base = p
    return base * (1.0 - _depth(ki, ke) * _lor(f - c, ki + ke))


def _singlet_jac(f, p):
    c, ki, ke, base = p
    x = f - c
    kt = ki + ke
    d = _depth(ki, ke)
    lo = _lor(x, kt)
    return np.column_stack([
        base * d * _dlor_dx(x, kt),
        -base * (4.0 * ke * (ke - ki) / kt ** 3 * lo + d * _dlor_dw(x, kt)),
        -base * (4.0 * ki * (ki - ke) / kt ** 3 * lo + d * _dlor_dw(x, kt)),
        1.0 - d * lo,
    ])


SINGLET = FitModel("singlet", ("center", "kappa_i", "kappa_e", "baseline"),
                   singlet_reflection, _singlet_jac,
                   lambda p: _doublet_steps(np.array([p[0], 0.0, p[1], p[2], p[3]]))[[0, 2, 3, 4]],
                   lambda p: _doublet_grid(np.array([p[0], 0.0, p[1], p[2], p[3]])))


def _as_spectrum(spectrum):
    arr = np.asarray(spectrum, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise FitError("spectrum must be rows of (frequency, value[, uncertainty])")
    f, y = arr[:, 0], arr[:, 1]
    sigma = arr[:, 2] if arr.shape[1] == 3 else None
    if not np.all(np.diff(f) > 0):
        raise FitError("frequency axis must be strictly increasing")
    return f, y, sigma


def _smooth(y):
    size = max(1, (y.size // 100) | 1)
    return ndimage.uniform_filter1d(y, size=size, mode="nearest")


def _couplings_from_dip(depth, width):
    """Undercoupled (kappa_i >= kappa_e) split of a dip of given depth and width."""
    depth = min(max(depth, 1e-6), 0.999)
    root = np.sqrt(1.0 - depth)
    return width * (1 + root) / 2.0, width * (1 - root) / 2.0


def _init_dips(f, y):
    """Locate reflection dips on a smoothed copy; returns (centers, widths, depths, baseline)."""
    ys = _smooth(y)
    base = float(np.percentile(ys, 95))
    dip = base - ys
    span = float(dip.max())
    if span <= 0:
        return [], [], [], base
    peaks, props = signal.find_peaks(dip, prominence=0.2 * span)
    if peaks.size == 0:
        return [], [], [], base
    order = np.argsort(props["prominences"])[::-1][:2]
    peaks = np.sort(peaks[order])
    widths = signal.peak_widths(dip, peaks, rel_height=0.5)[0]
    df = np.mean(np.diff(f))
    return (list(f[peaks]), list(widths * df), list(dip[peaks] / base), base)


def fit_lorentzian_doublet(spectrum, p0=None) -> SpectralFit:
    """Fit a reflection spectrum with two Lorentzian dips.

    Initial values come from peak detection on a smoothed copy unless `p0`
    (center, splitting, kappa_i, kappa_e, baseline) is given. When only one
    dip is found the single-mode model is fitted instead and the result is
    flagged ``single-mode-fallback``.
    """
    f, y, sigma = _as_spectrum(spectrum)
    if y.size < 2 * len(DOUBLET.param_names):
        raise FitError("too few points for a doublet fit")
    flags = []
    if p0 is None:
        centers, widths, depths, base = _init_dips(f, y)
        if not centers:
            raise FitError("no reflection dip found")
        if len(centers) == 2:
            ki, ke = _couplings_from_dip(max(depths), float(np.mean(widths)))
            p0 = [0.5 * (centers[0] + centers[1]), centers[1] - centers[0], ki, ke, base]
        else:
            ki, ke = _couplings_from_dip(depths[0], widths[0])
            p0 = [centers[0], 0.0, ki, ke, base]
    p0 = np.asarray(p0, dtype=float)

    if p0[1] <= 0:
        flags.append("single-mode-fallback")
        fit = least_squares_fit(SINGLET, f, y, [p0[0], p0[2], p0[3], p0[4]], sigma)
        c, ki, ke, base = fit.values
        cov = np.zeros((5, 5))
        keep = [0, 2, 3, 4]
        cov[np.ix_(keep, keep)] = fit.covariance
        fit = SpectralFit("doublet", DOUBLET.param_names,
                          np.array([c, 0.0, ki, ke, base]), cov,
                          fit.chi2, fit.dof, fit.nfev)
    else:
        fit = least_squares_fit(DOUBLET, f, y, p0, sigma)
        if fit.values[1] < 0:
            fit.values[1] = -fit.values[1]
    fit.flags.extend(flags)
    c, s, ki, ke, base = fit.values
    if ke > ki:
        fit.flags.append("overcoupled-branch")
    kt = ki + ke
    fit.derived["kappa_total"] = (kt, fit.propagate([0, 0, 1, 1, 0]))
    fit.derived["quality_factor"] = (
        c / kt, fit.propagate([1 / kt, 0, -c / kt ** 2, -c / kt ** 2, 0]))
    fit.derived["dip_depth"] = (_depth(ki, ke), fit.propagate(
        [0, 0, 4 * ke * (ke - ki) / kt ** 3, 4 * ki * (ki - ke) / kt ** 3, 0]))
    return fit


# --- mechanical spectrum ------------------------------------------------------


def mechanical_psd(f, p):
    """Lorentzian line of FWHM `damping` on a flat background."""
    f0, gamma, amp, bg = p
    return amp * _lor(f - f0, gamma) + bg


def _mech_jac(f, p):
    f0, gamma, amp, bg = p
    x = f - f0
    return np.column_stack([
        -amp * _dlor_dx(x, gamma),
        amp * _dlor_dw(x, gamma),
        _lor(x, gamma),
        np.ones_like(f),
    ])


def _mech_steps(p):
    f0, gamma, amp, bg = p
    return np.array([1e-6 * abs(f0), 1e-6 * abs(gamma), 1e-6 * max(abs(amp), 1e-300),
                     1e-6 * max(abs(bg), abs(amp), 1e-300)])


def _mech_grid(p):
    return np.linspace(p[0] - 10 * p[1], p[0] + 10 * p[1], 401)


MECHANICAL = FitModel("mechanical", ("frequency", "damping", "amplitude", "background"),
                      mechanical_psd, _mech_jac, _mech_steps, _mech_grid)


def fit_mechanical_spectrum(spectrum, p0=None) -> SpectralFit:
    """Lorentzian-plus-background fit; adds the derived mechanical Q."""
    f, y, sigma = _as_spectrum(spectrum)
    if y.size < 2 * len(MECHANICAL.param_names):
        raise FitError("too few points for a mechanical fit")
    if p0 is None:
        ys = _smooth(y)
        bg = float(np.percentile(ys, 10))
        k = int(np.argmax(ys))
        amp = float(ys[k] - bg)
        resid = np.diff(y)
        noise = 1.4826 * np.median(np.abs(resid - np.median(resid))) / np.sqrt(2.0)
        if not amp > 0 or amp <= 5.0 * noise:
            raise FitError("no mechanical line found")
        width = signal.peak_widths(ys - bg, [k], rel_height=0.5)[0][0]
        gamma = max(width * float(np.mean(np.diff(f))), float(np.mean(np.diff(f))))
        p0 = [f[k], gamma, amp, bg]
    fit = least_squares_fit(MECHANICAL, f, y, p0, sigma)
    f0, gamma, amp, bg = fit.values
    fit.values[1] = abs(gamma)
    gamma = abs(gamma)
    fit.derived["quality_factor"] = (
        f0 / gamma, fit.propagate([1 / gamma, -f0 / gamma ** 2, 0, 0]))
    return fit
